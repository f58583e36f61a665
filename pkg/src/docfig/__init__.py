"""docfig: figure-label induction, scanned-appearance augmentation, and
detection evaluation for document page images."""

__version__ = "0.1.0"
