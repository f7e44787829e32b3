"""Multi-label late fusion of per-modality classifiers."""

__version__ = "0.1.0"
