"""lesionrank: lesion-wise segmentation metrics and challenge ranking."""

__version__ = "0.1.0"
