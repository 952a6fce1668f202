"""Text-to-pose generation with a triplet metric loss, and pose-to-text
back-translation evaluation."""
__version__ = "0.1.0"
