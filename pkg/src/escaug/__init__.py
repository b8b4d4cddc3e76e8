"""Environmental-sound augmentation toolkit."""

__version__ = "0.1.0"
