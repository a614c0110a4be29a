"""Attribution methods and faithfulness metrics for a small text classifier."""

__version__ = "0.1.0"
