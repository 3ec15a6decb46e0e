"""Wright-Fisher Indian buffet process: dynamic feature allocation models."""

__version__ = "0.1.0"
