"""qmask - state-dependent quantum channel masking toolkit."""

__version__ = "0.1.0"
