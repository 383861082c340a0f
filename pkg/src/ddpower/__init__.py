"""Power allocation for distributed detection over virtual MIMO channels."""

__version__ = "0.1.0"
