"""Community analysis of ownership networks."""

__version__ = "0.1.0"
