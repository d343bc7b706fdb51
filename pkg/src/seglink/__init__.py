"""Semi-global line segment extraction."""
__version__ = "0.1.0"
