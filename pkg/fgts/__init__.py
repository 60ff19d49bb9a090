"""Feel-Good Thompson Sampling simulation library."""

__version__ = "0.1.0"
