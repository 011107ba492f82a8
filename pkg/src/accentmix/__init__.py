"""Dataset preparation and scoring toolkit for accent-robust speech recognition."""

__version__ = "0.1.0"
