"""Traffic-signal attack simulation and detection from detector statistics."""

__version__ = "0.1.0"
