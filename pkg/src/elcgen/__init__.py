"""Emergency lane-change risky-scenario generation toolkit."""

__version__ = "0.1.0"
