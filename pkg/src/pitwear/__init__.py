"""Visual pitting wear quantification for ball screw drive spindles."""

__version__ = "0.1.0"
