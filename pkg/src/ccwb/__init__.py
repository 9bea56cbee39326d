"""ccwb - calling-convention workbench for irregular 8-bit architectures."""

__version__ = "0.1.0"
