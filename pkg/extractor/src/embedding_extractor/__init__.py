"""Per-layer word embedding extraction into the probe container format."""

__version__ = "0.1.0"
