"""Distance probes over stored contextual embeddings, with UUAS evaluation
and SVG tree diagnostics."""

__version__ = "0.1.0"
