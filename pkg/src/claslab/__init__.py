"""claslab: cross-lingual activation steering on a desk-scale SwiGLU transformer."""

__version__ = "0.1.0"
