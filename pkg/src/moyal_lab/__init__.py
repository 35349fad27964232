"""Phase-space quantum dynamics: Moyal algebra, Gaussian states and exact flows."""

__version__ = "0.1.0"
