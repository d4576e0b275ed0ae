"""Form bounds, positive solutions and regularity diagnostics for -div(A grad u) = sigma u."""

__version__ = "0.1.0"
