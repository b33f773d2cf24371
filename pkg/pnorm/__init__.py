"""pnorm package: p-operator norms and C*-likeness checks for row-column modules."""

__all__ = ["__version__"]

__version__ = "0.1.0"
