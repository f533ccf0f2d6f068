"""Shape-space dimension reduction and Bayesian optimization in eigenshape coordinates."""

__version__ = "0.1.0"
