"""Hybrid bagging/GP-Boost ensembles for two-class imbalanced data."""

__version__ = "0.1.0"
