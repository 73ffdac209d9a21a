"""Kernel logistic regression on a multilevel circulant matrix engine."""

__version__ = "0.1.0"
