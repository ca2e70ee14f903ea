"""Barrier-based prediction-correction tracking of CBF quadratic programs."""

__version__ = "0.1.0"
