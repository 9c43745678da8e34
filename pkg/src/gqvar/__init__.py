"""Quadratic-variation laboratory for fractional Gaussian processes."""
