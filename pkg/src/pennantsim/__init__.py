"""Bayesian game-outcome modeling and Monte Carlo season forecasting."""

__version__ = "0.1.0"
