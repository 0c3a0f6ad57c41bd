"""Numerics for quasi-stationary Brownian motion with negative drift killed at 0."""

__version__ = "0.1.0"
