"""Closed-loop simulation of recommenders and users with shifting preferences."""

__version__ = "0.1.0"
