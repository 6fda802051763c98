"""
TWIN penalized regression

Sparse linear regression with the two-mountains (TWIN) penalty family,
its comparators, tuning rules and a simulation benchmark harness.
"""

__version__ = "0.1.0"
