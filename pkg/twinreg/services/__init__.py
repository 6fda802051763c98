"""Penalty evaluation, solvers, tuning, simulation and metrics."""
