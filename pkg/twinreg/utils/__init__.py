"""Compiled kernels and file helpers."""
