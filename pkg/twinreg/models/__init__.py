"""Pydantic models for penalties, problems, fits, tuning and simulation."""
