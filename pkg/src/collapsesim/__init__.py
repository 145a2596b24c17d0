"""Simulation and closed-form calculators for dynamical wave-function collapse models."""

__version__ = "0.1.0"
