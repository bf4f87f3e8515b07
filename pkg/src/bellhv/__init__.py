"""Deterministic hidden-variables models of the two-wing Bell experiment,
in and out of quantum equilibrium."""
__version__ = "0.1.0"
