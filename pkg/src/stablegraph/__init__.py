"""Simulation of critical configuration graphs with heavy-tailed degrees and
their stable continuum limits."""

__version__ = "0.1.0"
