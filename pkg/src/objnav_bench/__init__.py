"""Frontier-geometry ObjectGoal navigation bench on procedurally generated grid worlds."""

__version__ = "0.1.0"
