"""Equivalence verification of ReLU networks by two-network geometric path enumeration."""

__version__ = "0.1.0"
