"""Finite-strain ropes and membranes with tangential differential calculus."""

__version__ = "0.1.0"
