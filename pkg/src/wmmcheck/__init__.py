"""Weak-memory verification and barrier optimization for spinlocks."""

__version__ = "0.1.0"
