"""Symbolic-numeric checks for left-invariant hypoelliptic operators on Lie groups over R^n."""
from __future__ import annotations

__version__ = "0.1.0"
