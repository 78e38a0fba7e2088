"""Mild solutions of Hilfer fractional evolution equations with nonlocal data."""

from __future__ import annotations

__version__ = "0.1.0"
