"""Spectral diffusion of NV centers in diamond nanopillars: analysis and simulation."""

from __future__ import annotations

__version__ = "0.1.0"
