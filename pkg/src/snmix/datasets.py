"""Bundled example data."""

from __future__ import annotations

from importlib import resources

import numpy as np

__all__ = ["faithful_eruptions"]


def faithful_eruptions() -> np.ndarray:
    """Old Faithful eruption lengths in minutes (272 observations)."""
    text = (resources.files("snmix") / "data" / "faithful_eruptions.csv").read_text()
    lines = text.strip().splitlines()[1:]
    return np.array([float(v) for v in lines])
