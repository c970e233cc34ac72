"""Python bindings for the oscl oscillation-source localisation core."""

from __future__ import annotations

import json
from typing import Any, Optional, Sequence

import numpy as np

from . import _core
from ._core import ConditioningError, NoDominantModeError, OsclError, run_cli

__version__ = _core.__version__

__all__ = [
    "ConditioningError",
    "NoDominantModeError",
    "OsclError",
    "analyze",
    "default_options",
    "dominant_frequency",
    "edmd",
    "filter_sections",
    "run_cli",
    "synth",
    "zero_phase_filter",
]


def default_options() -> dict[str, Any]:
    """Every analysis option with its default value."""
    return json.loads(_core.default_options_json())


def analyze(csv_path: str, **options: Any) -> dict[str, Any]:
    """Run the full pipeline on a wide-CSV event file and return the report.

    Keyword arguments use the keys of ``default_options()``, e.g.
    ``window=(60, 110)``, ``rank=7`` or ``baselines={"def": True, "qv": True}``.
    """
    merged = default_options()
    unknown = set(options) - set(merged)
    if unknown:
        raise TypeError(f"unknown analysis options: {sorted(unknown)}")
    merged.update(options)
    return json.loads(_core.analyze_json(str(csv_path), json.dumps(merged)))


def synth(out_csv: str, **scenario: Any) -> dict[str, Any]:
    """Write a synthetic event to ``out_csv`` and return its ground truth."""
    return json.loads(_core.synth_json(str(out_csv), json.dumps(scenario)))


def dominant_frequency(signals: np.ndarray, sample_rate: float,
                       band: tuple[float, float] = (0.05, 1.0)) -> dict[str, float]:
    """Spectral peak of the channel-averaged periodogram (rows are channels)."""
    arr = np.atleast_2d(np.asarray(signals, dtype=float))
    return _core.dominant_frequency(arr, float(sample_rate), tuple(band))


def filter_sections(kind: str, order: int, edges_hz: Sequence[float], sample_rate: float) -> np.ndarray:
    """Butterworth second-order sections as rows ``b0 b1 b2 a0 a1 a2``."""
    return np.asarray(_core.filter_sections(kind, int(order), list(edges_hz), float(sample_rate)))


def zero_phase_filter(x: Sequence[float], kind: str, order: int, edges_hz: Sequence[float],
                      sample_rate: float) -> np.ndarray:
    return np.asarray(_core.zero_phase_filter(np.asarray(x, dtype=float).tolist(), kind, int(order),
                                              list(edges_hz), float(sample_rate)))


def edmd(X: np.ndarray, Y: np.ndarray, dt: float = 1.0, rank: Optional[int] = None) -> dict[str, Any]:
    """EDMD of snapshot pairs (columns of X map to columns of Y).

    Returns eigenvalues, right/left eigenvectors, the participation matrix
    (observables x modes) and the singular values of the Gram matrix.
    """
    return _core.edmd(np.asarray(X, dtype=float), np.asarray(Y, dtype=float), float(dt), rank)
