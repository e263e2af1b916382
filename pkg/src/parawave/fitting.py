"""Least-squares power-law fits in log-log coordinates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class DecayFit:
    """y ~ C x^slope fitted as log y = log C + slope log x."""

    slope: float
    log_prefactor: float
    r_squared: float
    n_points: int

    @property
    def prefactor(self) -> float:
        return float(np.exp(self.log_prefactor))

    def predict(self, x: np.ndarray | float) -> np.ndarray:
        return self.prefactor * np.asarray(x, dtype=float) ** self.slope

    def within(self, target: float, tolerance: float, relative: bool = False) -> bool:
        gap = abs(self.slope - target)
        return gap <= (tolerance * abs(target) if relative else tolerance)


def power_law_fit(x: Sequence[float], y: Sequence[float]) -> DecayFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need at least two paired samples")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    spread = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2)) / spread if spread > 0 else 1.0
    return DecayFit(float(slope), float(intercept), r2, int(x.size))


def dyadic_slope(levels: Sequence[int], y: Sequence[float]) -> DecayFit:
    """Exponent p in y ~ h^p for h = 2^-level."""
    h = 2.0 ** -np.asarray(levels, dtype=float)
    return power_law_fit(h, y)
