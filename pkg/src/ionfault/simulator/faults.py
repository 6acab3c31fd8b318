"""Composite under-rotation distribution: flat up to a cutoff, Gaussian tail beyond."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

__all__ = ["FaultDistribution", "sample_fault_distribution"]


@dataclass(frozen=True)
class FaultDistribution:
    """Density ``a`` on ``[0, cutoff]`` and ``a * exp(-(u - cutoff)^2 / (2 sigma^2))`` above.

    ``a = 1 / (cutoff + sigma * sqrt(pi/2))`` normalises it.
    """

    sigma: float
    cutoff: float = 0.06

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def a(self) -> float:
        return 1.0 / (self.cutoff + self.sigma * np.sqrt(np.pi / 2))

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        tail = self.a * np.exp(-((u - self.cutoff) ** 2) / (2 * self.sigma**2))
        return np.where(u < 0, 0.0, np.where(u <= self.cutoff, self.a, tail))

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        flat = self.a * np.clip(u, 0, self.cutoff)
        z = np.clip(u - self.cutoff, 0, None) / (self.sigma * np.sqrt(2))
        tail = self.a * self.sigma * np.sqrt(np.pi / 2) * erf(z)
        return flat + tail

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        flat = rng.random(count) < self.a * self.cutoff
        out = self.cutoff + self.sigma * np.abs(rng.standard_normal(count))
        out[flat] = rng.uniform(0, self.cutoff, int(flat.sum()))
        return out


def sample_fault_distribution(sigma: float, count: int, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return FaultDistribution(sigma).sample(count, rng)
