"""Stochastic error processes: residual motional kicks and 1/f phase noise."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .device import PhaseNoise
from .gates import ms_matrix, rotation_matrix

__all__ = ["residual_kick_angle", "mean_odd_population", "phase_noise_offsets"]

_GRID = 24  # phase quadrature points; exact for the low-order trig polynomial involved


def mean_odd_population(theta_res: float) -> float:
    """Odd-parity population after XX(pi/2)|00> and a kick R(theta_res, phi) on each ion,
    averaged over independent uniform phases."""
    psi = ms_matrix(np.pi / 2) @ np.array([1, 0, 0, 0], dtype=complex)
    phis = 2 * np.pi * np.arange(_GRID) / _GRID
    rots = [rotation_matrix(theta_res, p) for p in phis]
    total = 0.0
    for ra in rots:
        for rb in rots:
            out = np.kron(ra, rb) @ psi
            total += abs(out[1]) ** 2 + abs(out[2]) ** 2
    return total / _GRID**2


@lru_cache(maxsize=32)
def residual_kick_angle(odd_population: float) -> float:
    """Kick angle whose mean odd population per MS gate equals ``odd_population``."""
    if odd_population <= 0:
        return 0.0
    if odd_population >= 0.5:
        raise ValueError("odd population per gate must stay below 0.5")
    return float(brentq(lambda t: mean_odd_population(t) - odd_population, 0.0, np.pi / 2,
                        xtol=1e-12))


def phase_noise_offsets(noise: PhaseNoise, n_gates: int, rng: np.random.Generator) -> np.ndarray:
    """Phase offsets for ``n_gates`` consecutive gates from one noise realisation.

    Log-spaced frequencies carry equal power per component, which gives a 1/f
    spectral density; amplitudes are scaled so the process rms is ``noise.rms``.
    """
    k = noise.components
    freqs = np.geomspace(noise.f_min, noise.f_max, k)
    phases = rng.uniform(0, 2 * np.pi, k)
    amp = noise.rms * np.sqrt(2.0 / k)
    t = np.arange(n_gates) * noise.gate_time
    return (amp * np.cos(2 * np.pi * np.outer(t, freqs) + phases)).sum(axis=1)
