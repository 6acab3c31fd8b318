"""Fidelity estimators and the pass/fail rule."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import IncompleteModelError, UndefinedFidelityError, UnfittableScanError

__all__ = [
    "ContrastScan",
    "ModeCouplings",
    "target_state_fidelity",
    "ms_fidelity_from_mode_residuals",
    "contrast_fit",
    "ms_fidelity_from_populations",
    "threshold_classifier",
    "default_phi_grid",
]


@dataclass(frozen=True)
class ContrastScan:
    """Parity signal ``P00 + P11 - P01 - P10`` measured at analysis phases ``phis``."""

    phis: tuple[float, ...]
    signal: tuple[float, ...]

    def __post_init__(self):
        phis = tuple(float(p) for p in self.phis)
        sig = tuple(float(s) for s in self.signal)
        if len(phis) != len(sig):
            raise ValueError("phis and signal differ in length")
        if len(phis) < 4:
            raise ValueError("a contrast scan needs at least 4 points")
        if any(abs(s) > 1 + 1e-9 for s in sig):
            raise ValueError("parity signal outside [-1, 1]")
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "signal", sig)


@dataclass(frozen=True)
class ModeCouplings:
    """Lamb-Dicke parameters ``eta[(p, ion)]`` and residual displacements ``alpha[p]``."""

    eta: Mapping[tuple[int, int], float]
    alpha: Mapping[int, complex]


def default_phi_grid(points: int = 16) -> np.ndarray:
    return np.arange(points) * np.pi / points


def target_state_fidelity(counts: Mapping[str, int], target: str) -> float:
    total = sum(counts.values())
    if total <= 0:
        raise UndefinedFidelityError("no shots recorded")
    return counts.get(target, 0) / total


def ms_fidelity_from_mode_residuals(mc: ModeCouplings, ions: tuple[int, int]) -> float:
    """Gate fidelity from residual spin-motion displacement of each mode.

    ``F = 1 - 4/5 * sum_p (eta_pi^2 + eta_pj^2) |alpha_p|^2``.
    """
    i, j = ions
    total = 0.0
    for p, alpha in mc.alpha.items():
        try:
            ei, ej = mc.eta[(p, i)], mc.eta[(p, j)]
        except KeyError as exc:
            raise IncompleteModelError(f"no Lamb-Dicke parameter for mode {p}, ion {exc}") from None
        total += (ei * ei + ej * ej) * abs(alpha) ** 2
    if not np.isfinite(total):
        raise IncompleteModelError("non-finite mode coupling entries")
    return 1.0 - 0.8 * total


def contrast_fit(scan: ContrastScan, clamp: bool = True) -> float:
    """Least-squares amplitude of ``signal ~ Pi * sin(2 phi)``.

    Args:
        scan: the parity scan.
        clamp: restrict the result to [0, 1]. Off only for diagnostics.

    Returns:
        The parity contrast.
    """
    basis = np.sin(2 * np.asarray(scan.phis))
    denom = float(basis @ basis)
    if denom < 1e-12:
        raise UnfittableScanError("sin(2 phi) vanishes on every scan point")
    pi = float(basis @ np.asarray(scan.signal)) / denom
    return min(1.0, max(0.0, pi)) if clamp else pi


def ms_fidelity_from_populations(p00: float, p11: float, contrast: float) -> float:
    return (p00 + p11 + contrast) / 2


def threshold_classifier(fidelity: float, threshold: float) -> bool:
    """True (pass) iff ``fidelity >= threshold``."""
    return fidelity >= threshold
