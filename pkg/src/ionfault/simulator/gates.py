"""Single-qubit rotations and Molmer-Sorensen gates as explicit matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SingleQubitGate", "MSGate", "rotation_matrix", "ms_matrix"]


def rotation_matrix(theta: float, phi: float) -> np.ndarray:
    """``R(theta, phi) = exp(-i theta/2 (cos phi X + sin phi Y))``."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * np.exp(-1j * phi) * s],
                     [-1j * np.exp(1j * phi) * s, c]], dtype=complex)


def ms_matrix(theta: float, phi1: float = 0.0, phi2: float = 0.0) -> np.ndarray:
    """MS gate on ``(a, b)`` in the basis ``|00>, |01>, |10>, |11>`` (a is the left bit).

    ``M(theta, phi1, phi2) = exp(-i theta/2 sigma_phi1 (x) sigma_phi2)``; with
    both phases zero this is ``XX(theta)``.  Shifting ``phi1`` by pi flips the
    sign of ``theta``.
    """
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    plus, minus = phi1 + phi2, phi1 - phi2
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[1, 1] = m[2, 2] = m[3, 3] = c
    m[0, 3] = -1j * np.exp(-1j * plus) * s
    m[3, 0] = -1j * np.exp(1j * plus) * s
    m[1, 2] = -1j * np.exp(-1j * minus) * s
    m[2, 1] = -1j * np.exp(1j * minus) * s
    return m


@dataclass(frozen=True)
class SingleQubitGate:
    theta: float
    phi: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.theta, self.phi)


@dataclass(frozen=True)
class MSGate:
    theta: float
    phi1: float = 0.0
    phi2: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        return ms_matrix(self.theta, self.phi1, self.phi2)
