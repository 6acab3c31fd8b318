"""Simulator-backed test execution."""
from __future__ import annotations

import threading
import zlib
from collections import Counter

import numpy as np

from ..circuits import TestResult, TestSpec, make_result
from ..errors import UnsupportedBackendError
from .backends import (
    DEFAULT_MAX_QUBITS,
    realize_circuit,
    sample_counts,
    statevector_distribution,
    xx_distribution,
    xx_target_probability,
)
from .device import DeviceModel

__all__ = [
    "SimulatorExecutor",
    "simulate_test",
    "simulate_test_statevector",
    "target_probability_diagonal",
    "sample_shots",
    "spec_rng",
    "TargetOnlyExecutor",
    "OTHER",
]

OTHER = "other"  # counts key for "any outcome except the target" (target-only sampling)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spec_rng(seed: int, spec_id: str, attempt: int = 0) -> np.random.Generator:
    """Stream for one execution of one test; independent of execution order."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), zlib.crc32(spec_id.encode()), int(attempt)]))


def simulate_test(device: DeviceModel, t: TestSpec, seed, backend: str = "auto",
                  max_qubits: int = DEFAULT_MAX_QUBITS) -> TestResult:
    """Realise the test's noise, evaluate the circuit and sample ``t.shots`` outcomes.

    ``backend`` is ``"statevector"``, ``"diagonal"`` or ``"auto"`` (diagonal
    whenever the realised circuit holds only zero-phase XX rotations).
    """
    rng = _rng(seed)
    circ = realize_circuit(device, t, rng)
    if backend == "auto":
        backend = "diagonal" if circ.xx_only else "statevector"
    if backend == "diagonal":
        dist = xx_distribution(circ)
    elif backend == "statevector":
        dist = statevector_distribution(circ, max_qubits)
    else:
        raise UnsupportedBackendError(f"unknown backend {backend!r}")
    counts = sample_counts(*dist, device.N, t.shots, device.readout_flip_prob, rng)
    return make_result(t, counts)


def simulate_test_statevector(device: DeviceModel, t: TestSpec, seed,
                              max_qubits: int = DEFAULT_MAX_QUBITS) -> TestResult:
    return simulate_test(device, t, seed, "statevector", max_qubits)


def target_probability_diagonal(device: DeviceModel, t: TestSpec, seed=0) -> float:
    """Exact target probability for one noise draw of an XX-only test."""
    circ = realize_circuit(device, t, _rng(seed))
    return xx_target_probability(circ, t.target)


def sample_shots(p: float, shots: int, seed) -> tuple[int, int]:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    hits = int(_rng(seed).binomial(shots, p))
    return hits, shots - hits


class SimulatorExecutor:
    """Runs test specs on a simulated device.

    Each call draws from a stream keyed by ``(seed, test id, attempt)`` where
    ``attempt`` counts earlier runs of the same id, so results do not depend on
    the order in which tests are submitted.
    """

    def __init__(self, device: DeviceModel, seed: int = 0, backend: str = "auto",
                 max_qubits: int = DEFAULT_MAX_QUBITS):
        self.device = device
        self.seed = seed
        self.backend = backend
        self.max_qubits = max_qubits
        self._attempts: Counter = Counter()
        self._lock = threading.Lock()

    def run(self, spec: TestSpec) -> TestResult:
        with self._lock:
            attempt = self._attempts[spec.id]
            self._attempts[spec.id] += 1
        return simulate_test(self.device, spec, spec_rng(self.seed, spec.id, attempt),
                             self.backend, self.max_qubits)

    def run_batch(self, specs) -> list[TestResult]:
        return [self.run(s) for s in specs]


class TargetOnlyExecutor(SimulatorExecutor):
    """Fast executor for sweeps: exact target probability, then a binomial draw.

    Only the target-match event is sampled, so non-target shots are pooled
    under the ``"other"`` key.  Requires XX-only devices.
    """

    def run(self, spec: TestSpec) -> TestResult:
        with self._lock:
            attempt = self._attempts[spec.id]
            self._attempts[spec.id] += 1
        rng = spec_rng(self.seed, spec.id, attempt)
        p = xx_target_probability(realize_circuit(self.device, spec, rng), spec.target)
        hits = int(rng.binomial(spec.shots, p))
        return make_result(spec, {spec.target: hits, OTHER: spec.shots - hits})
