"""Single-pair gate sequences: concatenated MS gates and parity scans."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..analysis import ContrastScan, default_phi_grid
from ..bitclasses import Coupling
from ..circuits import TestSpec
from .backends import RealizedCircuit, StateVector, apply_ms, apply_single_qubit, realize_circuit, run_statevector
from .device import DeviceModel
from .gates import ms_matrix, rotation_matrix

__all__ = ["concatenated_ms_sequence", "simulate_parity_scan"]


def _sequence_target(m: int, echo: bool) -> str:
    if m % 2:
        raise ValueError(f"gate count {m} is odd; the ideal output is entangled")
    if echo or m % 4 == 0:
        return "00"
    return "11"


def concatenated_ms_sequence(
    device: DeviceModel,
    pair: Coupling | Sequence[int],
    gate_counts: Iterable[int],
    echo: bool,
    shots: int | None = None,
    seed: int = 0,
    trials: int = 1,
) -> list[tuple[int, float]]:
    """Infidelity of ``m`` back-to-back MS gates on one pair, for each ``m``.

    With ``echo`` the first phase of gate ``g`` is advanced by ``g*pi``, so the
    rotation sign alternates and static angle errors cancel in pairs.  Without
    it the ideal output is ``|00>`` for ``m % 4 == 0`` and ``|11>`` for
    ``m % 4 == 2``.  ``shots=None`` returns the exact infidelity; otherwise it
    is estimated from sampled shots.  Results are averaged over ``trials``
    noise realisations drawn from streams keyed by ``(seed, m, trial)``, so
    echoed and plain runs see the same noise.
    """
    c = pair if isinstance(pair, Coupling) else Coupling.of(pair)
    out = []
    for m in gate_counts:
        target2 = _sequence_target(m, echo)
        acc = 0.0
        for k in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence([seed, m, k]))
            spec = TestSpec(f"seq-{m}", (c,), 2, shots or 1, "0" * device.N, 0.0,
                            circuit=(("ms", c.a, c.b),) * m)
            circ = realize_circuit(device, spec, rng)
            if echo:
                ops, g = [], 0
                for op in circ.ops:
                    if op[0] == "ms":
                        op = op[:4] + (op[4] + np.pi * (g % 2), op[5], False)
                        g += 1
                    ops.append(op)
                circ = RealizedCircuit(circ.N, tuple(ops))
            probs = run_statevector(circ).probabilities()  # qubits (a, b): |00>,|01>,|10>,|11>
            p = probs[int(target2, 2)]
            if shots:
                p = rng.binomial(shots, min(1.0, p)) / shots
            acc += 1.0 - p
        out.append((m, acc / trials))
    return out


def simulate_parity_scan(eps: float, phis: Sequence[float] | None = None, shots: int | None = None,
                         seed: int = 0) -> ContrastScan:
    """Parity after ``XX(pi/2 + eps)|00>`` and an analysis pulse ``R(pi/2, phi)`` on each ion.

    The ideal signal is ``cos(eps) sin(2 phi)``.  With ``shots`` the
    populations are sampled.
    """
    phis = default_phi_grid() if phis is None else np.asarray(phis, dtype=float)
    rng = np.random.default_rng(seed)
    signal = []
    for phi in phis:
        st = StateVector.zeros([0, 1])
        st = apply_ms(st, 0, 1, ms_matrix(np.pi / 2 + eps))
        r = rotation_matrix(np.pi / 2, phi)
        st = apply_single_qubit(apply_single_qubit(st, 0, r), 1, r)
        p = np.clip(st.probabilities(), 0, None)
        if shots:
            p = rng.multinomial(shots, p / p.sum()) / shots
        signal.append(float(p[0] + p[3] - p[1] - p[2]))
    return ContrastScan(tuple(phis), tuple(signal))
