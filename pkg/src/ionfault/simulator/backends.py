"""Numerical backends.

Two ways to evaluate a test circuit:

* a state vector over the involved qubits (any gate set, any noise), and
* an evaluation in the X eigenbasis, where every XX rotation is diagonal.  A
  circuit of XX rotations with angles ``theta_ab`` then has amplitude

      <y|U|0> = 2^-m sum_x (-1)^(y.x) exp(-i/2 sum_ab theta_ab s_a s_b),  s = 1 - 2x,

  which is a Walsh-Hadamard transform of a phase vector.

Both consume a circuit that has already been *realised*: noise has been drawn
and each operation carries concrete angles.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ..bitclasses import Coupling
from ..circuits import TestSpec
from ..errors import DomainError, SimulationCapError, UnsupportedBackendError
from .device import DeviceModel
from .gates import MSGate, SingleQubitGate, ms_matrix, rotation_matrix
from .noise import phase_noise_offsets, residual_kick_angle

__all__ = [
    "StateVector",
    "apply_single_qubit",
    "apply_ms",
    "apply_swap",
    "realize_circuit",
    "run_statevector",
    "statevector_distribution",
    "xx_distribution",
    "xx_target_probability",
    "fwht",
    "ideal_output",
    "sample_counts",
    "DEFAULT_MAX_QUBITS",
]

DEFAULT_MAX_QUBITS = 20
HALF_PI = np.pi / 2


# ------------------------------------------------------------ state vector

@dataclass(frozen=True)
class StateVector:
    """Amplitudes as a ``(2,)*m`` tensor; axis ``qubit_map[q]`` belongs to qubit ``q``."""

    amplitudes: np.ndarray
    qubit_map: dict

    @classmethod
    def zeros(cls, qubits: Sequence[int]) -> "StateVector":
        qubits = sorted(set(qubits))
        amp = np.zeros((2,) * len(qubits), dtype=complex)
        amp[(0,) * len(qubits)] = 1.0
        return cls(amp, {q: i for i, q in enumerate(qubits)})

    @property
    def qubits(self) -> list[int]:
        return sorted(self.qubit_map, key=self.qubit_map.get)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        """Flat outcome probabilities; the first qubit is the most significant bit."""
        return np.abs(self.amplitudes.reshape(-1)) ** 2

    def _axis(self, q: int) -> int:
        try:
            return self.qubit_map[q]
        except KeyError:
            raise IndexError(f"qubit {q} is not part of this state") from None


def apply_single_qubit(state: StateVector, q: int, g: SingleQubitGate | np.ndarray) -> StateVector:
    u = g.matrix if isinstance(g, SingleQubitGate) else g
    ax = state._axis(q)
    out = np.tensordot(u, state.amplitudes, axes=([1], [ax]))
    return StateVector(np.moveaxis(out, 0, ax), state.qubit_map)


def apply_ms(state: StateVector, a: int, b: int, g: MSGate | np.ndarray) -> StateVector:
    if a == b:
        raise IndexError("MS gate needs two distinct qubits")
    u = (g.matrix if isinstance(g, MSGate) else g).reshape(2, 2, 2, 2)
    axa, axb = state._axis(a), state._axis(b)
    out = np.tensordot(u, state.amplitudes, axes=([2, 3], [axa, axb]))
    return StateVector(np.moveaxis(out, [0, 1], [axa, axb]), state.qubit_map)


def apply_swap(state: StateVector, a: int, b: int) -> StateVector:
    return StateVector(np.swapaxes(state.amplitudes, state._axis(a), state._axis(b)),
                       state.qubit_map)


# ------------------------------------------------------------ realisation

@dataclass(frozen=True)
class RealizedCircuit:
    N: int
    ops: tuple  # ("ms", a, b, theta, phi1, phi2, exact) | ("swap", a, b) | ("r", q, theta, phi)

    @property
    def qubits(self) -> list[int]:
        return sorted({q for op in self.ops for q in (op[1], op[2]) if op[0] != "r"}
                      | {op[1] for op in self.ops if op[0] == "r"})

    @property
    def xx_only(self) -> bool:
        return all(op[0] == "ms" and op[4] == 0 and op[5] == 0 for op in self.ops)


def realize_circuit(device: DeviceModel, spec: TestSpec, rng: np.random.Generator) -> RealizedCircuit:
    """Draw the test's noise and fix every gate angle.

    Draw order (fixed, so results depend only on the seed): one amplitude
    factor per coupling in canonical order, then the phase-noise realisation,
    then two kick phases per MS gate.
    """
    if spec.N != device.N:
        raise DomainError(f"test {spec.id} is for {spec.N} qubits, device has {device.N}")
    ops = spec.operations()
    couplings = sorted(spec.ms_couplings())
    std = device.amplitude_noise_std
    delta = {c: (rng.normal(0.0, std) if std > 0 else 0.0) for c in couplings}
    n_ms = sum(1 for op in ops if op[0] == "ms")
    offsets = (phase_noise_offsets(device.phase_noise, n_ms, rng)
               if device.phase_noise is not None else np.zeros(n_ms))
    kick = residual_kick_angle(device.residual_odd_population)
    out = []
    g = 0
    for op, a, b in ops:
        if op == "swap":
            out.append(("swap", a, b))
            continue
        if op != "ms":
            raise DomainError(f"unknown operation {op!r}")
        c = Coupling(a, b)
        eps = device.coupling_error.get(c, 0.0)
        p1, p2 = device.coupling_phases.get(c, (0.0, 0.0))
        p1 = p1 + float(offsets[g])
        theta = HALF_PI * (1 + eps) * (1 + delta[c])
        exact = eps == 0 and delta[c] == 0 and p1 == 0 and p2 == 0
        out.append(("ms", c.a, c.b, theta, p1, p2, exact))
        if kick > 0:
            fa, fb = rng.uniform(0, 2 * np.pi, 2)
            out.append(("r", c.a, kick, fa))
            out.append(("r", c.b, kick, fb))
        g += 1
    return RealizedCircuit(device.N, tuple(out))


# ------------------------------------------------------------ state-vector backend

def run_statevector(circuit: RealizedCircuit, max_qubits: int = DEFAULT_MAX_QUBITS) -> StateVector:
    qubits = circuit.qubits
    if len(qubits) > max_qubits:
        raise SimulationCapError(
            f"{len(qubits)} involved qubits exceed the state-vector cap of {max_qubits}; "
            "use the diagonal backend for XX-only circuits")
    st = StateVector.zeros(qubits)
    for op in circuit.ops:
        if op[0] == "ms":
            st = apply_ms(st, op[1], op[2], ms_matrix(op[3], op[4], op[5]))
        elif op[0] == "swap":
            st = apply_swap(st, op[1], op[2])
        else:
            st = apply_single_qubit(st, op[1], rotation_matrix(op[2], op[3]))
    return st


def statevector_distribution(circuit: RealizedCircuit, max_qubits: int = DEFAULT_MAX_QUBITS):
    """Return ``(qubits, probs, shifts, flips)``; the first listed qubit is the top bit."""
    st = run_statevector(circuit, max_qubits)
    qubits = st.qubits
    m = len(qubits)
    return qubits, st.probabilities(), [m - 1 - j for j in range(m)], np.zeros(circuit.N, np.uint8)


# ------------------------------------------------------------ diagonal backend

def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform, ``out[y] = sum_x (-1)^popcount(x&y) a[x]``."""
    a = np.array(a, copy=True)
    n = a.size
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        v = a.reshape(-1, 2, h)
        x, y = v[:, 0, :].copy(), v[:, 1, :].copy()
        v[:, 0, :] = x + y
        v[:, 1, :] = x - y
        a = v.reshape(n)
        h *= 2
    return a


_CHUNK_BITS = 16


@lru_cache(maxsize=24)
def _spin_block(width: int) -> np.ndarray:
    """Spins ``1 - 2*bit_j(x)`` for x in [0, 2^width), shape (2^width, width)."""
    x = np.arange(1 << width, dtype=np.int64)[:, None]
    return (1 - 2 * ((x >> np.arange(width)) & 1)).astype(np.float64)


def _reduce_xx(circuit: RealizedCircuit):
    """Sum angles per coupling and fold exact Pauli blocks into bit flips."""
    if not circuit.xx_only:
        raise UnsupportedBackendError("diagonal backend needs XX rotations with zero phases only")
    blocks: dict[tuple[int, int], list] = {}
    for _, a, b, theta, _, _, exact in circuit.ops:
        blk = blocks.setdefault((a, b), [0.0, True, 0])
        blk[0] += theta
        blk[1] = blk[1] and exact
        blk[2] += 1
    flips = np.zeros(circuit.N, np.uint8)
    rest = []
    for (a, b), (theta, exact, count) in sorted(blocks.items()):
        if exact and count % 2 == 0:
            # count gates of exactly pi/2: X(x)X to the power count/2, up to phase
            if (count // 2) % 2:
                flips[a] ^= 1
                flips[b] ^= 1
        else:
            rest.append((a, b, theta))
    qubits = sorted({q for a, b, _ in rest for q in (a, b)})
    local = {q: j for j, q in enumerate(qubits)}
    m = len(qubits)
    th = np.zeros((m, m))
    for a, b, theta in rest:
        th[local[a], local[b]] += theta / 2
        th[local[b], local[a]] += theta / 2
    return qubits, th, flips


def _spins(lo: int, width: int, bits: int) -> np.ndarray:
    """Spins ``1 - 2*bit_j(x)`` over ``bits`` bits for x in [lo, lo + 2^width)."""
    low = _spin_block(width)
    if width == bits:
        return low
    hi = ((lo >> width) >> np.arange(bits - width)) & 1
    return np.hstack([low, np.broadcast_to(1.0 - 2 * hi, (low.shape[0], bits - width))])


@lru_cache(maxsize=24)
def _half_spins_cached(m: int) -> np.ndarray:
    return np.hstack([_spin_block(m - 1), np.ones((1 << (m - 1), 1))])


def _half_spin_chunks(m: int):
    """Spin rows for every x whose top local bit is 0."""
    if m - 1 <= _CHUNK_BITS:
        yield _half_spins_cached(m)
        return
    width = _CHUNK_BITS
    for lo in range(0, 1 << (m - 1), 1 << width):
        yield np.hstack([_spins(lo, width, m - 1), np.ones((1 << width, 1))])


def _component_amplitude(th: np.ndarray, y: np.ndarray) -> complex:
    m = th.shape[0]
    # (-1)^(y.x) = exp(i pi/2 sum_y (1 - s_j)): fold the sign into the phase
    w = np.pi * y.astype(np.float64)
    re = im = 0.0
    for s in _half_spin_chunks(m):
        half = 0.5 * np.einsum("ij,ij->i", s @ th + w, s)
        re += np.cos(half).sum()
        im += np.sin(half).sum()
    return complex(re, im) * 2.0 / (1 << m)


def xx_target_probability(circuit: RealizedCircuit, target: str) -> float:
    """Exact probability of ``target`` for an XX-only circuit.

    The circuit factorises over connected components of its coupling graph,
    so the probability is a product of per-component terms.  Within one
    component the phase is invariant under flipping every spin, so only x
    with the top local bit 0 are summed, and odd-weight targets have zero
    amplitude.
    """
    qubits, th, flips = _reduce_xx(circuit)
    want = (np.frombuffer(target.encode(), np.uint8) - 48) ^ flips
    inv = set(qubits)
    if any(want[q] for q in range(circuit.N) if q not in inv):
        return 0.0
    if not qubits:
        return 1.0
    y = np.array([want[q] for q in qubits], dtype=bool)
    ncomp, label = connected_components(csr_matrix(th != 0), directed=False)
    prob = 1.0
    for k in range(ncomp):
        idx = np.flatnonzero(label == k)
        yk = y[idx]
        if yk.sum() % 2:
            return 0.0
        if idx.size == 1:
            continue
        prob *= abs(_component_amplitude(th[np.ix_(idx, idx)], yk)) ** 2
    return float(min(1.0, prob))


def xx_distribution(circuit: RealizedCircuit, max_qubits: int = 26):
    """Full output distribution of an XX-only circuit via one Walsh-Hadamard transform.

    Returns ``(qubits, probs, shifts, flips)``: outcome index ``k`` sets qubit
    ``qubits[j]`` to bit ``shifts[j]`` of ``k``; ``flips`` is XORed on top.
    """
    qubits, th, flips = _reduce_xx(circuit)
    m = len(qubits)
    if m > max_qubits:
        raise SimulationCapError(f"{m} qubits exceed the diagonal distribution cap {max_qubits}")
    if m == 0:
        return qubits, np.ones(1), [], flips
    width = min(m, _CHUNK_BITS)
    f = np.empty(1 << m, dtype=complex)
    for lo in range(0, 1 << m, 1 << width):
        s = _spins(lo, width, m)
        ph = ((s @ th) * s).sum(axis=1)
        f[lo:lo + (1 << width)] = np.exp(-0.5j * ph)
    amp = fwht(f) / (1 << m)
    return qubits, np.abs(amp) ** 2, list(range(m)), flips


# ------------------------------------------------------------ sampling

def sample_counts(qubits, probs, shifts, flips, N: int, shots: int, readout_flip: float,
                  rng: np.random.Generator) -> dict[str, int]:
    p = np.clip(probs, 0, None)
    p = p / p.sum()
    hist = rng.multinomial(shots, p)
    idx = np.nonzero(hist)[0]
    cnt = hist[idx]
    rows = np.zeros((idx.size, N), np.uint8)
    for q, sh in zip(qubits, shifts):
        rows[:, q] = (idx >> sh) & 1
    rows ^= flips[None, :]
    if readout_flip > 0:
        rows = np.repeat(rows, cnt, axis=0)
        rows ^= (rng.random(rows.shape) < readout_flip).astype(np.uint8)
        rows, cnt = np.unique(rows, axis=0, return_counts=True)
    out: dict[str, int] = {}
    for r, c in zip(rows, cnt):
        key = (r + 48).tobytes().decode()
        out[key] = out.get(key, 0) + int(c)
    return out


# ------------------------------------------------------------ ideal reference

def ideal_output(spec: TestSpec, max_qubits: int = DEFAULT_MAX_QUBITS) -> str:
    """Noiseless output bitstring of ``spec``; errors if it is not a basis state."""
    ops = []
    for op, a, b in spec.operations():
        ops.append(("swap", a, b) if op == "swap" else ("ms", a, b, HALF_PI, 0.0, 0.0, True))
    st = run_statevector(RealizedCircuit(spec.N, tuple(ops)), max_qubits)
    probs = st.probabilities()
    k = int(np.argmax(probs))
    if probs[k] < 1 - 1e-9:
        raise DomainError(f"ideal output of {spec.id} is not a single bitstring")
    bits = ["0"] * spec.N
    m = len(st.qubits)
    for j, q in enumerate(st.qubits):
        bits[q] = str((k >> (m - 1 - j)) & 1)
    return "".join(bits)
