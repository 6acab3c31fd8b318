"""Wall-clock model comparing group testing against point-checking every coupling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..bitclasses import pad_to_power_of_two
from ..errors import ConfigError
from .io import csv_text

__all__ = ["TimingModel", "SpeedupRow", "speedup_model", "speedup_csv", "fit_n2_over_log"]


@dataclass(frozen=True)
class TimingModel:
    """Timing constants (seconds).

    The gate time scales as ``gate_time_at_8 * (N/8)**gate_time_scaling``.
    Adaptation latency (compile plus upload of the next batch) is affine in the
    number of couplings: ``latency_base + latency_per_coupling * C(N,2)``.
    """

    gate_time_at_8: float = 2.0e-4
    gate_time_scaling: float = -2.0
    init_readout_time: float = 3.0e-3
    shots: int = 300
    repetitions: int = 2
    latency_base: float = 0.5
    latency_per_coupling: float = 1.0e-3

    def __post_init__(self):
        for name in ("gate_time_at_8", "init_readout_time", "latency_base"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.latency_per_coupling < 0 or self.shots <= 0 or self.repetitions <= 0:
            raise ConfigError("shots and repetitions must be positive, latency slope non-negative")

    def gate_time(self, N: int) -> float:
        return self.gate_time_at_8 * (N / 8.0) ** self.gate_time_scaling

    def circuit_time(self, N: int, gates: int) -> float:
        """All shots of one circuit holding ``gates`` distinct couplings."""
        return self.shots * (self.init_readout_time + self.repetitions * gates * self.gate_time(N))

    def latency(self, N: int) -> float:
        return self.latency_base + self.latency_per_coupling * math.comb(N, 2)


@dataclass
class SpeedupRow:
    N: int
    point_check: float
    non_adaptive: float
    adaptive: float
    count_ratio: float

    @property
    def speedup_non_adaptive(self) -> float:
        return self.point_check / self.non_adaptive

    @property
    def speedup_adaptive(self) -> float:
        return self.point_check / self.adaptive


def _row(tm: TimingModel, N: int) -> SpeedupRow:
    n, _ = pad_to_power_of_two(N)
    pairs = math.comb(N, 2)
    point = pairs * tm.circuit_time(N, 1)
    # a bit class holds about half the qubits
    per_class = math.comb(math.ceil(N / 2), 2)
    stage1 = 2 * n * tm.circuit_time(N, per_class)
    adaptive = stage1 + (n - 1) * tm.circuit_time(N, per_class) + tm.latency(N)
    return SpeedupRow(N, point, stage1, adaptive, pairs / (2 * n))


def speedup_model(tm: TimingModel | None = None, n_max: int = 1024,
                  Ns: Sequence[int] | None = None) -> list[SpeedupRow]:
    """Times for point checks, the 2n-test batch and the 3n-1-test adaptive run."""
    tm = tm or TimingModel()
    if n_max < 8:
        raise ConfigError("n_max must be at least 8")
    if Ns is None:
        Ns = [1 << k for k in range(3, int(math.log2(n_max)) + 1)]
    return [_row(tm, int(N)) for N in Ns]


def fit_n2_over_log(Ns: Sequence[int], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares ``c`` for ``values ~ c*N^2/log2(N)``; returns (c, relative residual norm)."""
    x = np.array([N * N / math.log2(N) for N in Ns])
    y = np.asarray(values, dtype=float)
    c = float(x @ y / (x @ x))
    return c, float(np.linalg.norm(y - c * x) / np.linalg.norm(y))


def speedup_csv(rows: Sequence[SpeedupRow], tm: TimingModel | None = None) -> str:
    tm = tm or TimingModel()
    header = ["N", "point_check_s", "non_adaptive_s", "adaptive_s", "speedup_non_adaptive",
              "speedup_adaptive", "count_ratio"]
    body = [[r.N, r.point_check, r.non_adaptive, r.adaptive, r.speedup_non_adaptive,
             r.speedup_adaptive, r.count_ratio] for r in rows]
    c, res = fit_n2_over_log([r.N for r in rows], [r.speedup_non_adaptive for r in rows])
    notes = [f"gateTimeAt8={tm.gate_time_at_8} scaling={tm.gate_time_scaling} "
             f"initReadout={tm.init_readout_time} shots={tm.shots} reps={tm.repetitions}",
             f"latency = {tm.latency_base} + {tm.latency_per_coupling}*C(N,2)",
             f"non-adaptive fit c*N^2/log2(N): c={c:.6g} relative residual={res:.4g}"]
    return csv_text(header, body, notes)
