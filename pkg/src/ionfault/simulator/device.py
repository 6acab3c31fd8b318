"""Ground-truth device description used by the simulator."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from ..bitclasses import Coupling
from ..errors import InvalidDeviceError

__all__ = ["PhaseNoise", "DeviceModel", "inject_faults"]


@dataclass(frozen=True)
class PhaseNoise:
    """1/f phase noise on the first MS phase, built from log-spaced sinusoids.

    Attributes:
        rms: root-mean-square phase offset in radians.
        f_min, f_max: band edges in Hz.
        components: number of sinusoids.
        gate_time: spacing of consecutive MS gates in seconds.
    """

    rms: float = 0.05
    f_min: float = 1.0
    f_max: float = 1.0e4
    components: int = 32
    gate_time: float = 2.0e-4

    def __post_init__(self):
        if self.rms < 0 or self.f_min <= 0 or self.f_max < self.f_min or self.components < 1:
            raise InvalidDeviceError(f"bad phase-noise parameters {self}")


@dataclass(frozen=True)
class DeviceModel:
    """Per-coupling static errors plus stochastic noise settings.

    ``coupling_error[c]`` is the relative angle error (applied angle is
    nominal * (1 + error)).  ``coupling_phases[c]`` optionally sets static
    ``(phi1, phi2)`` offsets on the MS phases of ``c``; it models faults that
    are not simple over- or under-rotations.
    """

    N: int
    coupling_error: Mapping[Coupling, float] = field(default_factory=dict)
    amplitude_noise_std: float = 0.10
    phase_noise: PhaseNoise | None = None
    residual_odd_population: float = 0.01
    readout_flip_prob: float = 0.0
    coupling_phases: Mapping[Coupling, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.N < 2:
            raise InvalidDeviceError(f"need at least 2 qubits, got {self.N}")
        errs = {Coupling.of(c) if not isinstance(c, Coupling) else c: float(e)
                for c, e in dict(self.coupling_error).items()}
        for c, e in errs.items():
            if c.b >= self.N:
                raise InvalidDeviceError(f"coupling {c} outside {self.N} qubits")
            if not abs(e) < 1:
                raise InvalidDeviceError(f"relative error {e} on {c} must satisfy |e| < 1")
        object.__setattr__(self, "coupling_error", errs)
        phases = {Coupling.of(c) if not isinstance(c, Coupling) else c: (float(p[0]), float(p[1]))
                  for c, p in dict(self.coupling_phases).items()}
        object.__setattr__(self, "coupling_phases", phases)
        for name in ("residual_odd_population", "readout_flip_prob"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise InvalidDeviceError(f"{name}={v} must lie in [0, 1)")
        if self.amplitude_noise_std < 0:
            raise InvalidDeviceError("amplitude noise std must be non-negative")

    @classmethod
    def noiseless(cls, N: int, coupling_error: Mapping | None = None, **kw) -> "DeviceModel":
        return cls(N, coupling_error or {}, amplitude_noise_std=0.0, phase_noise=None,
                   residual_odd_population=0.0, readout_flip_prob=0.0, **kw)

    @property
    def xx_only(self) -> bool:
        """True when every gate is a pure XX rotation (diagonal backend applies)."""
        return (self.phase_noise is None and self.residual_odd_population == 0
                and not any(p != (0.0, 0.0) for p in self.coupling_phases.values()))

    def with_noise(self, **kw) -> "DeviceModel":
        return replace(self, **kw)


def inject_faults(device: DeviceModel, faults: Iterable[tuple[Coupling, float]]) -> DeviceModel:
    """Return a copy with ``coupling_error[c] = -under_rotation`` for each fault."""
    errs = dict(device.coupling_error)
    seen = set()
    for c, u in faults:
        c = c if isinstance(c, Coupling) else Coupling.of(c)
        if c in seen:
            warnings.warn(f"coupling {c} injected twice; keeping the last value", stacklevel=2)
        seen.add(c)
        if u == 0:
            errs.pop(c, None)
        else:
            errs[c] = -float(u)
    return replace(device, coupling_error=errs)
