"""Run configuration and its JSON form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from ..errors import ConfigError
from ..protocol import DEFAULT_LADDER, DEFAULT_THRESHOLDS, ProtocolConfig
from ..simulator.device import DeviceModel, PhaseNoise

__all__ = ["NoiseConfig", "RunConfig", "load_config"]


@dataclass(frozen=True)
class NoiseConfig:
    amplitude_std: float = 0.10
    residual_odd_pop: float = 0.01
    phase_noise: PhaseNoise | None = None
    readout_flip: float = 0.0

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"amplitudeStd": self.amplitude_std,
                             "residualOddPop": self.residual_odd_pop,
                             "readoutFlip": self.readout_flip}
        if self.phase_noise is not None:
            p = self.phase_noise
            d["phaseNoise"] = {"rms": p.rms, "fMin": p.f_min, "fMax": p.f_max,
                               "components": p.components, "gateTime": p.gate_time}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseConfig":
        known = {"amplitudeStd", "residualOddPop", "phaseNoise", "readoutFlip"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown noise key(s): {sorted(extra)}")
        pn = d.get("phaseNoise")
        if pn is not None:
            pn = PhaseNoise(pn.get("rms", 0.05), pn.get("fMin", 1.0), pn.get("fMax", 1e4),
                            pn.get("components", 32), pn.get("gateTime", 2e-4))
        return cls(float(d.get("amplitudeStd", 0.10)), float(d.get("residualOddPop", 0.01)),
                   pn, float(d.get("readoutFlip", 0.0)))

    def device(self, N: int, coupling_error: Mapping | None = None, **kw) -> DeviceModel:
        return DeviceModel(N, coupling_error or {}, amplitude_noise_std=self.amplitude_std,
                           phase_noise=self.phase_noise,
                           residual_odd_population=self.residual_odd_pop,
                           readout_flip_prob=self.readout_flip, **kw)


_KEYS = {"qubits", "shots", "ladder", "thresholds", "defaultThreshold", "canaryThresholds",
         "noise", "masterSeed", "trials", "verify", "workers", "repetitions"}


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run or sweep needs besides its own arguments."""

    qubits: int = 8
    shots: int = 300
    ladder: tuple[int, ...] = DEFAULT_LADDER
    thresholds: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    default_threshold: float = 0.25
    canary_thresholds: Mapping[int, float] | None = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    master_seed: int = 0
    trials: int = 1000
    verify: bool = True
    workers: int = 1
    repetitions: int = 4

    def __post_init__(self):
        for name in ("qubits", "shots", "trials", "workers", "repetitions"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.qubits < 2:
            raise ConfigError("need at least 2 qubits")
        if not self.ladder or any(r <= 0 or r % 2 for r in self.ladder):
            raise ConfigError(f"ladder must hold positive even counts, got {self.ladder}")
        if self.repetitions % 2:
            raise ConfigError("repetitions must be even")
        for k, v in list(self.thresholds.items()) + list((self.canary_thresholds or {}).items()):
            if not 0 < v < 1:
                raise ConfigError(f"threshold {v} for {k} repetitions must lie in (0, 1)")
        if not 0 < self.default_threshold < 1:
            raise ConfigError("default threshold must lie in (0, 1)")
        object.__setattr__(self, "ladder", tuple(sorted(self.ladder)))
        object.__setattr__(self, "thresholds", {int(k): float(v) for k, v in self.thresholds.items()})

    def protocol(self, **overrides) -> ProtocolConfig:
        kw = dict(shots=self.shots, repetitions=self.repetitions, ladder=self.ladder,
                  thresholds=dict(self.thresholds), default_threshold=self.default_threshold,
                  canary_thresholds=(dict(self.canary_thresholds)
                                     if self.canary_thresholds is not None else None),
                  verify=self.verify)
        kw.update(overrides)
        return ProtocolConfig(**kw)

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = {"qubits": self.qubits, "shots": self.shots, "ladder": list(self.ladder),
             "thresholds": {str(k): v for k, v in sorted(self.thresholds.items())},
             "defaultThreshold": self.default_threshold,
             "noise": self.noise.to_dict(), "masterSeed": self.master_seed,
             "trials": self.trials, "verify": self.verify, "workers": self.workers,
             "repetitions": self.repetitions}
        if self.canary_thresholds is not None:
            d["canaryThresholds"] = {str(k): v for k, v in sorted(self.canary_thresholds.items())}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunConfig":
        extra = set(d) - _KEYS
        if extra:
            raise ConfigError(f"unknown config key(s): {sorted(extra)}")
        base = cls()
        try:
            thr = {int(k): float(v) for k, v in d.get("thresholds", base.thresholds).items()}
            ct = d.get("canaryThresholds")
            ct = {int(k): float(v) for k, v in ct.items()} if ct is not None else None
            return cls(
                qubits=int(d.get("qubits", base.qubits)),
                shots=int(d.get("shots", base.shots)),
                ladder=tuple(int(r) for r in d.get("ladder", base.ladder)),
                thresholds=thr,
                default_threshold=float(d.get("defaultThreshold", base.default_threshold)),
                canary_thresholds=ct,
                noise=NoiseConfig.from_dict(d.get("noise", {})),
                master_seed=int(d.get("masterSeed", base.master_seed)),
                trials=int(d.get("trials", base.trials)),
                verify=bool(d.get("verify", base.verify)),
                workers=int(d.get("workers", base.workers)),
                repetitions=int(d.get("repetitions", base.repetitions)),
            )
        except (TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config value: {exc}") from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_dict(data)
