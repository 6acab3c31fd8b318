"""JSON / JSON-lines / CSV persistence."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..bitclasses import Coupling, pad_to_power_of_two
from ..circuits import TestResult, TestSpec
from ..errors import ConfigError, InvalidDeviceError, RecordValidationError
from ..protocol import CostLedger, Diagnosis
from ..simulator.device import DeviceModel
from .config import NoiseConfig

__all__ = [
    "spec_to_dict", "spec_from_dict", "plan_to_dict", "plan_from_dict",
    "write_plan", "read_plan", "device_to_dict", "device_from_dict", "read_device",
    "write_device", "write_results", "read_records", "diagnosis_to_dict", "write_json",
    "write_csv", "csv_text",
]


def spec_to_dict(t: TestSpec) -> dict:
    d = {"id": t.id, "classLabel": t.label, "couplings": [c.as_list() for c in t.couplings],
         "repetitions": t.repetitions, "shots": t.shots, "target": t.target,
         "threshold": t.threshold, "kind": t.kind}
    if t.circuit is not None:
        d["circuit"] = [list(op) for op in t.circuit]
    return d


def spec_from_dict(d: Mapping) -> TestSpec:
    try:
        circuit = d.get("circuit")
        return TestSpec(str(d["id"]), tuple(Coupling.of(c) for c in d["couplings"]),
                        int(d["repetitions"]), int(d["shots"]), str(d["target"]),
                        float(d["threshold"]), str(d.get("classLabel", "")),
                        str(d.get("kind", "point")),
                        tuple((str(o), int(a), int(b)) for o, a, b in circuit)
                        if circuit is not None else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed test spec {d!r}: {exc}") from exc


def plan_to_dict(plan: Sequence[TestSpec], n: int, N: int) -> dict:
    _, virtual = pad_to_power_of_two(N)
    return {"n": n, "N": N, "virtualQubits": sorted(virtual),
            "tests": [spec_to_dict(t) for t in plan]}


def plan_from_dict(d: Mapping) -> tuple[list[TestSpec], int, int]:
    try:
        return [spec_from_dict(t) for t in d["tests"]], int(d["n"]), int(d["N"])
    except KeyError as exc:
        raise ConfigError(f"plan lacks {exc}") from exc


def write_json(obj, path: str | Path | None):
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path is None or str(path) == "-":
        import sys
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def write_plan(plan, n, N, path):
    write_json(plan_to_dict(plan, n, N), path)


def read_plan(path):
    return plan_from_dict(_read_json(path))


def device_to_dict(dev: DeviceModel) -> dict:
    noise = NoiseConfig(dev.amplitude_noise_std, dev.residual_odd_population,
                        dev.phase_noise, dev.readout_flip_prob).to_dict()
    d = {"N": dev.N,
         "couplingErrors": [[c.a, c.b, e] for c, e in sorted(dev.coupling_error.items())],
         "noise": noise}
    if dev.coupling_phases:
        d["couplingPhases"] = [[c.a, c.b, p1, p2]
                               for c, (p1, p2) in sorted(dev.coupling_phases.items())]
    return d


def device_from_dict(d: Mapping) -> DeviceModel:
    try:
        N = int(d["N"])
        errs = {}
        for a, b, e in d.get("couplingErrors", []):
            errs[Coupling(int(a), int(b))] = float(e)
        phases = {Coupling(int(a), int(b)): (float(p1), float(p2))
                  for a, b, p1, p2 in d.get("couplingPhases", [])}
        noise = NoiseConfig.from_dict(d.get("noise", {}))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise InvalidDeviceError(f"malformed device description: {exc}") from exc
    return noise.device(N, errs, coupling_phases=phases)


def read_device(path) -> DeviceModel:
    return device_from_dict(_read_json(path))


def write_device(dev: DeviceModel, path):
    write_json(device_to_dict(dev), path)


def write_results(results: Iterable[TestResult], path):
    lines = [json.dumps({"testId": r.test_id, "counts": dict(r.counts)}) for r in results
             if not r.trivial]
    text = "\n".join(lines) + ("\n" if lines else "")
    if path is None or str(path) == "-":
        import sys
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def read_records(path) -> dict[str, dict[str, int]]:
    """Parse a JSON-lines record file into ``{testId: counts}``.

    Validates non-negative integer counts, a positive total and, when a line
    carries ``shots``, that the counts add up to it.
    """
    out: dict[str, dict[str, int]] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read records {path}: {exc}") from exc
    for no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            tid = str(rec["testId"])
            counts = {str(k): int(v) for k, v in rec["counts"].items()}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise RecordValidationError(f"{path}:{no}: malformed record ({exc})") from exc
        if any(v < 0 for v in counts.values()):
            raise RecordValidationError(f"{path}:{no}: negative count")
        total = sum(counts.values())
        if total <= 0:
            raise RecordValidationError(f"{path}:{no}: record {tid} has no shots")
        if "shots" in rec and int(rec["shots"]) != total:
            raise RecordValidationError(
                f"{path}:{no}: counts of {tid} sum to {total}, declared {rec['shots']}")
        if tid in out:
            raise RecordValidationError(f"{path}:{no}: duplicate record for {tid}")
        out[tid] = counts
    return out


def diagnosis_to_dict(d: Diagnosis) -> dict:
    return {
        "n": d.n, "N": d.N,
        "faults": [{"coupling": c.as_list(), "repetitions": r} for c, r in d.faults],
        "ledger": d.ledger.to_dict(),
        "log": [{"test": spec_to_dict(s),
                 "result": {"counts": dict(r.counts), "fidelity": r.fidelity,
                            "passed": r.passed, "trivial": r.trivial}}
                for s, r in d.log],
    }


def csv_text(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def write_csv(text: str, path):
    if path is None or str(path) == "-":
        import sys
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
