"""Executor that answers test specs from recorded shot counts."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from ..circuits import TestResult, TestSpec, make_result
from ..errors import MissingRecordError, RecordValidationError
from .io import read_records

__all__ = ["ReplayExecutor", "replay_executor"]


class ReplayExecutor:
    """Looks up recorded counts by test id; verdicts are recomputed locally.

    A batch with missing ids raises ``MissingRecordError`` listing every
    missing spec at once, so a second measurement session can cover them.
    """

    def __init__(self, records: Mapping[str, Mapping[str, int]], check_shots: bool = True):
        self.records = {k: dict(v) for k, v in records.items()}
        self.check_shots = check_shots
        self.used: list[str] = []

    def _lookup(self, spec: TestSpec) -> TestResult:
        counts = self.records[spec.id]
        total = sum(counts.values())
        if self.check_shots and total != spec.shots:
            raise RecordValidationError(
                f"record {spec.id} holds {total} shots, the test declares {spec.shots}")
        bad = [k for k in counts if len(k) != spec.N or set(k) - {"0", "1"}]
        if bad:
            raise RecordValidationError(f"record {spec.id} has malformed bitstring(s) {bad[:3]}")
        self.used.append(spec.id)
        return make_result(spec, counts)

    def run(self, spec: TestSpec) -> TestResult:
        if spec.id not in self.records:
            raise MissingRecordError([spec])
        return self._lookup(spec)

    def run_batch(self, specs: Sequence[TestSpec]) -> list[TestResult]:
        missing = [s for s in specs if s.id not in self.records]
        if missing:
            raise MissingRecordError(missing)
        return [self._lookup(s) for s in specs]


def replay_executor(path: str | Path, check_shots: bool = True) -> ReplayExecutor:
    return ReplayExecutor(read_records(path), check_shots)
