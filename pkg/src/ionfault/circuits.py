"""Test circuits, their results and the executor interface."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence, runtime_checkable

from .analysis import target_state_fidelity, threshold_classifier
from .bitclasses import Coupling
from .errors import DomainError, UnsupportedRepetitionError

__all__ = [
    "TestSpec",
    "TestResult",
    "TestExecutor",
    "target_bitstring",
    "make_test",
    "make_result",
    "trivial_result",
    "run_batch",
]


def _check_reps(repetitions: int):
    if repetitions < 2 or repetitions % 2:
        raise UnsupportedRepetitionError(
            f"repetitions must be an even integer >= 2, got {repetitions}")


def target_bitstring(N: int, couplings: Iterable[Coupling], repetitions: int) -> str:
    """Ideal output of ``repetitions`` XX(pi/2) gates on each coupling, qubit 0 first.

    Two gates on a pair act as X(x)X up to phase and four as the identity, so a
    qubit ends in |1> exactly when ``repetitions/2`` is odd and an odd number
    of the couplings touch it.
    """
    _check_reps(repetitions)
    if (repetitions // 2) % 2 == 0:
        return "0" * N
    deg = [0] * N
    for c in couplings:
        if c.b >= N:
            raise DomainError(f"coupling {c} outside {N} qubits")
        deg[c.a] ^= 1
        deg[c.b] ^= 1
    return "".join(str(d) for d in deg)


@dataclass(frozen=True)
class TestSpec:
    """One circuit: ``repetitions`` MS gates on each coupling, then readout.

    ``circuit`` is only set for hand-built variants (e.g. with swaps); it is a
    tuple of ``("ms", a, b)`` / ``("swap", a, b)`` operations.
    """

    __test__ = False  # not a pytest class

    id: str
    couplings: tuple[Coupling, ...]
    repetitions: int
    shots: int
    target: str
    threshold: float
    label: str = ""
    kind: str = "point"
    circuit: tuple[tuple[str, int, int], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(sorted(set(self.couplings))))
        _check_reps(self.repetitions)
        if self.shots <= 0:
            raise DomainError("shots must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise DomainError(f"threshold {self.threshold} outside [0, 1]")
        N = len(self.target)
        for c in self.couplings:
            if c.b >= N:
                raise DomainError(f"coupling {c} outside {N} qubits")

    @property
    def N(self) -> int:
        return len(self.target)

    @property
    def trivial(self) -> bool:
        return not self.couplings and not self.circuit

    def operations(self) -> list[tuple[str, int, int]]:
        if self.circuit is not None:
            return list(self.circuit)
        return [("ms", c.a, c.b) for c in self.couplings for _ in range(self.repetitions)]

    def ms_couplings(self) -> frozenset[Coupling]:
        if self.circuit is None:
            return frozenset(self.couplings)
        return frozenset(Coupling(a, b) for op, a, b in self.circuit if op == "ms")

    def involved_qubits(self) -> list[int]:
        return sorted({q for _, a, b in self.operations() for q in (a, b)})


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    test_id: str
    counts: Mapping[str, int]
    fidelity: float
    passed: bool
    shots: int
    trivial: bool = False


def make_result(spec: TestSpec, counts: Mapping[str, int]) -> TestResult:
    counts = {k: int(v) for k, v in counts.items() if int(v) != 0}
    fid = target_state_fidelity(counts, spec.target)
    return TestResult(spec.id, counts, fid, threshold_classifier(fid, spec.threshold),
                      sum(counts.values()))


def trivial_result(spec: TestSpec) -> TestResult:
    return TestResult(spec.id, {}, 1.0, True, 0, trivial=True)


def make_test(
    id: str,
    couplings: Iterable[Coupling],
    repetitions: int,
    shots: int,
    threshold: float,
    N: int,
    label: str = "",
    kind: str = "point",
) -> TestSpec:
    couplings = tuple(sorted(set(couplings)))
    return TestSpec(id, couplings, repetitions, shots,
                    target_bitstring(N, couplings, repetitions), threshold, label, kind)


@runtime_checkable
class TestExecutor(Protocol):
    __test__ = False

    def run(self, spec: TestSpec) -> TestResult: ...


def run_batch(executor, specs: Sequence[TestSpec]) -> list[TestResult]:
    """Run a non-adaptive batch; trivial specs are answered without the executor."""
    live = [s for s in specs if not s.trivial]
    batch = getattr(executor, "run_batch", None)
    got = batch(live) if batch is not None else [executor.run(s) for s in live]
    by_id = {r.test_id: r for r in got}
    return [trivial_result(s) if s.trivial else by_id[s.id] for s in specs]
