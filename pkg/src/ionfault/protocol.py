"""Test planning, syndrome decoding and the fault-diagnosis flows.

The single-fault procedure runs the 2n bit-class tests in one batch, decodes
the failing classes into a fixed-bit pattern, then runs at most n-L-1
restricted equality tests that pin down the remaining free bits.  The
multi-fault flow wraps it in a loop: find the repetition count at which the
canary circuit fails, diagnose one coupling, verify it, drop it from the
relevant set and go again.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .bitclasses import (
    BitClass,
    Coupling,
    Syndrome,
    all_couplings,
    bit,
    candidates_from_syndrome,
    class_members,
    is_complementary,
    pad_to_power_of_two,
    restricted_eq_classes,
)
from .circuits import (
    TestExecutor,
    TestResult,
    TestSpec,
    make_test,
    run_batch,
    target_bitstring,
)
from .errors import (
    DecodeFailureError,
    DomainError,
    IncompletePlanError,
    MultiFaultError,
    TooManyFaultsError,
)

log = logging.getLogger(__name__)

__all__ = [
    "ProtocolConfig",
    "CostLedger",
    "Diagnosis",
    "OracleExecutor",
    "build_stage1_plan",
    "decode_stage1",
    "build_adaptive_plan",
    "identify_single_fault",
    "match_candidates",
    "expected_result",
    "run_single_fault_protocol",
    "canary_test",
    "repetition_search",
    "run_multi_fault_protocol",
    "diagnose",
    "swap_insertion_variant",
]

DEFAULT_LADDER = (2, 4, 8, 16, 32)
DEFAULT_THRESHOLDS = {2: 0.45, 4: 0.25}


@dataclass
class ProtocolConfig:
    """Knobs for the diagnosis flows.

    ``thresholds`` maps repetition count to pass threshold; counts missing from
    the map fall back to ``default_threshold``.  Canary thresholds are kept
    separate because a canary touches every relevant coupling.
    """

    shots: int = 300
    repetitions: int = 4
    ladder: tuple[int, ...] = DEFAULT_LADDER
    thresholds: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    default_threshold: float = 0.25
    canary_thresholds: Mapping[int, float] | None = None
    verify: bool = True
    retry_on_decode_failure: bool = True
    probe: str = "canary"  # or "stage1": run the bit-class batch instead of a canary
    max_rounds: int = 64
    threshold_ladder: tuple[float, ...] | None = None

    def __post_init__(self):
        self.ladder = tuple(sorted(int(r) for r in self.ladder))
        self.thresholds = {int(k): float(v) for k, v in self.thresholds.items()}
        if self.canary_thresholds is not None:
            self.canary_thresholds = {int(k): float(v) for k, v in self.canary_thresholds.items()}
        if self.probe not in ("canary", "stage1"):
            raise ValueError(f"unknown probe {self.probe!r}")

    def threshold_for(self, repetitions: int) -> float:
        return self.thresholds.get(repetitions, self.default_threshold)

    def canary_threshold_for(self, repetitions: int) -> float:
        if self.canary_thresholds is None:
            return self.threshold_for(repetitions)
        return self.canary_thresholds.get(repetitions, self.threshold_for(repetitions))

    def rungs(self) -> list["Rung"]:
        """Magnitude ladder, least sensitive first.

        Normally one rung per repetition count.  With ``threshold_ladder`` the
        repetition count stays fixed and the rungs are ascending thresholds.
        """
        if self.threshold_ladder is not None:
            r = self.repetitions
            return [Rung(r, t, t, f"r{r}t{t:.3f}") for t in sorted(self.threshold_ladder)]
        return [Rung(r, self.threshold_for(r), self.canary_threshold_for(r), f"r{r}")
                for r in self.ladder]


@dataclass(frozen=True)
class Rung:
    repetitions: int
    threshold: float
    canary_threshold: float
    tag: str


@dataclass
class CostLedger:
    """Resource counters.

    Runs are counted per shot.  ``circuit_runs`` holds the shots spent on
    diagnosing faults (including the canary ladder that triggered each
    diagnosis); ``canary_runs`` holds canary shots that found nothing.
    """

    adaptations: int = 0
    circuit_runs: int = 0
    shots_total: int = 0
    canary_runs: int = 0

    def to_dict(self) -> dict:
        return {"adaptations": self.adaptations, "circuitRuns": self.circuit_runs,
                "shotsTotal": self.shots_total, "canaryRuns": self.canary_runs}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CostLedger":
        return cls(d["adaptations"], d["circuitRuns"], d["shotsTotal"], d["canaryRuns"])


@dataclass
class Diagnosis:
    faults: list[tuple[Coupling, int]]
    ledger: CostLedger
    log: list[tuple[TestSpec, TestResult]]
    n: int = 0
    N: int = 0


def _run(executor, specs, ledger: CostLedger, log_: list, bucket: str | None = "circuit"):
    results = run_batch(executor, specs)
    shots = 0
    for s, r in zip(specs, results):
        log_.append((s, r))
        if not r.trivial:
            shots += r.shots
    ledger.shots_total += shots
    if bucket == "circuit":
        ledger.circuit_runs += shots
    elif bucket == "canary":
        ledger.canary_runs += shots
    return results, shots


# ---------------------------------------------------------------- planning

def _default_N(n: int, N: int | None) -> int:
    return (1 << n) if N is None else N


@lru_cache(maxsize=256)
def _pairs_within(members: tuple[int, ...], relevant: frozenset) -> tuple[Coupling, ...]:
    if len(relevant) < len(members) * (len(members) - 1) // 2:
        mset = set(members)
        return tuple(sorted(c for c in relevant if c.a in mset and c.b in mset))
    return tuple(c for c in (Coupling(a, b) for a, b in combinations(members, 2)) if c in relevant)


def build_stage1_plan(
    n: int,
    relevant: Iterable[Coupling],
    repetitions: int,
    shots: int,
    threshold: float,
    N: int | None = None,
    prefix: str = "",
) -> list[TestSpec]:
    """One test per bit class ``(i, b)`` over the relevant pairs inside it.

    Classes are ordered ``(0,0), (0,1), (1,0), ...``.  A class with no relevant
    pair yields a spec with no couplings, which the runners treat as a
    trivially passing test.
    """
    relevant = frozenset(relevant)
    if not relevant:
        raise DomainError("relevant coupling set is empty")
    return list(_stage1(n, relevant, repetitions, shots, threshold, _default_N(n, N), prefix))


@lru_cache(maxsize=128)
def _stage1(n, relevant, repetitions, shots, threshold, N, prefix):
    plan = []
    for i in range(n):
        for b in (0, 1):
            lab = BitClass(i, b)
            members = class_members(n, lab, N)
            plan.append(make_test(f"{prefix}stage1-r{repetitions}-{lab}",
                                  _pairs_within(members, relevant), repetitions, shots,
                                  threshold, N, label=str(lab), kind="stage1"))
    return tuple(plan)


def _parse_bitclass(label: str) -> BitClass:
    i, b = label.strip("()").split(",")
    return BitClass(int(i), int(b))


def decode_stage1(results: Sequence[TestResult], plan: Sequence[TestSpec], n: int | None = None) -> Syndrome:
    by_id = {r.test_id: r for r in results}
    missing = [s.id for s in plan if s.id not in by_id]
    if missing:
        raise IncompletePlanError(f"no result for stage-1 test(s) {missing}")
    labels = [_parse_bitclass(s.label) for s in plan]
    if n is None:
        n = max(lab.i for lab in labels) + 1
    failing = frozenset(lab for s, lab in zip(plan, labels) if not by_id[s.id].passed)
    return Syndrome(n, failing)


def build_adaptive_plan(
    n: int,
    s: Syndrome,
    relevant: Iterable[Coupling],
    repetitions: int,
    shots: int,
    threshold: float,
    N: int | None = None,
    prefix: str = "",
) -> list[TestSpec]:
    """Restricted equality tests over consecutive free bits of ``s``."""
    if s.conflict:
        raise MultiFaultError(f"syndrome {s} is in conflict")
    return list(_adaptive(n, s, frozenset(relevant), repetitions, shots, threshold,
                          _default_N(n, N), prefix))


@lru_cache(maxsize=512)
def _adaptive(n, s, relevant, repetitions, shots, threshold, N, prefix):
    free = s.free_bits
    if len(free) < 2:
        return ()
    pattern = s.pattern()
    plan = []
    for (lo, hi), members in restricted_eq_classes(n, free, s.fixed_bits, N):
        plan.append(make_test(f"{prefix}adaptive-r{repetitions}-{pattern}-[{lo},{hi},=]",
                              _pairs_within(members, relevant), repetitions, shots,
                              threshold, N, label=f"[{lo},{hi},=]", kind="adaptive"))
    return tuple(plan)


def expected_result(t: TestSpec, faults: Iterable[Coupling]) -> bool:
    """Noiseless oracle: True (pass) unless the test drives a faulty coupling."""
    faults = set(faults)
    if not faults:
        return True
    return not (t.ms_couplings() & faults)


def _parse_eq(label: str) -> tuple[int, int]:
    lo, hi, _ = label.strip("[]").split(",")
    return int(lo), int(hi)


def match_candidates(candidates: Iterable[Coupling], specs: Sequence[TestSpec],
                     results: Sequence[TestResult]) -> list[Coupling]:
    """Candidates whose noiseless predictions agree with every observed verdict."""
    by_id = {r.test_id: r.passed for r in results}
    return [c for c in candidates
            if all(expected_result(t, {c}) == by_id[t.id] for t in specs)]


def identify_single_fault(
    s: Syndrome,
    adaptive_plan: Sequence[TestSpec] = (),
    adaptive_results: Sequence[TestResult] = (),
    relevant: Iterable[Coupling] | None = None,
    N: int | None = None,
) -> Coupling:
    """Rebuild the faulty pair from the syndrome and the restricted-test verdicts.

    A failing test over free bits ``(lo, hi)`` means the pair's bits there are
    equal; a passing one means they differ.  The endpoint whose highest free
    bit is 0 is rebuilt from that chain; its partner complements every free bit.
    The result is then checked against every verdict.
    """
    if s.conflict:
        raise MultiFaultError(f"syndrome {s} is in conflict")
    n = s.n
    free = s.free_bits
    if not free:
        raise DecodeFailureError(f"syndrome {s} fixes all bits")
    by_id = {r.test_id: r for r in adaptive_results}
    equal = {}
    for t in adaptive_plan:
        if t.id not in by_id:
            raise IncompletePlanError(f"no result for adaptive test {t.id}")
        equal[_parse_eq(t.label)] = not by_id[t.id].passed
    anchor = sum(v << i for i, v in s.fixed_bits.items())
    value = 0  # the anchor's highest free bit
    for lo, hi in reversed(list(zip(free, free[1:]))):
        if (lo, hi) not in equal:
            raise IncompletePlanError(f"no restricted test for free bits ({lo},{hi})")
        value = value if equal[(lo, hi)] else 1 - value
        anchor |= value << lo
    partner = anchor
    for pos in free:
        partner ^= 1 << pos
    c = Coupling(anchor, partner)
    if N is not None and c.b >= N:
        raise DecodeFailureError(f"decoded pair {c} touches a padding qubit")
    if relevant is not None and c not in set(relevant):
        raise DecodeFailureError(f"decoded pair {c} is not in the relevant set")
    if not match_candidates([c], adaptive_plan, adaptive_results):
        raise DecodeFailureError(f"decoded pair {c} contradicts the restricted tests")
    return c


# ---------------------------------------------------------------- executors

class OracleExecutor:
    """Idealised executor: a test fails exactly when it drives a faulty coupling."""

    def __init__(self, faults: Iterable[Coupling]):
        self.faults = frozenset(faults)

    def run(self, spec: TestSpec) -> TestResult:
        from .circuits import make_result
        if expected_result(spec, self.faults):
            return make_result(spec, {spec.target: spec.shots})
        flipped = "".join("1" if ch == "0" else "0" for ch in spec.target)
        return make_result(spec, {flipped: spec.shots})


# ---------------------------------------------------------------- flows

def _single_fault_core(executor, n, relevant, repetitions, threshold, shots, N, ledger,
                       log_, prefix, retry):
    """Stage-1 batch, one adaptation, restricted batch, decode. Returns the coupling."""
    attempts = 2 if retry else 1
    for attempt in range(attempts):
        pre = prefix if attempt == 0 else f"{prefix}retry{attempt}/"
        s_shots = shots * (2 ** attempt)
        if attempt:
            ledger.adaptations += 1  # the retry is scheduled from the failed decode
        plan = build_stage1_plan(n, relevant, repetitions, s_shots, threshold, N, pre)
        results, _ = _run(executor, plan, ledger, log_)
        syn = decode_stage1(results, plan, n)
        ledger.adaptations += 1
        try:
            if syn.conflict:
                raise MultiFaultError(f"conflicting syndrome {syn}")
            aplan = build_adaptive_plan(n, syn, relevant, repetitions, s_shots, threshold, N, pre)
            aresults, _ = _run(executor, aplan, ledger, log_)
            c = identify_single_fault(syn, aplan, aresults, relevant, N)
            log.debug("syndrome %s -> %s", syn, c)
            return c
        except DecodeFailureError as exc:
            log.info("decode failed (%s)%s", exc, "; retrying with doubled shots"
                     if attempt + 1 < attempts else "")
            if attempt + 1 == attempts:
                raise


def run_single_fault_protocol(
    executor,
    n: int,
    relevant: Iterable[Coupling],
    config: ProtocolConfig | None = None,
    N: int | None = None,
    verify: bool = False,
    ledger: CostLedger | None = None,
    log_: list | None = None,
    prefix: str = "",
) -> tuple[Coupling, CostLedger]:
    """Locate one faulty coupling with at most 3n-1 tests and one adaptation.

    Raises ``DecodeFailureError`` when the verdicts fit no single fault even
    after the doubled-shot retry, and ``MultiFaultError`` on a conflicting
    syndrome; ``diagnose`` catches both and switches to the multi-fault flow.
    """
    config = config or ProtocolConfig()
    ledger = ledger if ledger is not None else CostLedger()
    log_ = log_ if log_ is not None else []
    relevant = frozenset(relevant)
    reps = config.repetitions
    c = _single_fault_core(executor, n, relevant, reps, config.threshold_for(reps),
                           config.shots, _default_N(n, N), ledger, log_, prefix,
                           config.retry_on_decode_failure)
    if verify:
        rung = Rung(reps, config.threshold_for(reps), config.canary_threshold_for(reps), f"r{reps}")
        _verify(executor, c, rung, config.shots, _default_N(n, N), ledger, log_, prefix)
    return c, ledger


def _verify(executor, c, rung: "Rung", shots, N, ledger, log_, prefix) -> bool:
    """Point test on ``c``; True when it fails (fault confirmed)."""
    ledger.adaptations += 1
    spec = make_test(f"{prefix}verify-{rung.tag}-{c.a}-{c.b}", [c], rung.repetitions, shots,
                     rung.threshold, N, label=str(c), kind="verify")
    (res,), _ = _run(executor, [spec], ledger, log_)
    return not res.passed


def _canary_spec(relevant, repetitions, shots, threshold, N, prefix="", tag=None):
    return make_test(f"{prefix}canary-{tag or f'r{repetitions}'}", relevant, repetitions, shots,
                     threshold, N, label="canary", kind="canary")


def canary_test(executor, relevant: Iterable[Coupling], repetitions: int, shots: int,
                threshold: float, N: int | None = None) -> bool:
    """Run one circuit over every relevant coupling; True when it passes."""
    relevant = frozenset(relevant)
    if N is None:
        N = max(c.b for c in relevant) + 1
    spec = _canary_spec(relevant, repetitions, shots, threshold, N)
    (res,) = run_batch(executor, [spec])
    return res.passed


def _probe_group(rung, relevant, config, N, n, prefix):
    if config.probe == "canary":
        return [_canary_spec(relevant, rung.repetitions, config.shots, rung.canary_threshold, N,
                             prefix)]
    # stage-1 cannot see complementary pairs, so one extra test covers them
    g = list(build_stage1_plan(n, relevant, rung.repetitions, config.shots, rung.threshold, N,
                               f"{prefix}probe-r{rung.repetitions}-"))
    comp = [c for c in sorted(relevant) if is_complementary(n, c)]
    if comp:
        g.append(make_test(f"{prefix}probe-r{rung.repetitions}-complement", comp, rung.repetitions,
                           config.shots, rung.threshold, N, label="complement", kind="probe"))
    return g


def _rung_search(executor, rungs, relevant, config, N, n, ledger, log_, prefix) -> int | None:
    """Index of the least sensitive failing rung, or None.  One non-adaptive batch.

    Rungs sharing a repetition count share circuits: the batch runs once and
    its fidelities are compared against each rung's threshold.
    """
    by_reps: dict[int, list[TestSpec]] = {}
    flat = []
    for rung in rungs:
        if rung.repetitions not in by_reps:
            g = _probe_group(rung, relevant, config, N, n, prefix)
            by_reps[rung.repetitions] = g
            flat.extend(g)
    results, shots = _run(executor, flat, ledger, log_, bucket=None)
    fid = {r.test_id: r for r in results}
    found = None
    for i, rung in enumerate(rungs):
        thr = rung.canary_threshold if config.probe == "canary" else rung.threshold
        ok = all(fid[s.id].trivial or fid[s.id].fidelity >= thr for s in by_reps[rung.repetitions])
        if not ok:
            found = i
            break
    if found is None:
        ledger.canary_runs += shots
    else:
        ledger.circuit_runs += shots
    return found


def repetition_search(
    executor,
    ladder: Sequence[int],
    relevant: Iterable[Coupling],
    config: ProtocolConfig | None = None,
    N: int | None = None,
    n: int | None = None,
    ledger: CostLedger | None = None,
    log_: list | None = None,
    prefix: str = "",
) -> int | None:
    """Smallest repetition count on the ladder whose probe fails, or None.

    Every rung is planned up front and run as one non-adaptive batch.  Shots
    are booked as diagnosis runs when a rung fails, as canary runs otherwise.
    """
    config = config or ProtocolConfig()
    ledger = ledger if ledger is not None else CostLedger()
    log_ = log_ if log_ is not None else []
    relevant = frozenset(relevant)
    if not relevant:
        return None
    if N is None:
        N = (1 << n) if n is not None else max(c.b for c in relevant) + 1
    if n is None:
        n, _ = pad_to_power_of_two(N)
    rungs = [Rung(r, config.threshold_for(r), config.canary_threshold_for(r), f"r{r}")
             for r in sorted(ladder)]
    idx = _rung_search(executor, rungs, relevant, config, N, n, ledger, log_, prefix)
    return None if idx is None else rungs[idx].repetitions


def run_multi_fault_protocol(
    executor,
    n: int,
    relevant: Iterable[Coupling],
    config: ProtocolConfig | None = None,
    N: int | None = None,
    max_faults: int | None = None,
    diagnosis: Diagnosis | None = None,
) -> Diagnosis:
    """Sequential diagnosis until the magnitude search finds nothing.

    Per fault the ledger gains four adaptations (magnitude search, stage-1
    scheduling, restricted tests, verification); the final empty search adds
    one more.  A conflicting or undecodable syndrome steps down the ladder, an
    unconfirmed verification steps up; running off either end raises
    ``TooManyFaultsError``, whose ``diagnosis`` attribute holds the partial
    result.
    """
    config = config or ProtocolConfig()
    N = _default_N(n, N)
    relevant = set(relevant)
    d = diagnosis or Diagnosis([], CostLedger(), [], n, N)
    ledger, log_ = d.ledger, d.log
    rungs = config.rungs()
    for rnd in range(config.max_rounds):
        if max_faults is not None and len(d.faults) >= max_faults:
            break
        prefix = f"round{rnd}/"
        found = (_rung_search(executor, rungs, frozenset(relevant), config, N, n, ledger, log_,
                              prefix) if relevant else None)
        ledger.adaptations += 1
        if found is None:
            break
        idx, tried = found, set()
        while True:
            rung = rungs[idx]
            tried.add(idx)
            ledger.adaptations += 1
            sub = f"{prefix}{rung.tag}/"
            try:
                c = _single_fault_core(executor, n, frozenset(relevant), rung.repetitions,
                                       rung.threshold, config.shots, N, ledger, log_, sub,
                                       config.retry_on_decode_failure)
            except (MultiFaultError, DecodeFailureError) as exc:
                log.info("round %d at %s: %s; stepping down", rnd, rung.tag, exc)
                idx -= 1
                if idx < 0 or idx in tried:
                    err = TooManyFaultsError(
                        f"no ladder rung isolates a single fault in round {rnd}: {exc}")
                    err.diagnosis = d
                    raise err from exc
                continue
            if not config.verify or _verify(executor, c, rung, config.shots, N, ledger, log_, sub):
                break
            log.info("round %d: %s not confirmed at %s; stepping up", rnd, c, rung.tag)
            idx += 1
            if idx >= len(rungs) or idx in tried:
                err = TooManyFaultsError(f"could not confirm any fault in round {rnd}")
                err.diagnosis = d
                raise err
        d.faults.append((c, rung.repetitions))
        relevant.discard(c)
    else:
        err = TooManyFaultsError(f"gave up after {config.max_rounds} rounds")
        err.diagnosis = d
        raise err
    return d


def diagnose(executor, n: int, relevant: Iterable[Coupling], config: ProtocolConfig | None = None,
             N: int | None = None) -> Diagnosis:
    """Single-fault protocol first; escalate to the multi-fault flow when it cannot decode
    or when the verification test does not confirm the decoded coupling."""
    config = config or ProtocolConfig()
    N = _default_N(n, N)
    ledger, log_ = CostLedger(), []
    reps = config.repetitions
    try:
        c, ledger = run_single_fault_protocol(executor, n, relevant, config, N, verify=False,
                                              ledger=ledger, log_=log_)
    except (DecodeFailureError, MultiFaultError) as exc:
        log.info("single-fault decode failed (%s); switching to the multi-fault flow", exc)
        c = None
    if c is not None:
        rung = Rung(reps, config.threshold_for(reps), config.canary_threshold_for(reps), f"r{reps}")
        if not config.verify or _verify(executor, c, rung, config.shots, N, ledger, log_, ""):
            return Diagnosis([(c, reps)], ledger, log_, n, N)
        log.info("%s not confirmed; switching to the multi-fault flow", c)
    return run_multi_fault_protocol(executor, n, relevant, config, N,
                                    diagnosis=Diagnosis([], ledger, log_, n, N))


def swap_insertion_variant(t: TestSpec, c: Coupling, spare: int, id: str | None = None) -> TestSpec:
    """Split the gates on ``c`` around an ideal swap of ``spare`` and ``c.b``.

    The first half of the repetitions acts on ``c``; after the swap the second
    half acts on ``(c.a, spare)``, which now holds ``c.b``'s state.  A fault
    on ``c`` that cancels over a full sequence then no longer cancels.  The
    target is recomputed by ideal simulation.
    """
    if spare in (c.a, c.b):
        raise DomainError(f"spare qubit {spare} belongs to {c}")
    if c not in t.couplings:
        raise DomainError(f"{c} is not driven by test {t.id}")
    if spare >= t.N:
        raise DomainError(f"spare qubit {spare} outside {t.N} qubits")
    half = t.repetitions // 2
    ops = [op for op in t.operations() if Coupling(op[1], op[2]) != c or op[0] != "ms"]
    ops += [("ms", c.a, c.b)] * half
    ops += [("swap", min(spare, c.b), max(spare, c.b))]
    ops += [("ms", min(c.a, spare), max(c.a, spare))] * (t.repetitions - half)
    couplings = set(t.couplings) | {Coupling(c.a, spare)}
    from .simulator.backends import ideal_output
    draft = TestSpec(id or f"{t.id}/swap{spare}", tuple(couplings), t.repetitions, t.shots,
                     t.target, t.threshold, t.label, t.kind, tuple(ops))
    return TestSpec(draft.id, draft.couplings, draft.repetitions, draft.shots,
                    ideal_output(draft), draft.threshold, draft.label, draft.kind, draft.circuit)
