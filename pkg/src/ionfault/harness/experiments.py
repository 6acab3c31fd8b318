"""Experiment runners: multi-fault identification, class separation, detection
thresholds versus N, spread sweeps.

Every trial draws from its own stream derived from ``(master seed, keys...)``,
so results do not depend on execution order or on ``workers``.
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Iterable, Sequence

import numpy as np

from ..bitclasses import BitClass, Coupling, Syndrome, all_couplings, pad_to_power_of_two
from ..errors import DecodeFailureError, MultiFaultError, TooManyFaultsError
from ..protocol import (
    OracleExecutor,
    ProtocolConfig,
    build_adaptive_plan,
    build_stage1_plan,
    expected_result,
    run_multi_fault_protocol,
    run_single_fault_protocol,
)
from ..simulator.backends import realize_circuit, xx_target_probability
from ..simulator.device import DeviceModel
from ..simulator.executor import SimulatorExecutor, TargetOnlyExecutor, spec_rng
from ..simulator.faults import FaultDistribution
from .config import NoiseConfig
from .io import csv_text

__all__ = [
    "trial_seed", "identification_outcome", "exhaustive_multifault", "monte_carlo_multifault",
    "run_multifault_sweep", "run_table1_sweep", "REFERENCE_MULTIFAULT", "MULTIFAULT_INTERPRETATION",
    "ClassSeparation", "run_class_separation", "noiseless_crossing", "calibrate_threshold",
    "detection_rate", "ThresholdPoint", "minimal_detectable", "run_threshold_sweep",
    "REFERENCE_THRESHOLDS", "clean_fidelity", "magnitude_threshold_ladder", "spread_trial",
    "run_spread_sweep",
]


def _key(k) -> int:
    return zlib.crc32(k.encode()) if isinstance(k, str) else int(k)


def trial_seed(master: int, *keys) -> int:
    """Deterministic 63-bit seed for one trial."""
    ss = np.random.SeedSequence([int(master)] + [_key(k) for k in keys])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _map(fn: Callable, args: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(args) < 2:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))


# ------------------------------------------------------------------ multi-fault identification

# published identification rates, reported next to the simulated ones
REFERENCE_MULTIFAULT = {(8, 1): 1.0, (8, 2): 0.47, (8, 3): 0.22,
                        (16, 1): 1.0, (16, 2): 0.23, (16, 3): 0.05,
                        (32, 1): 1.0, (32, 2): 0.12, (32, 3): 0.01}

MULTIFAULT_INTERPRETATION = (
    "success = the single-fault protocol (stage-1 union syndrome, restricted [i,=] tests, "
    "brute-force candidate matching) returns one of the injected faults; "
    "all_found = repeating it with found couplings removed recovers every fault; "
    "noiseless oracle executor")

_ORACLE_CFG = ProtocolConfig(shots=1, retry_on_decode_failure=False, verify=False)


def identification_outcome(n: int, faults: Sequence[Coupling], relevant=None,
                           N: int | None = None) -> tuple[bool, bool]:
    """(first call names a true fault, sequential calls recover all of them)."""
    N = N or (1 << n)
    relevant = set(relevant if relevant is not None else all_couplings(N))
    truth = set(faults)
    ex = OracleExecutor(truth)
    found: list[Coupling] = []
    for _ in range(len(truth)):
        try:
            c, _ = run_single_fault_protocol(ex, n, frozenset(relevant), _ORACLE_CFG, N)
        except (DecodeFailureError, MultiFaultError):
            break
        if c not in truth or c in found:
            break
        found.append(c)
        relevant.discard(c)
    return len(found) >= 1, len(found) == len(truth)


def exhaustive_multifault(N: int, k: int) -> tuple[float, float, int]:
    """Exact (first, all) success rates over every k-subset of couplings."""
    n, _ = pad_to_power_of_two(N)
    cs = sorted(all_couplings(N))
    first = every = total = 0
    for f in combinations(cs, k):
        a, b = identification_outcome(n, f, cs, N)
        first += a
        every += b
        total += 1
    return first / total, every / total, total


def _mc_chunk(args):
    N, k, seeds = args
    n, _ = pad_to_power_of_two(N)
    cs = sorted(all_couplings(N))
    out = []
    for s in seeds:
        idx = np.random.default_rng(s).choice(len(cs), size=k, replace=False)
        out.append(identification_outcome(n, [cs[i] for i in idx], cs, N))
    return out


def monte_carlo_multifault(N: int, k: int, trials: int, seed: int = 0,
                           workers: int = 1) -> tuple[float, float]:
    seeds = [trial_seed(seed, "multifault", N, k, t) for t in range(trials)]
    chunks = [seeds[i::max(1, workers)] for i in range(max(1, workers))]
    res = [r for part in _map(_mc_chunk, [(N, k, c) for c in chunks], workers) for r in part]
    return float(np.mean([a for a, _ in res])), float(np.mean([b for _, b in res]))


def run_multifault_sweep(Ns: Iterable[int] = (8, 16, 32), ks: Iterable[int] = (1, 2, 3),
                         trials: int = 5000, seed: int = 0, exhaustive_max: int = 4000,
                         workers: int = 1) -> tuple[list[dict], str]:
    """Identification probabilities versus N and fault count; returns (rows, CSV)."""
    rows = []
    for N in Ns:
        for k in ks:
            first, every = monte_carlo_multifault(N, k, trials, seed, workers)
            se = math.sqrt(max(first * (1 - first), 1e-12) / trials)
            ex_first = ex_all = None
            if math.comb(math.comb(N, 2), k) <= exhaustive_max:
                ex_first, ex_all, _ = exhaustive_multifault(N, k)
            rows.append({"N": N, "k": k, "trials": trials, "success": first, "stderr": se,
                         "all_found": every, "exhaustive": ex_first, "exhaustive_all": ex_all,
                         "reference": REFERENCE_MULTIFAULT.get((N, k))})
    header = ["N", "k", "trials", "success", "stderr", "all_found", "exhaustive",
              "exhaustive_all", "reference"]
    text = csv_text(header, [[("" if r[h] is None else r[h]) for h in header] for r in rows],
                    [f"interpretation: {MULTIFAULT_INTERPRETATION}", f"masterSeed: {seed}"])
    return rows, text


run_table1_sweep = run_multifault_sweep


# ------------------------------------------------------------------ class-test separation

@dataclass
class ClassSeparation:
    repetitions: int
    threshold: float
    trials: int
    separated: int          # trials where every class test is classified correctly
    faulty_mean: float      # mean fidelity of class tests that contain a fault
    clean_mean: float

    @property
    def rate(self) -> float:
        return self.separated / self.trials


def run_class_separation(
    faults: Sequence[tuple[Coupling, float]] = ((Coupling(0, 4), 0.47), (Coupling(0, 7), 0.22)),
    N: int = 8,
    settings: Sequence[tuple[int, float]] = ((2, 0.45), (4, 0.25)),
    trials: int = 500,
    shots: int = 300,
    noise: NoiseConfig | None = None,
    seed: int = 0,
) -> list[ClassSeparation]:
    """Classify every stage-1 class test against a threshold, repeated over seeds.

    A trial counts as separated when each test containing a fault falls below
    the threshold and each other test reaches it.
    """
    noise = noise or NoiseConfig(residual_odd_pop=0.0)
    n, _ = pad_to_power_of_two(N)
    dev = noise.device(N, {c: -u for c, u in faults})
    bad = {c for c, _ in faults}
    rel = all_couplings(N)
    out = []
    for reps, thr in settings:
        plan = [t for t in build_stage1_plan(n, rel, reps, shots, thr, N) if not t.trivial]
        truth = [expected_result(t, bad) for t in plan]
        good = 0
        fid_f, fid_c = [], []
        for k in range(trials):
            ex = SimulatorExecutor(dev, trial_seed(seed, "separation", reps, k))
            res = ex.run_batch(plan)
            good += all(r.passed == e for r, e in zip(res, truth))
            for r, e in zip(res, truth):
                (fid_c if e else fid_f).append(r.fidelity)
        out.append(ClassSeparation(reps, thr, trials, good,
                                   float(np.mean(fid_f)) if fid_f else float("nan"),
                                   float(np.mean(fid_c)) if fid_c else float("nan")))
    return out


# ------------------------------------------------------------------ detection thresholds

REFERENCE_THRESHOLDS = {(8, 2): 0.25, (16, 2): 0.30, (32, 2): 0.35,
                        (8, 4): 0.20, (16, 4): 0.25, (32, 4): 0.30}


def noiseless_crossing(repetitions: int, threshold: float) -> float:
    """Under-rotation at which a lone faulty pair's target probability equals ``threshold``.

    The pair accumulates ``r*pi/2*(1-u)``, so its target probability is
    ``cos^2(r*pi*u/4)``; valid on the first branch ``u <= 2/r``.
    """
    return 4.0 / (repetitions * math.pi) * math.acos(math.sqrt(threshold))


def _sampled_fidelities(dev: DeviceModel, plan, seed: int, shots: int) -> np.ndarray:
    out = np.empty(len(plan))
    for j, t in enumerate(plan):
        if t.trivial:
            out[j] = 1.0
            continue
        rng = spec_rng(seed, t.id)
        p = xx_target_probability(realize_circuit(dev, t, rng), t.target)
        out[j] = rng.binomial(shots, p) / shots
    return out


def _random_fault(N: int, seed: int) -> Coupling:
    cs = sorted(all_couplings(N))
    return cs[int(np.random.default_rng(seed).integers(len(cs)))]


def _decoding_path(n: int, N: int, fault: Coupling, rel, repetitions: int, shots: int):
    """Stage-1 tests plus the restricted tests a correct syndrome would schedule."""
    stage1 = build_stage1_plan(n, rel, repetitions, shots, 0.5, N)
    failing = frozenset(BitClass(i, b) for (i, b), t in zip(product(range(n), (0, 1)), stage1)
                        if not expected_result(t, {fault}))
    syn = Syndrome(n, failing)
    return list(stage1) + list(build_adaptive_plan(n, syn, rel, repetitions, shots, 0.5, N))


def calibrate_threshold(N: int, repetitions: int, u: float, trials: int, shots: int = 300,
                        noise: NoiseConfig | None = None, seed: int = 0,
                        step: float = 0.0025) -> tuple[float, float]:
    """Threshold maximising the share of trials whose decoding-path tests are all classified right.

    The path is the stage-1 batch plus the restricted tests scheduled for the
    true syndrome.  Uses calibration-only seeds.  Returns ``(threshold,
    calibration rate)``.
    """
    noise = noise or NoiseConfig(residual_odd_pop=0.0)
    n, _ = pad_to_power_of_two(N)
    rel = all_couplings(N)
    lo = np.empty(trials)  # largest faulty-test fidelity (must sit below the threshold)
    hi = np.empty(trials)  # smallest clean-test fidelity (must reach it)
    for k in range(trials):
        s = trial_seed(seed, "calibrate", N, repetitions, round(u * 1e6), k)
        c = _random_fault(N, s)
        dev = noise.device(N, {c: -u})
        plan = _decoding_path(n, N, c, rel, repetitions, shots)
        f = _sampled_fidelities(dev, plan, s, shots)
        bad = np.array([not expected_result(t, {c}) for t in plan])
        lo[k] = f[bad].max() if bad.any() else -np.inf
        hi[k] = f[~bad].min() if (~bad).any() else np.inf
    grid = np.arange(step, 1.0, step)
    ok = (lo[None, :] < grid[:, None]) & (grid[:, None] <= hi[None, :])
    rate = ok.mean(axis=1)
    best = int(np.argmax(rate))
    return float(grid[best]), float(rate[best])


def detection_rate(N: int, repetitions: int, u: float, threshold: float, trials: int,
                   shots: int = 300, noise: NoiseConfig | None = None, seed: int = 0) -> float:
    """Share of trials where the single-fault protocol names the injected fault."""
    noise = noise or NoiseConfig(residual_odd_pop=0.0)
    n, _ = pad_to_power_of_two(N)
    rel = frozenset(all_couplings(N))
    cfg = ProtocolConfig(shots=shots, repetitions=repetitions,
                         thresholds={repetitions: threshold}, verify=False)
    hits = 0
    for k in range(trials):
        s = trial_seed(seed, "detect", N, repetitions, round(u * 1e6), k)
        c = _random_fault(N, s)
        ex = TargetOnlyExecutor(noise.device(N, {c: -u}), s)
        try:
            got, _ = run_single_fault_protocol(ex, n, rel, cfg, N)
        except (DecodeFailureError, MultiFaultError):
            continue
        hits += got == c
    return hits / trials


@dataclass
class ThresholdPoint:
    N: int
    repetitions: int
    underrotation: float | None   # smallest grid value reaching the target rate
    threshold: float | None
    rate: float | None
    reference: float | None


def minimal_detectable(N: int, repetitions: int, grid: Sequence[float], trials: int = 200,
                       shots: int = 300, noise: NoiseConfig | None = None, seed: int = 0,
                       target: float = 0.95, threshold: float | None = None) -> ThresholdPoint:
    """Walk ``grid`` upward; stop at the first under-rotation detected in >= ``target`` of trials.

    With ``threshold=None`` the threshold is recalibrated at each grid point on
    separate seeds; otherwise it is held fixed.
    """
    for u in grid:
        thr = threshold
        if thr is None:
            thr, _ = calibrate_threshold(N, repetitions, u, trials, shots, noise, seed)
        rate = detection_rate(N, repetitions, u, thr, trials, shots, noise, seed)
        if rate >= target:
            return ThresholdPoint(N, repetitions, float(u), thr, rate,
                                  REFERENCE_THRESHOLDS.get((N, repetitions)))
    return ThresholdPoint(N, repetitions, None, None, None, REFERENCE_THRESHOLDS.get((N, repetitions)))


def _threshold_job(args):
    return minimal_detectable(*args)


def run_threshold_sweep(Ns: Iterable[int] = (8, 16, 32), repetitions: Iterable[int] = (2, 4),
                        grid: Sequence[float] | None = None, trials: int = 200, shots: int = 300,
                        noise: NoiseConfig | None = None, seed: int = 0,
                        threshold: float | None = None,
                        workers: int = 1) -> tuple[list[ThresholdPoint], str]:
    """Minimal detectable under-rotation for every (N, repetitions); returns (points, CSV)."""
    if grid is None:
        grid = np.round(np.arange(0.05, 0.951, 0.05), 4)
    noise = noise or NoiseConfig(residual_odd_pop=0.0)
    jobs = [(N, r, tuple(grid), trials, shots, noise, seed, 0.95, threshold)
            for N in Ns for r in repetitions]
    pts = _map(_threshold_job, jobs, workers)
    header = ["N", "repetitions", "min_underrotation", "threshold", "detection_rate", "reference"]
    rows = [[p.N, p.repetitions, "" if p.underrotation is None else p.underrotation,
             "" if p.threshold is None else p.threshold, "" if p.rate is None else p.rate,
             "" if p.reference is None else p.reference] for p in pts]
    mode = "calibrated per grid point" if threshold is None else f"fixed {threshold}"
    text = csv_text(header, rows, [f"threshold: {mode}; target rate 0.95; trials {trials}",
                                   f"amplitudeStd: {noise.amplitude_std}; masterSeed: {seed}"])
    return pts, text


# ------------------------------------------------------------------ spread sweep

def clean_fidelity(N: int, repetitions: int, noise: NoiseConfig | None = None,
                   draws: int = 20, seed: int = 0) -> float:
    """Mean exact target probability of a fault-free stage-1 class test."""
    noise = noise or NoiseConfig(residual_odd_pop=0.0)
    n, _ = pad_to_power_of_two(N)
    t = next(t for t in build_stage1_plan(n, all_couplings(N), repetitions, 1, 0.5, N)
             if not t.trivial)
    dev = noise.device(N)
    return float(np.mean([xx_target_probability(realize_circuit(dev, t, spec_rng(seed, t.id, k)),
                                                t.target) for k in range(draws)]))


def magnitude_threshold_ladder(N: int, repetitions: int,
                               magnitudes: Sequence[float] = (0.45, 0.35, 0.25, 0.18, 0.12),
                               noise: NoiseConfig | None = None, seed: int = 0) -> tuple[float, ...]:
    """Thresholds that flag faults of at least each magnitude, least sensitive first.

    A fault of size ``u`` scales a class test's fidelity by ``cos^2(r*pi*u/4)``
    relative to a clean test, so each rung sits at that fraction of the clean
    mean.
    """
    base = clean_fidelity(N, repetitions, noise, seed=seed)
    thr = sorted({round(base * math.cos(repetitions * math.pi * u / 4) ** 2, 4)
                  for u in magnitudes if repetitions * u <= 2})
    return tuple(t for t in thr if 0 < t < 1)


def spread_trial(N: int, repetitions: int, sigma: float, seed: int,
                 ladder: Sequence[float], shots: int = 300, noise: NoiseConfig | None = None,
                 max_faults: int = 3, clip: float = 0.95) -> tuple[bool, ...]:
    """One device with every coupling drawn from the composite distribution.

    Returns whether the largest 1..max_faults faults are all among the
    diagnosed couplings.
    """
    noise = noise or NoiseConfig(residual_odd_pop=0.0)
    n, _ = pad_to_power_of_two(N)
    cs = sorted(all_couplings(N))
    rng = np.random.default_rng(seed)
    u = np.minimum(FaultDistribution(sigma).sample(len(cs), rng), clip)
    dev = noise.device(N, {c: -float(x) for c, x in zip(cs, u)})
    cfg = ProtocolConfig(shots=shots, repetitions=repetitions, threshold_ladder=tuple(ladder),
                         probe="stage1", verify=True)
    ex = TargetOnlyExecutor(dev, seed)
    try:
        d = run_multi_fault_protocol(ex, n, cs, cfg, N, max_faults=max_faults)
    except TooManyFaultsError as exc:
        d = exc.diagnosis
    found = {c for c, _ in d.faults}
    order = np.argsort(-u, kind="stable")
    return tuple(all(cs[i] in found for i in order[:j]) for j in range(1, max_faults + 1))


def _spread_job(args):
    N, r, sigma, seeds, ladder, shots, noise = args
    return [spread_trial(N, r, sigma, s, ladder, shots, noise) for s in seeds]


def run_spread_sweep(sigmas: Sequence[float] = (0.02, 0.05, 0.1, 0.15, 0.2),
                     Ns: Iterable[int] = (8,), repetitions: Iterable[int] = (2, 4),
                     trials: int = 100, shots: int = 300, noise: NoiseConfig | None = None,
                     seed: int = 0, workers: int = 1) -> tuple[list[dict], str]:
    """Success at finding the largest one, two and three faults versus spread."""
    noise = noise or NoiseConfig(residual_odd_pop=0.0)
    rows = []
    for N in Ns:
        for r in repetitions:
            ladder = magnitude_threshold_ladder(N, r, noise=noise, seed=seed)
            for sigma in sigmas:
                seeds = [trial_seed(seed, "spread", N, r, round(sigma * 1e6), t)
                         for t in range(trials)]
                w = max(1, workers)
                parts = _map(_spread_job, [(N, r, sigma, seeds[i::w], ladder, shots, noise)
                                           for i in range(w)], w)
                res = np.array([x for p in parts for x in p], dtype=float)
                rows.append({"sigma": sigma, "N": N, "repetitions": r, "trials": trials,
                             "top1": res[:, 0].mean(), "top2": res[:, 1].mean(),
                             "top3": res[:, 2].mean(),
                             "ladder": " ".join(f"{t:.4g}" for t in ladder)})
    header = ["sigma", "N", "repetitions", "trials", "top1", "top2", "top3", "ladder"]
    text = csv_text(header, [[r[h] for h in header] for r in rows],
                    ["topj = largest j under-rotations all diagnosed (multi-fault flow, "
                     "threshold ladder at fixed repetitions, stage-1 probe)",
                     f"amplitudeStd: {noise.amplitude_std}; masterSeed: {seed}"])
    return rows, text
