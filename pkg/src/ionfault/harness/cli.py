"""Command-line entry point.

Exit codes: 0 ok, 1 other failure, 2 missing replay records, 3 too many
faults, 4 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..bitclasses import Coupling, all_couplings, candidates_from_syndrome, pad_to_power_of_two
from ..circuits import trivial_result
from ..errors import ConfigError, IonFaultError, MissingRecordError, TooManyFaultsError
from ..protocol import (
    build_stage1_plan,
    decode_stage1,
    diagnose,
    run_multi_fault_protocol,
)
from ..simulator.device import DeviceModel
from ..simulator.executor import SimulatorExecutor
from .config import RunConfig, load_config
from .experiments import run_multifault_sweep, run_spread_sweep, run_threshold_sweep
from .io import (
    diagnosis_to_dict,
    plan_to_dict,
    read_device,
    read_plan,
    read_records,
    write_csv,
    write_json,
    write_plan,
    write_results,
)
from .replay import ReplayExecutor
from .speedup import TimingModel, speedup_csv, speedup_model

log = logging.getLogger("ionfault")

SWEEP_HELP = """\
CSV columns
  multifault (alias table1): N, k, trials, success, stderr, all_found, exhaustive,
      exhaustive_all, reference. success = first diagnosis names a true fault;
      all_found = sequential diagnoses recover every fault.
  threshold: N, repetitions, min_underrotation, threshold, detection_rate, reference.
  spread: sigma, N, repetitions, trials, top1, top2, top3, ladder.
Comment lines start with '#'.
"""


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _fault(text: str) -> tuple[Coupling, float]:
    """Parse ``a-b:u`` (under-rotation u as a fraction)."""
    try:
        pair, u = text.split(":")
        a, b = pair.replace(",", "-").split("-")
        return Coupling(int(a), int(b)), float(u)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a-b:u, got {text!r}") from exc


def _relevant(args, N: int):
    """All couplings among real qubits, optionally read from a JSON list and minus exclusions."""
    if getattr(args, "relevant", None):
        try:
            rel = {Coupling.of(c) for c in json.loads(Path(args.relevant).read_text())}
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"cannot read relevant couplings from {args.relevant}: {exc}")
    else:
        rel = set(all_couplings(N))
    for c in getattr(args, "exclude", None) or []:
        rel.discard(c)
    bad = [c for c in rel if c.b >= N]
    if bad:
        raise ConfigError(f"couplings {sorted(bad)[:3]} reach beyond N={N}")
    if not rel:
        raise ConfigError("relevant coupling set is empty")
    return frozenset(rel)


def _coupling(text: str) -> Coupling:
    try:
        a, b = text.replace(",", "-").split("-")
        return Coupling(int(a), int(b))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a-b, got {text!r}") from exc


def _device(args, cfg: RunConfig) -> DeviceModel:
    if args.device:
        dev = read_device(args.device)
    else:
        N = args.qubits or cfg.qubits
        dev = cfg.noise.device(N, {c: -u for c, u in (args.fault or [])})
    if args.noiseless:
        dev = DeviceModel.noiseless(dev.N, dev.coupling_error, coupling_phases=dev.coupling_phases)
    return dev


# ------------------------------------------------------------------ subcommands

def cmd_gen_plan(args, cfg: RunConfig):
    N = args.qubits or cfg.qubits
    n, _ = pad_to_power_of_two(N)
    reps = args.repetitions or cfg.repetitions
    shots = args.shots or cfg.shots
    plan = build_stage1_plan(n, _relevant(args, N), reps, shots,
                             cfg.protocol().threshold_for(reps), N)
    write_plan(plan, n, N, args.out)
    return 0


def cmd_simulate(args, cfg: RunConfig):
    plan, n, N = read_plan(args.plan)
    dev = _device(args, cfg.with_(qubits=N))
    if dev.N != N:
        raise ConfigError(f"device has {dev.N} qubits, plan expects {N}")
    ex = SimulatorExecutor(dev, args.seed, backend=args.backend)
    results = [ex.run(t) if not t.trivial else None for t in plan]
    write_results([r for r in results if r is not None], args.out)
    return 0


def cmd_diagnose(args, cfg: RunConfig):
    if args.shots:
        cfg = cfg.with_(shots=args.shots)
    if args.repetitions:
        cfg = cfg.with_(repetitions=args.repetitions)
    if args.source == "replay":
        if not args.records:
            raise ConfigError("--records is required with --source replay")
        N = args.qubits or cfg.qubits
        ex = ReplayExecutor(read_records(args.records))
    else:
        dev = _device(args, cfg)
        N = dev.N
        ex = SimulatorExecutor(dev, args.seed, backend=args.backend)
    n, _ = pad_to_power_of_two(N)
    rel = _relevant(args, N)
    pcfg = cfg.protocol()
    try:
        if args.flow == "multi":
            d = run_multi_fault_protocol(ex, n, rel, pcfg, N, max_faults=args.max_faults)
        else:
            d = diagnose(ex, n, rel, pcfg, N)
    except MissingRecordError as exc:
        if args.needed:
            write_plan(exc.missing, n, N, args.needed)
        print(f"missing records for {len(exc.missing)} test(s):", file=sys.stderr)
        for s in exc.missing:
            print(f"  {s.id}", file=sys.stderr)
        return exc.exit_code
    except TooManyFaultsError as exc:
        partial = getattr(exc, "diagnosis", None)
        if partial is not None:
            write_json(diagnosis_to_dict(partial) | {"error": str(exc)}, args.out)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    write_json(diagnosis_to_dict(d), args.out)
    return 0


def cmd_replay(args, cfg: RunConfig):
    """Score a record set against a plan; decode the syndrome when the plan is stage-1."""
    plan, n, N = read_plan(args.plan)
    ex = ReplayExecutor(read_records(args.records), check_shots=not args.no_shot_check)
    try:
        results = [ex.run(t) if not t.trivial else None for t in plan]
    except MissingRecordError:
        missing = [t for t in plan if not t.trivial and t.id not in ex.records]
        if args.needed:
            write_plan(missing, n, N, args.needed)
        print(f"missing records for {len(missing)} test(s): "
              + ", ".join(t.id for t in missing), file=sys.stderr)
        return 2
    out = {"n": n, "N": N, "tests": [
        {"testId": t.id, "classLabel": t.label, "trivial": r is None,
         "fidelity": None if r is None else r.fidelity,
         "passed": True if r is None else r.passed} for t, r in zip(plan, results)]}
    if plan and all(t.kind == "stage1" for t in plan) and len(plan) == 2 * n:
        full = [r if r is not None else trivial_result(t) for t, r in zip(plan, results)]
        s = decode_stage1(full, plan, n)
        out["syndrome"] = {"failing": [str(lab) for lab in sorted(s.failing, key=str)],
                           "conflict": s.conflict, "pattern": s.pattern()}
        if not s.conflict:
            out["candidates"] = [c.as_list() for c in candidates_from_syndrome(n, s)
                                 if c.b < N]
    write_json(out, args.out)
    return 0


def cmd_sweep(args, cfg: RunConfig):
    seed = args.seed if args.seed is not None else cfg.master_seed
    workers = args.workers or cfg.workers
    if args.kind in ("multifault", "table1"):
        _, text = run_multifault_sweep(_ints(args.Ns or "8,16,32"), _ints(args.ks or "1,2,3"),
                                       args.trials or cfg.trials, seed, workers=workers)
    elif args.kind == "threshold":
        _, text = run_threshold_sweep(_ints(args.Ns or "8,16,32"), _ints(args.reps or "2,4"),
                                      _floats(args.grid) if args.grid else None,
                                      args.trials or 200, cfg.shots, cfg.noise, seed,
                                      args.threshold, workers)
    else:
        _, text = run_spread_sweep(_floats(args.sigmas or "0.02,0.05,0.1,0.15,0.2"),
                                   _ints(args.Ns or "8"), _ints(args.reps or "2,4"),
                                   args.trials or 100, cfg.shots, cfg.noise, seed, workers)
    write_csv(text, args.out)
    return 0


def cmd_speedup(args, cfg: RunConfig):
    tm = TimingModel(**{k: v for k, v in {
        "gate_time_at_8": args.gate_time, "init_readout_time": args.init_readout,
        "latency_base": args.latency_base, "latency_per_coupling": args.latency_per_coupling,
        "shots": args.shots}.items() if v is not None})
    write_csv(speedup_csv(speedup_model(tm, args.n_max), tm), args.out)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--config", default=argparse.SUPPRESS, help="RunConfig JSON file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path ('-' = stdout)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="ionfault", parents=[common],
                                description="Diagnose miscalibrated couplings by group testing.")
    sub = p.add_subparsers(dest="command", required=True)

    def device_opts(sp):
        sp.add_argument("--device", help="device JSON (N, couplingErrors, noise)")
        sp.add_argument("--qubits", "-N", type=int)
        sp.add_argument("--fault", type=_fault, action="append",
                        help="inject an under-rotation, e.g. 3-4:0.15 (repeatable)")
        sp.add_argument("--noiseless", action="store_true", help="drop all noise sources")
        sp.add_argument("--backend", default="auto", choices=["auto", "diagonal", "statevector"])

    def relevance_opts(sp):
        sp.add_argument("--relevant", help="JSON list of [a,b] couplings (default: all)")
        sp.add_argument("--exclude", type=_coupling, action="append", help="drop a coupling a-b")

    sp = sub.add_parser("gen-plan", parents=[common], help="write the stage-1 plan")
    sp.add_argument("--qubits", "-N", type=int)
    sp.add_argument("--repetitions", type=int)
    sp.add_argument("--shots", type=int)
    relevance_opts(sp)
    sp.set_defaults(func=cmd_gen_plan)

    sp = sub.add_parser("simulate", parents=[common], help="run a plan on the simulator")
    sp.add_argument("--plan", required=True)
    device_opts(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("diagnose", parents=[common], help="run the diagnosis flow")
    sp.add_argument("--source", choices=["simulate", "replay"], default="simulate")
    sp.add_argument("--records", help="JSON-lines records for --source replay")
    sp.add_argument("--needed", help="where to write the plan of missing tests")
    sp.add_argument("--flow", choices=["auto", "multi"], default="auto",
                    help="auto: single-fault first, escalate on failure; multi: canary-driven")
    sp.add_argument("--max-faults", type=int)
    sp.add_argument("--repetitions", type=int)
    sp.add_argument("--shots", type=int)
    device_opts(sp)
    relevance_opts(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweeps (CSV)",
                        epilog=SWEEP_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("kind", choices=["multifault", "table1", "threshold", "spread"])
    sp.add_argument("--trials", type=int)
    sp.add_argument("--Ns", help="comma-separated qubit counts")
    sp.add_argument("--ks", help="fault counts (multifault)")
    sp.add_argument("--reps", help="repetition counts (threshold, spread)")
    sp.add_argument("--grid", help="under-rotation grid (threshold)")
    sp.add_argument("--threshold", type=float, help="fixed threshold instead of calibration")
    sp.add_argument("--sigmas", help="spread values (spread)")
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("speedup", parents=[common], help="speed-up model (CSV)")
    sp.add_argument("--n-max", type=int, default=1024)
    sp.add_argument("--gate-time", type=float)
    sp.add_argument("--init-readout", type=float)
    sp.add_argument("--latency-base", type=float)
    sp.add_argument("--latency-per-coupling", type=float)
    sp.add_argument("--shots", type=int)
    sp.set_defaults(func=cmd_speedup)

    sp = sub.add_parser("replay", parents=[common], help="score records against a plan")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--records", required=True)
    sp.add_argument("--needed")
    sp.add_argument("--no-shot-check", action="store_true")
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("config", None), ("out", "-"), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = cfg.master_seed
        return args.func(args, cfg)
    except IonFaultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
