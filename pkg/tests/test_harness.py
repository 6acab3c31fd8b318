import json
import math

import numpy as np
import pytest

from ionfault.bitclasses import Coupling, all_couplings
from ionfault.errors import ConfigError, MissingRecordError, RecordValidationError
from ionfault.harness import cli
from ionfault.harness.config import NoiseConfig, RunConfig, load_config
from ionfault.harness.experiments import (
    calibrate_threshold,
    magnitude_threshold_ladder,
    minimal_detectable,
    run_class_separation,
    run_multifault_sweep,
    run_spread_sweep,
)
from ionfault.harness.io import (
    device_from_dict,
    device_to_dict,
    plan_from_dict,
    plan_to_dict,
    read_records,
)
from ionfault.harness.replay import ReplayExecutor
from ionfault.harness.speedup import TimingModel, fit_n2_over_log, speedup_csv, speedup_model
from ionfault.protocol import build_stage1_plan
from ionfault.simulator import DeviceModel, PhaseNoise, inject_faults

C = Coupling


def run(argv, capsys):
    rc = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


# --------------------------------------------------------------- serialisation

def test_plan_round_trip():
    plan = build_stage1_plan(4, all_couplings(11), 4, 300, 0.25, N=11)
    back, n, N = plan_from_dict(json.loads(json.dumps(plan_to_dict(plan, 4, 11))))
    assert (n, N) == (4, 11) and back == plan


def test_device_round_trip():
    dev = inject_faults(DeviceModel(8, phase_noise=PhaseNoise(rms=0.02),
                                    coupling_phases={C(2, 6): (np.pi, 0.0)}),
                        [(C(0, 4), 0.47), (C(0, 7), 0.22)])
    d = json.loads(json.dumps(device_to_dict(dev)))
    assert d["couplingErrors"] == [[0, 4, -0.47], [0, 7, -0.22]]
    assert device_from_dict(d) == dev


def test_config_round_trip(tmp_path):
    cfg = RunConfig(qubits=16, shots=200, thresholds={2: 0.3, 4: 0.2},
                    canary_thresholds={2: 0.5}, noise=NoiseConfig(0.05, 0.0))
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config(p) == cfg
    assert load_config(None) == RunConfig()


@pytest.mark.parametrize("bad", [{"shots": 0}, {"ladder": [3]}, {"bogus": 1},
                                 {"thresholds": {"2": 1.5}}, {"noise": {"x": 1}}])
def test_config_rejects_bad_values(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_read_records_validation(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text('{"testId": "a", "counts": {"00": 3}, "shots": 4}\n')
    with pytest.raises(RecordValidationError):
        read_records(p)
    p.write_text('{"testId": "a", "counts": {"00": 3}}\n{"testId": "a", "counts": {"00": 3}}\n')
    with pytest.raises(RecordValidationError):
        read_records(p)
    p.write_text('{"testId": "a", "counts": {"00": 3}}\n\n')
    assert read_records(p) == {"a": {"00": 3}}


def test_replay_executor_lists_every_missing_spec():
    plan = build_stage1_plan(3, all_couplings(8), 2, 10, 0.45)
    ex = ReplayExecutor({plan[0].id: {plan[0].target: 10}})
    assert ex.run(plan[0]).passed
    with pytest.raises(MissingRecordError) as info:
        ex.run_batch(plan)
    assert [s.id for s in info.value.missing] == [t.id for t in plan[1:]]


def test_replay_executor_shot_mismatch():
    (t, *_) = build_stage1_plan(3, all_couplings(8), 2, 10, 0.45)
    with pytest.raises(RecordValidationError):
        ReplayExecutor({t.id: {t.target: 9}}).run(t)
    assert ReplayExecutor({t.id: {t.target: 9}}, check_shots=False).run(t).fidelity == 1.0
    with pytest.raises(RecordValidationError):
        ReplayExecutor({t.id: {"01": 10}}).run(t)


# --------------------------------------------------------------- CLI

@pytest.mark.parametrize("N,count", [(8, 6), (11, 8), (2, 2)])
def test_cli_gen_plan(N, count, capsys):
    rc, out, _ = run(["gen-plan", "-N", N], capsys)
    assert rc == 0
    d = json.loads(out)
    assert d["N"] == N and len(d["tests"]) == count


def test_cli_gen_plan_exclude(capsys):
    rc, out, _ = run(["gen-plan", "-N", 8, "--exclude", "2-6", "--repetitions", 2], capsys)
    pairs = {tuple(c) for t in json.loads(out)["tests"] for c in t["couplings"]}
    assert rc == 0 and (2, 6) not in pairs and (0, 2) in pairs


def test_cli_replay_round_trip(tmp_path, capsys):
    plan, rec, need = tmp_path / "p.json", tmp_path / "r.jsonl", tmp_path / "need.json"
    assert run(["gen-plan", "-N", 8, "--out", plan], capsys)[0] == 0
    assert run(["simulate", "--plan", plan, "--noiseless", "--out", rec], capsys)[0] == 0
    rc, out, _ = run(["replay", "--plan", plan, "--records", rec], capsys)
    d = json.loads(out)
    assert rc == 0 and d["syndrome"]["pattern"] == "***"
    assert len(d["candidates"]) == 4
    # drop one record: exit 2 and a plan holding exactly that test
    lines = rec.read_text().splitlines()
    rec.write_text("\n".join(lines[1:]) + "\n")
    rc, _, err = run(["replay", "--plan", plan, "--records", rec, "--needed", need], capsys)
    assert rc == 2 and "missing" in err
    assert [t["id"] for t in json.loads(need.read_text())["tests"]] == \
        [json.loads(lines[0])["testId"]]


def test_cli_replay_shot_mismatch_is_config_error(tmp_path, capsys):
    plan, rec = tmp_path / "p.json", tmp_path / "r.jsonl"
    run(["gen-plan", "-N", 8, "--shots", 100, "--out", plan], capsys)
    tests = json.loads(plan.read_text())["tests"]
    rec.write_text("".join(json.dumps({"testId": t["id"], "counts": {t["target"]: 99}}) + "\n"
                           for t in tests))
    rc, _, err = run(["replay", "--plan", plan, "--records", rec], capsys)
    assert rc == 4 and "shots" in err


def test_cli_diagnose_replay_empty_syndrome(tmp_path, capsys):
    """Recorded runs with an invisible-to-stage-1 fault on {3,4}, topped up on request."""
    plan, rec, need = tmp_path / "p.json", tmp_path / "r.jsonl", tmp_path / "need.json"
    run(["gen-plan", "-N", 8, "--out", plan], capsys)
    run(["simulate", "--plan", plan, "--noiseless", "--fault", "3-4:0.47", "--out", rec],
        capsys)
    asked = []
    for _ in range(4):
        rc, out, _ = run(["diagnose", "--source", "replay", "--records", rec,
                          "--needed", need], capsys)
        if rc != 2:
            break
        asked.append([t["id"] for t in json.loads(need.read_text())["tests"]])
        extra = tmp_path / "extra.jsonl"
        run(["simulate", "--plan", need, "--noiseless", "--fault", "3-4:0.47", "--out", extra],
            capsys)
        rec.write_text(rec.read_text() + extra.read_text())
    assert rc == 0
    assert asked[0] == ["adaptive-r4-***-[0,1,=]", "adaptive-r4-***-[1,2,=]"]
    d = json.loads(out)
    assert [f["coupling"] for f in d["faults"]] == [[3, 4]]


def test_cli_diagnose_clean_device(capsys):
    rc, out, _ = run(["diagnose", "-N", 8, "--noiseless"], capsys)
    assert rc == 0 and json.loads(out)["faults"] == []


def test_cli_diagnose_simulated_fault(capsys):
    rc, out, _ = run(["diagnose", "-N", 8, "--fault", "2-6:0.47", "--seed", 3], capsys)
    assert rc == 0 and [f["coupling"] for f in json.loads(out)["faults"]] == [[2, 6]]


def test_cli_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert run(["gen-plan", "--config", p], capsys)[0] == 4


def test_cli_speedup(capsys):
    rc, out, _ = run(["speedup", "--n-max", 64], capsys)
    rows = [ln for ln in out.splitlines() if ln and not ln.startswith("#")]
    assert rc == 0 and rows[0].startswith("N,point_check_s")
    assert [int(r.split(",")[0]) for r in rows[1:]] == [8, 16, 32, 64]


def test_cli_sweep_is_seeded(capsys):
    argv = ["sweep", "multifault", "--trials", 40, "--Ns", "8", "--ks", "2", "--seed", 5]
    a, b = run(argv, capsys)[1], run(argv, capsys)[1]
    assert a == b and "success" in a


# --------------------------------------------------------------- experiments

def test_multifault_sweep_seeded_and_exhaustive():
    rows_a, csv_a = run_multifault_sweep([8], [1, 2], trials=200, seed=1)
    rows_b, csv_b = run_multifault_sweep([8], [1, 2], trials=200, seed=1)
    assert csv_a == csv_b
    one = next(r for r in rows_a if r["k"] == 1)
    assert one["success"] == 1.0 and one["exhaustive"] == 1.0


def test_class_separation_smoke():
    (two, four) = run_class_separation(trials=5, seed=0)
    assert (two.repetitions, four.repetitions) == (2, 4)
    assert four.faulty_mean < two.faulty_mean
    assert 0 <= two.rate <= 1


def test_noiseless_detection_crossing():
    # without noise the decoding path flips exactly where cos^2(r*pi*u/4) crosses the threshold
    thr = 0.25
    u_star = 4 / (4 * math.pi) * math.acos(math.sqrt(thr))
    grid = [round(u_star - 0.02, 4), round(u_star + 0.02, 4)]
    noiseless = NoiseConfig(0.0, 0.0)
    p = minimal_detectable(8, 4, grid, trials=20, noise=noiseless, threshold=thr)
    assert p.underrotation == grid[1] and p.rate == 1.0


def test_calibrated_threshold_is_on_grid():
    thr, rate = calibrate_threshold(8, 2, 0.6, trials=10, seed=2)
    assert 0 < thr < 1 and abs(thr / 0.0025 - round(thr / 0.0025)) < 1e-6
    assert 0 <= rate <= 1


def test_magnitude_ladder_ascends():
    lad = magnitude_threshold_ladder(8, 4, noise=NoiseConfig(0.1, 0.0), seed=0)
    assert list(lad) == sorted(lad) and all(0 < t < 1 for t in lad)


def test_spread_sweep_smoke():
    rows, text = run_spread_sweep(sigmas=(0.05,), Ns=(8,), repetitions=(4,), trials=3, seed=0)
    assert len(rows) == 1 and text.count("\n") >= 2


# --------------------------------------------------------------- speed-up model

def test_speedup_known_values():
    (r8,) = speedup_model(Ns=[8])
    assert r8.count_ratio == pytest.approx(28 / 6)
    assert r8.speedup_non_adaptive == pytest.approx(2.938, abs=1e-3)


def test_speedup_shapes():
    rows = speedup_model()
    na = [r.speedup_non_adaptive for r in rows]
    ad = [r.speedup_adaptive for r in rows]
    assert all(b > a for a, b in zip(na, na[1:]))
    assert all(a < n for a, n in zip(ad, na))
    # past N=64 each doubling gains less than the one before; the curve nears its ceiling
    growth = [b / a for a, b in zip(ad, ad[1:])][3:]
    assert all(b < a for a, b in zip(growth, growth[1:]))
    tm = TimingModel()
    ceiling = tm.shots * tm.init_readout_time / tm.latency_per_coupling
    assert 0.8 * ceiling < ad[-1] < ceiling


def test_fit_n2_over_log_exact():
    Ns = [8, 16, 32, 64]
    c, res = fit_n2_over_log(Ns, [3 * N * N / math.log2(N) for N in Ns])
    assert c == pytest.approx(3) and res < 1e-12


def test_speedup_csv_notes():
    text = speedup_csv(speedup_model(n_max=32))
    assert "relative residual" in text and text.splitlines()[-1].startswith("32,")


def test_timing_model_validation():
    with pytest.raises(ConfigError):
        TimingModel(init_readout_time=0)
