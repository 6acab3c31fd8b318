import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ionfault.bitclasses import Coupling, all_couplings
from ionfault.circuits import make_test
from ionfault.errors import SimulationCapError, UnsupportedBackendError
from ionfault.simulator import (
    DeviceModel,
    FaultDistribution,
    StateVector,
    TargetOnlyExecutor,
    apply_ms,
    apply_single_qubit,
    concatenated_ms_sequence,
    fwht,
    inject_faults,
    ms_matrix,
    realize_circuit,
    rotation_matrix,
    run_statevector,
    sample_fault_distribution,
    sample_shots,
    simulate_test,
    simulate_test_statevector,
    target_probability_diagonal,
    xx_target_probability,
)
from ionfault.simulator.backends import RealizedCircuit
from ionfault.simulator.noise import mean_odd_population, residual_kick_angle

C = Coupling
X = np.array([[0, 1], [1, 0]], dtype=complex)


def expm_xx(theta):
    # exp(-i theta/2 X(x)X) via the identity (XX)^2 = 1
    xx = np.kron(X, X)
    return np.cos(theta / 2) * np.eye(4) - 1j * np.sin(theta / 2) * xx


# --------------------------------------------------------------- gates

def test_rotation_examples():
    st0 = StateVector.zeros([0])
    assert np.allclose(apply_single_qubit(st0, 0, rotation_matrix(0, 1.3)).amplitudes, [1, 0])
    out = apply_single_qubit(st0, 0, rotation_matrix(np.pi, 0)).amplitudes
    assert np.allclose(out, [0, -1j])
    out = apply_single_qubit(st0, 0, rotation_matrix(np.pi / 2, np.pi / 2)).amplitudes
    assert np.allclose(out, np.array([1, 1]) / np.sqrt(2))  # (|0> + |1>)/sqrt2 with these phases
    assert np.allclose(np.abs(out) ** 2, [0.5, 0.5])


def test_ms_examples():
    st2 = StateVector.zeros([0, 1])
    out = apply_ms(st2, 0, 1, ms_matrix(np.pi / 2)).amplitudes.reshape(-1)
    assert np.allclose(out, np.array([1, 0, 0, -1j]) / np.sqrt(2))
    assert np.allclose(np.abs(out) ** 2, [0.5, 0, 0, 0.5])
    m4 = np.linalg.matrix_power(ms_matrix(np.pi / 2), 4)
    assert np.allclose(m4, m4[0, 0] * np.eye(4)) and abs(abs(m4[0, 0]) - 1) < 1e-12


def test_index_errors():
    st2 = StateVector.zeros([0, 1])
    with pytest.raises(IndexError):
        apply_single_qubit(st2, 5, rotation_matrix(1, 0))
    with pytest.raises(IndexError):
        apply_ms(st2, 0, 0, ms_matrix(1))


def test_gate_unitarity():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        th, p1, p2 = rng.uniform(-2 * np.pi, 2 * np.pi, 3)
        r, m = rotation_matrix(th, p1), ms_matrix(th, p1, p2)
        assert np.abs(r.conj().T @ r - np.eye(2)).max() < 1e-12
        assert np.abs(m.conj().T @ m - np.eye(4)).max() < 1e-12


@pytest.mark.parametrize("theta", np.linspace(-np.pi, 2 * np.pi, 13))
def test_ms_reduces_to_xx(theta):
    assert np.abs(ms_matrix(theta) - expm_xx(theta)).max() < 1e-12


def test_phase_shift_flips_rotation_sign():
    assert np.allclose(ms_matrix(0.7, np.pi, 0), ms_matrix(-0.7))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["r", "ms"]), st.integers(0, 3), st.integers(0, 3),
                          st.floats(-6, 6), st.floats(-6, 6)), max_size=12))
def test_norm_conserved(ops):
    s = StateVector.zeros(range(4))
    for kind, a, b, th, ph in ops:
        if kind == "r":
            s = apply_single_qubit(s, a, rotation_matrix(th, ph))
        elif a != b:
            s = apply_ms(s, a, b, ms_matrix(th, ph, -ph))
    assert abs(s.norm() - 1) < 1e-10


# --------------------------------------------------------------- backends

def pair_circuit(theta, reps=1, N=2):
    return RealizedCircuit(N, (("ms", 0, 1, theta, 0.0, 0.0, False),) * reps)


def test_diagonal_examples():
    assert xx_target_probability(pair_circuit(np.pi / 2), "00") == pytest.approx(0.5)
    assert xx_target_probability(pair_circuit(np.pi / 2, 2), "11") == pytest.approx(1.0)
    assert xx_target_probability(pair_circuit(np.pi / 2, 2), "01") == 0.0


def test_single_pair_47_percent_at_four_reps():
    dev = inject_faults(DeviceModel.noiseless(8), [(C(0, 4), 0.47)])
    t = make_test("t", [C(0, 4)], 4, 300, 0.25, 8)
    p = target_probability_diagonal(dev, t)
    assert p == pytest.approx(np.cos(0.53 * np.pi) ** 2, abs=1e-12)
    assert p == pytest.approx(0.0089, abs=5e-4)


def test_applied_angle_after_injection():
    dev = inject_faults(DeviceModel.noiseless(8), [(C(0, 4), 0.47)])
    circ = realize_circuit(dev, make_test("t", [C(0, 4)], 2, 1, 0.45, 8), np.random.default_rng(0))
    assert [op[3] for op in circ.ops] == pytest.approx([0.53 * np.pi / 2] * 2)


def test_fwht_matches_definition():
    rng = np.random.default_rng(3)
    a = rng.normal(size=16)
    direct = [sum((-1) ** bin(x & y).count("1") * a[x] for x in range(16)) for y in range(16)]
    assert np.allclose(fwht(a), direct)
    with pytest.raises(ValueError):
        fwht(np.ones(6))


def random_xx_circuit(rng, m_max=12):
    m = int(rng.integers(2, m_max + 1))
    qubits = sorted(rng.choice(16, m, replace=False).tolist())
    pairs = [(a, b) for i, a in enumerate(qubits) for b in qubits[i + 1:]]
    k = int(rng.integers(1, min(len(pairs), 14) + 1))
    idx = rng.choice(len(pairs), k, replace=False)
    ops = []
    for j in idx:
        a, b = pairs[j]
        ops.append(("ms", a, b, float(rng.uniform(0, 2 * np.pi)), 0.0, 0.0, False))
    return RealizedCircuit(16, tuple(ops))


def test_backend_equivalence_random_circuits():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        circ = random_xx_circuit(rng)
        qubits = circ.qubits
        st_ = run_statevector(circ)
        probs = st_.probabilities()
        for _ in range(3):
            y = rng.integers(0, 2, len(qubits))
            target = ["0"] * 16
            for q, bit in zip(qubits, y):
                target[q] = str(bit)
            idx = int("".join(str(b) for b in y), 2)
            worst = max(worst, abs(probs[idx] - xx_target_probability(circ, "".join(target))))
    assert worst < 1e-10


def test_diagonal_handles_disconnected_components():
    # two disjoint pairs: probability factorises, an odd-weight component gives zero
    ops = (("ms", 0, 1, 0.4, 0.0, 0.0, False), ("ms", 2, 3, 1.1, 0.0, 0.0, False))
    circ = RealizedCircuit(4, ops)
    p = xx_target_probability(circ, "1100")
    assert p == pytest.approx(np.sin(0.2) ** 2 * np.cos(0.55) ** 2, abs=1e-12)
    assert xx_target_probability(circ, "1000") == 0.0


def test_simulate_test_backends_agree_on_device():
    dev = inject_faults(DeviceModel(8, residual_odd_population=0.0), [(C(1, 5), 0.2)])
    t = make_test("t", [C(0, 1), C(1, 5), C(2, 5), C(3, 6)], 2, 500, 0.45, 8)
    a = simulate_test(dev, t, 7, backend="diagonal")
    b = simulate_test_statevector(dev, t, 7)
    assert abs(a.fidelity - b.fidelity) < 0.1


def test_unknown_backend_and_cap():
    t = make_test("t", [C(0, 1)], 2, 10, 0.45, 4)
    with pytest.raises(UnsupportedBackendError):
        simulate_test(DeviceModel.noiseless(4), t, 0, backend="gpu")
    big = make_test("t", [C(a, a + 1) for a in range(0, 20, 2)], 2, 10, 0.45, 22)
    with pytest.raises(SimulationCapError):
        simulate_test(DeviceModel.noiseless(22), big, 0, backend="statevector", max_qubits=8)


def test_diagonal_rejects_non_xx():
    dev = DeviceModel.noiseless(4, coupling_phases={C(0, 1): (0.3, 0.0)})
    t = make_test("t", [C(0, 1)], 2, 10, 0.45, 4)
    with pytest.raises(UnsupportedBackendError):
        target_probability_diagonal(dev, t)


def test_noiseless_even_reps_fidelity_one():
    rel = sorted(all_couplings(8))
    for reps in (2, 4, 6):
        t = make_test("t", rel[::3], reps, 100, 0.5, 8)
        assert simulate_test(DeviceModel.noiseless(8), t, 0).fidelity == 1.0


def test_simulation_is_deterministic():
    dev = DeviceModel(8)
    t = make_test("t", sorted(all_couplings(8))[:6], 2, 300, 0.45, 8)
    assert simulate_test(dev, t, 11).counts == simulate_test(dev, t, 11).counts
    ex1, ex2 = TargetOnlyExecutor(dev.with_noise(residual_odd_population=0.0), seed=4), \
        TargetOnlyExecutor(dev.with_noise(residual_odd_population=0.0), seed=4)
    assert ex1.run(t).counts == ex2.run(t).counts


# --------------------------------------------------------------- sampling

def test_sample_shots():
    assert sample_shots(1.0, 300, 0) == (300, 0)
    assert sample_shots(0.0, 300, 0) == (0, 300)
    for seed in range(5):
        hits, _ = sample_shots(0.5, 10**6, seed)
        assert abs(hits / 10**6 - 0.5) < 0.002
    assert sample_shots(0.3, 100, 9) == sample_shots(0.3, 100, 9)
    with pytest.raises(ValueError):
        sample_shots(1.2, 10, 0)


def test_fault_distribution_density_height():
    assert FaultDistribution(0.05).a == pytest.approx(8.152, abs=1e-3)


def test_fault_distribution_uniform_mass():
    s = sample_fault_distribution(0.15, 10**5, 0)
    assert abs((s <= 0.06).mean() - 0.06 * FaultDistribution(0.15).a) < 0.01


def test_fault_distribution_tiny_sigma():
    s = sample_fault_distribution(1e-9, 1000, 1)
    assert s.max() < 0.06 + 1e-6


@pytest.mark.parametrize("sigma", [0.05, 0.15])
def test_fault_distribution_ks(sigma):
    d = FaultDistribution(sigma)
    s = sample_fault_distribution(sigma, 10**5, 42)
    assert stats.kstest(s, d.cdf).statistic < 0.01
    assert d.cdf(10.0) == pytest.approx(1.0)


# --------------------------------------------------------------- injection

def test_inject_faults():
    dev = DeviceModel.noiseless(8)
    assert inject_faults(dev, []) == dev
    assert inject_faults(dev, [(C(0, 4), 0.0)]) == dev
    d2 = inject_faults(dev, [(C(0, 4), 0.47)])
    assert d2.coupling_error == {C(0, 4): -0.47}
    with pytest.warns(UserWarning):
        d3 = inject_faults(dev, [(C(0, 4), 0.1), ((4, 0), 0.2)])
    assert d3.coupling_error == {C(0, 4): -0.2}


# --------------------------------------------------------------- noise processes

def test_residual_kick_inverts_mean_odd_population():
    assert residual_kick_angle(0.0) == 0.0
    t = residual_kick_angle(0.01)
    assert mean_odd_population(t) == pytest.approx(0.01, abs=1e-9)


# --------------------------------------------------------------- concatenated sequences

def test_echo_noiseless_is_exact():
    out = concatenated_ms_sequence(DeviceModel.noiseless(2), C(0, 1), [2, 4, 6, 8, 20], echo=True)
    assert all(v == pytest.approx(0, abs=1e-12) for _, v in out)


def test_non_echo_static_error():
    dev = DeviceModel.noiseless(2, {C(0, 1): 0.05})
    ((m, inf),) = concatenated_ms_sequence(dev, C(0, 1), [4], echo=False)
    assert inf == pytest.approx(1 - np.cos(0.05 * np.pi) ** 2, abs=1e-12)
    assert inf == pytest.approx(0.0245, abs=1e-4)
    ((_, echoed),) = concatenated_ms_sequence(dev, C(0, 1), [4], echo=True)
    assert echoed == pytest.approx(0, abs=1e-12)


def test_sequence_rejects_odd_counts():
    with pytest.raises(ValueError):
        concatenated_ms_sequence(DeviceModel.noiseless(2), C(0, 1), [3], echo=False)


def test_echo_beats_plain_under_phase_noise():
    from ionfault.simulator import PhaseNoise
    dev = DeviceModel(2, {C(0, 1): 0.05}, amplitude_noise_std=0.0,
                      phase_noise=PhaseNoise(rms=0.05), residual_odd_population=0.0)
    counts = [8, 16, 24]
    e = dict(concatenated_ms_sequence(dev, C(0, 1), counts, echo=True, trials=20))
    p = dict(concatenated_ms_sequence(dev, C(0, 1), counts, echo=False, trials=20))
    assert all(e[m] <= p[m] for m in counts)


def test_echo_growth_is_slower():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        dev = DeviceModel(2, {C(0, 1): 0.03})
    counts = [2, 10, 20]
    e = dict(concatenated_ms_sequence(dev, C(0, 1), counts, echo=True, trials=10))
    p = dict(concatenated_ms_sequence(dev, C(0, 1), counts, echo=False, trials=10))
    assert e[20] - e[2] < p[20] - p[2]
