"""Device simulation: gate matrices, device model, backends and samplers."""
from .backends import (
    StateVector,
    apply_ms,
    apply_single_qubit,
    apply_swap,
    fwht,
    ideal_output,
    realize_circuit,
    run_statevector,
    xx_distribution,
    xx_target_probability,
)
from .device import DeviceModel, PhaseNoise, inject_faults
from .executor import (
    OTHER,
    SimulatorExecutor,
    TargetOnlyExecutor,
    sample_shots,
    simulate_test,
    simulate_test_statevector,
    spec_rng,
    target_probability_diagonal,
)
from .faults import FaultDistribution, sample_fault_distribution
from .gates import MSGate, SingleQubitGate, ms_matrix, rotation_matrix
from .noise import mean_odd_population, phase_noise_offsets, residual_kick_angle
from .sequences import concatenated_ms_sequence, simulate_parity_scan
