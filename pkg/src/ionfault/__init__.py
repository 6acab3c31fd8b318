"""Combinatorial diagnosis of miscalibrated two-qubit couplings in all-to-all ion traps."""
from .bitclasses import BitClass, Coupling, EqClass, Syndrome, all_couplings, pad_to_power_of_two
from .circuits import TestResult, TestSpec, target_bitstring
from .protocol import (
    CostLedger,
    Diagnosis,
    OracleExecutor,
    ProtocolConfig,
    diagnose,
    run_multi_fault_protocol,
    run_single_fault_protocol,
)

__version__ = "0.1.0"
