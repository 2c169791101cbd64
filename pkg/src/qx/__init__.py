"""Quantum circuits as sums of product-state branches (extended graphs)."""

from .circuit import Call, Circuit, Gate, SubroutineDef, gate_unitary, inline_subroutines, serialize_ir
from .engine import Mode, Policy, RunResult, TraceEvent, apply_gate, effective_actions, refactorize, run_circuit
from .oracle import DenseState, fidelity, run_dense, verify
from .parser import load_circuit, parse_circuit, parse_ket_expression
from .state import (
    Branch,
    Factor,
    NamedStateRegistry,
    Superposition,
    canonicalize_factor,
    default_registry,
    match_named_state,
    merge_and_prune,
    reconstruct_statevector,
    register_named_state,
)

__version__ = "0.1.0"
