"""Dense statevector reference simulator.

Deliberately shares nothing with :mod:`qx.engine` except the circuit IR and
:func:`~qx.circuit.gate_unitary`: states are flat arrays and gates are applied
by explicit index arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, gate_unitary, inline_subroutines
from .errors import DimensionMismatch, TooManyQubits

MAX_QUBITS = 20


@dataclass(frozen=True, eq=False)
class DenseState:
    wire_count: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (1 << self.wire_count,):
            raise DimensionMismatch(
                f"{self.wire_count} wires need {1 << self.wire_count} amplitudes, got {self.amplitudes.shape}"
            )


def initial_vector(c: Circuit) -> np.ndarray:
    n = c.wire_count
    idx = np.arange(1 << n)
    out = np.ones(1 << n, dtype=np.complex128)
    for w, (a0, a1) in enumerate(c.initial):
        bit = (idx >> (n - 1 - w)) & 1
        out *= np.where(bit == 1, a1, a0)
    return out


def apply_dense(vec: np.ndarray, n: int, g: Gate) -> np.ndarray:
    """Apply ``g`` to a full 2**n vector by gathering and scattering indices."""
    u = gate_unitary(g)
    k = len(g.wires)
    idx = np.arange(1 << n)
    shifts = [n - 1 - w for w in g.wires]
    sub = np.zeros_like(idx)
    base = idx.copy()
    for j, sh in enumerate(shifts):
        bit = (idx >> sh) & 1
        sub |= bit << (k - 1 - j)
        base &= ~(1 << sh)
    out = np.zeros_like(vec)
    for m in range(1 << k):
        src = base.copy()
        for j, sh in enumerate(shifts):
            if (m >> (k - 1 - j)) & 1:
                src |= 1 << sh
        out += u[sub, m] * vec[src]
    return out


def run_dense(c: Circuit) -> DenseState:
    if c.wire_count > MAX_QUBITS:
        raise TooManyQubits(f"dense simulation is limited to {MAX_QUBITS} qubits, got {c.wire_count}")
    flat = inline_subroutines(c)
    vec = initial_vector(flat)
    for g in flat.program:
        vec = apply_dense(vec, flat.wire_count, g)
    return DenseState(flat.wire_count, vec)


def fidelity(u: DenseState, v: DenseState) -> float:
    """Squared overlap ``|<u|v>|**2``."""
    if u.wire_count != v.wire_count:
        raise DimensionMismatch(f"cannot compare {u.wire_count}-wire and {v.wire_count}-wire states")
    return float(abs(np.vdot(u.amplitudes, v.amplitudes)) ** 2)


@dataclass(frozen=True)
class VerifyReport:
    fidelity: float
    branch_count: int
    policy: str
    passed: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "fidelity": self.fidelity,
                "branch_count": self.branch_count,
                "policy": self.policy,
                "pass": self.passed,
            }
        )


def verify(c: Circuit, policy=None, tol: float = 1e-9) -> VerifyReport:
    """Compare the branch decomposition of ``c`` against the dense oracle."""
    from .engine import Policy, run_circuit
    from .state import reconstruct_statevector

    policy = policy or Policy()
    result = run_circuit(c, policy)
    mine = DenseState(c.wire_count, reconstruct_statevector(result.final))
    ref = run_dense(c)
    f = fidelity(mine, ref)
    return VerifyReport(f, len(result.final), policy.mode.value, f >= 1 - tol)
