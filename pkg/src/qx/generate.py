"""Seeded random circuits for property and equivalence testing."""

from __future__ import annotations

import math

import numpy as np

from .circuit import BUILTIN_GATES, Call, Circuit, Gate, SubroutineDef, validate_circuit


def random_qubit(rng: np.random.Generator) -> tuple[complex, complex]:
    choice = rng.integers(4)
    if choice == 0:
        return (1 + 0j, 0j)
    if choice == 1:
        return (0j, 1 + 0j)
    v = rng.normal(size=2) + (1j * rng.normal(size=2) if choice == 3 else 0)
    v = v / np.linalg.norm(v)
    return complex(v[0]), complex(v[1])


def random_gate(rng: np.random.Generator, n: int, kinds: list[str] | None = None) -> Gate:
    kinds = kinds or [k for k, (arity, _, _) in BUILTIN_GATES.items() if arity <= n]
    kind = str(rng.choice(kinds))
    arity, parametric, _ = BUILTIN_GATES[kind]
    wires = tuple(int(w) for w in rng.choice(n, size=arity, replace=False))
    theta = float(rng.uniform(0, 2 * math.pi)) if parametric else None
    return Gate(kind, wires, theta)


def random_circuit(
    rng: np.random.Generator,
    max_qubits: int = 6,
    max_gates: int = 20,
    with_defs: bool = False,
) -> Circuit:
    """Circuit over 1..max_qubits wires with up to max_gates gates of every builtin kind.

    With ``with_defs`` a random subroutine (possibly calling a second one) is
    defined and called from the program. Each call expands to several gates,
    so the inlined program may then exceed ``max_gates``.
    """
    n = int(rng.integers(1, max_qubits + 1))
    initial = tuple(random_qubit(rng) for _ in range(n))
    defs: list[SubroutineDef] = []
    if with_defs and n >= 2:
        k_inner = int(rng.integers(1, min(n, 3) + 1))
        inner = SubroutineDef(
            "INNER",
            tuple(f"p{i}" for i in range(k_inner)),
            tuple(random_gate(rng, k_inner) for _ in range(int(rng.integers(1, 3)))),
        )
        k_outer = int(rng.integers(k_inner, min(n, 4) + 1))
        body: list = [random_gate(rng, k_outer) for _ in range(int(rng.integers(0, 3)))]
        sub = tuple(int(w) for w in rng.choice(k_outer, size=k_inner, replace=False))
        body.insert(int(rng.integers(0, len(body) + 1)), Call("INNER", sub))
        defs = [inner, SubroutineDef("OUTER", tuple(f"a{i}" for i in range(k_outer)), tuple(body))]
    program: list = []
    for _ in range(int(rng.integers(0, max_gates + 1))):
        if defs and rng.random() < 0.15:
            k = len(defs[1].params)
            program.append(Call("OUTER", tuple(int(w) for w in rng.choice(n, size=k, replace=False))))
        else:
            program.append(random_gate(rng, n))
    return validate_circuit(Circuit(n, initial, tuple(defs), tuple(program)))
