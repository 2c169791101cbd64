import math

import numpy as np
import pytest

from qx.circuit import (
    BUILTIN_GATES,
    Call,
    Circuit,
    Gate,
    SubroutineDef,
    circuit_from_json,
    custom_gate,
    gate_unitary,
    inline_subroutines,
    serialize_ir,
    to_dsl,
    validate_circuit,
)
from qx.errors import ValidationError
from qx.generate import random_circuit
from qx.oracle import run_dense
from qx.parser import parse_circuit

H = 1 / math.sqrt(2)
ZERO = (1 + 0j, 0j)


def test_ry_pi():
    np.testing.assert_allclose(gate_unitary(Gate("RY", (0,), math.pi)), [[0, -1], [1, 0]], atol=1e-15)


def test_ry_matches_rotation_formula():
    # R_y(θ) = I cos(θ/2) − iY sin(θ/2)
    y = np.array([[0, -1j], [1j, 0]])
    for theta in np.linspace(0, 2 * math.pi, 17):
        want = np.eye(2) * math.cos(theta / 2) - 1j * y * math.sin(theta / 2)
        np.testing.assert_allclose(gate_unitary(Gate("RY", (0,), theta)), want, atol=1e-15)


def test_cnot_is_permutation():
    want = np.eye(4)[[0, 1, 3, 2]]
    np.testing.assert_array_equal(gate_unitary(Gate("CNOT", (0, 1))), want)


def test_hadamard_is_x_plus_z_over_root2():
    x = np.array([[0, 1], [1, 0]])
    z = np.array([[1, 0], [0, -1]])
    np.testing.assert_allclose(gate_unitary(Gate("H", (0,))), (x + z) / math.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("kind", sorted(BUILTIN_GATES))
def test_builtin_unitarity(kind):
    arity, parametric, _ = BUILTIN_GATES[kind]
    thetas = [2 * math.pi * i / 100 for i in range(100)] if parametric else [None]
    for theta in thetas:
        u = gate_unitary(Gate(kind, tuple(range(arity)), theta))
        assert u.shape == (1 << arity, 1 << arity)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(1 << arity), atol=1e-12)


def test_ccx_is_controlled_cnot():
    cnot = gate_unitary(Gate("CNOT", (0, 1)))
    want = np.block([[np.eye(4), np.zeros((4, 4))], [np.zeros((4, 4)), cnot]])
    np.testing.assert_array_equal(gate_unitary(Gate("CCX", (0, 1, 2))), want)


def test_cry_and_cz_blocks():
    theta = 0.7
    u = gate_unitary(Gate("CRY", (0, 1), theta))
    np.testing.assert_allclose(u[:2, :2], np.eye(2))
    np.testing.assert_allclose(u[2:, 2:], gate_unitary(Gate("RY", (0,), theta)))
    np.testing.assert_array_equal(np.diag(gate_unitary(Gate("CZ", (0, 1)))), [1, 1, 1, -1])


@pytest.mark.parametrize(
    "gate",
    [
        Gate("CNOT", (0,)),
        Gate("CNOT", (0, 0)),
        Gate("H", (5,)),
        Gate("RY", (0,)),
        Gate("H", (0,), 1.0),
        Gate("FOO", (0,)),
        Gate("CUSTOM", (0,), None, "U", ((1, 1), (1, 1))),
    ],
)
def test_validation_rejects(gate):
    with pytest.raises(ValidationError):
        validate_circuit(Circuit(2, (ZERO, ZERO), (), (gate,)))


def test_validation_rejects_recursion_and_bad_state():
    a = SubroutineDef("A", ("x",), (Call("B", (0,)),))
    b = SubroutineDef("B", ("x",), (Call("A", (0,)),))
    with pytest.raises(ValidationError, match="recursive"):
        validate_circuit(Circuit(1, (ZERO,), (a, b), ()))
    with pytest.raises(ValidationError, match="normalized"):
        validate_circuit(Circuit(1, ((1, 1),), (), ()))


def test_inline_without_calls_is_identity(circuits):
    c = circuits["fig1"]
    assert inline_subroutines(c) == c


def test_inline_src(circuits):
    flat = inline_subroutines(circuits["src"])
    assert flat.defs == ()
    assert flat.program == (Gate("H", (0,)), Gate("CNOT", (0, 1)), Gate("CNOT", (0, 2)))


def test_inline_shor(circuits):
    flat = inline_subroutines(circuits["shor"])
    assert len(flat.program) == 11
    assert flat.program[:2] == (Gate("CNOT", (0, 3)), Gate("CNOT", (0, 6)))
    assert flat.program[-3:] == (Gate("H", (6,)), Gate("CNOT", (6, 7)), Gate("CNOT", (6, 8)))


def test_inline_nested_preserves_order():
    inner = SubroutineDef("IN", ("p", "q"), (Gate("CNOT", (1, 0)),))
    outer = SubroutineDef("OUT", ("a", "b", "c"), (Gate("H", (2,)), Call("IN", (2, 0)), Gate("X", (1,))))
    c = Circuit(3, (ZERO,) * 3, (inner, outer), (Call("OUT", (1, 2, 0)),))
    flat = inline_subroutines(validate_circuit(c))
    assert flat.program == (Gate("H", (0,)), Gate("CNOT", (1, 0)), Gate("X", (2,)))


def test_inline_preserves_semantics(rng):
    for _ in range(30):
        c = random_circuit(rng, max_qubits=5, max_gates=8, with_defs=True)
        a = run_dense(c).amplitudes
        b = run_dense(inline_subroutines(c)).amplitudes
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_serialize_fig1(circuits):
    text = serialize_ir(circuits["fig1"])
    assert '"wire_count":2' in text
    assert text.count('"op":"gate"') == 1
    assert text.startswith('{"defs":[]')


def test_serialize_empty():
    c = Circuit(1, (ZERO,))
    assert serialize_ir(c) == (
        '{"defs":[],"initial":[[[1,0],[0,0]]],"matrices":{},"program":[],"wire_count":1}'
    )


def test_serialize_round_trip(circuits):
    for c in circuits.values():
        assert circuit_from_json(serialize_ir(c)) == c


def test_serialize_uses_17_digits():
    c = Circuit(1, ((0.6, 0.8),))
    assert "0.59999999999999998" in serialize_ir(c)


def test_serialize_custom_gate_round_trip():
    g = custom_gate("SQX", [[0.5 + 0.5j, 0.5 - 0.5j], [0.5 - 0.5j, 0.5 + 0.5j]], (0,))
    c = validate_circuit(Circuit(1, (ZERO,), (), (g,)))
    back = circuit_from_json(serialize_ir(c))
    assert back == c


def test_dsl_writer_round_trip(rng):
    for _ in range(50):
        c = random_circuit(rng, with_defs=True)
        assert parse_circuit(to_dsl(c)) == c


def test_malformed_json():
    with pytest.raises(ValidationError):
        circuit_from_json('{"wire_count": 1}')
