import math

import numpy as np
import pytest

from qx.circuit import Circuit, Gate
from qx.engine import Mode, Policy, apply_gate, effective_actions, refactorize, run_circuit
from qx.errors import BranchBudgetExceeded, ControlEntangled
from qx.generate import random_circuit
from qx.oracle import apply_dense, run_dense
from qx.state import Branch, Factor, Superposition, reconstruct_statevector

H = 1 / math.sqrt(2)
SPLIT = Policy(Mode.SPLIT)
BLOCK = Policy(Mode.BLOCK)


def product(*pairs):
    return Superposition.product(pairs)


def retensor(terms, wires):
    n = len(wires)
    sub = Superposition(n, tuple(
        Branch(c, tuple(Factor(tuple(wires.index(w) for w in f.wires), f.amplitudes) for f in fs))
        for c, fs in terms
    ))
    return reconstruct_statevector(sub)


# -- effective_actions ------------------------------------------------------


def test_effective_actions_cnot_superposed_control():
    b = product((0.6, 0.8), (1, 0)).branches[0]
    acts = effective_actions(b, Gate("CNOT", (0, 1)))
    assert [(bits, label) for bits, label, _ in acts] == [((0,), "I"), ((1,), "X")]
    assert [w for *_, w in acts] == pytest.approx([0.6, 0.8])


def test_effective_actions_definite_control():
    b = product((1, 0), (1, 0)).branches[0]
    assert effective_actions(b, Gate("CNOT", (0, 1))) == [((0,), "I", 1)]


def test_effective_actions_cry():
    b = product((0.6, 0.8), (1, 0)).branches[0]
    acts = effective_actions(b, Gate("CRY", (0, 1), math.pi / 3))
    assert [label for _, label, _ in acts] == ["I", "RY(1.047)"]
    assert [w for *_, w in acts] == pytest.approx([0.6, 0.8])


def test_effective_actions_ccx_and_cz():
    b = product((H, H), (H, H), (1, 0)).branches[0]
    acts = effective_actions(b, Gate("CCX", (0, 1, 2)))
    assert [bits for bits, *_ in acts] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert [label for _, label, _ in acts] == ["I", "I", "I", "X"]
    assert [w for *_, w in acts] == pytest.approx([0.5] * 4)
    assert effective_actions(b, Gate("CZ", (1, 0)))[1][1] == "Z"


def test_effective_actions_entangled_control():
    b = Branch(1, (Factor((0, 1), [H, 0, 0, H]), Factor.basis(2, 0)))
    with pytest.raises(ControlEntangled):
        effective_actions(b, Gate("CNOT", (0, 2)))


# -- refactorize ------------------------------------------------------------


def test_refactorize_separable():
    terms = refactorize(np.array([1, 1, 0, 0]) / math.sqrt(2), (0, 1), SPLIT)
    assert len(terms) == 1
    scalar, (a, b) = terms[0]
    assert a.basis_bit() == 0
    np.testing.assert_allclose(b.amplitudes, [H, H])
    assert abs(scalar - 1) < 1e-12


def test_refactorize_bell_split():
    terms = refactorize(np.array([1, 0, 0, 1]) / math.sqrt(2), (0, 1), SPLIT)
    assert [c for c, _ in terms] == pytest.approx([H, H])
    assert [[f.basis_bit() for f in fs] for _, fs in terms] == [[0, 0], [1, 1]]


def test_refactorize_ghz_block():
    v = np.zeros(8)
    v[0] = v[7] = H
    terms = refactorize(v, (0, 1, 2), BLOCK)
    assert len(terms) == 1
    scalar, fs = terms[0]
    assert len(fs) == 1 and fs[0].wires == (0, 1, 2)
    np.testing.assert_allclose(fs[0].amplitudes, v, atol=1e-12)


def test_refactorize_block_finds_finest_partition():
    # Bell(0,2) ⊗ |+>_1 ⊗ Bell(3,4): blocks {0,2} and {3,4}, single {1}
    bell = np.array([H, 0, 0, H])
    t = np.einsum("ac,b,de->abcde", bell.reshape(2, 2), [H, H], bell.reshape(2, 2))
    terms = refactorize(t.reshape(-1), (0, 1, 2, 3, 4), BLOCK)
    assert len(terms) == 1
    assert sorted(f.wires for f in terms[0][1]) == [(0, 2), (1,), (3, 4)]


def test_refactorize_reconstruction_random(rng):
    for _ in range(1000):
        k = int(rng.integers(1, 5))
        v = rng.normal(size=1 << k) + 1j * rng.normal(size=1 << k)
        v /= np.linalg.norm(v)
        wires = tuple(range(k))
        for policy in (SPLIT, BLOCK):
            got = retensor(refactorize(v, wires, policy), list(wires))
            assert np.max(np.abs(got - v)) <= k * 1e-9


def test_refactorize_budget():
    v = np.ones(16) / 4.0
    v[5] = -v[5]
    with pytest.raises(BranchBudgetExceeded):
        refactorize(v, (0, 1, 2, 3), Policy(Mode.SPLIT, max_branches=1))


# -- apply_gate -------------------------------------------------------------


def test_apply_cnot_fig1():
    s, events = apply_gate(product((0.6, 0.8), (1, 0)), Gate("CNOT", (0, 1)), SPLIT)
    assert len(s) == 2
    assert [b.coefficient for b in s.branches] == pytest.approx([0.6, 0.8])
    assert [[f.basis_bit() for f in b.factors] for b in s.branches] == [[0, 0], [1, 1]]
    assert [e.effective_label for e in events] == ["I", "X"]
    assert all(e.parent_id == "b0" for e in events)


def test_apply_hadamard_never_splits():
    s, events = apply_gate(product((1, 0)), Gate("H", (0,)))
    assert len(s) == 1
    np.testing.assert_allclose(s.branches[0].factors[0].amplitudes, [H, H])
    assert events[0].parent_id is None and events[0].effective_label == "H"


def test_apply_cry_on_definite_branch():
    s = Superposition(2, (Branch(0.6, (Factor.basis(0, 1), Factor.basis(1, 0))),))
    out, _ = apply_gate(s, Gate("CRY", (0, 1), math.pi / 3), SPLIT)
    assert len(out) == 1
    b = out.branches[0]
    assert b.coefficient == pytest.approx(0.6)
    # cos(π/6), sin(π/6)
    np.testing.assert_allclose(b.factors[1].amplitudes, [math.cos(math.pi / 6), math.sin(math.pi / 6)])
    np.testing.assert_allclose(b.factors[1].amplitudes, [0.866025, 0.5], atol=1e-6)


@pytest.mark.parametrize("mode", [Mode.SPLIT, Mode.BLOCK])
def test_apply_gate_matches_dense_action(mode, rng):
    policy = Policy(mode)
    for _ in range(40):
        c = random_circuit(rng, max_qubits=5, max_gates=10)
        r = run_circuit(c, policy)
        s = r.final
        for g in c.program[:3]:
            before = reconstruct_statevector(s)
            s, _ = apply_gate(s, g, policy)
            after = reconstruct_statevector(s)
            np.testing.assert_allclose(after, apply_dense(before, c.wire_count, g), atol=1e-9)


def test_split_count_law():
    # superposed control, definite target: exactly two children
    for amps in [(0.6, 0.8), (H, -H), (1e-6, math.sqrt(1 - 1e-12))]:
        s, _ = apply_gate(product(amps, (1, 0)), Gate("CNOT", (0, 1)), SPLIT)
        assert len(s) == 2
    for bit in (0, 1):
        s, _ = apply_gate(product((1 - bit, bit), (1, 0)), Gate("CNOT", (0, 1)), SPLIT)
        assert len(s) == 1


def test_block_mode_keeps_entanglement():
    s, events = apply_gate(product((H, H), (1, 0)), Gate("CNOT", (0, 1)), BLOCK)
    assert len(s) == 1
    (f,) = s.branches[0].factors
    assert f.wires == (0, 1)
    assert events[0].effective_label == "CNOT" and events[0].collapsed_controls is None


def test_budget_exceeded():
    c = Circuit(3, ((H, H),) * 3, (), (Gate("CNOT", (0, 1)), Gate("CNOT", (2, 1))))
    with pytest.raises(BranchBudgetExceeded):
        run_circuit(c, Policy(Mode.SPLIT, max_branches=3))
    assert len(run_circuit(c, Policy(Mode.SPLIT, max_branches=4)).final) == 4


# -- run_circuit ------------------------------------------------------------


def test_run_fig1(circuits):
    r = run_circuit(circuits["fig1"], SPLIT)
    assert len(r.final) == 2
    np.testing.assert_allclose(reconstruct_statevector(r.final), [0.6, 0, 0, 0.8], atol=1e-12)
    assert [[e.effective_label for e in rec.lineage] for rec in r.records] == [["I"], ["X"]]


def test_run_src_block(circuits):
    r = run_circuit(circuits["src"], BLOCK)
    assert [b.coefficient for b in r.final.branches] == pytest.approx([0.6, 0.8])
    psi = [b.factors[0].amplitudes for b in r.final.branches]
    np.testing.assert_allclose(psi[0], [H, 0, 0, 0, 0, 0, 0, H], atol=1e-12)
    np.testing.assert_allclose(psi[1], [H, 0, 0, 0, 0, 0, 0, -H], atol=1e-12)


def test_run_src_split(circuits):
    r = run_circuit(circuits["src"], SPLIT)
    x, y = 0.6, 0.8
    assert [b.coefficient for b in r.final.branches] == pytest.approx(
        [(x + y) / math.sqrt(2), (x - y) / math.sqrt(2)], abs=1e-12
    )
    assert [b.coefficient.real for b in r.final.branches] == pytest.approx([0.98995, -0.14142], abs=1e-5)
    assert [[f.basis_bit() for f in b.factors] for b in r.final.branches] == [[0, 0, 0], [1, 1, 1]]


def test_stage_states_and_lineage(circuits):
    r = run_circuit(circuits["src"], SPLIT)
    assert r.stage_count == 3
    for rec in r.records:
        assert len(rec.stages) == 4 and len(rec.lineage) == 3
        assert [e.stage for e in rec.lineage] == [1, 2, 3]
        assert rec.parent == "b0"
        for e in rec.lineage:
            assert (e.parent_id is not None) == (e.stage == 2)


def test_run_is_deterministic(circuits):
    from qx.render import export_trace_json

    for c in circuits.values():
        for policy in (SPLIT, BLOCK):
            assert export_trace_json(run_circuit(c, policy)) == export_trace_json(run_circuit(c, policy))


def test_empty_program():
    c = Circuit(2, ((1, 0), (1, 0)))
    r = run_circuit(c)
    assert len(r.final) == 1 and r.records[0].lineage == ()
    np.testing.assert_allclose(reconstruct_statevector(r.final), run_dense(c).amplitudes)
