"""Branch-by-branch simulation producing extended graphs.

Every branch of the running :class:`~qx.state.Superposition` is a product
state. A controlled gate whose controls are single-wire factors splits a branch
into one child per control assignment; in each child the gate reduces to an
*effective action* on the target (``I`` when any control is 0, the base gate
otherwise). Other entangling gates go through the generic path: the touched
factors are contracted, the gate is applied, and the result is factorized
again according to the :class:`Policy`.

``Mode.SPLIT`` expands anything entangled in the computational basis, so every
factor stays a single wire. ``Mode.BLOCK`` expands only the superposed inputs
and keeps entanglement created by gates as multi-wire block factors.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuit import BUILTIN_GATES, Circuit, Gate, base_unitary, gate_unitary, inline_subroutines
from .errors import BranchBudgetExceeded, ControlEntangled
from .state import (
    EPS_MERGE,
    EPS_PRUNE,
    EPS_ZERO,
    Branch,
    Factor,
    Superposition,
    canonicalize_factor,
    factors_key,
    merge_groups,
)

EPS_SEP = 1e-9
# Above this block width only single-wire peeling is attempted.
MAX_PARTITION_SEARCH = 12


class Mode(str, enum.Enum):
    SPLIT = "split"
    BLOCK = "block"


@dataclass(frozen=True)
class Policy:
    mode: Mode = Mode.SPLIT
    max_branches: int = 4096
    eps_merge: float = EPS_MERGE
    eps_prune: float = EPS_PRUNE

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.max_branches < 1:
            raise ValueError("max_branches must be >= 1")
        if self.eps_merge <= 0 or self.eps_prune <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class TraceEvent:
    """What one gate did to one branch."""

    stage: int
    branch_id: str
    parent_id: str | None
    wires: tuple[int, ...]
    effective_label: str
    collapsed_controls: tuple[int, ...] | None = None
    merged: tuple[str, ...] = ()  # ids of branches folded into this one

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "branch_id": self.branch_id,
            "parent_id": self.parent_id,
            "wires": list(self.wires),
            "effective_label": self.effective_label,
            "collapsed_controls": None if self.collapsed_controls is None else list(self.collapsed_controls),
            "merged": list(self.merged),
        }


@dataclass(frozen=True)
class BranchRecord:
    """A final branch together with its complete history."""

    id: str
    parent: str | None
    branch: Branch
    lineage: tuple[TraceEvent, ...]
    stages: tuple[tuple[Factor, ...], ...]  # factors after stage 0 (input), 1, 2, ...


@dataclass(frozen=True)
class RunResult:
    circuit: Circuit  # inlined
    policy: Policy
    final: Superposition
    records: tuple[BranchRecord, ...]

    @property
    def events(self) -> list[TraceEvent]:
        return [e for r in self.records for e in r.lineage]

    @property
    def stage_states(self) -> list[tuple[tuple[Factor, ...], ...]]:
        return [r.stages for r in self.records]

    @property
    def stage_count(self) -> int:
        return len(self.circuit.program)


# ---------------------------------------------------------------------------
# effective actions


def effective_label(g: Gate, active: bool) -> str:
    if not active:
        return "I"
    base = {"CNOT": "X", "CCX": "X", "CZ": "Z", "CRY": "RY"}[g.kind]
    return g.label.replace(g.kind, base, 1) if g.theta is not None else base


def effective_actions(
    b: Branch, g: Gate, eps_prune: float = EPS_PRUNE
) -> list[tuple[tuple[int, ...], str, complex]]:
    """Per control assignment: the bits, the effective target label, the weight.

    The weight is the product of the control amplitudes for that assignment;
    assignments with weight at or below ``eps_prune`` are dropped.
    """
    if not g.is_controlled:
        raise ValueError(f"{g.kind} is not a controlled gate")
    amps = []
    for w in g.controls:
        f = b.factors[b.factor_of(w)]
        if f.width != 1:
            raise ControlEntangled(f"control wire {w} lies in an entangled block over wires {f.wires}")
        amps.append(f.amplitudes)
    out = []
    for bits in itertools.product((0, 1), repeat=len(amps)):
        weight = complex(np.prod([a[bit] for a, bit in zip(amps, bits)]))
        if abs(weight) > eps_prune:
            out.append((bits, effective_label(g, all(bits)), weight))
    return out


# ---------------------------------------------------------------------------
# refactorization


def _separable(t: np.ndarray, axes: Sequence[int]) -> tuple[bool, np.ndarray, np.ndarray]:
    """Test whether tensor ``t`` factorizes across ``axes`` | rest.

    Returns the flag plus the (unit) left vector and the scaled right vector of
    the leading Schmidt term.
    """
    rest = [a for a in range(t.ndim) if a not in axes]
    m = np.transpose(t, list(axes) + rest).reshape(1 << len(axes), -1)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    norm = float(np.linalg.norm(s))
    ok = len(s) < 2 or s[1] <= EPS_SEP * max(norm, EPS_ZERO)
    return ok, u[:, 0], s[0] * vh[0]


def _split_terms(t: np.ndarray, wires: tuple[int, ...], eps_prune: float) -> list[tuple[complex, list[Factor]]]:
    if len(wires) == 1:
        f, s = canonicalize_factor(Factor(wires, t.reshape(2)))
        return [(s, [f])]
    ok, left, right = _separable(t, [0])
    if ok:
        f, s = canonicalize_factor(Factor(wires[:1], left))
        rest = right.reshape((2,) * (len(wires) - 1))
        return [(s * c, [f] + fs) for c, fs in _split_terms(rest, wires[1:], eps_prune)]
    terms = []
    for bit in (0, 1):
        sub = t[bit]
        if np.linalg.norm(sub) > eps_prune:
            terms.extend(
                (c, [Factor.basis(wires[0], bit)] + fs)
                for c, fs in _split_terms(sub, wires[1:], eps_prune)
            )
    return terms


def _block_factors(t: np.ndarray, wires: tuple[int, ...]) -> tuple[complex, list[Factor]]:
    """Finest product partition of ``t``: each part a single wire or an inseparable block."""
    scalar = 1 + 0j
    factors: list[Factor] = []
    while True:
        k = len(wires)
        part: list[int] | None = None
        left = right = None
        sizes = range(1, k) if k <= MAX_PARTITION_SEARCH else [1]
        for size in sizes:
            for others in itertools.combinations(range(1, k), size - 1):
                axes = [0, *others]
                ok, left, right = _separable(t, axes)
                if ok:
                    part = axes
                    break
            if part is not None:
                break
        if part is None:
            f, s = canonicalize_factor(Factor(wires, t.reshape(-1)))
            return scalar * s, factors + [f]
        f, s = canonicalize_factor(Factor(tuple(wires[a] for a in part), left))
        factors.append(f)
        scalar *= s
        keep = [a for a in range(k) if a not in part]
        wires = tuple(wires[a] for a in keep)
        t = right.reshape((2,) * len(keep))


def refactorize(
    v: np.ndarray, wires: Sequence[int], policy: Policy | None = None
) -> list[tuple[complex, list[Factor]]]:
    """Rewrite a state over ``wires`` as a weighted list of product terms.

    Split mode peels the lowest wire when it is separable and otherwise expands
    it in the computational basis, recursing on both halves. Block mode peels
    every separable part and keeps what is left as entangled block factors, so
    it always returns a single term.
    """
    policy = policy or Policy()
    wires = tuple(wires)
    t = np.asarray(v, dtype=np.complex128).reshape((2,) * len(wires))
    if policy.mode is Mode.BLOCK:
        terms = [_block_factors(t, wires)]
    else:
        terms = _split_terms(t, wires, policy.eps_prune)
    if len(terms) > policy.max_branches:
        raise BranchBudgetExceeded(
            f"refactorizing {len(wires)} wires needs {len(terms)} branches (limit {policy.max_branches})"
        )
    return terms


# ---------------------------------------------------------------------------
# gate application


def _apply_local(t: np.ndarray, axes: Sequence[int], u: np.ndarray) -> np.ndarray:
    """Contract unitary ``u`` into tensor ``t`` on ``axes`` (first axis most significant)."""
    k = len(axes)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _contract(factors: Sequence[Factor]) -> tuple[np.ndarray, tuple[int, ...]]:
    t = np.ones((), dtype=np.complex128)
    order: list[int] = []
    for f in factors:
        t = np.tensordot(t, f.amplitudes.reshape((2,) * f.width), axes=0)
        order.extend(f.wires)
    perm = np.argsort(order)
    return np.transpose(t, perm), tuple(sorted(order))


@dataclass(frozen=True)
class _Child:
    branch: Branch
    label: str
    controls: tuple[int, ...] | None


def _children(b: Branch, g: Gate, policy: Policy) -> list[_Child]:
    if g.is_controlled and _fast_path_ok(b, g, policy):
        return _controlled_children(b, g, policy)
    return _generic_children(b, g, policy)


def _fast_path_ok(b: Branch, g: Gate, policy: Policy) -> bool:
    for w in g.controls:
        f = b.factors[b.factor_of(w)]
        if f.width != 1:
            return False
        # block mode keeps superposed controls entangled with their target
        if policy.mode is Mode.BLOCK and f.basis_bit() is None:
            return False
    return True


def _controlled_children(b: Branch, g: Gate, policy: Policy) -> list[_Child]:
    target = g.targets[0]
    ti = b.factor_of(target)
    tf = b.factors[ti]
    u = base_unitary(g)
    out = []
    for bits, label, weight in effective_actions(b, g, policy.eps_prune):
        coeff = b.coefficient * weight
        factors = list(b.factors)
        for w, bit in zip(g.controls, bits):
            factors[b.factor_of(w)] = Factor.basis(w, bit)
        if all(bits):
            t = tf.amplitudes.reshape((2,) * tf.width)
            t = _apply_local(t, [tf.wires.index(target)], u)
            f, s = canonicalize_factor(Factor(tf.wires, t.reshape(-1)))
            factors[ti] = f
            coeff *= s
        out.append(_Child(Branch(coeff, tuple(factors)), label, bits))
    return out


def _generic_children(b: Branch, g: Gate, policy: Policy) -> list[_Child]:
    touched = sorted({b.factor_of(w) for w in g.wires})
    untouched = [f for i, f in enumerate(b.factors) if i not in touched]
    t, wires = _contract([b.factors[i] for i in touched])
    t = _apply_local(t, [wires.index(w) for w in g.wires], gate_unitary(g))
    out = []
    for scalar, factors in refactorize(t.reshape(-1), wires, policy):
        coeff = b.coefficient * scalar
        if abs(coeff) > policy.eps_prune:
            out.append(_Child(Branch(coeff, tuple(untouched + factors)), g.label, None))
    return out


@dataclass
class _Track:
    id: str
    parent: str | None
    branch: Branch
    lineage: list[TraceEvent] = field(default_factory=list)
    stages: list[tuple[Factor, ...]] = field(default_factory=list)


def _step(tracks: list[_Track], g: Gate, stage: int, policy: Policy) -> list[_Track]:
    raw: list[_Track] = []
    for tr in tracks:
        kids = _children(tr.branch, g, policy)
        for j, kid in enumerate(kids):
            split = len(kids) > 1
            cid = f"{tr.id}.{j}" if split else tr.id
            event = TraceEvent(stage, cid, tr.id if split else None, g.wires, kid.label, kid.controls)
            raw.append(
                _Track(
                    cid,
                    tr.id if split else tr.parent,
                    kid.branch,
                    tr.lineage + [event],
                    tr.stages + [kid.branch.factors],
                )
            )
    return _merge_tracks(raw, policy)


def _merge_tracks(raw: list[_Track], policy: Policy) -> list[_Track]:
    merged: list[_Track] = []
    for group in merge_groups([t.branch for t in raw], policy.eps_merge):
        rep = raw[group[0]]
        coeff = sum((raw[i].branch.coefficient for i in group), 0j)
        if abs(coeff) <= policy.eps_prune:
            continue
        lineage = list(rep.lineage)
        if len(group) > 1 and lineage:
            lineage[-1] = replace(lineage[-1], merged=tuple(raw[i].id for i in group[1:]))
        merged.append(_Track(rep.id, rep.parent, Branch(coeff, rep.branch.factors), lineage, rep.stages))
    merged.sort(key=lambda t: factors_key(t.branch.factors))
    if len(merged) > policy.max_branches:
        raise BranchBudgetExceeded(
            f"{len(merged)} branches after merging exceed the limit of {policy.max_branches}"
        )
    return merged


def apply_gate(
    s: Superposition, g: Gate, policy: Policy | None = None
) -> tuple[Superposition, list[TraceEvent]]:
    """Apply one gate to every branch, then merge and prune.

    Branch ids in the returned events are the input branch indices (``b0``,
    ``b1``...), suffixed ``.j`` for split children.
    """
    policy = policy or Policy()
    tracks = [_Track(f"b{i}", None, b) for i, b in enumerate(s.branches)]
    out = _step(tracks, g, 1, policy)
    events = [t.lineage[-1] for t in out]
    return Superposition(s.wire_count, tuple(t.branch for t in out)), events


def _initial_tracks(c: Circuit, policy: Policy) -> list[_Track]:
    if policy.mode is Mode.SPLIT:
        start = Superposition.product(c.initial)
        branches = list(start.branches)
    else:
        # block mode opens one branch per computational-basis input term
        options = []
        for w, (a0, a1) in enumerate(c.initial):
            opts = [(bit, amp) for bit, amp in ((0, a0), (1, a1)) if abs(amp) > policy.eps_prune]
            options.append([(Factor.basis(w, bit), amp) for bit, amp in opts])
        branches = []
        for combo in itertools.product(*options):
            coeff = complex(np.prod([amp for _, amp in combo]))
            if abs(coeff) > policy.eps_prune:
                branches.append(Branch(coeff, tuple(f for f, _ in combo)))
    tracks = [_Track(f"b{i}", None, b, [], [b.factors]) for i, b in enumerate(branches)]
    return _merge_tracks(tracks, policy)


def run_circuit(c: Circuit, policy: Policy | None = None) -> RunResult:
    """Inline subroutines and push the input through every gate."""
    policy = policy or Policy()
    flat = inline_subroutines(c)
    tracks = _initial_tracks(flat, policy)
    for stage, g in enumerate(flat.program, start=1):
        tracks = _step(tracks, g, stage, policy)
    final = Superposition(flat.wire_count, tuple(t.branch for t in tracks))
    records = tuple(
        BranchRecord(t.id, t.parent, t.branch, tuple(t.lineage), tuple(t.stages)) for t in tracks
    )
    return RunResult(flat, policy, final, records)


__all__ = [
    "BUILTIN_GATES",
    "BranchRecord",
    "Mode",
    "Policy",
    "RunResult",
    "TraceEvent",
    "apply_gate",
    "effective_actions",
    "refactorize",
    "run_circuit",
]
