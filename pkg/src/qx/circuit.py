"""Circuit IR: gates, subroutine calls, validation, inlining and serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import ValidationError
from .state import EPS_NORM

# name -> (arity, parametric, control count)
BUILTIN_GATES: dict[str, tuple[int, bool, int]] = {
    "I": (1, False, 0),
    "X": (1, False, 0),
    "Y": (1, False, 0),
    "Z": (1, False, 0),
    "H": (1, False, 0),
    "S": (1, False, 0),
    "T": (1, False, 0),
    "RX": (1, True, 0),
    "RY": (1, True, 0),
    "RZ": (1, True, 0),
    "CNOT": (2, False, 1),
    "CZ": (2, False, 1),
    "CRY": (2, True, 1),
    "SWAP": (2, False, 0),
    "CCX": (3, False, 2),
}

CONTROLLED_BASE = {"CNOT": "X", "CZ": "Z", "CRY": "RY", "CCX": "X"}

CUSTOM = "CUSTOM"

Matrix = tuple[tuple[complex, ...], ...]


@dataclass(frozen=True)
class Gate:
    """A gate applied to wires; controls come before the target.

    Inside a :class:`SubroutineDef` body the wires index the formal
    parameter list instead of circuit wires.
    """

    kind: str
    wires: tuple[int, ...]
    theta: float | None = None
    name: str | None = None  # CUSTOM gates only
    matrix: Matrix | None = None  # CUSTOM gates only

    @property
    def arity(self) -> int:
        if self.kind == CUSTOM:
            assert self.matrix is not None
            return len(self.matrix).bit_length() - 1
        return BUILTIN_GATES[self.kind][0]

    @property
    def controls(self) -> tuple[int, ...]:
        if self.kind == CUSTOM:
            return ()
        return self.wires[: BUILTIN_GATES[self.kind][2]]

    @property
    def targets(self) -> tuple[int, ...]:
        return self.wires[len(self.controls):]

    @property
    def is_controlled(self) -> bool:
        return self.kind in CONTROLLED_BASE

    @property
    def label(self) -> str:
        """Display name, e.g. ``H``, ``CNOT``, ``RY(1.047)``."""
        if self.kind == CUSTOM:
            return str(self.name)
        if self.theta is not None:
            return f"{self.kind}({format_angle(self.theta)})"
        return self.kind

    def remap(self, wires: Sequence[int]) -> "Gate":
        return Gate(self.kind, tuple(wires[w] for w in self.wires), self.theta, self.name, self.matrix)


@dataclass(frozen=True)
class Call:
    name: str
    wires: tuple[int, ...]

    def remap(self, wires: Sequence[int]) -> "Call":
        return Call(self.name, tuple(wires[w] for w in self.wires))


Op = Union[Gate, Call]


@dataclass(frozen=True)
class SubroutineDef:
    name: str
    params: tuple[str, ...]
    body: tuple[Op, ...]


@dataclass(frozen=True)
class Circuit:
    wire_count: int
    initial: tuple[tuple[complex, complex], ...]
    defs: tuple[SubroutineDef, ...] = ()
    program: tuple[Op, ...] = ()

    def definition(self, name: str) -> SubroutineDef:
        for d in self.defs:
            if d.name == name:
                return d
        raise KeyError(name)

    def gates(self) -> list[Gate]:
        """Flat gate list with every call expanded."""
        return [op for op in inline_subroutines(self).program if isinstance(op, Gate)]

    def matrices(self) -> dict[str, Matrix]:
        found: dict[str, Matrix] = {}
        for op in _walk_ops(self):
            if isinstance(op, Gate) and op.kind == CUSTOM:
                found[str(op.name)] = op.matrix  # type: ignore[assignment]
        return found


def _walk_ops(c: Circuit) -> Iterator[Op]:
    for d in c.defs:
        yield from d.body
    yield from c.program


def format_angle(theta: float) -> str:
    return f"{theta:.4g}"


def make_gate(kind: str, wires: Sequence[int], theta: float | None = None) -> Gate:
    return Gate(kind, tuple(wires), None if theta is None else float(theta))


def custom_gate(name: str, matrix, wires: Sequence[int]) -> Gate:
    m = np.asarray(matrix, dtype=np.complex128)
    frozen = tuple(tuple(complex(x) for x in row) for row in m)
    return Gate(CUSTOM, tuple(wires), None, name, frozen)


# ---------------------------------------------------------------------------
# unitaries


def _single_qubit(kind: str, theta: float | None) -> np.ndarray:
    h = 1 / math.sqrt(2)
    if kind == "I":
        return np.eye(2, dtype=complex)
    if kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "Y":
        return np.array([[0, -1j], [1j, 0]], dtype=complex)
    if kind == "Z":
        return np.array([[1, 0], [0, -1]], dtype=complex)
    if kind == "H":
        return np.array([[h, h], [h, -h]], dtype=complex)
    if kind == "S":
        return np.array([[1, 0], [0, 1j]], dtype=complex)
    if kind == "T":
        return np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex)
    assert theta is not None
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise KeyError(kind)


def base_unitary(g: Gate) -> np.ndarray:
    """Target-only unitary of a controlled gate (X for CNOT, RY(θ) for CRY, ...)."""
    return _single_qubit(CONTROLLED_BASE[g.kind], g.theta)


def _controlled(u: np.ndarray, n_controls: int) -> np.ndarray:
    dim = u.shape[0] << n_controls
    out = np.eye(dim, dtype=complex)
    out[dim - u.shape[0]:, dim - u.shape[0]:] = u
    return out


def gate_unitary(g: Gate) -> np.ndarray:
    """Dense unitary on ``g.wires`` in listed order (first wire most significant)."""
    if g.kind == CUSTOM:
        return np.array(g.matrix, dtype=complex)
    if g.kind == "SWAP":
        return np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
        )
    if g.kind in CONTROLLED_BASE:
        return _controlled(base_unitary(g), BUILTIN_GATES[g.kind][2])
    return _single_qubit(g.kind, g.theta)


def is_unitary(m: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol, rtol=0))


# ---------------------------------------------------------------------------
# validation and inlining


def check_gate(g: Gate, wire_limit: int, where: str = "") -> None:
    """Raise ValidationError if ``g`` has the wrong arity or bad wires."""
    if g.kind == CUSTOM:
        if g.matrix is None or g.name is None:
            raise ValidationError(f"custom gate{where} is missing its matrix")
        m = np.array(g.matrix, dtype=complex)
        k = m.shape[0].bit_length() - 1
        if m.shape[0] < 2 or m.shape != (1 << k, 1 << k) or not is_unitary(m):
            raise ValidationError(f"matrix for gate {g.name}{where} is not a 2^k x 2^k unitary")
    elif g.kind not in BUILTIN_GATES:
        raise ValidationError(f"unknown gate {g.kind}{where}")
    else:
        parametric = BUILTIN_GATES[g.kind][1]
        if parametric and g.theta is None:
            raise ValidationError(f"gate {g.kind}{where} needs an angle")
        if not parametric and g.theta is not None:
            raise ValidationError(f"gate {g.kind}{where} takes no angle")
        if g.theta is not None and not math.isfinite(g.theta):
            raise ValidationError(f"gate {g.kind}{where} has a non-finite angle")
    if len(g.wires) != g.arity:
        raise ValidationError(
            f"gate {g.label}{where} acts on {g.arity} wire(s), got {len(g.wires)}"
        )
    _check_wires(g.wires, wire_limit, g.label, where)


def _check_wires(wires: Sequence[int], limit: int, what: str, where: str) -> None:
    for w in wires:
        if not 0 <= w < limit:
            raise ValidationError(f"wire {w} out of range in {what}{where}")
    if len(set(wires)) != len(wires):
        dup = next(w for w in wires if list(wires).count(w) > 1)
        raise ValidationError(f"duplicate wire {dup} in {what}{where}")


def validate_circuit(c: Circuit) -> Circuit:
    """Check every invariant of the IR; returns ``c`` unchanged."""
    if c.wire_count < 1:
        raise ValidationError("a circuit needs at least one qubit")
    if len(c.initial) != c.wire_count:
        raise ValidationError(f"expected {c.wire_count} initial states, got {len(c.initial)}")
    for w, (a0, a1) in enumerate(c.initial):
        norm = math.sqrt(abs(a0) ** 2 + abs(a1) ** 2)
        if abs(norm - 1.0) > EPS_NORM:
            raise ValidationError(f"initial state of q{w} is not normalized (norm {norm:.12g})")
    names = [d.name for d in c.defs]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate subroutine name")
    defs = {d.name: d for d in c.defs}
    for d in c.defs:
        if len(set(d.params)) != len(d.params):
            raise ValidationError(f"duplicate parameter in subroutine {d.name}")
        for op in d.body:
            _check_op(op, len(d.params), defs, f" in subroutine {d.name}")
    for op in c.program:
        _check_op(op, c.wire_count, defs, "")
    _check_acyclic(defs)
    return c


def _check_op(op: Op, limit: int, defs: dict[str, SubroutineDef], where: str) -> None:
    if isinstance(op, Gate):
        check_gate(op, limit, where)
        return
    if op.name not in defs:
        raise ValidationError(f"call to undefined subroutine {op.name}{where}")
    arity = len(defs[op.name].params)
    if len(op.wires) != arity:
        raise ValidationError(f"subroutine {op.name} takes {arity} wire(s), got {len(op.wires)}{where}")
    _check_wires(op.wires, limit, f"call {op.name}", where)


def call_graph_cycle(defs: dict[str, SubroutineDef]) -> list[str] | None:
    """Return one recursive call chain, or None if the call graph is acyclic."""
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(name: str) -> list[str] | None:
        state[name] = 1
        stack.append(name)
        for op in defs[name].body:
            if isinstance(op, Call) and op.name in defs:
                if state.get(op.name) == 1:
                    return stack[stack.index(op.name):] + [op.name]
                if op.name not in state:
                    found = visit(op.name)
                    if found:
                        return found
        stack.pop()
        state[name] = 2
        return None

    for name in defs:
        if name not in state:
            found = visit(name)
            if found:
                return found
    return None


def _check_acyclic(defs: dict[str, SubroutineDef]) -> None:
    cycle = call_graph_cycle(defs)
    if cycle:
        raise ValidationError("recursive subroutine: " + " -> ".join(cycle))


def inline_subroutines(c: Circuit) -> Circuit:
    """Replace every call by its body (depth first); result has no defs."""
    defs = {d.name: d for d in c.defs}

    def expand(ops: Sequence[Op], actual: Sequence[int]) -> Iterator[Gate]:
        for op in ops:
            if isinstance(op, Gate):
                yield op.remap(actual)
            else:
                yield from expand(defs[op.name].body, [actual[w] for w in op.wires])

    flat = tuple(expand(c.program, range(c.wire_count)))
    return Circuit(c.wire_count, c.initial, (), flat)


# ---------------------------------------------------------------------------
# canonical JSON


def _num(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("cannot serialize non-finite number")
    return format(x, ".17g")


def _emit(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _num(obj)
    if isinstance(obj, complex):
        return f"[{_num(obj.real)},{_num(obj.imag)}]"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_emit(obj[k])}" for k in sorted(obj)) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _op_record(op: Op) -> dict:
    if isinstance(op, Call):
        return {"op": "call", "name": op.name, "wires": list(op.wires)}
    rec = {"op": "gate", "kind": op.name if op.kind == CUSTOM else op.kind, "wires": list(op.wires)}
    if op.theta is not None:
        rec["theta"] = float(op.theta)
    return rec


def serialize_ir(c: Circuit) -> str:
    """Canonical JSON: sorted keys, compact, numbers at 17 significant digits."""
    doc = {
        "wire_count": c.wire_count,
        "initial": [[complex(a0), complex(a1)] for a0, a1 in c.initial],
        "matrices": {name: [list(row) for row in m] for name, m in c.matrices().items()},
        "defs": [
            {"name": d.name, "params": list(d.params), "body": [_op_record(op) for op in d.body]}
            for d in c.defs
        ],
        "program": [_op_record(op) for op in c.program],
    }
    return _emit(doc)


def _complex(pair) -> complex:
    re, im = pair
    return complex(float(re), float(im))


def circuit_from_json(text: str) -> Circuit:
    """Inverse of :func:`serialize_ir`; the result is validated."""
    try:
        doc = json.loads(text)
        matrices = {
            name: tuple(tuple(_complex(p) for p in row) for row in m)
            for name, m in doc.get("matrices", {}).items()
        }

        def op(rec) -> Op:
            wires = tuple(int(w) for w in rec["wires"])
            if rec["op"] == "call":
                return Call(rec["name"], wires)
            kind = rec["kind"]
            if kind in matrices:
                return Gate(CUSTOM, wires, None, kind, matrices[kind])
            theta = rec.get("theta")
            return Gate(kind, wires, None if theta is None else float(theta))

        c = Circuit(
            int(doc["wire_count"]),
            tuple((_complex(a), _complex(b)) for a, b in doc["initial"]),
            tuple(
                SubroutineDef(d["name"], tuple(d["params"]), tuple(op(r) for r in d["body"]))
                for d in doc.get("defs", [])
            ),
            tuple(op(r) for r in doc.get("program", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed circuit JSON: {exc}") from exc
    return validate_circuit(c)


# ---------------------------------------------------------------------------
# DSL writer


def _real_literal(x: float) -> str:
    return repr(float(x) + 0.0)


def _amp_literal(a: complex) -> str:
    a = complex(a)
    if a.imag == 0:
        return _real_literal(a.real)
    sign = "-" if math.copysign(1.0, a.imag) < 0 else "+"
    return f"({_real_literal(a.real)}{sign}{_real_literal(abs(a.imag))}i)"


def _op_line(op: Op, names: Sequence[str]) -> str:
    wires = " ".join(names[w] for w in op.wires)
    if isinstance(op, Call):
        return f"call {op.name} {wires}"
    head = op.name if op.kind == CUSTOM else op.kind
    if op.theta is not None:
        head += f"({_real_literal(op.theta)})"
    return f"gate {head} {wires}"


def to_dsl(c: Circuit, matrix_files: dict[str, str] | None = None) -> str:
    """Write ``c`` back as DSL text. Custom gates need ``matrix_files``."""
    lines = [f"qubits {c.wire_count}"]
    for w, (a0, a1) in enumerate(c.initial):
        if a0 == 1 and a1 == 0:
            continue
        lines.append(f"state q{w} = {_amp_literal(a0)}|0> + {_amp_literal(a1)}|1>")
    for name in sorted(c.matrices()):
        if not matrix_files or name not in matrix_files:
            raise ValueError(f"no matrix file given for custom gate {name}")
        lines.append(f"matrix {name} {matrix_files[name]}")
    wire_names = [f"q{w}" for w in range(c.wire_count)]
    for d in c.defs:
        lines.append(f"def {d.name} {' '.join(d.params)}:")
        lines.extend("  " + _op_line(op, d.params) for op in d.body)
    lines.extend(_op_line(op, wire_names) for op in c.program)
    return "\n".join(lines) + "\n"
