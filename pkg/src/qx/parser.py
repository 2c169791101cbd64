"""Line-oriented circuit DSL and the ket-expression grammar.

DSL statements (``#`` starts a comment)::

    qubits 3
    state q0 = 0.6|0> + 0.8|1>
    matrix U u.json
    def SRC a b c:
      gate H a
      gate CNOT a b
      gate CNOT a c
    call SRC q0 q1 q2
    gate RY(1.0471975511965976) q0

Ket expressions are sums of (optionally weighted) products of kets::

    expr    := ['+'|'-'] term (('+'|'-') term)*
    term    := [amp] atom+
    amp     := real | '(' real ('+'|'-') real 'i' ')'
    atom    := ('|' label '>' | '(' expr ')') ['@' int (',' int)*]

``label`` is a bit string (``|010>``) or a registered name (``|psi+>``).
Atoms without ``@`` take the lowest wires not yet claimed in their term.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .circuit import (
    BUILTIN_GATES,
    CUSTOM,
    Call,
    Circuit,
    Gate,
    Op,
    SubroutineDef,
    call_graph_cycle,
    check_gate,
    is_unitary,
    validate_circuit,
)
from .errors import DiagnosticError, ParseError, ValidationError
from .state import EPS_NORM, default_registry

_REAL = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_REAL_RE = re.compile(_REAL)
_COMPLEX_RE = re.compile(rf"\(\s*({_REAL})\s*([+-])\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*i\s*\)")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_WIRE_RE = re.compile(r"q(\d+)")
_HEAD_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\((.*)\))?$")


# ---------------------------------------------------------------------------
# ket expressions


@dataclass
class _Atom:
    vector: np.ndarray
    wires: tuple[int, ...] | None


class _KetParser:
    def __init__(self, text: str, registry: Mapping[str, np.ndarray], line: int | None, col0: int):
        self.text = text
        self.pos = 0
        self.registry = registry
        self.line = line
        self.col0 = col0

    def error(self, message: str, pos: int | None = None) -> ParseError:
        p = self.pos if pos is None else pos
        return ParseError(message, self.line, self.col0 + p)

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> np.ndarray:
        vec = self.expr()
        if self.peek():
            raise self.error(f"unexpected {self.peek()!r} in ket expression")
        return vec

    def expr(self) -> np.ndarray:
        sign = 1.0
        if self.peek() and self.peek() in "+-":
            sign = -1.0 if self.text[self.pos] == "-" else 1.0
            self.pos += 1
        total = sign * self.term()
        while self.peek() and self.peek() in "+-":
            sign = -1.0 if self.text[self.pos] == "-" else 1.0
            op_pos = self.pos
            self.pos += 1
            vec = self.term()
            if vec.size != total.size:
                raise self.error("terms of a sum act on different numbers of qubits", op_pos)
            total = total + sign * vec
        return total

    def amplitude(self) -> complex | None:
        self.skip()
        m = _COMPLEX_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            im = float(m.group(3))
            return complex(float(m.group(1)), -im if m.group(2) == "-" else im)
        m = _REAL_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return complex(float(m.group(0)))
        return None

    def term(self) -> np.ndarray:
        start = self.pos
        amp = self.amplitude()
        atoms: list[_Atom] = []
        while self.peek() in ("|", "("):
            atoms.append(self.atom())
        if not atoms:
            raise self.error("expected a ket such as |0>", self.pos if amp is not None else start)
        return (1.0 if amp is None else amp) * self.assemble(atoms, start)

    def atom(self) -> _Atom:
        start = self.pos
        if self.text[self.pos] == "|":
            end = self.text.find(">", self.pos)
            if end < 0:
                raise self.error("unterminated ket, missing '>'")
            label = self.text[self.pos + 1:end].strip()
            self.pos = end + 1
            vec = self.ket(label, start)
        else:
            self.pos += 1
            vec = self.expr()
            if self.peek() != ")":
                raise self.error("expected ')'")
            self.pos += 1
        wires = None
        if self.text.startswith("@", self.pos):
            self.pos += 1
            m = re.compile(r"\d+(?:,\d+)*").match(self.text, self.pos)
            if not m:
                raise self.error("expected wire list after '@'")
            self.pos = m.end()
            wires = tuple(int(w) for w in m.group(0).split(","))
            if len(wires) != vec.size.bit_length() - 1:
                raise self.error("wire list length does not match ket width", start)
        return _Atom(vec, wires)

    def ket(self, label: str, pos: int) -> np.ndarray:
        if label and set(label) <= {"0", "1"}:
            vec = np.zeros(1 << len(label), dtype=complex)
            vec[int(label, 2)] = 1.0
            return vec
        if label in self.registry:
            return np.array(self.registry[label], dtype=complex)
        raise self.error(f"unknown ket |{label}>", pos)

    def assemble(self, atoms: list[_Atom], pos: int) -> np.ndarray:
        widths = [a.vector.size.bit_length() - 1 for a in atoms]
        m = sum(widths)
        claimed: list[int] = []
        free = set(range(m))
        for a, k in zip(atoms, widths):
            if a.wires is not None:
                ws = list(a.wires)
            else:
                ws = sorted(free - set(claimed) - _explicit(atoms))[:k]
            if len(ws) != k or any(w in claimed or w >= m for w in ws):
                raise self.error("inconsistent wire assignment in ket product", pos)
            claimed.extend(ws)
        vec = np.ones(1, dtype=complex)
        for a in atoms:
            vec = np.kron(vec, a.vector)
        t = vec.reshape((2,) * m) if m else vec
        return np.transpose(t, np.argsort(claimed)).reshape(-1)


def _explicit(atoms: list[_Atom]) -> set[int]:
    return {w for a in atoms if a.wires is not None for w in a.wires}


def parse_ket_expression(
    text: str,
    registry: Mapping[str, np.ndarray] | None = None,
    *,
    line: int | None = None,
    col: int = 1,
) -> np.ndarray:
    """Evaluate a ket expression such as ``0.6|psi+> - 0.8|psi->`` to a dense vector."""
    reg = default_registry() if registry is None else registry
    return _KetParser(text, reg, line, col).parse()


# ---------------------------------------------------------------------------
# circuit DSL


@dataclass
class _Token:
    text: str
    col: int


def _tokenize(line: str) -> list[_Token]:
    """Whitespace split that keeps parenthesized groups inside one token."""
    tokens: list[_Token] = []
    i = 0
    while i < len(line):
        if line[i].isspace():
            i += 1
            continue
        start = i
        depth = 0
        while i < len(line) and (depth > 0 or not line[i].isspace()):
            if line[i] == "(":
                depth += 1
            elif line[i] == ")":
                depth -= 1
            i += 1
        tokens.append(_Token(line[start:i], start + 1))
    return tokens


class _CircuitParser:
    def __init__(self, text: str, base_dir: Path, registry: Mapping[str, np.ndarray]):
        self.lines = text.splitlines()
        self.base_dir = base_dir
        self.registry = registry
        self.n = 0
        self.initial: dict[int, tuple[complex, complex]] = {}
        self.matrices: dict[str, tuple[tuple[complex, ...], ...]] = {}
        self.defs: dict[str, SubroutineDef] = {}
        self.def_lines: dict[str, int] = {}
        self.program: list[Op] = []
        # (op, line, col of name, owner def or None) for deferred call checks
        self.calls: list[tuple[Call, int, int, str | None]] = []

    def run(self) -> Circuit:
        body = [(i + 1, self._strip(raw)) for i, raw in enumerate(self.lines)]
        body = [(no, ln) for no, ln in body if ln.strip()]
        if not body:
            raise ParseError("missing 'qubits <n>' line", 1, 1)
        no, first = body[0]
        self._qubits(first, no)
        i = 1
        while i < len(body):
            no, line = body[i]
            if line[0].isspace():
                raise ParseError("unexpected indentation", no, 1)
            toks = _tokenize(line)
            word = toks[0].text
            if word == "def":
                i = self._def(body, i)
                continue
            if word == "state":
                self._state(line, toks, no)
            elif word == "matrix":
                self._matrix(toks, no)
            elif word in ("gate", "call"):
                self.program.append(self._op(toks, no, None))
            elif word == "qubits":
                raise ParseError("'qubits' may only appear once, on the first line", no, toks[0].col)
            else:
                raise ParseError(f"unknown statement {word!r}", no, toks[0].col)
            i += 1
        self._check_calls()
        initial = tuple(self.initial.get(w, (1 + 0j, 0j)) for w in range(self.n))
        return validate_circuit(Circuit(self.n, initial, tuple(self.defs.values()), tuple(self.program)))

    @staticmethod
    def _strip(raw: str) -> str:
        cut = raw.find("#")
        return (raw if cut < 0 else raw[:cut]).rstrip()

    def _qubits(self, line: str, no: int) -> None:
        toks = _tokenize(line)
        if toks[0].text != "qubits" or line[0].isspace():
            raise ParseError("missing 'qubits <n>' line; it must come first", no, toks[0].col)
        if len(toks) != 2 or not toks[1].text.isdigit():
            raise ParseError("expected 'qubits <n>' with a positive integer", no, toks[0].col)
        self.n = int(toks[1].text)
        if self.n < 1:
            raise ValidationError("a circuit needs at least one qubit", no, toks[1].col)

    def _wire(self, tok: _Token, no: int, params: tuple[str, ...] | None) -> int:
        if params is not None:
            if tok.text not in params:
                raise ValidationError(f"{tok.text!r} is not a parameter of this subroutine", no, tok.col)
            return params.index(tok.text)
        m = _WIRE_RE.fullmatch(tok.text)
        if not m:
            raise ParseError(f"expected a wire like q0, got {tok.text!r}", no, tok.col)
        w = int(m.group(1))
        if w >= self.n:
            raise ValidationError(f"wire {tok.text} out of range (circuit has {self.n} qubits)", no, tok.col)
        return w

    def _wires(self, toks: list[_Token], no: int, params, what: str) -> tuple[int, ...]:
        wires: list[int] = []
        for tok in toks:
            w = self._wire(tok, no, params)
            if w in wires:
                raise ValidationError(f"duplicate wire {tok.text} in {what}", no, tok.col)
            wires.append(w)
        return tuple(wires)

    def _state(self, line: str, toks: list[_Token], no: int) -> None:
        if len(toks) < 4 or toks[2].text != "=":
            raise ParseError("expected 'state q<i> = <ket expression>'", no, toks[0].col)
        w = self._wire(toks[1], no, None)
        if w in self.initial:
            raise ValidationError(f"state of {toks[1].text} given twice", no, toks[1].col)
        col = toks[3].col
        vec = parse_ket_expression(line[col - 1:], self.registry, line=no, col=col)
        if vec.size != 2:
            raise ValidationError(f"state of {toks[1].text} must be a single-qubit ket", no, col)
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > EPS_NORM:
            raise ValidationError(
                f"state of {toks[1].text} is not normalized (norm {norm:.12g})", no, col
            )
        self.initial[w] = (complex(vec[0]), complex(vec[1]))

    def _matrix(self, toks: list[_Token], no: int) -> None:
        if len(toks) != 3 or not _NAME_RE.fullmatch(toks[1].text):
            raise ParseError("expected 'matrix <NAME> <file.json>'", no, toks[0].col)
        name = toks[1].text
        if name in BUILTIN_GATES or name in self.matrices:
            raise ValidationError(f"gate {name} is already defined", no, toks[1].col)
        path = self.base_dir / toks[2].text
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            m = np.array([[complex(float(re_), float(im)) for re_, im in row] for row in data])
        except OSError as exc:
            raise ValidationError(f"cannot read matrix file {toks[2].text}: {exc.strerror}", no, toks[2].col)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"matrix file {toks[2].text} must hold rows of [re, im] pairs", no, toks[2].col) from exc
        k = m.shape[0].bit_length() - 1 if m.ndim == 2 else 0
        if m.ndim != 2 or m.shape[0] < 2 or m.shape != (1 << k, 1 << k):
            raise ValidationError(f"matrix {name} must be 2^k x 2^k", no, toks[2].col)
        if not is_unitary(m):
            raise ValidationError(f"matrix {name} is not unitary", no, toks[2].col)
        self.matrices[name] = tuple(tuple(complex(x) for x in row) for row in m)

    def _op(self, toks: list[_Token], no: int, owner: SubroutineDef | None) -> Op:
        params = owner.params if owner else None
        if len(toks) < 2:
            raise ParseError(f"expected a name after '{toks[0].text}'", no, toks[0].col)
        head = toks[1]
        if toks[0].text == "call":
            if not _NAME_RE.fullmatch(head.text):
                raise ParseError(f"bad subroutine name {head.text!r}", no, head.col)
            wires = self._wires(toks[2:], no, params, f"call {head.text}")
            call = Call(head.text, wires)
            self.calls.append((call, no, head.col, owner.name if owner else None))
            return call
        m = _HEAD_RE.fullmatch(head.text)
        if not m:
            raise ParseError(f"bad gate {head.text!r}", no, head.col)
        kind, arg = m.group(1), m.group(2)
        theta = None
        if arg is not None:
            if not re.fullmatch(rf"\s*{_REAL}\s*", arg):
                raise ParseError(f"angle must be a decimal literal in radians, got {arg!r}", no, head.col)
            theta = float(arg)
        wires = self._wires(toks[2:], no, params, f"gate {kind}")
        if kind in self.matrices:
            if theta is not None:
                raise ValidationError(f"gate {kind} takes no angle", no, head.col)
            gate = Gate(CUSTOM, wires, None, kind, self.matrices[kind])
        elif kind in BUILTIN_GATES:
            gate = Gate(kind, wires, theta)
        else:
            raise ValidationError(f"unknown gate {kind}", no, head.col)
        limit = len(params) if params is not None else self.n
        try:
            check_gate(gate, limit)
        except ValidationError as exc:
            raise ValidationError(exc.message, no, head.col) from None
        return gate

    def _def(self, body: list[tuple[int, str]], i: int) -> int:
        no, line = body[i]
        toks = _tokenize(line)
        if not line.endswith(":"):
            raise ParseError("subroutine header must end with ':'", no, len(line))
        toks[-1].text = toks[-1].text[:-1]
        toks = [t for t in toks if t.text]
        if len(toks) < 2 or not _NAME_RE.fullmatch(toks[1].text):
            raise ParseError("expected 'def <NAME> <params...>:'", no, toks[0].col)
        name = toks[1].text
        if name in self.defs:
            raise ValidationError(f"subroutine {name} defined twice", no, toks[1].col)
        params = []
        for t in toks[2:]:
            if not _NAME_RE.fullmatch(t.text):
                raise ParseError(f"bad parameter name {t.text!r}", no, t.col)
            if t.text in params:
                raise ValidationError(f"duplicate parameter {t.text}", no, t.col)
            params.append(t.text)
        shell = SubroutineDef(name, tuple(params), ())
        ops: list[Op] = []
        i += 1
        while i < len(body) and body[i][1][:1].isspace():
            bno, bline = body[i]
            if not bline.startswith("  ") or bline[2:3].isspace():
                raise ParseError("subroutine body lines are indented by two spaces", bno, 1)
            btoks = _tokenize(bline)
            if btoks[0].text not in ("gate", "call"):
                raise ParseError(f"only 'gate' and 'call' may appear in a subroutine body", bno, btoks[0].col)
            ops.append(self._op(btoks, bno, shell))
            i += 1
        self.defs[name] = SubroutineDef(name, tuple(params), tuple(ops))
        self.def_lines[name] = no
        return i

    def _check_calls(self) -> None:
        for call, no, col, _owner in self.calls:
            if call.name not in self.defs:
                raise ValidationError(f"call to undefined subroutine {call.name}", no, col)
            arity = len(self.defs[call.name].params)
            if len(call.wires) != arity:
                raise ValidationError(
                    f"subroutine {call.name} takes {arity} wire(s), got {len(call.wires)}", no, col
                )
        cycle = call_graph_cycle(self.defs)
        if cycle:
            raise ValidationError(
                "recursive subroutine: " + " -> ".join(cycle), self.def_lines[cycle[0]], 1
            )


def parse_circuit(
    text: str,
    *,
    base_dir: str | Path | None = None,
    registry: Mapping[str, np.ndarray] | None = None,
) -> Circuit:
    """Parse DSL text into a validated :class:`Circuit`.

    ``base_dir`` resolves relative ``matrix`` file paths (default: cwd).
    """
    reg = default_registry() if registry is None else registry
    return _CircuitParser(text, Path(base_dir or "."), reg).run()


def load_circuit(path: str | Path, registry: Mapping[str, np.ndarray] | None = None) -> Circuit:
    """Read a ``.qc`` DSL file, or serialized IR JSON if the text starts with ``{``."""
    from .circuit import circuit_from_json

    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return circuit_from_json(text)
    return parse_circuit(text, base_dir=p.parent, registry=registry)


__all__ = [
    "DiagnosticError",
    "ParseError",
    "ValidationError",
    "load_circuit",
    "parse_circuit",
    "parse_ket_expression",
]
