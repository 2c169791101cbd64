"""Text rendering of compact graphs, extended graphs and algebraic kets."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .circuit import CUSTOM, Circuit, Gate, inline_subroutines
from .engine import RunResult, TraceEvent
from .parser import parse_ket_expression
from .state import (
    EPS_ZERO,
    Factor,
    Superposition,
    canonicalize_factor,
    default_registry,
    match_named_state,
)

WIRE = "─"
LINK = "│"
CROSS = "┼"
DOT = "●"
OPLUS = "⊕"
SWAP = "×"


@dataclass(frozen=True)
class DiagramOptions:
    format: str = "text"
    precision: int = 6
    use_named_kets: bool = True

    def __post_init__(self) -> None:
        if self.format not in ("text", "json"):
            raise ValueError(f"format must be 'text' or 'json', got {self.format!r}")
        if not 1 <= self.precision <= 17:
            raise ValueError("precision must be in [1, 17]")


# ---------------------------------------------------------------------------
# numbers and kets


def fmt_real(x: float, precision: int) -> str:
    s = f"{x:.{precision}g}"
    return "0" if s in ("-0", "0") else s


def fmt_amp(a: complex, precision: int) -> str:
    """``0.6``, ``-0.8``, or ``(0.6+0.8i)`` for genuinely complex values."""
    re_, im = a.real, a.imag
    if abs(im) <= EPS_ZERO:
        return fmt_real(re_, precision)
    sign = "-" if im < 0 else "+"
    return f"({fmt_real(re_ if abs(re_) > EPS_ZERO else 0.0, precision)}{sign}{fmt_real(abs(im), precision)}i)"


def _weighted_sum(terms: Sequence[tuple[complex, str]], precision: int) -> str:
    """Join ``coefficient * ket`` pairs with `` + `` / `` - `` and elide unit weights."""
    parts: list[str] = []
    for i, (c, ket) in enumerate(terms):
        negative = abs(c.imag) <= EPS_ZERO and c.real < 0
        mag = fmt_amp(complex(-c.real, 0.0) if negative else c, precision)
        body = ket if mag == "1" else mag + ket
        if i == 0:
            parts.append(("-" if negative else "") + body)
        else:
            parts.append((" - " if negative else " + ") + body)
    return "".join(parts) if parts else "0"


def _bits(index: int, width: int) -> str:
    return format(index, f"0{width}b")


def ket_label(f: Factor, registry: Mapping[str, np.ndarray] | None, opts: DiagramOptions) -> str:
    """Label of one factor: ``|0>``, ``|psi+>``, or an expanded sum in parentheses."""
    bit = f.basis_bit()
    if bit is not None:
        return f"|{bit}>"
    canon, phase = canonicalize_factor(f)
    if opts.use_named_kets and registry is not None:
        hit = match_named_state(canon, registry)
        if hit is not None:
            name, named_phase = hit
            total = phase * named_phase
            if abs(total - 1) <= 1e-9:
                return f"|{name}>"
            return f"{fmt_amp(total, opts.precision)}|{name}>"
    terms = [
        (complex(a), f"|{_bits(i, f.width)}>")
        for i, a in enumerate(f.amplitudes)
        if abs(a) > EPS_ZERO
    ]
    return "(" + _weighted_sum(terms, opts.precision) + ")"


def _needs_wires(f: Factor) -> bool:
    return f.width > 1 and f.wires != tuple(range(f.wires[0], f.wires[0] + f.width))


def _wire_tag(f: Factor) -> str:
    return "@" + ",".join(str(w) for w in f.wires) if _needs_wires(f) else ""


def product_label(
    factors: Sequence[Factor], registry: Mapping[str, np.ndarray] | None, opts: DiagramOptions
) -> str:
    """Juxtaposed kets in wire order; adjacent basis wires share one ket (``|010>``)."""
    out: list[str] = []
    run = ""
    for f in sorted(factors, key=lambda f: f.wires[0]):
        bit = f.basis_bit()
        if bit is not None:
            run += str(bit)
            continue
        if run:
            out.append(f"|{run}>")
            run = ""
        out.append(ket_label(f, registry, opts) + _wire_tag(f))
    if run:
        out.append(f"|{run}>")
    return "".join(out)


def render_state(
    s: Superposition,
    registry: Mapping[str, np.ndarray] | None = None,
    opts: DiagramOptions | None = None,
) -> str:
    """Algebraic readout such as ``0.6|psi+>|psi+>|psi+> + 0.8|psi->|psi->|psi->``."""
    opts = opts or DiagramOptions()
    registry = default_registry() if registry is None else registry
    terms = [(b.coefficient, product_label(b.factors, registry, opts)) for b in s.branches]
    if opts.format == "json":
        return json.dumps(
            {
                "wire_count": s.wire_count,
                "terms": [
                    {"coefficient": [c.real, c.imag], "kets": k} for c, k in terms
                ],
            }
        )
    return _weighted_sum(terms, opts.precision)


# ---------------------------------------------------------------------------
# diagram grid


@dataclass
class _Column:
    cells: dict[int, str]
    span: tuple[int, int] | None = None  # vertical link from wire lo to hi


def _gate_column(g: Gate, event: TraceEvent | None = None) -> _Column:
    wires = g.wires
    cells: dict[int, str] = {}
    if event is not None and event.collapsed_controls is not None:
        for w in g.controls:
            cells[w] = DOT
        cells[g.targets[0]] = f"[{event.effective_label}]"
    elif g.kind in ("CNOT", "CCX"):
        for w in g.controls:
            cells[w] = DOT
        cells[g.targets[0]] = OPLUS
    elif g.kind in ("CZ", "CRY"):
        cells[g.controls[0]] = DOT
        cells[g.targets[0]] = "[" + g.label[1:] + "]"
    elif g.kind == "SWAP":
        for w in wires:
            cells[w] = SWAP
    else:
        label = g.name if g.kind == CUSTOM else g.label
        for w in wires:
            cells[w] = f"[{label}]"
    if len(wires) < 2:
        return _Column(cells)
    lo, hi = min(wires), max(wires)
    for w in range(lo + 1, hi):
        cells.setdefault(w, CROSS)
    return _Column(cells, (lo, hi))


def _center(text: str, width: int, fill: str) -> str:
    left = (width - len(text)) // 2
    return fill * left + text + fill * (width - len(text) - left)


def _draw(columns: Sequence[_Column], n: int) -> list[str]:
    labels = [f"q{w}: " for w in range(n)]
    lw = max(len(s) for s in labels)
    widths = [max((len(t) for t in col.cells.values()), default=1) + 2 for col in columns]
    rows: list[str] = []
    for w in range(n):
        line = labels[w].ljust(lw)
        for col, width in zip(columns, widths):
            text = col.cells.get(w)
            line += _center(text, width, WIRE) if text else WIRE * width
        rows.append(line)
        if w == n - 1:
            break
        gap = " " * lw
        for col, width in zip(columns, widths):
            linked = col.span is not None and col.span[0] <= w < col.span[1]
            gap += _center(LINK, width, " ") if linked else " " * width
        rows.append(gap.rstrip())
    return rows


def _ket_column(factors: Sequence[Factor], registry, opts: DiagramOptions) -> _Column:
    cells = {}
    for f in factors:
        label = ket_label(f, registry, opts) + _wire_tag(f)
        for w in f.wires:
            cells[w] = label
    return _Column(cells)


def render_compact(c: Circuit, opts: DiagramOptions | None = None, registry=None) -> str:
    """Conventional circuit drawing: input kets, then one column per gate."""
    opts = opts or DiagramOptions()
    registry = default_registry() if registry is None else registry
    flat = inline_subroutines(c)
    inputs = [canonicalize_factor(Factor.single(w, a0, a1))[0] for w, (a0, a1) in enumerate(flat.initial)]
    columns = [_ket_column(inputs, registry, opts)]
    columns += [_gate_column(g) for g in flat.program]
    rows = _draw(columns, flat.wire_count)
    if opts.format == "json":
        return json.dumps({"wire_count": flat.wire_count, "rows": rows}, ensure_ascii=False)
    return "\n".join(rows)


def stage_kets(
    stages: Sequence[Sequence[Factor]], n: int, registry, opts: DiagramOptions
) -> list[list[str]]:
    """Per stage, the ket label shown on each wire."""
    out = []
    for factors in stages:
        cells = _ket_column(factors, registry, opts).cells
        out.append([cells[w] for w in range(n)])
    return out


def render_extended(
    r: RunResult,
    registry: Mapping[str, np.ndarray] | None = None,
    opts: DiagramOptions | None = None,
) -> str:
    """One subgraph per final branch, gates replaced by their effective actions."""
    opts = opts or DiagramOptions()
    registry = default_registry() if registry is None else registry
    if opts.format == "json":
        return export_trace_json(r, registry, opts)
    n = r.final.wire_count
    program = r.circuit.program
    blocks: list[str] = []
    for i, rec in enumerate(r.records, start=1):
        columns = [_ket_column(rec.stages[0], registry, opts)]
        for g, event, factors in zip(program, rec.lineage, rec.stages[1:]):
            columns.append(_gate_column(g, event))
            columns.append(_ket_column(factors, registry, opts))
        coeff = fmt_amp(rec.branch.coefficient, opts.precision)
        head = f"subgraph {i} ({rec.id}): coefficient {coeff}"
        blocks.append("\n".join([head] + _draw(columns, n)))
    tail = "= " + render_state(r.final, registry, DiagramOptions("text", opts.precision, opts.use_named_kets))
    return "\n+\n".join(blocks) + "\n" + tail


# ---------------------------------------------------------------------------
# trace JSON


def export_trace_json(
    r: RunResult,
    registry: Mapping[str, np.ndarray] | None = None,
    opts: DiagramOptions | None = None,
) -> str:
    opts = opts or DiagramOptions()
    registry = default_registry() if registry is None else registry
    n = r.final.wire_count
    doc = {
        "stages": r.stage_count,
        "branches": [
            {
                "id": rec.id,
                "parent": rec.parent,
                "coefficient": [rec.branch.coefficient.real, rec.branch.coefficient.imag],
                "lineage": [e.to_dict() for e in rec.lineage],
                "stage_kets": stage_kets(rec.stages, n, registry, opts),
            }
            for rec in r.records
        ],
    }
    return json.dumps(doc, ensure_ascii=False)


def trace_statevector(text: str, registry: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
    """Rebuild the dense output vector from a trace JSON document.

    Uses only the coefficients and the last-stage kets, so it checks what a
    reader of the extended graph would compute.
    """
    registry = default_registry() if registry is None else registry
    doc = json.loads(text)
    total = None
    for rec in doc["branches"]:
        kets = rec["stage_kets"][-1]
        claimed: set[int] = set()
        pieces = []
        for w, label in enumerate(kets):
            if w in claimed:
                continue
            if "@" in label:
                claimed.update(int(x) for x in label.rsplit("@", 1)[1].split(","))
            else:
                width = parse_ket_expression(label, registry).size.bit_length() - 1
                claimed.update(range(w, w + width))
            pieces.append(label)
        vec = complex(*rec["coefficient"]) * parse_ket_expression("".join(pieces), registry)
        total = vec if total is None else total + vec
    return total
