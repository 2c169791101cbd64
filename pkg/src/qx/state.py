"""Product-state branches and the superpositions built from them.

A :class:`Superposition` is a list of :class:`Branch` terms. Each branch is a
complex coefficient times a tensor product of :class:`Factor` objects that
partition the wires. Factors over one wire are ordinary qubit states; factors
over several wires are entangled blocks.

Index convention everywhere: wire 0 is the most significant bit, so the dense
index of a basis state is ``sum(bit(w) << (n - 1 - w))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DuplicateName, NotNormalized, ZeroFactor

EPS_NORM = 1e-9
EPS_ZERO = 1e-12
EPS_MERGE = 1e-9
EPS_PRUNE = 1e-12
NAMED_TOL = 1e-9

# Grid used to bucket factors before the exact tolerance comparison in merging.
_BUCKET_DIGITS = 7


def _frozen(values: Iterable[complex] | np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Factor:
    """State of one wire, or an entangled block over several wires.

    ``amplitudes[i]`` is the amplitude of the basis state whose bits, read
    most significant first, follow the order of ``wires``.
    """

    wires: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        wires = tuple(int(w) for w in self.wires)
        if not wires:
            raise ValueError("a factor needs at least one wire")
        if any(b <= a for a, b in zip(wires, wires[1:])):
            raise ValueError(f"factor wires must be strictly increasing, got {wires}")
        amps = _frozen(self.amplitudes)
        if amps.size != 1 << len(wires):
            raise ValueError(
                f"factor over {len(wires)} wires needs {1 << len(wires)} amplitudes, got {amps.size}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("factor amplitudes must be finite")
        object.__setattr__(self, "wires", wires)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def single(cls, wire: int, a0: complex, a1: complex) -> "Factor":
        return cls((wire,), (a0, a1))

    @classmethod
    def basis(cls, wire: int, bit: int) -> "Factor":
        return cls((wire,), (1.0, 0.0) if bit == 0 else (0.0, 1.0))

    @property
    def width(self) -> int:
        return len(self.wires)

    def basis_bit(self, tol: float = EPS_ZERO) -> int | None:
        """Return 0 or 1 if this single-wire factor is a computational basis state."""
        if self.width != 1:
            return None
        a0, a1 = self.amplitudes
        if abs(a1) <= tol and abs(abs(a0) - 1.0) <= EPS_NORM:
            return 0
        if abs(a0) <= tol and abs(abs(a1) - 1.0) <= EPS_NORM:
            return 1
        return None

    def close_to(self, other: "Factor", tol: float) -> bool:
        return self.wires == other.wires and bool(
            np.all(np.abs(self.amplitudes - other.amplitudes) <= tol)
        )

    def __repr__(self) -> str:
        amps = ", ".join(f"{complex(a):.6g}" for a in self.amplitudes)
        return f"Factor(wires={self.wires}, amplitudes=[{amps}])"


def canonicalize_factor(f: Factor) -> tuple[Factor, complex]:
    """Split ``f`` into a unit-norm canonical factor and a complex scalar.

    The canonical factor has its first amplitude of magnitude above
    ``EPS_ZERO`` real and positive; ``scalar * canonical == f``.
    """
    amps = f.amplitudes
    norm = float(np.linalg.norm(amps))
    if norm <= EPS_ZERO:
        raise ZeroFactor(f"factor on wires {f.wires} has norm {norm:.3g}")
    unit = amps / norm
    lead = unit[np.argmax(np.abs(unit) > EPS_ZERO)]
    phase = lead / abs(lead)
    canon = unit / phase
    # the leading entry is real by construction; drop round-off in its imaginary part
    idx = int(np.argmax(np.abs(canon) > EPS_ZERO))
    canon[idx] = abs(canon[idx])
    return Factor(f.wires, canon), complex(norm * phase)


@dataclass(frozen=True, eq=False)
class Branch:
    """One product-state term: ``coefficient * (factor_1 ⊗ factor_2 ⊗ ...)``."""

    coefficient: complex
    factors: tuple[Factor, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        object.__setattr__(
            self, "factors", tuple(sorted(self.factors, key=lambda f: f.wires[0]))
        )

    def factor_of(self, wire: int) -> int:
        """Index into ``factors`` of the factor containing ``wire``."""
        for i, f in enumerate(self.factors):
            if wire in f.wires:
                return i
        raise KeyError(wire)

    def scaled(self, scalar: complex) -> "Branch":
        return Branch(self.coefficient * scalar, self.factors)

    def check_partition(self, wire_count: int) -> None:
        seen: list[int] = []
        for f in self.factors:
            seen.extend(f.wires)
        if sorted(seen) != list(range(wire_count)):
            raise ValueError(f"branch factors cover wires {sorted(seen)}, expected 0..{wire_count - 1}")


@dataclass(frozen=True, eq=False)
class Superposition:
    wire_count: int
    branches: tuple[Branch, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "branches", tuple(self.branches))
        for b in self.branches:
            b.check_partition(self.wire_count)

    def __len__(self) -> int:
        return len(self.branches)

    @classmethod
    def product(cls, states: Sequence[tuple[complex, complex]]) -> "Superposition":
        """Single-branch superposition from per-wire qubit states."""
        coeff = 1.0 + 0j
        factors = []
        for w, (a0, a1) in enumerate(states):
            f, s = canonicalize_factor(Factor.single(w, a0, a1))
            factors.append(f)
            coeff *= s
        return cls(len(states), (Branch(coeff, tuple(factors)),))


def _bucket(x: float) -> float:
    return round(float(x), _BUCKET_DIGITS) + 0.0


def factors_key(factors: Sequence[Factor]) -> tuple:
    """Deterministic ordering key for a factor list.

    Amplitudes enter negated so that |0> sorts before |1>, |+> before |->,
    and |psi+> before |psi->.
    """
    key = []
    for f in factors:
        amps = tuple(
            v for a in f.amplitudes for v in (-_bucket(a.real), -_bucket(a.imag))
        )
        key.append((f.wires, amps))
    return tuple(key)


def merge_groups(branches: Sequence[Branch], eps_merge: float = EPS_MERGE) -> list[list[int]]:
    """Group indices of branches whose factor lists agree within ``eps_merge``.

    Groups are returned in order of first appearance; the first index of each
    group is its representative.
    """
    buckets: dict[tuple, list[list[int]]] = {}
    groups: list[list[int]] = []
    for i, b in enumerate(branches):
        candidates = buckets.setdefault(factors_key(b.factors), [])
        for group in candidates:
            rep = branches[group[0]]
            if len(rep.factors) == len(b.factors) and all(
                f.close_to(g, eps_merge) for f, g in zip(rep.factors, b.factors)
            ):
                group.append(i)
                break
        else:
            group = [i]
            candidates.append(group)
            groups.append(group)
    return groups


def merge_and_prune(
    s: Superposition, eps_merge: float = EPS_MERGE, eps_prune: float = EPS_PRUNE
) -> Superposition:
    """Sum coefficients of equal branches, drop negligible ones, sort canonically."""
    merged = []
    for group in merge_groups(s.branches, eps_merge):
        rep = s.branches[group[0]]
        coeff = sum((s.branches[i].coefficient for i in group), 0j)
        if abs(coeff) > eps_prune:
            merged.append(Branch(coeff, rep.factors))
    merged.sort(key=lambda b: factors_key(b.factors))
    return Superposition(s.wire_count, tuple(merged))


def branch_tensor(branch: Branch, wire_count: int) -> np.ndarray:
    """Dense vector of a single branch, coefficient included."""
    t = np.array(branch.coefficient, dtype=np.complex128)
    order: list[int] = []
    for f in branch.factors:
        t = np.tensordot(t, f.amplitudes.reshape((2,) * f.width), axes=0)
        order.extend(f.wires)
    if wire_count == 0:
        return t.reshape(1)
    t = np.transpose(t, np.argsort(order))
    return t.reshape(1 << wire_count)


def reconstruct_statevector(s: Superposition) -> np.ndarray:
    """Sum of all branches as a dense vector of length 2**n."""
    out = np.zeros(1 << s.wire_count, dtype=np.complex128)
    for b in s.branches:
        out += branch_tensor(b, s.wire_count)
    return out


class NamedStateRegistry(Mapping[str, np.ndarray]):
    """Immutable name -> canonical unit vector map used to label kets."""

    def __init__(self, entries: Mapping[str, np.ndarray] | None = None):
        self._entries = MappingProxyType(dict(entries or {}))

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"NamedStateRegistry({sorted(self._entries)})"

    def register(self, name: str, vector: Sequence[complex] | np.ndarray) -> "NamedStateRegistry":
        return register_named_state(self, name, vector)


def register_named_state(
    r: NamedStateRegistry, name: str, vector: Sequence[complex] | np.ndarray
) -> NamedStateRegistry:
    """Return a new registry with ``vector`` (canonicalized) added under ``name``."""
    if not name:
        raise ValueError("state name must be nonempty")
    if name in r:
        raise DuplicateName(f"state {name!r} is already registered")
    v = np.asarray(vector, dtype=np.complex128).reshape(-1)
    k = v.size.bit_length() - 1
    if v.size < 2 or v.size != 1 << k:
        raise ValueError(f"state {name!r} has {v.size} amplitudes; need a power of two >= 2")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > EPS_NORM:
        raise NotNormalized(f"state {name!r} has norm {norm:.12g}")
    canon, _ = canonicalize_factor(Factor(tuple(range(k)), v))
    entries = dict(r.items())
    entries[name] = canon.amplitudes
    return NamedStateRegistry(entries)


def default_registry() -> NamedStateRegistry:
    h = 1 / math.sqrt(2)
    r = NamedStateRegistry()
    r = r.register("0", [1, 0])
    r = r.register("1", [0, 1])
    r = r.register("+", [h, h])
    r = r.register("-", [h, -h])
    r = r.register("psi+", [h, 0, 0, 0, 0, 0, 0, h])
    r = r.register("psi-", [h, 0, 0, 0, 0, 0, 0, -h])
    return r


def load_registry(path: str | Path, base: NamedStateRegistry | None = None) -> NamedStateRegistry:
    """Load a JSON ``{name: [[re, im], ...]}`` file on top of ``base``."""
    r = default_registry() if base is None else base
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path}: registry file must hold a JSON object")
    for name in sorted(data):
        pairs = data[name]
        try:
            vec = [complex(float(re), float(im)) for re, im in pairs]
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: state {name!r} must be a list of [re, im] pairs") from exc
        r = r.register(name, vec)
    return r


def match_named_state(
    f: Factor, r: Mapping[str, np.ndarray], tol: float = NAMED_TOL
) -> tuple[str, complex] | None:
    """Find the registered state equal to ``f`` up to global phase.

    Returns ``(name, phase)`` with ``phase * r[name] ≈ f.amplitudes``. Names are
    scanned in sorted order, so the lexicographically smallest match wins.
    """
    amps = f.amplitudes
    for name in sorted(r):
        vec = r[name]
        if vec.size != amps.size:
            continue
        phase = complex(np.vdot(vec, amps))
        if abs(abs(phase) - 1.0) > 10 * tol + EPS_ZERO:
            continue
        if np.all(np.abs(phase * vec - amps) <= tol):
            return name, phase
    return None
