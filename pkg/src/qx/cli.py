"""``qx`` command line: parse, run, expand, verify, render.

Exit codes: 0 ok, 1 parse/validation error, 2 verification failed,
3 branch budget or qubit limit exceeded.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence, TextIO

from . import circuit as ir
from .engine import Mode, Policy, run_circuit
from .errors import BranchBudgetExceeded, DiagnosticError, QxError, TooManyQubits
from .oracle import verify
from .parser import load_circuit
from .render import DiagramOptions, render_compact, render_extended, render_state
from .state import EPS_PRUNE, default_registry, load_registry

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY = 2
EXIT_LIMIT = 3

STATES_ENV = "QX_STATES"


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qx", description="Extended-graph quantum circuit simulator.")
    p.add_argument("command", choices=["parse", "run", "expand", "verify", "render"])
    p.add_argument("file", type=Path, help="circuit file (.qc DSL or serialized IR JSON)")
    p.add_argument("--policy", choices=[m.value for m in Mode], default=Mode.SPLIT.value)
    p.add_argument("--tol", type=_positive_float, default=1e-9, help="verify fidelity tolerance")
    p.add_argument("--prune", type=_positive_float, default=EPS_PRUNE, help="branch pruning threshold")
    p.add_argument("--max-branches", type=_positive_int, default=4096)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--states", type=Path, help=f"extra named-state JSON (overrides ${STATES_ENV})")
    p.add_argument("--precision", type=int, default=6, choices=range(1, 18), metavar="{1..17}")
    return p


def _registry(args: argparse.Namespace):
    path = args.states or os.environ.get(STATES_ENV)
    if not path:
        return default_registry()
    return load_registry(path)


def _diagnostic(path: Path, exc: DiagnosticError) -> str:
    where = str(path)
    if exc.line is not None:
        where += f":{exc.line}"
        if exc.col is not None:
            where += f":{exc.col}"
    return f"{where}: error: {exc.message}"


def run_cli(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT

    try:
        registry = _registry(args)
    except (OSError, ValueError, QxError) as exc:
        print(f"qx: error: cannot load named states: {exc}", file=err)
        return EXIT_INPUT

    try:
        c = load_circuit(args.file, registry)
    except DiagnosticError as exc:
        print(_diagnostic(args.file, exc), file=err)
        return EXIT_INPUT
    except OSError as exc:
        print(f"qx: error: cannot read {args.file}: {exc.strerror}", file=err)
        return EXIT_INPUT

    policy = Policy(Mode(args.policy), args.max_branches, eps_prune=args.prune)
    opts = DiagramOptions(args.format, args.precision)
    try:
        if args.command == "parse":
            print(ir.serialize_ir(c), file=out)
        elif args.command == "render":
            print(render_compact(c, opts, registry), file=out)
        elif args.command == "run":
            print(render_state(run_circuit(c, policy).final, registry, opts), file=out)
        elif args.command == "expand":
            print(render_extended(run_circuit(c, policy), registry, opts), file=out)
        else:
            report = verify(c, policy, args.tol)
            print(report.to_json(), file=out)
            if not report.passed:
                print(f"qx: verification failed: fidelity {report.fidelity!r} < 1 - {args.tol}", file=err)
                return EXIT_VERIFY
    except (BranchBudgetExceeded, TooManyQubits) as exc:
        print(f"qx: error: {exc}", file=err)
        return EXIT_LIMIT
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
