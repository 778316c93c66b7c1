"""Command-line interface: ``build``, ``eval`` and ``exp``.

Exit status is 0 on success, 1 for usage errors (bad flags, unreadable or
malformed input) and 2 when a numerical step fails.
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import math
import operator
import sys

import numpy as np

from .bench import EXPERIMENTS, ExperimentParams, run_experiment
from .exceptions import ConfigurationError, DomainError, TurnphaseError
from .phasefn import (
    CoefficientSpec,
    MultiPhaseBasis,
    PhaseConfig,
    TurningPointSpec,
    basis_eval,
    build_phase,
    build_phase_multi,
)
from .serialize import SerializationError, deserialize_expansion, serialize_expansion
from .specfun import (
    NamedCoefficient,
    airy_q,
    bessel_normal_q,
    bumps_q,
    cosine_q,
    legendre_q,
    monomial_q,
    three_tp_q,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    """Bad command-line input; reported with exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- coefficients -------------------------------------------------------------

_NAMED = {
    "airy": (airy_q, 0),
    "bessel": (bessel_normal_q, 1),
    "legendre": (legendre_q, 2),
    "monomial": (monomial_q, 1),
    "bumps": (bumps_q, 1),
    "three": (three_tp_q, 1),
    "cosine": (cosine_q, 1),
}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "abs", "sign")
}
_CONSTS = {"pi": math.pi, "e": math.e}


def compile_expression(text, params=None):
    """Vectorized function of ``t`` from an arithmetic expression.

    Only numbers, ``t``, the names in ``params``, ``pi``, ``e``, the
    operators + - * / ** and a few elementary functions are accepted.
    """
    env = {**_CONSTS, **(params or {})}
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise UsageError(f"cannot parse expression {text!r}: {exc.msg}") from exc

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return
        if isinstance(node, ast.Name):
            if node.id != "t" and node.id not in env:
                raise UsageError(f"unknown name {node.id!r} in {text!r}")
            return
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
            return
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            check(node.operand)
            return
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            check(node.args[0])
            return
        raise UsageError(f"unsupported construct {type(node).__name__} in {text!r}")

    check(tree)

    def ev(node, t):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return t if node.id == "t" else env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, t), ev(node.right, t))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](ev(node.operand, t))
        return _FUNCS[node.func.id](ev(node.args[0], t))

    body = tree.body

    def f(t):
        t = np.asarray(t, dtype=float)
        # non-finite values are rejected by the solvers that consume them
        with np.errstate(all="ignore"):
            return np.broadcast_to(ev(body, t), t.shape) * 1.0

    return f


def coefficient_from_file(path):
    """Coefficient described by a JSON file.

    Fields: ``q`` (expression in t), optional ``dq``, ``turning_points``
    (list of {c, k, leading_sign}), ``domain`` ([a, b]) and optional
    ``params`` (names usable in the expressions).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(
            f"{path!r} is neither a built-in coefficient ({', '.join(_NAMED)}) nor a file"
        ) from exc
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: expected a JSON object")
    for key in ("q", "turning_points", "domain"):
        if key not in doc:
            raise UsageError(f"{path}: missing field {key!r}")
    params = doc.get("params", {})
    if not isinstance(params, dict) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise UsageError(f"{path}: params must map names to numbers")
    q = compile_expression(doc["q"], params)
    dq = compile_expression(doc["dq"], params) if doc.get("dq") else None
    try:
        tps = tuple(
            TurningPointSpec(float(tp["c"]), int(tp["k"]), int(tp.get("leading_sign", 1)))
            for tp in doc["turning_points"]
        )
        a, b = (float(x) for x in doc["domain"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: malformed turning_points or domain ({exc})") from exc
    if not tps:
        raise UsageError(f"{path}: at least one turning point is required")
    return NamedCoefficient(str(path), q, dq, tps, (a, b), dict(params))


def parse_coefficient(arg):
    """``name[:p1[:p2]]`` for a built-in coefficient, otherwise a JSON file path."""
    name, *rest = arg.split(":")
    if name in _NAMED:
        fn, nparams = _NAMED[name]
        if name == "legendre" and len(rest) == 1:
            nparams = 1
        if len(rest) != nparams:
            raise UsageError(f"coefficient {name!r} takes {nparams} parameter(s), got {len(rest)}")
        try:
            vals = [float(x) for x in rest]
        except ValueError as exc:
            raise UsageError(f"bad parameter in {arg!r}") from exc
        if name == "monomial":
            if not vals[0].is_integer():
                raise UsageError("monomial order must be an integer")
            vals = [int(vals[0])]
        try:
            return fn(*vals)
        except (ValueError, ConfigurationError) as exc:
            raise UsageError(str(exc)) from exc
    return coefficient_from_file(arg)


def build_basis(named, a=None, b=None, eps=1e-12, order=16, qprime=None):
    """Phase basis (single or glued) for a coefficient on [a, b].

    ``qprime=None`` uses the supplied q' when there is one and spectral
    differentiation otherwise.
    """
    if qprime is None:
        qprime = "spectral" if named.dq is None else "supplied"
    a = named.domain[0] if a is None else float(a)
    b = named.domain[1] if b is None else float(b)
    if not a < b:
        raise UsageError(f"need a < b, got [{a}, {b}]")
    try:
        spec = CoefficientSpec.from_named(named, qprime)
        cfg = PhaseConfig(eps=eps, order=order)
    except (ConfigurationError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    tps = [tp for tp in named.turning_points if a < tp.c < b]
    if len(tps) == 1:
        return build_phase(spec, a, b, tps[0], cfg)
    if not tps:
        raise UsageError(f"no turning point inside [{a}, {b}]")
    return build_phase_multi(spec, a, b, tps, config=cfg)


# -- points and CSV -----------------------------------------------------------


def parse_points(arg):
    """``start:stop:n`` for n equispaced points, otherwise a file of numbers."""
    parts = arg.split(":")
    if len(parts) == 3:
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise UsageError(f"bad range {arg!r}; expected start:stop:n") from exc
        if n < 1:
            raise UsageError("a range needs at least one point")
        return np.linspace(lo, hi, n)
    try:
        with open(arg, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read points file {arg}: {exc.strerror}") from exc
    try:
        pts = np.array([float(x) for x in text.replace(",", " ").split()], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{arg}: {exc}") from exc
    if pts.size == 0:
        raise UsageError(f"{arg}: no points")
    return pts


def _fmt(x):
    return format(float(x), ".17g")


def eval_csv(basis, points):
    if isinstance(basis, MultiPhaseBasis):
        cols = basis(points)
    else:
        cols = basis_eval(basis, points)
    lines = ["t,u,v,up,vp"]
    for row in zip(points, *cols):
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from exc


# -- commands -----------------------------------------------------------------


def _cmd_build(args):
    named = parse_coefficient(args.coef)
    basis = build_basis(named, args.a, args.b, args.eps, args.order, args.qprime)
    if basis.truncated:
        lo, hi = basis.domain
        logger.warning("phase truncated to [%.17g, %.17g] where the solutions overflow", lo, hi)
    _write(serialize_expansion(basis), args.out)


def _cmd_eval(args):
    try:
        with open(args.phase, encoding="utf-8") as fh:
            basis = deserialize_expansion(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {args.phase}: {exc.strerror}") from exc
    except SerializationError as exc:
        raise UsageError(f"{args.phase}: {exc}") from exc
    if not hasattr(basis, "domain") or not hasattr(basis, "truncated"):
        raise UsageError(f"{args.phase} holds a bare expansion, not a phase basis")
    points = parse_points(args.points)
    lo, hi = basis.domain
    if np.any(points < lo) or np.any(points > hi):
        raise UsageError(f"points outside the basis domain [{lo!r}, {hi!r}]")
    _write(eval_csv(basis, points), args.out)


def _cmd_exp(args):
    try:
        params = ExperimentParams(
            grid=args.grid,
            numax=args.numax,
            points=args.points,
            repeat=args.repeat,
            n_jobs=args.jobs,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = run_experiment(args.id, params)
    _write(report.to_csv(), args.out)


def make_parser():
    p = _Parser(prog="turnphase", description="Phase functions for y'' + q y = 0 with turning points.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="construct and serialize a phase basis")
    b.add_argument("--coef", required=True, help="built-in name (airy, bessel:NU, ...) or JSON file")
    b.add_argument("--a", type=float, help="left end (default: the coefficient's domain)")
    b.add_argument("--b", type=float, help="right end")
    b.add_argument("--eps", type=float, default=1e-12)
    b.add_argument("--order", type=int, default=16)
    b.add_argument(
        "--qprime",
        choices=("supplied", "spectral"),
        default=None,
        help="how q' is obtained (default: supplied if the coefficient has one)",
    )
    b.add_argument("--out", default="-", help="output file (default stdout)")
    b.set_defaults(func=_cmd_build)

    e = sub.add_parser("eval", help="evaluate u, v, u', v' of a serialized basis")
    e.add_argument("--phase", required=True, help="file written by 'build'")
    e.add_argument(
        "--points",
        required=True,
        help="start:stop:n or a file of numbers (write --points=-2:2:5 when start is negative)",
    )
    e.add_argument("--out", default="-")
    e.set_defaults(func=_cmd_eval)

    x = sub.add_parser("exp", help="run a numerical experiment and write CSV")
    x.add_argument("id", choices=EXPERIMENTS)
    x.add_argument("--grid", type=int, default=20)
    x.add_argument("--numax", type=float, default=None)
    x.add_argument("--points", type=int, default=1000)
    x.add_argument("--repeat", type=int, default=5)
    x.add_argument("--jobs", type=int, default=1, help="rows run concurrently")
    x.add_argument("--out", default="-")
    x.set_defaults(func=_cmd_exp)
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except UsageError as exc:
        print(f"turnphase: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TurnphaseError, DomainError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"turnphase: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
