"""JSON text form of piecewise expansions and phase-function bases.

Numbers are written with 17 significant digits, enough to reproduce every
double exactly, so a round trip evaluates bit-identically.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .chebseries import PiecewiseExpansion
from .exceptions import TurnphaseError
from .phasefn import MultiPhaseBasis, PhaseBasis, PhaseFunction

FORMAT = "turnphase"
VERSION = 1


class SerializationError(TurnphaseError, ValueError):
    """Malformed or incomplete serialized text."""


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        raise SerializationError(f"cannot serialize non-finite number {x!r}")
    return format(x, ".17g")


def _emit(obj):
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_emit(v)}" for k, v in obj.items()) + "}"
    raise SerializationError(f"cannot serialize object of type {type(obj).__name__}")


def _expansion_fields(exp):
    return {
        "order": exp.order,
        "domain": list(exp.domain),
        "breakpoints": exp.breakpoints,
        "coefficients": exp.coeffs,
    }


def _phase_fields(pf):
    return {
        "anchor": pf.anchor,
        "truncated_left": pf.truncated_left,
        "truncated_right": pf.truncated_right,
        "alpha": _expansion_fields(pf.alpha),
        "alpha_p": _expansion_fields(pf.alpha_p),
        "alpha_pp": _expansion_fields(pf.alpha_pp),
    }


def _basis_fields(obj):
    doc = {
        "kind": obj.kind,
        "c": obj.c,
        "domain": list(obj.domain),
        "connection_coefficients": list(obj.coeffs),
    }
    if obj.kind == "odd":
        doc["phase"] = _phase_fields(obj.phase)
    else:
        doc["left"] = _phase_fields(obj.left)
        doc["right"] = _phase_fields(obj.right)
    return doc


def serialize_expansion(obj):
    """Text form of a :class:`PiecewiseExpansion`, a :class:`PhaseBasis` or
    a :class:`MultiPhaseBasis`."""
    doc = {"format": FORMAT, "version": VERSION}
    if isinstance(obj, PiecewiseExpansion):
        doc["kind"] = "expansion"
        doc.update(_expansion_fields(obj))
    elif isinstance(obj, PhaseBasis):
        doc.update(_basis_fields(obj))
    elif isinstance(obj, MultiPhaseBasis):
        doc["kind"] = "multi"
        doc["domain"] = list(obj.domain)
        doc["pieces"] = [list(p) for p in obj.pieces]
        doc["windows"] = [list(w) for w in obj.windows]
        doc["bases"] = [_basis_fields(b) for b in obj.bases]
    else:
        raise SerializationError(f"cannot serialize object of type {type(obj).__name__}")
    return _emit(doc) + "\n"


def _field(doc, name, where):
    if not isinstance(doc, dict):
        raise SerializationError(f"{where}: expected an object")
    if name not in doc:
        raise SerializationError(f"{where}: missing field {name!r}")
    return doc[name]


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SerializationError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _read_expansion(doc, where):
    order = _field(doc, "order", where)
    if isinstance(order, bool) or not isinstance(order, int):
        raise SerializationError(f"{where}.order: expected an integer")
    bp = _field(doc, "breakpoints", where)
    cf = _field(doc, "coefficients", where)
    dom = _field(doc, "domain", where)
    try:
        bp = np.array(bp, dtype=float)
        cf = np.array(cf, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SerializationError(f"{where}: non-numeric breakpoints or coefficients") from exc
    if cf.ndim != 2 or cf.shape[1] != order + 1:
        raise SerializationError(
            f"{where}.coefficients: expected rows of {order + 1} values, got shape {cf.shape}"
        )
    try:
        exp = PiecewiseExpansion(bp, cf)
    except ValueError as exc:
        raise SerializationError(f"{where}: {exc}") from exc
    if list(exp.domain) != [_number(d, f"{where}.domain") for d in dom]:
        raise SerializationError(f"{where}.domain does not match the breakpoints")
    return exp


def _read_phase(doc, where):
    return PhaseFunction(
        _read_expansion(_field(doc, "alpha", where), f"{where}.alpha"),
        _read_expansion(_field(doc, "alpha_p", where), f"{where}.alpha_p"),
        _read_expansion(_field(doc, "alpha_pp", where), f"{where}.alpha_pp"),
        _number(_field(doc, "anchor", where), f"{where}.anchor"),
        bool(_field(doc, "truncated_left", where)),
        bool(_field(doc, "truncated_right", where)),
    )


def _read_basis(doc, where):
    kind = _field(doc, "kind", where)
    if kind not in ("odd", "even"):
        raise SerializationError(f"{where}.kind: unknown kind {kind!r}")
    c = _number(_field(doc, "c", where), f"{where}.c")
    cc = _field(doc, "connection_coefficients", where)
    if not isinstance(cc, list) or len(cc) != 4:
        raise SerializationError(f"{where}.connection_coefficients: expected 4 numbers")
    coeffs = tuple(_number(v, f"{where}.connection_coefficients") for v in cc)
    if kind == "odd":
        basis = PhaseBasis("odd", c, phase=_read_phase(_field(doc, "phase", where), f"{where}.phase"))
    else:
        basis = PhaseBasis(
            "even",
            c,
            left=_read_phase(_field(doc, "left", where), f"{where}.left"),
            right=_read_phase(_field(doc, "right", where), f"{where}.right"),
            coeffs=coeffs,
        )
    _check_domain(doc, basis.domain, where)
    return basis


def _check_domain(doc, domain, where):
    dom = _field(doc, "domain", where)
    if not isinstance(dom, list) or len(dom) != 2:
        raise SerializationError(f"{where}.domain: expected 2 numbers")
    if [float(x) for x in domain] != [_number(d, f"{where}.domain") for d in dom]:
        raise SerializationError(f"{where}.domain does not match the phase expansions")


def _pairs(doc, name, where, n):
    v = _field(doc, name, where)
    if not isinstance(v, list) or len(v) != n or any(not isinstance(p, list) or len(p) != 2 for p in v):
        raise SerializationError(f"{where}.{name}: expected {n} pairs of numbers")
    return tuple(tuple(_number(x, f"{where}.{name}") for x in p) for p in v)


def deserialize_expansion(text):
    """Inverse of :func:`serialize_expansion`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SerializationError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if _field(doc, "format", "document") != FORMAT:
        raise SerializationError(f"document: unknown format {doc['format']!r}")
    kind = _field(doc, "kind", "document")
    if kind == "expansion":
        return _read_expansion(doc, "document")
    if kind != "multi":
        return _read_basis(doc, "document")
    raw = _field(doc, "bases", "document")
    if not isinstance(raw, list) or not raw:
        raise SerializationError("document.bases: expected a nonempty list")
    bases = tuple(_read_basis(b, f"bases[{i}]") for i, b in enumerate(raw))
    multi = MultiPhaseBasis(
        _pairs(doc, "pieces", "document", len(bases)),
        bases,
        _pairs(doc, "windows", "document", len(bases)),
    )
    _check_domain(doc, multi.domain, "document")
    return multi


def dump(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_expansion(obj))


def load(path):
    with open(path, encoding="utf-8") as fh:
        return deserialize_expansion(fh.read())
