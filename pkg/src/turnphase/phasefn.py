"""Phase functions for y'' + q(t) y = 0 on intervals containing turning points.

A phase function alpha gives the solution basis

    u = cos(alpha) / sqrt(alpha'),   v = sin(alpha) / sqrt(alpha').

Starting values for alpha', alpha'' at a point are obtained by windowing:
Kummer's equation is solved for a coefficient that is blended into a
constant, for which the slowly varying phase is known exactly.  From there
w = 1/alpha' is continued over the whole interval as the solution of the
linear third-order equation w''' + 4 q w' + 2 q' w = 0, which remains well
behaved through turning points.  Where q < 0, w grows rapidly and the
computation stops once it exceeds a cap.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import erf

from .chebseries import (
    DEFAULT_ORDER,
    PiecewiseExpansion,
    _norm0,
    differentiation_matrix,
    interval_nodes,
    vals_to_coeffs,
)
from .exceptions import ConfigurationError, DomainError, ResolutionError
from .odesolve import AdaptiveConfig, SystemSpec, solve_adaptive

WINDOW_STEEPNESS = 12.0
POSITIVITY_FLOOR = 1e-8
# the tail level underestimates the propagated window error by a few times
WINDOW_SAFETY = 10.0


@dataclass(frozen=True)
class TurningPointSpec:
    """q(t) ~ C (t - c)^k near c; ``leading_sign`` is the sign of C."""

    c: float
    k: int
    leading_sign: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError(f"turning point order must be a positive integer, got {self.k!r}")
        if self.leading_sign not in (1, -1):
            raise ConfigurationError("leading_sign must be +1 or -1")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "k", int(self.k))

    @property
    def odd(self):
        return self.k % 2 == 1


@dataclass(frozen=True)
class CoefficientSpec:
    """The coefficient q, optionally with q', and how q' is to be obtained.

    In ``spectral`` mode q' is computed on each solver interval by
    differentiating the Chebyshev interpolant of q.
    """

    q: Callable
    dq: Optional[Callable] = None
    derivative_mode: str = "supplied"

    def __post_init__(self):
        if self.derivative_mode not in ("supplied", "spectral"):
            raise ConfigurationError(f"unknown derivative mode {self.derivative_mode!r}")
        if self.derivative_mode == "supplied" and self.dq is None:
            raise ConfigurationError("supplied derivative mode needs dq")

    @classmethod
    def from_named(cls, named, derivative_mode="supplied"):
        return cls(named.q, named.dq, derivative_mode)

    def reflected(self, c):
        """Coefficient of the problem reflected about c: s -> q(2c - s)."""
        q, dq = self.q, self.dq
        rq = lambda s: q(2 * c - np.asarray(s, dtype=float))
        rdq = None if dq is None else (lambda s: -np.asarray(dq(2 * c - np.asarray(s, dtype=float))))
        return CoefficientSpec(rq, rdq, self.derivative_mode)

    def qprime_nodes(self, t):
        """q' at the Chebyshev extrema ``t`` of one interval."""
        if self.derivative_mode == "supplied":
            return np.asarray(self.dq(t), dtype=float)
        h = t[-1] - t[0]
        D = differentiation_matrix(t.size - 1)
        return (2.0 / h) * (D @ np.asarray(self.q(t), dtype=float))


@dataclass(frozen=True)
class PhaseConfig:
    eps: float = 1e-12
    order: int = DEFAULT_ORDER
    blowup_cap: float = 1e300
    max_intervals: int = 100_000
    window_eps: Optional[float] = None

    def adaptive(self, **kw):
        return AdaptiveConfig(
            eps=kw.pop("eps", self.eps),
            order=self.order,
            max_intervals=self.max_intervals,
            blowup_cap=kw.pop("blowup_cap", self.blowup_cap),
            **kw,
        )


@dataclass(frozen=True)
class WindowValues:
    alpha_p_at: float
    alpha_pp_at: float
    accuracy: float = 0.0

    def __post_init__(self):
        if not self.alpha_p_at > 0:
            raise ResolutionError(f"windowing produced a non-positive alpha' ({self.alpha_p_at!r})")


@dataclass(frozen=True, eq=False)
class PhaseFunction:
    """Piecewise Chebyshev expansions of alpha, alpha', alpha''."""

    alpha: PiecewiseExpansion
    alpha_p: PiecewiseExpansion
    alpha_pp: PiecewiseExpansion
    anchor: float
    truncated_left: bool = False
    truncated_right: bool = False

    @property
    def domain(self):
        return self.alpha_p.domain

    def reflect(self, c):
        """Phase of the problem reflected about c (alpha(t) -> -alpha(2c - t))."""
        return PhaseFunction(
            -1.0 * self.alpha.map_affine(-1, 2 * c),
            self.alpha_p.map_affine(-1, 2 * c),
            -1.0 * self.alpha_pp.map_affine(-1, 2 * c),
            2 * c - self.anchor,
            self.truncated_right,
            self.truncated_left,
        )

    def reanchor(self, point):
        """Same phase shifted by a constant so that alpha(point) = 0."""
        return replace(self, alpha=self.alpha_p.integrate(point, 0.0), anchor=float(point))


def kummer_alpha_ppp(q_c, alpha_p_c, alpha_pp_c):
    """alpha''' from Kummer's equation given q, alpha', alpha'' at a point."""
    if not alpha_p_c > 0:
        raise ValueError("alpha' must be positive")
    return 2 * alpha_p_c * q_c - 2 * alpha_p_c**3 + 1.5 * alpha_pp_c**2 / alpha_p_c


def appell_initial_values(alpha_p_c, alpha_pp_c, alpha_ppp_c):
    """(w, w', w'') at a point for w = 1/alpha'."""
    if not alpha_p_c > 0:
        raise ValueError("alpha' must be positive")
    a1, a2, a3 = alpha_p_c, alpha_pp_c, alpha_ppp_c
    return 1.0 / a1, -a2 / a1**2, 2 * a2**2 / a1**3 - a3 / a1**2


def _kummer_system(qt):
    def rhs(t, y):
        p, s = y[:, 0], y[:, 1]
        return np.stack([s, 2 * p * qt(t) - 2 * p**3 + 1.5 * s * s / p], axis=1)

    def jac(t, y):
        p, s = y[:, 0], y[:, 1]
        J = np.zeros((t.size, 2, 2))
        J[:, 0, 1] = 1.0
        J[:, 1, 0] = 2 * qt(t) - 6 * p * p - 1.5 * s * s / (p * p)
        J[:, 1, 1] = 3 * s / p
        return J

    def scale(t, Y, C):
        qm = float(np.max(np.abs(qt(t))))
        return [0.0, 2.0 * math.sqrt(qm) * _norm0(C[:, 0])]

    return SystemSpec.nonlinear_system(2, rhs, jac, scale)


def window_values(spec, a0, b0, config=None, mirrored=False):
    """alpha', alpha'' at a0 (at b0 if ``mirrored``) of the windowed phase.

    q is blended into the constant nu^2 = q(midpoint) over the far half of
    [a0, b0]; there alpha' = nu, alpha'' = 0 is exact, and Kummer's equation
    is integrated back to the near end, where the blend agrees with q.
    """
    cfg = config or PhaseConfig()
    if not b0 > a0:
        raise ConfigurationError(f"empty window interval [{a0}, {b0}]")
    mid = 0.5 * (a0 + b0)
    qmid = float(spec.q(np.array([mid]))[0])
    if not qmid > 0:
        raise ConfigurationError(
            f"q is not positive at the midpoint of the window [{a0}, {b0}]"
        )
    nu2 = qmid
    k = WINDOW_STEEPNESS / (b0 - a0)
    sgn = -1.0 if mirrored else 1.0

    def qt(t):
        phi = 0.5 * (1.0 + erf(sgn * k * (t - mid)))
        return phi * nu2 + (1.0 - phi) * spec.q(t)

    eps = cfg.window_eps if cfg.window_eps is not None else cfg.eps
    start, end = (a0, b0) if mirrored else (b0, a0)
    sol = solve_adaptive(
        _kummer_system(qt), a0, b0, start, [math.sqrt(nu2), 0.0],
        cfg.adaptive(eps=eps, blowup_cap=np.inf),
    )
    p, s = sol(end)
    acc = WINDOW_SAFETY * _window_accuracy(sol, qt)
    return WindowValues(float(p), float(s), max(eps, acc))


def _window_accuracy(sol, qt):
    """Largest resolved-tail level of the windowed solve, relative to alpha'.

    Rounding in 2 alpha' (q - alpha'^2) grows with the number of radians an
    interval spans, so at high frequency the window is accepted at the noise
    floor rather than at eps.  The alpha'' tail is divided by 2 sqrt(q), the
    factor an oscillatory perturbation of alpha' picks up on differentiation.
    """
    cp, cs = sol.components[0].coeffs, sol.components[1].coeffs
    l = cp.shape[1] - 1
    ts = interval_nodes(sol.breakpoints, l)
    sq = np.sqrt(np.max(np.abs(qt(ts.ravel())).reshape(ts.shape), axis=1))
    norm = _norm0(cp.T)
    tp = _norm0(cp[:, l // 2 + 1 :].T)
    ts_ = _norm0(cs[:, l // 2 + 1 :].T)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.maximum(tp, ts_ / np.where(sq > 0, 2 * sq, np.inf)) / norm
    r = r[np.isfinite(r)]
    return float(np.max(r)) if r.size else 0.0


def appell_system(spec):
    """First-order form of w''' + 4 q w' + 2 q' w = 0 in (w, w', w'')."""

    def matrix(t):
        A = np.zeros((t.size, 3, 3))
        A[:, 0, 1] = 1.0
        A[:, 1, 2] = 1.0
        A[:, 2, 0] = -2.0 * spec.qprime_nodes(t)
        A[:, 2, 1] = -4.0 * np.asarray(spec.q(t), dtype=float)
        return A

    def scale(t, Y, C):
        # w' and w'' of an oscillatory perturbation of w are larger than it
        # by 2 sqrt(q) and 4 q
        qm = float(np.max(np.abs(spec.q(t))))
        nw = _norm0(C[:, 0])
        return [0.0, 2.0 * math.sqrt(qm) * nw, 4.0 * qm * nw]

    return SystemSpec.linear_system(3, matrix, error_scale=scale)


def solve_appell(spec, a, b, c, ivals, config=None, eps=None):
    """Continue w = 1/alpha' over [a, b] from c; stops where w exceeds the cap.

    ``eps`` overrides the tail tolerance; initial values carrying a relative
    error d make w oscillate with amplitude d, which no tolerance below d
    can accept without resolving every oscillation.
    """
    cfg = config or PhaseConfig()
    tol = cfg.eps if eps is None else max(cfg.eps, float(eps))
    return solve_adaptive(
        appell_system(spec), a, b, c, ivals,
        cfg.adaptive(eps=tol, blowup_components=(0,)),
    )


def _phase_from_w(wsol, anchor):
    w = wsol.components[0].node_values()
    wp = wsol.components[1].node_values()
    if not np.all(w > 0):
        raise ResolutionError("w = 1/alpha' lost positivity")
    bp = wsol.breakpoints
    ap = PiecewiseExpansion(bp, vals_to_coeffs((1.0 / w).T).T)
    app = PiecewiseExpansion(bp, vals_to_coeffs((-(wp / w) / w).T).T)
    return PhaseFunction(
        ap.integrate(anchor, 0.0), ap, app, float(anchor),
        wsol.truncated_left, wsol.truncated_right,
    )


def phase_from_window(spec, a, b, window, config=None):
    """Phase on [a, b] seeded by windowing on ``window`` (output at its left end).

    alpha is normalized to vanish at the left end of the window.
    """
    cfg = config or PhaseConfig()
    w0, w1 = float(window[0]), float(window[1])
    if not (a <= w0 < w1 <= b):
        raise ConfigurationError(f"window [{w0}, {w1}] is not inside [{a}, {b}]")
    wv = window_values(spec, w0, w1, cfg)
    qc = float(spec.q(np.array([w0]))[0])
    a3 = kummer_alpha_ppp(qc, wv.alpha_p_at, wv.alpha_pp_at)
    iv = appell_initial_values(wv.alpha_p_at, wv.alpha_pp_at, a3)
    wsol = solve_appell(spec, a, b, w0, iv, cfg, eps=wv.accuracy)
    return _phase_from_w(wsol, w0)


def default_window(spec, c, b, n=257):
    """[c, c + W] with W = b - c, halved until q(c + W/2) is clearly positive.

    A wide window keeps the blend away from the low-frequency region next
    to the turning point, which is what makes the resulting phase slowly
    varying.
    """
    if not b > c:
        raise ConfigurationError(f"no room for a window right of {c}")
    ts = np.linspace(c, b, n)
    qmax = float(np.max(spec.q(ts)))
    if not qmax > 0:
        raise ConfigurationError(f"q is not positive anywhere on [{c}, {b}]")
    W = b - c
    for _ in range(60):
        if float(spec.q(np.array([c + 0.5 * W]))[0]) > POSITIVITY_FLOOR * qmax:
            return c, c + W
        W *= 0.5
    raise ConfigurationError(f"no window with positive q found on [{c}, {b}]")


def verify_turning_point(spec, a, b, tp, n=257):
    """Check q(c) ~ 0 and the sign pattern of q on either side of c."""
    ts = np.linspace(a, b, n)
    scale = float(np.max(np.abs(spec.q(ts))))
    qc = float(spec.q(np.array([tp.c]))[0])
    if abs(qc) > 1e-8 * scale:
        raise ConfigurationError(f"q({tp.c}) = {qc:.3e} is not small")
    h = 1e-3 * (b - a)
    expect_right = tp.leading_sign
    expect_left = tp.leading_sign * (-1 if tp.odd else 1)
    if tp.c + h <= b and np.sign(spec.q(np.array([tp.c + h]))[0]) != expect_right:
        raise ConfigurationError(f"sign of q right of {tp.c} does not match the turning point data")
    if tp.c - h >= a and np.sign(spec.q(np.array([tp.c - h]))[0]) != expect_left:
        raise ConfigurationError(f"sign of q left of {tp.c} does not match the turning point data")


def _right_phase(spec, a, b, c, cfg, hint):
    window = hint if hint is not None else default_window(spec, c, b)
    if window[0] != c:
        raise ConfigurationError("the window must start at the turning point")
    return phase_from_window(spec, a, b, window, cfg)


@dataclass(frozen=True, eq=False)
class PhaseBasis:
    """Solution basis u, v built from one phase (odd turning point) or two
    phases glued at c (even turning point)."""

    kind: str
    c: float
    phase: Optional[PhaseFunction] = None
    left: Optional[PhaseFunction] = None
    right: Optional[PhaseFunction] = None
    coeffs: tuple = (1.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.kind == "odd":
            if self.phase is None:
                raise ValueError("odd basis needs a phase")
        elif self.kind == "even":
            if self.left is None or self.right is None:
                raise ValueError("even basis needs left and right phases")
        else:
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def domain(self):
        if self.kind == "odd":
            return self.phase.domain
        return self.left.domain[0], self.right.domain[1]

    @property
    def truncated(self):
        pf = [self.phase] if self.kind == "odd" else [self.left, self.right]
        return any(p.truncated_left or p.truncated_right for p in pf)

    def rephase(self, anchor):
        """Odd basis whose phase vanishes at ``anchor`` instead of at c.

        Far into a region where q < 0 the recessive solution is a small
        difference of large basis functions; anchoring the phase there makes
        it proportional to v alone.
        """
        if self.kind != "odd":
            raise ValueError("only odd bases can be re-anchored")
        return replace(self, phase=self.phase.reanchor(anchor))

    def __call__(self, t):
        return basis_eval(self, t)


def _uv(pf, t):
    al, ap, app = pf.alpha(t), pf.alpha_p(t), pf.alpha_pp(t)
    s = np.sqrt(ap)
    co, si = np.cos(al), np.sin(al)
    k = 0.5 * (app / ap) / s
    return co / s, si / s, -s * si - k * co, s * co - k * si


def basis_eval(basis, t):
    """(u, v, u', v') at t."""
    t = np.asarray(t, dtype=float)
    if basis.kind == "odd":
        return _uv(basis.phase, t)
    a, b = basis.domain
    if np.any(t < a) or np.any(t > b) or np.any(np.isnan(t)):
        raise DomainError(f"point outside the basis domain [{a!r}, {b!r}]")
    tt = np.atleast_1d(t)
    left = tt <= basis.c
    out = np.empty((4, tt.size))
    if np.any(left):
        out[:, left] = np.array(_uv(basis.left, tt[left]))
    if np.any(~left):
        uR, vR, upR, vpR = _uv(basis.right, tt[~left])
        c11, c12, c21, c22 = basis.coeffs
        out[:, ~left] = [
            c11 * uR + c12 * vR,
            c21 * uR + c22 * vR,
            c11 * upR + c12 * vpR,
            c21 * upR + c22 * vpR,
        ]
    if t.ndim == 0:
        return tuple(float(x[0]) for x in out)
    return tuple(x.reshape(t.shape) for x in out)


def connection_coeffs(left, right):
    """(c11, c12, c21, c22) making the glued u, v continuously differentiable at c.

    Both phases must vanish at the shared point c.
    """
    c = right.domain[0]
    if left.domain[1] != c:
        raise ConfigurationError("left and right phases do not meet")
    aL, aR = float(left.alpha_p(c)), float(right.alpha_p(c))
    bL, bR = float(left.alpha_pp(c)), float(right.alpha_pp(c))
    if not (aL > 0 and aR > 0):
        raise ConfigurationError("phase derivatives must be positive at c")
    c11 = math.sqrt(aR / aL)
    c22 = math.sqrt(aL / aR)
    c12 = (aL * bR - aR * bL) / (2 * aL**1.5 * aR**1.5)
    return c11, c12, 0.0, c22


def build_phase(spec, a, b, tp, config=None, window_hints=None, verify=True):
    """Phase-function basis on [a, b] for a coefficient with one turning point.

    ``window_hints`` may give the window ((c, c + W)) for the oscillatory side;
    for even turning points a pair (left, right) of window widths W.
    """
    cfg = config or PhaseConfig()
    c = tp.c
    if not a <= c <= b:
        raise ConfigurationError(f"turning point {c} is outside [{a}, {b}]")
    if verify:
        verify_turning_point(spec, a, b, tp)
    if tp.odd:
        if tp.leading_sign > 0:
            pf = _right_phase(spec, a, b, c, cfg, window_hints)
        else:
            rspec = spec.reflected(c)
            hint = None if window_hints is None else (c, 2 * c - window_hints[0])
            pf = _right_phase(rspec, 2 * c - b, 2 * c - a, c, cfg, hint).reflect(c)
        return PhaseBasis("odd", c, phase=pf)
    if tp.leading_sign < 0:
        raise ConfigurationError("an even turning point with q < 0 on both sides has no oscillatory side")
    wl, wr = (None, None) if window_hints is None else window_hints
    right = _right_phase(spec, c, b, c, cfg, None if wr is None else (c, c + wr))
    # the left phase is the right phase of the reflected problem; symmetric q
    # then gives identical values at c
    left = _right_phase(
        spec.reflected(c), c, 2 * c - a, c, cfg, None if wl is None else (c, c + wl)
    ).reflect(c)
    return PhaseBasis("even", c, left=left, right=right, coeffs=connection_coeffs(left, right))


@dataclass(frozen=True, eq=False)
class FittedSolution:
    """y = d1 u + d2 v for a particular basis."""

    basis: PhaseBasis
    d1: float
    d2: float
    condition: float
    ill_conditioned: bool

    def __call__(self, t):
        u, v, _, _ = basis_eval(self.basis, t)
        return self.d1 * u + self.d2 * v

    def derivative(self, t):
        _, _, up, vp = basis_eval(self.basis, t)
        return self.d1 * up + self.d2 * vp


def _equilibrated_cond(M):
    """2-norm condition number after scaling rows to unit max norm."""
    s = np.max(np.abs(M), axis=1, keepdims=True)
    if not np.all(np.isfinite(M)) or np.any(s == 0):
        return math.inf
    return float(np.linalg.cond(M / s))


def _cond_row(basis, cond):
    point, ca, cb, r = cond
    u, v, up, vp = basis_eval(basis, float(point))
    return [ca * u + cb * up, ca * v + cb * vp], r


def fit_solution(basis, cond1, cond2, anchor=None):
    """Coefficients d1, d2 with y = d1 u + d2 v satisfying two conditions.

    Each condition is (point, a, b, r) meaning a y(point) + b y'(point) = r.
    With ``anchor`` the (odd) basis is first re-anchored there.
    """
    if anchor is not None:
        basis = basis.rephase(anchor)
    r1, v1 = _cond_row(basis, cond1)
    r2, v2 = _cond_row(basis, cond2)
    M = np.array([r1, r2], dtype=float)
    rhs = np.array([v1, v2], dtype=float)
    cond = _equilibrated_cond(M)
    try:
        d = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return FittedSolution(basis, math.nan, math.nan, math.inf, True)
    return FittedSolution(basis, float(d[0]), float(d[1]), cond, cond > 1e12)


# -- several turning points ---------------------------------------------------


def _auto_window(spec, s0, s1, n=2001, frac=0.25):
    ts = np.linspace(s0, s1, n)
    qs = np.asarray(spec.q(ts), dtype=float)
    i = int(np.argmax(qs))
    if not qs[i] > 0:
        raise ConfigurationError(f"no oscillatory region on the subinterval [{s0}, {s1}]")
    lo = hi = i
    while lo > 0 and qs[lo - 1] >= frac * qs[i]:
        lo -= 1
    while hi < n - 1 and qs[hi + 1] >= frac * qs[i]:
        hi += 1
    if hi == lo:
        raise ConfigurationError(f"window region on [{s0}, {s1}] is degenerate")
    return float(ts[lo]), float(ts[hi])


def subintervals(spec, a, b, tps, n=257):
    """Split [a, b] at the turning points; pieces on which q <= 0 are merged
    into a neighbor (the left one when it exists)."""
    cuts = [a] + sorted(tp.c for tp in tps if a < tp.c < b) + [b]
    pieces = [[cuts[i], cuts[i + 1]] for i in range(len(cuts) - 1)]
    osc = [bool(np.max(spec.q(np.linspace(p[0], p[1], n)[1:-1])) > 0) for p in pieces]
    if not any(osc):
        raise ConfigurationError(f"q is not positive anywhere on [{a}, {b}]")
    out = []
    pending = None
    for p, o in zip(pieces, osc):
        if o:
            lo = pending if pending is not None else p[0]
            out.append([lo, p[1]])
            pending = None
        elif out:
            out[-1][1] = p[1]
        elif pending is None:
            pending = p[0]
    return [tuple(p) for p in out]


@dataclass(frozen=True, eq=False)
class MultiPhaseBasis:
    """Bases on consecutive subintervals; ``transfer[i]`` maps coefficients
    on piece ``ref`` to coefficients on piece ``i``."""

    pieces: tuple
    bases: tuple
    windows: tuple

    @property
    def domain(self):
        return self.pieces[0][0], self.pieces[-1][1]

    @property
    def truncated(self):
        return any(b.truncated for b in self.bases)

    def locate(self, t):
        edges = np.array([p[0] for p in self.pieces] + [self.pieces[-1][1]])
        t = np.asarray(t, dtype=float)
        if np.any(t < edges[0]) or np.any(t > edges[-1]):
            raise DomainError(f"point outside [{edges[0]!r}, {edges[-1]!r}]")
        return np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(self.pieces) - 1)

    def _transfers(self, ref):
        n = len(self.bases)
        T = [None] * n
        T[ref] = np.eye(2)
        for i in range(ref + 1, n):
            x = self.pieces[i][0]
            T[i] = np.linalg.solve(_wmat(self.bases[i], x), _wmat(self.bases[i - 1], x) @ T[i - 1])
        for i in range(ref - 1, -1, -1):
            x = self.pieces[i][1]
            T[i] = np.linalg.solve(_wmat(self.bases[i], x), _wmat(self.bases[i + 1], x) @ T[i + 1])
        return T

    def __call__(self, t):
        """(u, v, u', v') of the first piece's basis continued across all pieces."""
        t = np.asarray(t, dtype=float)
        tt = np.atleast_1d(t)
        idx = self.locate(tt)
        T = self._transfers(0)
        out = np.empty((4, tt.size))
        for i in np.unique(idx):
            m = idx == i
            u, v, up, vp = basis_eval(self.bases[i], tt[m])
            (a11, a12), (a21, a22) = T[i]
            out[:, m] = [a11 * u + a21 * v, a12 * u + a22 * v, a11 * up + a21 * vp, a12 * up + a22 * vp]
        if t.ndim == 0:
            return tuple(float(x[0]) for x in out)
        return tuple(x.reshape(t.shape) for x in out)

    def fit(self, cond1, cond2):
        """Glued solution satisfying two conditions (see :func:`fit_solution`)."""
        ref = int(self.locate(cond1[0]))
        T = self._transfers(ref)
        rows, rhs = [], []
        for cond in (cond1, cond2):
            i = int(self.locate(cond[0]))
            row, r = _cond_row(self.bases[i], cond)
            rows.append(np.asarray(row) @ T[i])
            rhs.append(r)
        M = np.array(rows)
        cond = _equilibrated_cond(M)
        d = np.linalg.solve(M, np.array(rhs, dtype=float))
        return GluedSolution(self, tuple(Ti @ d for Ti in T), cond, cond > 1e12)


def _wmat(basis, x):
    u, v, up, vp = basis_eval(basis, x)
    return np.array([[u, v], [up, vp]])


@dataclass(frozen=True, eq=False)
class GluedSolution:
    multi: MultiPhaseBasis
    coefficients: tuple
    condition: float
    ill_conditioned: bool

    def _eval(self, t, which):
        t = np.asarray(t, dtype=float)
        tt = np.atleast_1d(t)
        idx = self.multi.locate(tt)
        out = np.empty(tt.size)
        for i in np.unique(idx):
            m = idx == i
            u, v, up, vp = basis_eval(self.multi.bases[i], tt[m])
            d1, d2 = self.coefficients[i]
            out[m] = d1 * u + d2 * v if which == 0 else d1 * up + d2 * vp
        return float(out[0]) if t.ndim == 0 else out.reshape(t.shape)

    def __call__(self, t):
        return self._eval(t, 0)

    def derivative(self, t):
        return self._eval(t, 1)


def build_phase_multi(spec, a, b, tps, window_hints=None, config=None, n_jobs=None):
    """One phase-function basis per oscillatory subinterval of [a, b].

    ``window_hints`` maps a subinterval index to a window (w0, w1); other
    subintervals use the region around the maximum of q.
    """
    cfg = config or PhaseConfig()
    pieces = subintervals(spec, a, b, tps)
    hints = dict(window_hints or {})
    windows = []
    for i, (s0, s1) in enumerate(pieces):
        if i in hints:
            windows.append(tuple(hints[i]))
        else:
            try:
                windows.append(_auto_window(spec, s0, s1))
            except ConfigurationError as exc:
                raise ConfigurationError(f"subinterval {i} [{s0}, {s1}]: {exc}") from exc

    def one(i):
        s0, s1 = pieces[i]
        pf = phase_from_window(spec, s0, s1, windows[i], cfg)
        return PhaseBasis("odd", windows[i][0], phase=pf)

    idx = range(len(pieces))
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            bases = list(ex.map(one, idx))
    else:
        bases = [one(i) for i in idx]
    # the outermost pieces may stop early where the solutions overflow; an
    # interior gap would leave nothing to glue across
    for i, bs in enumerate(bases):
        lo, hi = bs.domain
        if (i > 0 and lo != pieces[i][0]) or (i < len(pieces) - 1 and hi != pieces[i][1]):
            raise ResolutionError(
                f"phase on subinterval {i} was truncated to {bs.domain}; "
                "the glued representation would not cover the interval"
            )
    pieces[0] = (bases[0].domain[0], pieces[0][1])
    pieces[-1] = (pieces[-1][0], bases[-1].domain[1])
    return MultiPhaseBasis(tuple(pieces), tuple(bases), tuple(windows))


# -- validation ---------------------------------------------------------------


def kummer_residual(spec, pf, t):
    """|q - alpha'^2 + 3/4 (alpha''/alpha')^2 - alpha'''/(2 alpha')| / max(|q|, alpha'^2)."""
    t = np.asarray(t, dtype=float)
    a1, a2 = pf.alpha_p(t), pf.alpha_pp(t)
    a3 = pf.alpha_pp.differentiate()(t)
    q = np.asarray(spec.q(t), dtype=float)
    r = q - a1 * a1 + 0.75 * (a2 / a1) ** 2 - a3 / (2 * a1)
    return np.abs(r) / np.maximum(np.abs(q), a1 * a1)


def appell_residual(spec, wsol, t):
    """|w''' + 4 q w' + 2 q' w| relative to the largest term over all of ``t``.

    A pointwise scale would be meaningless where all three terms vanish
    together, as at the extrema of an oscillatory w.
    """
    t = np.asarray(t, dtype=float)
    w, wp = wsol.components[0](t), wsol.components[1](t)
    w3 = wsol.components[2].differentiate()(t)
    q = np.asarray(spec.q(t), dtype=float)
    dq = np.asarray(spec.dq(t), dtype=float)
    terms = np.stack([np.abs(w3), np.abs(4 * q * wp), np.abs(2 * dq * w)])
    return np.abs(w3 + 4 * q * wp + 2 * dq * w) / np.max(terms)


def normal_form(p, dp, q):
    """Coefficient of the normal form of y'' + p y' + q y = 0.

    The substitution y = exp(-1/2 int p) z gives z'' + (q - p'/2 - p^2/4) z = 0,
    and the phase function of the two equations is the same.
    """
    return lambda t: q(t) - 0.5 * dp(t) - 0.25 * p(t) ** 2
