"""Adaptive Chebyshev integral-equation solver for first-order systems.

The solution of ``y' = F(t, y)``, ``y(t0) = v`` on ``[a0, b0]`` is built
interval by interval.  The part of the domain left of ``t0`` is swept
backwards and the part to the right forwards; each interval is solved as
an integral equation

    y(t) = w + int_{t*}^{t} F(s, y(s)) ds

discretized at the Chebyshev extrema, where ``t*`` is the interval's
endpoint nearest ``t0`` and ``w`` is the already accepted value there.
An interval is accepted when, for every component, the upper half of its
Chebyshev coefficients carries at most ``eps`` of the energy; otherwise it
is bisected.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dgecon

from .chebseries import (
    DEFAULT_ORDER,
    PiecewiseExpansion,
    _nodes,
    _norm0,
    clenshaw,
    integration_matrix,
    tail_ratio,
    vals_to_coeffs,
)
from .exceptions import LocalSolveError, ResolutionError

logger = logging.getLogger(__name__)

EPS0 = np.finfo(float).eps
# rounding-noise allowance, in units of machine epsilon times the magnitude
# of the terms that make up a component
NOISE_FACTOR = 10.0
# conditioning beyond this is treated as under-resolution, not noise
KAPPA_CAP = 1.0e4


@dataclass(frozen=True)
class SystemSpec:
    """A first-order system y' = F(t, y) of dimension ``n``.

    All callables are vectorized over a leading point axis: ``rhs(t, y)``
    takes ``t`` of shape (m,) and ``y`` of shape (m, n) and returns (m, n);
    ``jac`` returns (m, n, n).  Linear systems ``y' = A(t) y + g(t)`` carry
    ``matrix`` (t -> (m, n, n)) and optionally ``forcing`` (t -> (m, n)).

    ``error_scale(t, Y, coeffs)`` may return, per component, a magnitude
    against which that component's tail is measured in addition to its own
    norm.  Derivative components of oscillatory systems use it: an error
    of relative size eps in y_0 appears in y_0' amplified by the local
    frequency.
    """

    n: int
    rhs: Callable
    jac: Callable
    linear: bool = False
    matrix: Optional[Callable] = None
    forcing: Optional[Callable] = None
    error_scale: Optional[Callable] = None

    @classmethod
    def linear_system(cls, n, matrix, forcing=None, error_scale=None):
        def rhs(t, y):
            out = np.einsum("mij,mj->mi", matrix(t), y)
            if forcing is not None:
                out = out + forcing(t)
            return out

        def jac(t, y):
            return matrix(t)

        return cls(n, rhs, jac, True, matrix, forcing, error_scale)

    @classmethod
    def nonlinear_system(cls, n, rhs, jac, error_scale=None):
        return cls(n, rhs, jac, False, error_scale=error_scale)


@dataclass(frozen=True)
class AdaptiveConfig:
    """Parameters of the adaptive solver.

    ``blowup_components`` selects which components are monitored against
    ``blowup_cap`` (all of them when None).  ``min_width`` defaults to
    ``1e-13 * (b0 - a0)``.
    """

    eps: float = 1.0e-12
    order: int = DEFAULT_ORDER
    max_intervals: int = 100_000
    blowup_cap: float = 1.0e300
    min_width: Optional[float] = None
    blowup_components: Optional[Sequence[int]] = None
    newton_maxiter: int = 20

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.blowup_cap > 1:
            raise ValueError("blowup_cap must exceed 1")
        if self.max_intervals < 1:
            raise ValueError("max_intervals must be at least 1")
        if self.order < 2 or self.order % 2:
            raise ValueError("order must be an even integer >= 2")


@dataclass
class LocalSolution:
    t: np.ndarray  # (l+1,) nodes
    values: np.ndarray  # (l+1, n)
    coeffs: np.ndarray  # (l+1, n)
    scale: np.ndarray  # (n,) magnitude of the terms summed into each component
    kappa: float = 1.0  # condition estimate of the collocation matrix


@dataclass(eq=False)
class PiecewiseSolution:
    """Piecewise Chebyshev representation of every solution component."""

    components: list
    domain: tuple
    truncated_left: bool = False
    truncated_right: bool = False
    tails: np.ndarray = field(default=None, repr=False)

    @property
    def breakpoints(self):
        return self.components[0].breakpoints

    @property
    def n_intervals(self):
        return self.components[0].n_intervals

    def __call__(self, t):
        """Solution values, shape t.shape + (n,)."""
        return np.stack([np.asarray(c(t)) for c in self.components], axis=-1)


def _setup(c0, d0, point, order):
    if not d0 > c0:
        raise ValueError(f"degenerate interval [{c0!r}, {d0!r}]")
    x = _nodes(order)
    t = 0.5 * (c0 + d0) + 0.5 * (d0 - c0) * x
    t[0], t[-1] = c0, d0
    S = integration_matrix(order)
    if point == c0:
        k0 = 0
    elif point == d0:
        k0 = order
        S = S - S[-1]
    else:
        raise ValueError("condition point must be an endpoint of the interval")
    return t, (0.5 * (d0 - c0)) * S, k0


def _collocation_matrix(S, J):
    # I - S (x) J, unknowns ordered node-major
    m, n = J.shape[0], J.shape[1]
    B = np.einsum("km,mij->kimj", S, J).reshape(m * n, m * n)
    return np.eye(m * n) - B


def _lu_solve(M, b):
    """Solve M x = b; also return a 1-norm condition estimate of M."""
    lu, piv = lu_factor(M, check_finite=False)
    if np.any(np.diag(lu) == 0):
        raise np.linalg.LinAlgError("singular matrix")
    x = lu_solve((lu, piv), b, check_finite=False)
    anorm = np.abs(M).sum(axis=0).max()
    rcond, _ = dgecon(lu, anorm, norm="1")
    return x, (1.0 / rcond if rcond > 0 else np.inf)


def _term_scale(S, J, Y, g=None):
    h = np.abs(S).sum(axis=1).max()
    # near the blow-up cap the products may overflow; an infinite scale there
    # only matters on intervals that are truncated anyway
    with np.errstate(over="ignore"):
        s = np.abs(Y).max(axis=0) + h * np.einsum("mij,mj->mi", np.abs(J), np.abs(Y)).max(axis=0)
    if g is not None:
        s = s + h * np.abs(g).max(axis=0)
    return s


def solve_local_linear(spec, c0, d0, point, value, order=DEFAULT_ORDER):
    """Solve a linear system on one interval from a condition at an endpoint.

    Returns a :class:`LocalSolution`; raises :class:`LocalSolveError` if the
    collocation system is singular or the result is not finite.
    """
    t, S, k0 = _setup(c0, d0, point, order)
    n = spec.n
    w = np.asarray(value, dtype=float).reshape(n)
    A = np.asarray(spec.matrix(t), dtype=float)
    M = _collocation_matrix(S, A)
    rhs = np.tile(w, (order + 1, 1))
    g = None
    if spec.forcing is not None:
        g = np.asarray(spec.forcing(t), dtype=float)
        rhs = rhs + S @ g
    try:
        Y, kappa = _lu_solve(M, rhs.ravel())
    except np.linalg.LinAlgError as exc:
        raise LocalSolveError(f"singular collocation system on [{c0}, {d0}]") from exc
    Y = Y.reshape(order + 1, n)
    if not np.all(np.isfinite(Y)):
        raise LocalSolveError(f"non-finite solution on [{c0}, {d0}]")
    Y[k0] = w
    return LocalSolution(t, Y, vals_to_coeffs(Y), _term_scale(S, A, Y, g), kappa)


def _trapezoid(spec, t, k0, w, maxiter=3):
    """Implicit trapezoidal rule along the nodes, starting at node k0."""
    n = spec.n
    Y = np.empty((t.size, n))
    Y[k0] = w
    order = range(k0 - 1, -1, -1) if k0 > 0 else range(1, t.size)
    step = -1 if k0 > 0 else 1
    I = np.eye(n)
    for k in order:
        kp = k - step
        yp = Y[kp]
        dt = t[k] - t[kp]
        fp = spec.rhs(t[kp : kp + 1], yp[None, :])[0]
        z = yp.copy()
        tk = t[k : k + 1]
        for _ in range(maxiter):
            fz = spec.rhs(tk, z[None, :])[0]
            G = z - yp - 0.5 * dt * (fp + fz)
            Jz = spec.jac(tk, z[None, :])[0]
            try:
                dz = np.linalg.solve(I - 0.5 * dt * Jz, G)
            except np.linalg.LinAlgError as exc:
                raise LocalSolveError("singular trapezoidal step") from exc
            z = z - dz
            if not np.all(np.isfinite(z)):
                raise LocalSolveError("trapezoidal initial guess diverged")
            if np.max(np.abs(dz)) <= 1e-10 * max(1.0, np.max(np.abs(z))):
                break
        Y[k] = z
    return Y


def solve_local_nonlinear(spec, c0, d0, point, value, order=DEFAULT_ORDER, eps=1e-12, maxiter=20):
    """Trapezoidal initial guess refined by Newton's method on the
    collocation equations; each Newton step is a linear integral-equation
    solve.  Stops when the step norm is at most ``eps * max(1, |y|)``, with
    ``eps`` raised to the rounding level of the Newton system if smaller.
    """
    t, S, k0 = _setup(c0, d0, point, order)
    n = spec.n
    w = np.asarray(value, dtype=float).reshape(n)
    Y = _trapezoid(spec, t, k0, w)
    N = (order + 1) * n
    for it in range(maxiter):
        with np.errstate(all="ignore"):
            F = np.asarray(spec.rhs(t, Y), dtype=float)
            J = np.asarray(spec.jac(t, Y), dtype=float)
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(J))):
            raise LocalSolveError(f"non-finite right-hand side on [{c0}, {d0}]")
        R = (Y - w - S @ F).ravel()
        M = _collocation_matrix(S, J)
        try:
            delta, kappa = _lu_solve(M, R)
        except np.linalg.LinAlgError as exc:
            raise LocalSolveError(f"singular Newton system on [{c0}, {d0}]") from exc
        Y = Y - delta.reshape(order + 1, n)
        if not np.all(np.isfinite(Y)):
            raise LocalSolveError(f"Newton iterates diverged on [{c0}, {d0}]")
        dn = np.max(np.abs(delta))
        # steps cannot shrink below the rounding noise of the residual
        tol = max(eps, NOISE_FACTOR * EPS0 * min(max(1.0, kappa), KAPPA_CAP))
        if dn <= tol * max(1.0, np.max(np.abs(Y))):
            break
    else:
        raise LocalSolveError(
            f"Newton did not converge in {maxiter} iterations on [{c0}, {d0}] (last step {dn:.3e})"
        )
    Y[k0] = w
    J = np.asarray(spec.jac(t, Y), dtype=float)
    return LocalSolution(t, Y, vals_to_coeffs(Y), _term_scale(S, J, Y), kappa)


def _local(spec, c0, d0, point, value, cfg):
    if spec.linear:
        return solve_local_linear(spec, c0, d0, point, value, cfg.order)
    return solve_local_nonlinear(
        spec, c0, d0, point, value, cfg.order, cfg.eps, cfg.newton_maxiter
    )


def _resolved(loc, eps, error_scale=None):
    """Per-component acceptance: tail ratio <= eps, or tail at rounding level."""
    c = loc.coeffs
    l = c.shape[0] - 1
    total = _norm0(c)
    if error_scale is not None:
        total = np.maximum(total, np.asarray(error_scale(loc.t, loc.values, c), dtype=float))
    tail = _norm0(c[l // 2 + 1 :])
    floor = NOISE_FACTOR * EPS0 * min(max(1.0, loc.kappa), KAPPA_CAP) * loc.scale
    ok = (tail <= eps * total) | (tail <= floor)
    return bool(np.all(ok)), tail_ratio(c)


def _sweep(spec, start, stop, v, cfg, min_width, backward, budget):
    """Process one side of t0.  Returns (accepted list, truncated flag)."""
    accepted = []
    if start == stop:
        return accepted, False
    lo, hi = (stop, start) if backward else (start, stop)
    key = (lambda c, d: -d) if backward else (lambda c, d: c)
    heap = [(key(lo, hi), lo, hi)]
    w = np.asarray(v, dtype=float)
    last_width = None
    monitor = cfg.blowup_components
    worst_tail, smallest = 0.0, np.inf
    while heap:
        _, c0, d0 = heapq.heappop(heap)
        width = d0 - c0
        smallest = min(smallest, width)
        point = d0 if backward else c0
        outcome = "split"
        loc = None
        try:
            loc = _local(spec, c0, d0, point, w, cfg)
        except LocalSolveError as exc:
            logger.debug("local solve failed: %s", exc)
        at_scale = last_width is not None and width <= last_width * (1 + 1e-12)
        if loc is not None:
            ok, tails = _resolved(loc, cfg.eps, spec.error_scale)
            vals = loc.values if monitor is None else loc.values[:, list(monitor)]
            mag = np.max(np.abs(vals))
            if ok and mag <= cfg.blowup_cap:
                outcome = "accept"
            elif ok or (at_scale and mag > cfg.blowup_cap):
                outcome = "truncate" if (at_scale or width <= min_width) else "split"
            else:
                worst_tail = max(worst_tail, float(np.max(tails)))
        if outcome == "accept":
            accepted.append((c0, d0, loc.coeffs, tails))
            last_width = width
            if len(accepted) + budget[0] > cfg.max_intervals:
                raise ResolutionError(
                    f"exceeded max_intervals={cfg.max_intervals}",
                    worst_tail=worst_tail,
                    smallest_width=smallest,
                )
            x = -1.0 if backward else 1.0
            w = clenshaw(loc.coeffs.T, x)
        elif outcome == "truncate":
            logger.debug("solution exceeds cap on [%g, %g]; truncating", c0, d0)
            return accepted, True
        else:
            if 0.5 * width < min_width:
                raise ResolutionError(
                    f"interval [{c0!r}, {d0!r}] could not be resolved above the "
                    f"minimum width {min_width:.3e} (worst tail ratio {worst_tail:.3e})",
                    worst_tail=worst_tail,
                    smallest_width=smallest,
                )
            mid = 0.5 * (c0 + d0)
            heapq.heappush(heap, (key(c0, mid), c0, mid))
            heapq.heappush(heap, (key(mid, d0), mid, d0))
    return accepted, False


def solve_adaptive(spec, a0, b0, t0, v, config=None):
    """Solve y' = F(t, y), y(t0) = v adaptively on [a0, b0].

    Returns a :class:`PiecewiseSolution`.  If a monitored component exceeds
    ``config.blowup_cap`` the corresponding sweep stops and the achieved
    domain is shrunk, with the truncation flag set.
    """
    cfg = config or AdaptiveConfig()
    if not (a0 <= t0 <= b0) or not a0 < b0:
        raise ValueError(f"need a0 <= t0 <= b0 with a0 < b0, got {a0}, {t0}, {b0}")
    v = np.asarray(v, dtype=float).reshape(spec.n)
    min_width = cfg.min_width if cfg.min_width is not None else 1e-13 * (b0 - a0)
    budget = [0]
    left, trunc_l = _sweep(spec, t0, a0, v, cfg, min_width, True, budget)
    budget[0] = len(left)
    right, trunc_r = _sweep(spec, t0, b0, v, cfg, min_width, False, budget)
    pieces = sorted(left + right, key=lambda p: p[0])
    if not pieces:
        raise ResolutionError("no interval was accepted", smallest_width=None)
    bp = np.array([p[0] for p in pieces] + [pieces[-1][1]])
    coeffs = np.stack([p[2] for p in pieces])  # (m, l+1, n)
    tails = np.stack([np.atleast_1d(p[3]) for p in pieces])
    comps = [PiecewiseExpansion(bp, coeffs[:, :, i]) for i in range(spec.n)]
    return PiecewiseSolution(
        comps, (float(bp[0]), float(bp[-1])), trunc_l, trunc_r, tails
    )
