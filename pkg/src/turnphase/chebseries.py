"""Piecewise Chebyshev expansions.

Functions on an interval ``[x0, xm]`` are stored as one row of Chebyshev
coefficients per subinterval of a partition.  Values are sampled at the
Chebyshev extrema ``-cos(pi j / l)``, which include both endpoints of each
subinterval; the interval-chaining ODE solver relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.polynomial.chebyshev as npcheb

from .exceptions import DomainError

DEFAULT_ORDER = 16


def _check_order(l):
    if int(l) != l or l < 2 or l % 2:
        raise ValueError(f"Chebyshev order must be an even integer >= 2, got {l!r}")
    return int(l)


def cheb_nodes(l):
    """Chebyshev extrema on [-1, 1] in ascending order (l + 1 points)."""
    l = _check_order(l)
    x = -np.cos(np.pi * np.arange(l + 1) / l)
    # pin the symmetric points; cos() leaves ~1e-17 residue at the middle
    x[0], x[-1] = -1.0, 1.0
    x = 0.5 * (x - x[::-1])
    return x


@lru_cache(maxsize=None)
def _nodes(n):
    # internal variant that accepts odd orders too (antiderivatives have order l+1)
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    x[0], x[-1] = -1.0, 1.0
    x = 0.5 * (x - x[::-1])
    x.setflags(write=False)
    return x


@lru_cache(maxsize=None)
def _forward_matrix(n):
    """Matrix taking values at the n+1 extrema to Chebyshev coefficients."""
    k = np.arange(n + 1)
    # x_k = -cos(pi k/n) = cos(pi (n-k)/n), so T_j(x_k) = cos(pi j (n-k)/n);
    # reducing j (n-k) mod 2n first keeps the cosine argument in [0, 2 pi)
    T = np.cos(np.pi * (np.outer(k, n - k) % (2 * n)) / n)
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    M = (2.0 / n) * T * w[None, :]
    M[0] *= 0.5
    M[-1] *= 0.5
    M.setflags(write=False)
    return M


@lru_cache(maxsize=None)
def _inverse_matrix(n):
    M = npcheb.chebvander(_nodes(n), n)
    M.setflags(write=False)
    return M


def vals_to_coeffs(values, order=None):
    """Chebyshev coefficients of the interpolant through values at the extrema.

    ``values`` may be 1-D (one function) or 2-D with the node axis first.
    With ``order`` given, exactly ``order + 1`` values are required.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0] - 1
    if n < 1:
        raise ValueError("need at least two values")
    if order is not None and n != order:
        raise ValueError(f"expected {order + 1} values, got {n + 1}")
    return _forward_matrix(n) @ values


def coeffs_to_vals(coeffs, order=None):
    """Values at the extrema of the expansion with the given coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[0] - 1
    if n < 1:
        raise ValueError("need at least two coefficients")
    if order is not None and n != order:
        raise ValueError(f"expected {order + 1} coefficients, got {n + 1}")
    return _inverse_matrix(n) @ coeffs


def clenshaw(coeffs, x):
    """Evaluate sum_j coeffs[..., j] T_j(x) by Clenshaw's recurrence.

    ``coeffs`` has the coefficient axis last; leading axes broadcast
    against ``x``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    n = coeffs.shape[-1] - 1
    b1 = np.zeros(np.broadcast_shapes(coeffs.shape[:-1], x.shape))
    b2 = np.zeros_like(b1)
    x2 = 2.0 * x
    for j in range(n, 0, -1):
        b1, b2 = coeffs[..., j] + x2 * b1 - b2, b1
    return coeffs[..., 0] + x * b1 - b2


def _norm0(a):
    # overflow-safe 2-norm along axis 0
    m = np.max(np.abs(a), axis=0)
    safe = np.where(m > 0, m, 1.0)
    return m * np.sqrt(np.sum((a / safe) ** 2, axis=0))


def tail_ratio(coeffs):
    """Fraction of coefficient energy in the upper half of an expansion.

    Returns sqrt(sum_{j>l/2} c_j^2) / sqrt(sum_j c_j^2); an all-zero vector
    gives 0.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    l = coeffs.shape[0] - 1
    _check_order(l)
    total = _norm0(coeffs)
    tail = _norm0(coeffs[l // 2 + 1 :])
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(total > 0, tail / np.where(total > 0, total, 1.0), 0.0)
    return float(r) if r.ndim == 0 else r


@lru_cache(maxsize=None)
def integration_matrix(n):
    """Spectral integration on [-1, 1] at the extrema.

    Row k of the result applied to values at the nodes gives the integral of
    the interpolant from -1 to x_k.
    """
    K = npcheb.chebint(np.eye(n + 1), lbnd=-1)  # (n+2, n+1)
    V = npcheb.chebvander(_nodes(n), n + 1)
    S = V @ K @ _forward_matrix(n)
    S[0] = 0.0
    S.setflags(write=False)
    return S


@lru_cache(maxsize=None)
def differentiation_matrix(n):
    """Spectral differentiation on [-1, 1] at the extrema (values to values)."""
    D = npcheb.chebder(np.eye(n + 1))  # (n, n+1)
    V = npcheb.chebvander(_nodes(n), n - 1)
    M = V @ D @ _forward_matrix(n)
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class PiecewiseExpansion:
    """Chebyshev series on each subinterval of a partition.

    Row ``i`` of ``coeffs`` holds the coefficients on
    ``[breakpoints[i], breakpoints[i+1]]``.  Evaluation uses half-open
    intervals ``[x_{i-1}, x_i)`` except for the last, which is closed.
    """

    breakpoints: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float)
        cf = np.array(self.coeffs, dtype=float)
        if cf.ndim == 1:
            cf = cf[None, :]
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if cf.ndim != 2 or cf.shape[0] != bp.size - 1 or cf.shape[1] < 1:
            raise ValueError(
                f"coefficient array of shape {cf.shape} does not match "
                f"{bp.size - 1} intervals"
            )
        if not (np.all(np.isfinite(cf)) and np.all(np.isfinite(bp))):
            raise ValueError("expansion contains non-finite values")
        bp.setflags(write=False)
        cf.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coeffs", cf)

    @property
    def order(self):
        return self.coeffs.shape[1] - 1

    @property
    def n_intervals(self):
        return self.coeffs.shape[0]

    @property
    def domain(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @classmethod
    def from_function(cls, f, breakpoints, order=DEFAULT_ORDER):
        """Interpolate a vectorized callable at the extrema of every subinterval."""
        bp = np.asarray(breakpoints, dtype=float)
        ts = interval_nodes(bp, order)
        vals = np.asarray(f(ts.ravel()), dtype=float).reshape(ts.shape)
        return cls.from_values(bp, vals)

    @classmethod
    def from_values(cls, breakpoints, values):
        """Build from an (m, l+1) array of values at each interval's extrema."""
        values = np.asarray(values, dtype=float)
        return cls(breakpoints, vals_to_coeffs(values.T).T)

    def node_values(self):
        """Values at each interval's extrema, shape (m, l+1)."""
        return coeffs_to_vals(self.coeffs.T).T

    def locate(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.domain
        if np.any(t < a) or np.any(t > b) or np.any(np.isnan(t)):
            bad = t[(t < a) | (t > b) | np.isnan(t)]
            raise DomainError(
                f"point {float(np.ravel(bad)[0])!r} lies outside [{a!r}, {b!r}]"
            )
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.clip(idx, 0, self.n_intervals - 1)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = self.locate(t)
        x0 = self.breakpoints[idx]
        x1 = self.breakpoints[idx + 1]
        x = (2.0 * t - (x0 + x1)) / (x1 - x0)
        out = clenshaw(self.coeffs[idx], x)
        return float(out) if out.ndim == 0 else out

    def eval_many(self, ts):
        return np.asarray(self(np.asarray(ts, dtype=float)))

    def differentiate(self):
        return differentiate(self)

    def integrate(self, anchor, value=0.0):
        return integrate(self, anchor, value)

    def map_affine(self, scale, shift):
        """Expansion of t -> f((t - shift) / scale) for scale = +1 or -1."""
        if scale == 1:
            return PiecewiseExpansion(self.breakpoints + shift, self.coeffs)
        if scale != -1:
            raise ValueError("only reflections and shifts are supported")
        sign = (-1.0) ** np.arange(self.order + 1)
        return PiecewiseExpansion(
            shift - self.breakpoints[::-1], self.coeffs[::-1] * sign[None, :]
        )

    def __mul__(self, c):
        return PiecewiseExpansion(self.breakpoints, self.coeffs * float(c))

    __rmul__ = __mul__


def interval_nodes(breakpoints, order):
    """Extrema of every subinterval, shape (m, order+1)."""
    bp = np.asarray(breakpoints, dtype=float)
    x = _nodes(order)
    lo, hi = bp[:-1, None], bp[1:, None]
    ts = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x[None, :]
    ts[:, 0] = bp[:-1]
    ts[:, -1] = bp[1:]
    return ts


def differentiate(exp):
    """Derivative expansion with the same breakpoints and order."""
    h = np.diff(exp.breakpoints)
    d = npcheb.chebder(exp.coeffs, axis=1) if exp.order > 0 else np.zeros_like(exp.coeffs)
    out = np.zeros_like(exp.coeffs)
    out[:, : d.shape[1]] = d * (2.0 / h)[:, None]
    return PiecewiseExpansion(exp.breakpoints, out)


def integrate(exp, anchor, value=0.0):
    """Continuous antiderivative A of order l+1 with A(anchor) = value.

    Constants are accumulated outward from the interval containing the
    anchor, so values near the anchor carry no cancellation from distant
    intervals.
    """
    a, b = exp.domain
    if not (a <= anchor <= b):
        raise DomainError(f"anchor {anchor!r} outside [{a!r}, {b!r}]")
    h = np.diff(exp.breakpoints)
    # each row integrated from its own left endpoint
    rows = npcheb.chebint(exp.coeffs, lbnd=-1, axis=1) * (0.5 * h)[:, None]
    right_vals = rows.sum(axis=1)  # T_j(1) = 1
    k = int(exp.locate(anchor))
    x = (2.0 * anchor - (exp.breakpoints[k] + exp.breakpoints[k + 1])) / h[k]
    left_val = np.zeros(exp.n_intervals)  # value at each row's left endpoint
    left_val[k] = value - clenshaw(rows[k], x)
    for i in range(k + 1, exp.n_intervals):
        left_val[i] = left_val[i - 1] + right_vals[i - 1]
    for i in range(k - 1, -1, -1):
        left_val[i] = left_val[i + 1] - right_vals[i]
    rows[:, 0] += left_val
    return PiecewiseExpansion(exp.breakpoints, rows)
