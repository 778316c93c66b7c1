"""Test coefficients, reference special functions and small numeric helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from .phasefn import TurningPointSpec

EPS0 = 2.220446049250313e-16

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


# above this the Lanczos power t^(x+1/2) carries ~|log Gamma| ulps of error;
# the upward recurrence from below it loses only ~1 ulp per step
_LANCZOS_MAX = 20.0


def _lanczos(x):
    x -= 1.0
    s = _LANCZOS[0]
    for i in range(1, 9):
        s += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2 * math.pi) * t ** (x + 0.5) * math.exp(-t) * s


def gamma_real(x):
    """Gamma function of a real argument, |x| <= 170."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise ValueError(f"gamma has a pole at {x!r}")
    if abs(x) > 171.6:
        raise ValueError("argument too large")
    if x <= 0:
        # x - n is exact, so sin(pi x) keeps full relative accuracy near poles
        n = round(x)
        s = math.sin(math.pi * (x - n)) * (-1.0 if n % 2 else 1.0)
        return math.pi / (s * gamma_real(1.0 - x))
    if x < 0.5:
        return gamma_real(x + 1.0) / x
    if x <= _LANCZOS_MAX:
        return _lanczos(x)
    n = int(math.floor(x - _LANCZOS_MAX)) + 1
    y = x - n
    g = _lanczos(y)
    for i in range(n):
        g *= y + i
    return g


AIRY_SERIES_MAX = 8.0


def _airy_series_mp(t, prec):
    with mpmath.workprec(prec):
        t = mpmath.mpf(t)
        c1 = mpmath.power(3, mpmath.mpf(-2) / 3) / mpmath.gamma(mpmath.mpf(2) / 3)
        c2 = mpmath.power(3, mpmath.mpf(-1) / 3) / mpmath.gamma(mpmath.mpf(1) / 3)
        t3 = t**3
        tol = mpmath.mpf(2) ** (-prec)
        # f = sum a_k, g = sum b_k, with a_0 = 1, b_0 = t
        a, b = mpmath.mpf(1), t
        f, g = a, b
        fp, gp = mpmath.mpf(0), mpmath.mpf(1)
        k = 0
        while True:
            k += 1
            a = a * t3 / ((3 * k - 1) * (3 * k))
            b = b * t3 / ((3 * k) * (3 * k + 1))
            f += a
            g += b
            if t != 0:
                fp += a * (3 * k) / t
                gp += b * (3 * k + 1) / t
            if abs(a) + abs(b) <= tol * (abs(f) + abs(g)) and k > 3:
                break
        ai = c1 * f - c2 * g
        bi = mpmath.sqrt(3) * (c1 * f + c2 * g)
        aip = c1 * fp - c2 * gp
        bip = mpmath.sqrt(3) * (c1 * fp + c2 * gp)
        return ai, bi, aip, bip


def airy_series(t, prec=160):
    """(Ai, Bi, Ai', Bi') at real |t| <= 8 by summing the Maclaurin series.

    The sums are carried out in extended precision so that the cancellation
    in Ai for positive t does not limit the accuracy of the rounded result.
    """
    if not abs(t) <= AIRY_SERIES_MAX:
        raise ValueError(f"|t| = {abs(t)!r} exceeds the oracle range {AIRY_SERIES_MAX}")
    return tuple(float(v) for v in _airy_series_mp(t, prec))


@dataclass(frozen=True)
class NamedCoefficient:
    """A coefficient q with its analytic derivative and turning points."""

    name: str
    q: Callable
    dq: Callable
    turning_points: tuple
    domain: tuple
    params: dict = field(default_factory=dict)


def _bisect_newton(q, dq, lo, hi, tol=1e-13):
    """Root of q in [lo, hi] (q changes sign there): bisection to a small
    bracket, then Newton steps that are discarded if they leave it."""
    flo = q(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, abs(mid)) or mid in (lo, hi):
            break
        fm = q(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-6 * max(1.0, abs(mid)):
            x = _newton_in(q, dq, 0.5 * (lo + hi), lo, hi, tol)
            if x is not None:
                return x
    return 0.5 * (lo + hi)


def _newton_in(q, dq, x, lo, hi, tol):
    for _ in range(50):
        d = dq(x)
        if d == 0:
            return None
        step = q(x) / d
        x = x - step
        if not lo <= x <= hi:
            return None
        if abs(step) <= tol * max(1.0, abs(x)):
            return x
    return None


def find_sign_changes(q, dq, a, b, n=20001):
    """Simple roots of q on (a, b), located by bisection then Newton."""
    t = np.linspace(a, b, n)
    v = np.array([q(s) for s in t])
    roots = []
    for i in range(n - 1):
        if v[i] == 0.0 and 0 < i:
            roots.append(float(t[i]))
        elif v[i] * v[i + 1] < 0:
            roots.append(float(_bisect_newton(q, dq, t[i], t[i + 1])))
    return roots


def _classify(dq, roots):
    return tuple(TurningPointSpec(c, 1, 1 if dq(c) > 0 else -1) for c in roots)


def airy_q():
    """q(t) = -t: y'' - t y = 0."""
    return NamedCoefficient(
        "airy",
        lambda t: -np.asarray(t, dtype=float),
        lambda t: -np.ones_like(np.asarray(t, dtype=float)),
        (TurningPointSpec(0.0, 1, -1),),
        (-10000.0, 200.0),
    )


def bessel_normal_q(nu):
    """Normal form of Bessel's equation: q(t) = 1 + (1/4 - nu^2)/t^2."""
    nu = float(nu)
    if not nu > 0.5:
        raise ValueError("nu must exceed 1/2 for a turning point to exist")
    s = 0.25 - nu * nu

    def q(t):
        t = np.asarray(t, dtype=float)
        return 1.0 + s / (t * t)

    def dq(t):
        t = np.asarray(t, dtype=float)
        return -2.0 * s / (t * t * t)

    guess = 0.5 * math.sqrt(4 * nu * nu - 1)
    c = _bisect_newton(lambda x: float(q(x)), lambda x: float(dq(x)), 0.5 * guess, 2 * guess)
    return NamedCoefficient(
        f"bessel:{nu:g}",
        q,
        dq,
        (TurningPointSpec(c, 1, 1),),
        (c / 100, 100 * nu),
        {"nu": nu},
    )


def legendre_q(nu, mu=10.0):
    """Associated Legendre equation after t = tanh(w):
    q(w) = nu(nu+1) sech^2(w) - mu^2."""
    nu, mu = float(nu), float(mu)
    lam = nu * (nu + 1)
    if not lam > mu * mu or mu <= 0:
        raise ValueError("need nu(nu+1) > mu^2 > 0")

    def q(w):
        w = np.asarray(w, dtype=float)
        return lam / np.cosh(w) ** 2 - mu * mu

    def dq(w):
        w = np.asarray(w, dtype=float)
        return -2.0 * lam * np.tanh(w) / np.cosh(w) ** 2

    guess = math.acosh(math.sqrt(lam) / mu)
    c = _bisect_newton(
        lambda x: float(q(x)), lambda x: float(dq(x)), 0.5 * guess, 2 * guess + 1
    )
    return NamedCoefficient(
        f"legendre:{nu:g}:{mu:g}",
        q,
        dq,
        (TurningPointSpec(c, 1, -1),),
        (0.0, c + 1000.0 / mu),
        {"nu": nu, "mu": mu},
    )


def monomial_q(k):
    """q(t) = t^k with a turning point of order k at 0."""
    k = int(k)
    if k < 1:
        raise ValueError("k must be a positive integer")
    # powers of |t| keep q exactly even or odd under t -> -t; the vectorized
    # power is not sign-symmetric to the last bit
    def q(t):
        t = np.asarray(t, dtype=float)
        return np.abs(t) ** k * (np.sign(t) if k % 2 else 1.0)

    def dq(t):
        t = np.asarray(t, dtype=float)
        return k * np.abs(t) ** (k - 1) * (1.0 if k % 2 else np.sign(t))

    return NamedCoefficient(
        f"monomial:{k}",
        q,
        dq,
        (TurningPointSpec(0.0, k, 1),),
        (-6.0, 6.0),
        {"k": k},
    )


def bumps_q(nu):
    """nu^2 (exp(-(t-5)^2) + exp(-(t+5)^2) + sin^2(t/2)/(1+t^2)).

    The minimum at 0 is 2 nu^2 exp(-25); it is treated as a turning point
    of order 2.
    """
    n2 = float(nu) ** 2

    def q(t):
        t = np.asarray(t, dtype=float)
        return n2 * (
            np.exp(-((t - 5) ** 2)) + np.exp(-((t + 5) ** 2)) + np.sin(t / 2) ** 2 / (1 + t * t)
        )

    def dq(t):
        t = np.asarray(t, dtype=float)
        s, c = np.sin(t / 2), np.cos(t / 2)
        return n2 * (
            -2 * (t - 5) * np.exp(-((t - 5) ** 2))
            - 2 * (t + 5) * np.exp(-((t + 5) ** 2))
            + s * c / (1 + t * t)
            - 2 * t * s * s / (1 + t * t) ** 2
        )

    return NamedCoefficient(
        f"bumps:{float(nu):g}", q, dq, (TurningPointSpec(0.0, 2, 1),), (-10.0, 10.0), {"nu": float(nu)}
    )


def three_tp_q(nu):
    """nu^2 (exp(-(t+5)^2) - (t-5) exp(-(t-5)^2) - 6 exp(-25))."""
    n2 = float(nu) ** 2
    e25 = math.exp(-25.0)

    def q(t):
        t = np.asarray(t, dtype=float)
        return n2 * (np.exp(-((t + 5) ** 2)) - (t - 5) * np.exp(-((t - 5) ** 2)) - 6 * e25)

    def dq(t):
        t = np.asarray(t, dtype=float)
        g = np.exp(-((t - 5) ** 2))
        return n2 * (-2 * (t + 5) * np.exp(-((t + 5) ** 2)) - g + 2 * (t - 5) ** 2 * g)

    # roots of the unscaled function, so they do not depend on nu
    q1 = lambda s: float(q(s)) / n2
    d1 = lambda s: float(dq(s)) / n2
    roots = find_sign_changes(q1, d1, -10.0, 10.0)
    # t = 0 is an exact zero
    roots = [0.0 if abs(r) < 1e-12 else r for r in roots]
    return NamedCoefficient(
        f"three:{float(nu):g}", q, dq, _classify(d1, roots), (-10.0, 10.0), {"nu": float(nu)}
    )


def cosine_q(nu):
    """nu^2 (1 + cos(pi t)); double zeros at the odd integers."""
    n2 = float(nu) ** 2

    def q(t):
        return n2 * (1 + np.cos(np.pi * np.asarray(t, dtype=float)))

    def dq(t):
        return -n2 * np.pi * np.sin(np.pi * np.asarray(t, dtype=float))

    tps = tuple(TurningPointSpec(float(c), 2, 1) for c in range(-11, 12, 2))
    return NamedCoefficient(f"cosine:{float(nu):g}", q, dq, tps, (-11.0, 11.0), {"nu": float(nu)})


def monomial_basis_ics(k):
    """(u(0), u'(0), v(0), v'(0)) of the standard basis of y'' + t^k y = 0."""
    k = int(k)
    if k < 1:
        raise ValueError("k must be a positive integer")
    nu = 1.0 / (2 + k)
    s = math.sqrt(math.pi / (2 + k))
    up = s * nu**nu / gamma_real(nu + 1)
    v = -s * nu ** (-nu) * gamma_real(nu) / math.pi
    vp = -s * nu**nu * gamma_real(-nu) * math.cos(math.pi * nu) / math.pi
    return 0.0, up, v, vp


def condition_number(f, f_prime, t):
    """kappa_f(t) = |f'(t) t / f(t)|; infinite where f(t) = 0.

    ``f`` may be complex valued.
    """
    ft = np.asarray(f(t))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.abs(np.asarray(f_prime(t)) * np.asarray(t) / ft)
    k = np.where(ft == 0, np.inf, k)
    return float(k) if np.ndim(k) == 0 else k


def predicted_error(f, f_prime, t):
    return condition_number(f, f_prime, t) * EPS0
