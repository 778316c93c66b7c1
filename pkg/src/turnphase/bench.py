"""Reference solves, comparison metrics and the numerical experiments.

Every experiment builds phase functions for one family of coefficients,
compares the resulting solutions with a conventional solve run at a tighter
tolerance, and records the time spent constructing the phases.
"""

from __future__ import annotations

import logging
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import TurnphaseError
from .odesolve import AdaptiveConfig, SystemSpec, solve_adaptive
from .phasefn import (
    CoefficientSpec,
    PhaseConfig,
    basis_eval,
    build_phase,
    build_phase_multi,
    fit_solution,
)
from .specfun import (
    airy_q,
    airy_series,
    bessel_normal_q,
    bumps_q,
    cosine_q,
    legendre_q,
    monomial_basis_ics,
    monomial_q,
    predicted_error,
    three_tp_q,
)

logger = logging.getLogger(__name__)

EPS0 = 2.220446049250313e-16
REF_EPS = 1e-14
# two reference solves one decade apart must agree to this level
REF_AGREEMENT = 1e-11
# solutions this large have lost all absolute accuracy in double precision
REF_BLOWUP = 1e150


def _fundamental_system(q):
    """(y1, y1', y2, y2') for two solutions of y'' + q y = 0 at once."""

    def matrix(t):
        A = np.zeros((t.size, 4, 4))
        mq = -np.asarray(q(t), dtype=float)
        A[:, 0, 1] = A[:, 2, 3] = 1.0
        A[:, 1, 0] = A[:, 3, 2] = mq
        return A

    return SystemSpec.linear_system(4, matrix)


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    """y = d1 y1 + d2 y2 from a conventional solve of a fundamental pair."""

    pair: object
    d: tuple
    certified: bool
    agreement: float

    @property
    def domain(self):
        return self.pair.domain

    def _eval(self, t, j):
        Y = self.pair(np.asarray(t, dtype=float))
        return self.d[0] * Y[..., j] + self.d[1] * Y[..., 2 + j]

    def __call__(self, t):
        return self._eval(t, 0)

    def derivative(self, t):
        return self._eval(t, 1)


def _pair(q, a, b, t0, eps, order, max_intervals):
    cfg = AdaptiveConfig(eps=eps, order=order, blowup_cap=REF_BLOWUP, max_intervals=max_intervals)
    return solve_adaptive(_fundamental_system(q), a, b, t0, [1.0, 0.0, 0.0, 1.0], cfg)


def _combine(pair, cond1, cond2):
    rows, rhs = [], []
    for point, ca, cb, r in (cond1, cond2):
        Y = pair(float(point))
        rows.append([ca * Y[0] + cb * Y[1], ca * Y[2] + cb * Y[3]])
        rhs.append(r)
    return tuple(float(x) for x in np.linalg.solve(np.array(rows), np.array(rhs, dtype=float)))


def reference_solve(
    q, interval, conditions, ref_eps=REF_EPS, order=16, max_intervals=200_000, check_points=2001
):
    """Conventional solve of y'' + q y = 0 subject to two conditions.

    Each condition is (point, a, b, r) meaning a y(point) + b y'(point) = r.
    The solve is repeated at ``ref_eps / 10`` with a different Chebyshev
    order, so that its partition and rounding differ.  The sweeps stop
    where the fundamental pair exceeds ``REF_BLOWUP``, so the reference may
    cover less than ``interval``.  The reference is certified when the two
    agree in the metric of :func:`diff_metric` to ``REF_AGREEMENT``.
    """
    a, b = map(float, interval)
    cond1, cond2 = conditions
    t0 = float(cond1[0])
    first = _pair(q, a, b, t0, ref_eps, order, max_intervals)
    ref = ReferenceSolution(first, _combine(first, cond1, cond2), True, 0.0)
    second = _pair(q, a, b, t0, ref_eps / 10, order + 4, max_intervals)
    check = ReferenceSolution(second, _combine(second, cond1, cond2), True, 0.0)
    lo = max(first.domain[0], second.domain[0])
    hi = min(first.domain[1], second.domain[1])
    agree = diff_metric(ref, check, np.linspace(lo, hi, check_points))
    ok = bool(agree <= REF_AGREEMENT)
    if not ok:
        logger.warning("reference solves disagree by %.3e; flagged unreliable", agree)
    return ReferenceSolution(first, ref.d, ok, agree)


def diff_metric(y1, y2, points):
    """max_j |y1(z_j) - y2(z_j)| / (1 + |y2(z_j)|)."""
    z = np.asarray(points, dtype=float)
    v1 = np.asarray(y1(z), dtype=float)
    v2 = np.asarray(y2(z), dtype=float)
    return float(np.max(np.abs(v1 - v2) / (1.0 + np.abs(v2))))


# -- experiments -----------------------------------------------------------------

EXPERIMENTS = ("airy", "bessel", "alf", "high", "bumps", "three", "many")


@dataclass(frozen=True)
class ExperimentParams:
    """Sizes and caps for one experiment run.

    ``numax`` caps the swept frequency parameter (its default depends on
    the experiment); comparisons against references are made only up to
    ``ref_numax``, above which rows carry timings alone.
    """

    grid: int = 20
    numax: float | None = None
    ref_numax: float = 1e3
    points: int = 1000
    repeat: int = 5
    eps: float = 1e-12
    order: int = 16
    mu: float = 10.0
    n_jobs: int = 1

    def __post_init__(self):
        if self.grid < 1 or self.points < 2 or self.repeat < 1:
            raise ValueError("grid >= 1, points >= 2 and repeat >= 1 are required")
        if self.numax is not None and not self.numax >= 1:
            raise ValueError("numax must be at least 1")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be at least 1")


@dataclass
class Record:
    abscissa: float
    err_supplied: float = math.nan
    err_spectral: float = math.nan
    err_predicted: float = math.nan
    wall_time_ms: float = math.nan
    status: str = "ok"


@dataclass
class ExperimentReport:
    experiment: str
    grid: list
    records: list
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("abscissa", "err_supplied", "err_spectral", "err_predicted", "wall_time_ms", "status")

    def to_csv(self):
        lines = [",".join(self.COLUMNS)]
        for r in self.records:
            vals = [format(float(getattr(r, c)), ".17g") for c in self.COLUMNS[:-1]]
            lines.append(",".join(vals + [r.status]))
        return "\n".join(lines) + "\n"

    def mode_ratios(self):
        """err_spectral / err_supplied per row, both floored at machine zero."""
        out = []
        for r in self.records:
            if math.isfinite(r.err_supplied) and math.isfinite(r.err_spectral):
                out.append(max(r.err_spectral, EPS0) / max(r.err_supplied, EPS0))
        return out


def _median_ms(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(1e3 * (time.perf_counter() - t0))
    return out, statistics.median(times)


def _log_grid(n, top):
    if n == 1:
        return [1.0]
    return [float(10.0**x) for x in np.linspace(0.0, math.log10(top), n)]


def _interior(a, b, n):
    return np.linspace(a, b, n + 2)[1:-1]


def _config(params):
    return PhaseConfig(eps=params.eps, order=params.order)


def _specs(named):
    return {m: CoefficientSpec.from_named(named, m) for m in ("supplied", "spectral")}


def _rows(fn, grid, params):
    """Apply ``fn`` to every grid value; failures become flagged rows."""

    def safe(x):
        try:
            return fn(x)
        except (TurnphaseError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.warning("row %g failed: %s", x, exc)
            return Record(float(x), status=f"failed: {type(exc).__name__}: {exc}".replace(",", ";"))

    if params.n_jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=params.n_jobs) as ex:
            return list(ex.map(safe, grid))
    return [safe(x) for x in grid]


def _airy(params):
    nc = airy_q()
    specs, cfg = _specs(nc), _config(params)
    tp = nc.turning_points[0]
    a, b = nc.domain
    bases = {}
    bases["supplied"], ms = _median_ms(lambda: build_phase(specs["supplied"], a, b, tp, cfg), params.repeat)
    bases["spectral"] = build_phase(specs["spectral"], a, b, tp, cfg)
    ts = np.linspace(-8.0, 4.0, params.points)
    ser = np.array([airy_series(t) for t in ts])
    f_ref = ser[:, 0] + 1j * ser[:, 1]
    fp_ref = ser[:, 2] + 1j * ser[:, 3]
    ai0, bi0, aip0, bip0 = airy_series(0.0)
    errs = {}
    for mode, bs in bases.items():
        ai = fit_solution(bs, (0.0, 1, 0, ai0), (0.0, 0, 1, aip0))
        bi = fit_solution(bs, (0.0, 1, 0, bi0), (0.0, 0, 1, bip0))
        errs[mode] = np.abs(ai(ts) + 1j * bi(ts) - f_ref) / np.abs(f_ref)
    pred = predicted_error(lambda _: f_ref, lambda _: fp_ref, ts)
    records = [
        Record(float(t), float(errs["supplied"][i]), float(errs["spectral"][i]), float(pred[i]), ms)
        for i, t in enumerate(ts)
    ]
    end = bases["supplied"].domain[1]
    meta = {
        "truncation_endpoint": end,
        "alpha_p_at_endpoint": float(bases["supplied"].phase.alpha_p(end)),
        "domain": list(bases["supplied"].domain),
    }
    return [float(t) for t in ts], records, meta


def _bessel(params):
    from scipy.special import jv, jvp, yv, yvp

    top = params.numax or 1e6
    grid = _log_grid(params.grid, top)
    cfg = _config(params)

    def row(nu):
        nc = bessel_normal_q(nu)
        specs = _specs(nc)
        tp = nc.turning_points[0]
        a, b = nc.domain
        sup, ms = _median_ms(lambda: build_phase(specs["supplied"], a, b, tp, cfg), params.repeat)
        spe = build_phase(specs["spectral"], a, b, tp, cfg)
        rec = Record(nu, wall_time_ms=ms)
        if nu > params.ref_numax:
            rec.status = "timing only"
            return rec
        lo, hi = max(sup.domain[0], spe.domain[0]), min(sup.domain[1], spe.domain[1])
        ts = _interior(lo, hi, params.points)
        with np.errstate(all="ignore"):
            f = jv(nu, ts) + 1j * yv(nu, ts)
            fp = jvp(nu, ts) + 1j * yvp(nu, ts)
        ok = np.isfinite(f) & np.isfinite(fp) & (np.abs(f) > 0)
        ts, f, fp = ts[ok], f[ok], fp[ok]
        # fit sqrt(t) J and sqrt(t) Y, the solutions of the normal form
        t0 = min(2.0 * tp.c, hi)
        s0 = math.sqrt(t0)

        def conds(val, der):
            return (t0, 1, 0, s0 * val), (t0, 0, 1, 0.5 * val / s0 + s0 * der)

        j_c = conds(float(jv(nu, t0)), float(jvp(nu, t0)))
        y_c = conds(float(yv(nu, t0)), float(yvp(nu, t0)))
        errs = []
        for bs in (sup, spe):
            fj, fy = fit_solution(bs, *j_c), fit_solution(bs, *y_c)
            g = (fj(ts) + 1j * fy(ts)) / np.sqrt(ts)
            errs.append(float(np.max(np.abs(g - f) / np.abs(f))))
        rec.err_supplied, rec.err_spectral = errs
        rec.err_predicted = float(np.max(predicted_error(lambda _: f, lambda _: fp, ts)))
        return rec

    return grid, _rows(row, grid, params), {"domain": "(c/100, 100 nu)"}


def _oscillatory_error(y, yp, ts):
    """Absolute-error prediction kappa |y| eps0 = |t y'| eps0 for a real solution."""
    return float(np.max(predicted_error(lambda _: y, lambda _: yp, ts) * np.abs(y), initial=0.0))


def _alf(params):
    top = params.numax or 1e6
    grid = _log_grid(params.grid, top)
    cfg = _config(params)
    mu = params.mu

    def row(lam):
        nc = legendre_q(abs(mu) + lam, mu)
        specs = _specs(nc)
        tp = nc.turning_points[0]
        a, b = nc.domain
        sup, ms = _median_ms(lambda: build_phase(specs["supplied"], a, b, tp, cfg), params.repeat)
        spe = build_phase(specs["spectral"], a, b, tp, cfg)
        rec = Record(lam, wall_time_ms=ms)
        if lam > params.ref_numax:
            rec.status = "timing only"
            return rec
        # consistency: the basis function u against a conventional solve
        # launched from u's own data in the oscillatory region
        c = tp.c
        w0 = 0.5 * c
        ts = _interior(0.0, c, params.points)
        errs, ref = [], None
        for bs in (sup, spe):
            u, _, up, _ = basis_eval(bs, w0)
            conds = ((w0, 1, 0, u), (w0, 0, 1, up))
            r = reference_solve(nc.q, (0.0, c), conds)
            if not r.certified:
                rec.status = f"reference unreliable ({r.agreement:.1e})"
                return rec
            ref = r if ref is None else ref
            errs.append(float(np.max(np.abs(basis_eval(bs, ts)[0] - r(ts)))))
        rec.err_supplied, rec.err_spectral = errs
        rec.err_predicted = _oscillatory_error(ref(ts), ref.derivative(ts), ts)
        return rec

    return grid, _rows(row, grid, params), {"mu": mu}


def _high(params):
    ks = list(range(1, 1 + min(7, params.grid)))
    cfg = _config(params)

    def row(k):
        k = int(k)
        nc = monomial_q(k)
        specs = _specs(nc)
        tp = nc.turning_points[0]
        a, b = nc.domain
        sup, ms = _median_ms(lambda: build_phase(specs["supplied"], a, b, tp, cfg), params.repeat)
        spe = build_phase(specs["spectral"], a, b, tp, cfg)
        rec = Record(float(k), wall_time_ms=ms)
        u0, up0, v0, vp0 = monomial_basis_ics(k)
        cu = ((0.0, 1, 0, u0), (0.0, 0, 1, up0))
        cv = ((0.0, 1, 0, v0), (0.0, 0, 1, vp0))
        lo, hi = max(sup.domain[0], spe.domain[0]), min(sup.domain[1], spe.domain[1])
        ru, rv = reference_solve(nc.q, (lo, hi), cu), reference_solve(nc.q, (lo, hi), cv)
        if not (ru.certified and rv.certified):
            rec.status = "reference unreliable"
            return rec
        ts = _interior(lo, hi, params.points)
        f = ru(ts) + 1j * rv(ts)
        fp = ru.derivative(ts) + 1j * rv.derivative(ts)
        errs = []
        for bs in (sup, spe):
            g = fit_solution(bs, *cu)(ts) + 1j * fit_solution(bs, *cv)(ts)
            errs.append(float(np.max(np.abs(g - f) / np.abs(f))))
        rec.err_supplied, rec.err_spectral = errs
        rec.err_predicted = float(np.max(predicted_error(lambda _: f, lambda _: fp, ts)))
        return rec

    return [float(k) for k in ks], _rows(row, ks, params), {}


def _glued_experiment(params, named_fn, top_default, conds, metric, multi):
    top = params.numax or top_default
    grid = _log_grid(params.grid, top)
    cfg = _config(params)

    def build(spec, nc):
        a, b = nc.domain
        if multi:
            return build_phase_multi(spec, a, b, nc.turning_points, config=cfg)
        return build_phase(spec, a, b, nc.turning_points[0], cfg)

    def solve(obj):
        if multi:
            return obj.fit(*conds)
        return fit_solution(obj, *conds)

    def row(nu):
        nc = named_fn(nu)
        specs = _specs(nc)
        sup, ms = _median_ms(lambda: build(specs["supplied"], nc), params.repeat)
        spe = build(specs["spectral"], nc)
        rec = Record(nu, wall_time_ms=ms)
        if nu > params.ref_numax:
            rec.status = "timing only"
            return rec
        lo, hi = max(sup.domain[0], spe.domain[0]), min(sup.domain[1], spe.domain[1])
        ref = reference_solve(nc.q, nc.domain, conds)
        if not ref.certified:
            rec.status = f"reference unreliable ({ref.agreement:.1e})"
            return rec
        lo, hi = max(lo, ref.domain[0]), min(hi, ref.domain[1])
        ts = _interior(lo, hi, params.points)
        y, yp = ref(ts), ref.derivative(ts)
        rec.err_supplied = metric(solve(sup), ref, ts)
        rec.err_spectral = metric(solve(spe), ref, ts)
        pred = predicted_error(lambda _: y, lambda _: yp, ts) * np.abs(y)
        if metric is diff_metric:
            pred = pred / (1.0 + np.abs(y))
        rec.err_predicted = float(np.max(pred, initial=0.0))
        if sup.domain != nc.domain:
            rec.status = f"truncated to [{sup.domain[0]:.6g}; {sup.domain[1]:.6g}]"
        return rec

    return grid, _rows(row, grid, params), {"domain": list(named_fn(1.0).domain)}


def max_abs_difference(y1, y2, points):
    z = np.asarray(points, dtype=float)
    return float(np.max(np.abs(np.asarray(y1(z)) - np.asarray(y2(z)))))


def run_experiment(experiment, params=None):
    """Run one of :data:`EXPERIMENTS` and return an :class:`ExperimentReport`."""
    params = params or ExperimentParams()
    if experiment == "airy":
        grid, records, meta = _airy(params)
    elif experiment == "bessel":
        grid, records, meta = _bessel(params)
    elif experiment == "alf":
        grid, records, meta = _alf(params)
    elif experiment == "high":
        grid, records, meta = _high(params)
    elif experiment == "bumps":
        grid, records, meta = _glued_experiment(
            params, bumps_q, 1e6, ((0.0, 1, 0, 0.0), (10.0, 0, 1, 1.0)), max_abs_difference, False
        )
    elif experiment == "three":
        grid, records, meta = _glued_experiment(
            params, three_tp_q, 1e5, ((0.0, 1, 0, 1.0), (0.0, 0, 1, 0.0)), diff_metric, True
        )
    elif experiment == "many":
        grid, records, meta = _glued_experiment(
            params, cosine_q, 1e5, ((0.0, 1, 0, 1.0), (0.0, 0, 1, 1.0)), max_abs_difference, True
        )
    else:
        raise ValueError(f"unknown experiment {experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
    meta = {"eps": params.eps, "l": params.order, **meta}
    return ExperimentReport(experiment, list(grid), records, meta)
