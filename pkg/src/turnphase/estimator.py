"""scikit-learn style wrapper: ``fit`` builds the basis, ``transform`` evaluates it."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .phasefn import MultiPhaseBasis, basis_eval


class PhaseBasisTransformer(TransformerMixin, BaseEstimator):
    """Maps points t to the columns (u, v, u', v') of a phase-function basis.

    ``coef`` is a built-in coefficient name such as ``"bessel:100"``, a JSON
    coefficient file, or a :class:`~turnphase.specfun.NamedCoefficient`.
    Nothing is learned from the data passed to ``fit``; the basis depends on
    the coefficient alone.
    """

    def __init__(self, coef="airy", a=None, b=None, eps=1e-12, order=16, qprime=None):
        self.coef = coef
        self.a = a
        self.b = b
        self.eps = eps
        self.order = order
        self.qprime = qprime

    def fit(self, X=None, y=None):
        from .cli import build_basis, parse_coefficient

        named = parse_coefficient(self.coef) if isinstance(self.coef, str) else self.coef
        self.basis_ = build_basis(named, self.a, self.b, self.eps, self.order, self.qprime)
        self.domain_ = tuple(float(x) for x in self.basis_.domain)
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        t = np.asarray(X, dtype=float)
        if t.ndim == 2:
            if t.shape[1] != 1:
                raise ValueError(f"expected a single column of points, got shape {t.shape}")
            t = t[:, 0]
        elif t.ndim != 1:
            raise ValueError(f"expected a 1-d array of points, got shape {t.shape}")
        if isinstance(self.basis_, MultiPhaseBasis):
            cols = self.basis_(t)
        else:
            cols = basis_eval(self.basis_, t)
        return np.column_stack(cols)

    def get_feature_names_out(self, input_features=None):
        return np.array(["u", "v", "up", "vp"], dtype=object)
