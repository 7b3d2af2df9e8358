"""Sparse real polynomials in a fixed number of variables."""
from __future__ import annotations

from itertools import product
from math import comb

import numpy as np


class Polynomial:
    """Immutable map from exponent tuples to real coefficients.

    Args:
        nvars: number of variables.
        terms: mapping ``{(e_1, ..., e_nvars): coeff}``. Zero coefficients are dropped.
    """

    __slots__ = ("nvars", "terms", "_arrays")

    def __init__(self, nvars, terms=None):
        clean = {}
        for e, c in (terms or {}).items():
            e = tuple(int(x) for x in e)
            if len(e) != nvars or min(e, default=0) < 0:
                raise ValueError(f"bad exponent {e} for {nvars} variables")
            c = float(c)
            if c != 0.0:
                clean[e] = clean.get(e, 0.0) + c
        self.nvars = nvars
        self.terms = {e: c for e, c in clean.items() if c != 0.0}
        self._arrays = None

    @classmethod
    def const(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars, i):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1.0})

    @classmethod
    def monomial(cls, exps, c=1.0):
        return cls(len(exps), {tuple(exps): c})

    @classmethod
    def linear(cls, coeffs, const=0.0):
        n = len(coeffs)
        terms = {(0,) * n: const}
        for i, a in enumerate(coeffs):
            e = [0] * n
            e[i] = 1
            terms[tuple(e)] = a
        return cls(n, terms)

    # arithmetic ------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials in different numbers of variables")
            return other
        return Polynomial.const(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, 0.0) + c
        return Polynomial(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            s = float(other)
            return Polynomial(self.nvars, {e: c * s for e, c in self.terms.items()})
        other = self._coerce(other)
        t = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0.0) + c1 * c2
        return Polynomial(self.nvars, t)

    __rmul__ = __mul__

    def __pow__(self, p):
        out = Polynomial.const(self.nvars, 1.0)
        for _ in range(int(p)):
            out = out * self
        return out

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self.terms})"

    def is_zero(self):
        return not self.terms

    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def equals(self, other, atol=1e-12):
        diff = self - other
        return all(abs(c) <= atol for c in diff.terms.values())

    # calculus --------------------------------------------------------------
    def deriv(self, i):
        t = {}
        for e, c in self.terms.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                t[tuple(f)] = c * e[i]
        return Polynomial(self.nvars, t)

    def directional(self, v):
        out = Polynomial(self.nvars)
        for i, vi in enumerate(v):
            if vi != 0.0:
                out = out + self.deriv(i) * float(vi)
        return out

    def compose(self, subs):
        """Substitute polynomials ``subs[i]`` (in a common variable count) for x_i."""
        if len(subs) != self.nvars:
            raise ValueError("need one substitution per variable")
        m = subs[0].nvars if subs else 0
        powers = [[Polynomial.const(m, 1.0)] for _ in subs]
        out = Polynomial(m)
        for e, c in self.terms.items():
            term = Polynomial.const(m, c)
            for i, ei in enumerate(e):
                while len(powers[i]) <= ei:
                    powers[i].append(powers[i][-1] * subs[i])
                if ei:
                    term = term * powers[i][ei]
            out = out + term
        return out

    def shift(self, c):
        """The polynomial y -> p(c + y)."""
        subs = [Polynomial.linear(np.eye(self.nvars)[i], c[i]) for i in range(self.nvars)]
        return self.compose(subs)

    # evaluation ------------------------------------------------------------
    def arrays(self):
        if self._arrays is None:
            if self.terms:
                exps = np.array(list(self.terms.keys()), dtype=int)
                coef = np.array(list(self.terms.values()), dtype=float)
            else:
                exps = np.zeros((0, self.nvars), dtype=int)
                coef = np.zeros(0)
            self._arrays = (exps, coef)
        return self._arrays

    def __call__(self, x):
        """Evaluate at a point (shape (nvars,)) or a batch (shape (m, nvars))."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x.reshape(-1, self.nvars)
        exps, coef = self.arrays()
        if coef.size == 0:
            vals = np.zeros(pts.shape[0])
        else:
            vals = _power_products(pts, exps) @ coef
        return float(vals[0]) if single else vals

    def abs_bound(self, halfwidth):
        """Upper bound of |p| on the box |x_i| <= halfwidth_i (monomial majorant)."""
        exps, coef = self.arrays()
        if coef.size == 0:
            return 0.0
        h = np.asarray(halfwidth, dtype=float)
        return float(np.abs(coef) @ np.prod(h[None, :] ** exps, axis=1))


def _power_products(pts, exps):
    """Matrix of prod_i pts[:, i] ** exps[t, i] for each monomial t."""
    out = np.ones((pts.shape[0], exps.shape[0]))
    for i in range(exps.shape[1]):
        col = exps[:, i]
        top = int(col.max(initial=0))
        if top == 0:
            continue
        pw = np.ones((pts.shape[0], top + 1))
        for p in range(1, top + 1):
            pw[:, p] = pw[:, p - 1] * pts[:, i]
        out *= pw[:, col]
    return out


def num_monomials(nvars, degree):
    return comb(nvars + degree, degree)


def monomial_exponents(nvars, degree):
    """All exponent tuples of total degree <= degree, ordered by degree."""
    exps = [e for e in product(range(degree + 1), repeat=nvars) if sum(e) <= degree]
    return sorted(exps, key=lambda e: (sum(e), tuple(-x for x in e)))


def random_polynomial(rng, nvars, degree, nterms=None, scale=1.0):
    """Random polynomial with coefficients uniform in [-scale, scale]."""
    exps = monomial_exponents(nvars, degree)
    if nterms is None or nterms >= len(exps):
        chosen = exps
    else:
        idx = rng.choice(len(exps), size=nterms, replace=False)
        chosen = [exps[i] for i in sorted(idx)]
    return Polynomial(nvars, {e: rng.uniform(-scale, scale) for e in chosen})
