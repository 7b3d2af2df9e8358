"""Differential k-forms on R^n.

Two flavors share one interface. ``PolyForm`` stores a polynomial coefficient
per basis covector and differentiates exactly. ``CallableForm`` wraps a
vectorized evaluator and differentiates by central finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations, product
from math import comb

import numpy as np

from .errors import ContractViolation, InsufficientOrder
from .exterior import (KVector, basis, compound_matrices, merge_sign, rank_table,
                       star_matrix)
from .polynomial import Polynomial, _power_products, monomial_exponents

DEFAULT_STEP = 1e-5


def _as_points(p, n):
    x = np.asarray(p, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(-1, n)
    return pts, single


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _derivation_entries(n, k):
    """Sparse description of the derivation extension D_M on grade k.

    D_M(e^G) = sum_m e^{g_1} ^ ... ^ M e_{g_m} ^ ... ^ e^{g_k}. Returns tuples
    (H index, G index, row j, col g, sign) with D_M[H, G] += sign * M[j, g].
    """
    out = []
    ranks = rank_table(n, k)
    for gi, G in enumerate(basis(n, k)):
        for m, g in enumerate(G):
            rest = G[:m] + G[m + 1:]
            for j in range(n):
                if j in rest:
                    continue
                # e^{rest with j inserted at slot m}; sort to lexicographic order
                seq = list(G)
                seq[m] = j
                order = sorted(range(k), key=lambda t: seq[t])
                H = tuple(seq[t] for t in order)
                out.append((ranks[H], gi, j, g, _perm_sign(order)))
    return out


def derivation_matrix(M, k):
    """Matrix of the derivation extension of a square matrix M to grade k."""
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    D = np.zeros(M.shape[:-2] + (comb(n, k), comb(n, k)))
    for h, g, j, col, s in _derivation_entries(n, k):
        D[..., h, g] += s * M[..., j, col]
    return D


class DifferentialForm:
    """Common interface. Subclasses provide ``coeffs_at`` and derivatives.

    Attributes:
        n: ambient dimension.
        k: degree.
        order: number of derivatives available (``math.inf`` for polynomials).
    """

    n: int
    k: int
    order: float

    @property
    def size(self):
        return comb(self.n, self.k)

    def coeffs_at(self, p):
        raise NotImplementedError

    def eval(self, p, a):
        """omega(p; a) for a k-vector a."""
        if a.k != self.k or a.n != self.n:
            raise ContractViolation(f"cannot evaluate a {self.k}-form on a grade-{a.k} vector")
        return float(self.coeffs_at(p) @ a.coeffs)

    def riesz_vec(self, p):
        return KVector(self.n, self.k, self.coeffs_at(p))

    def _need_order(self, m=1):
        if self.order < m:
            raise InsufficientOrder(f"form of order {self.order} cannot be differentiated {m} times")

    def __add__(self, other):
        return _combine(self, other, 1.0)

    def __sub__(self, other):
        return _combine(self, other, -1.0)

    def __neg__(self):
        return self * -1.0

    def __rmul__(self, s):
        return self * s

    def translate(self, v):
        """The form (T_v omega)(p) = omega(p - v)."""
        v = np.asarray(v, dtype=float)
        base = self
        return CallableForm(self.n, self.k, lambda x: base.coeffs_at(x - v), order=self.order)


class PolyForm(DifferentialForm):
    """Form with polynomial coefficients, one per basis covector.

    Args:
        n: ambient dimension.
        k: degree.
        coeffs: sequence of ``Polynomial`` of length C(n, k), or a mapping from
            0-based multi-index tuples to polynomials.
    """

    order = math.inf

    def __init__(self, n, k, coeffs=None):
        if not 0 <= k <= n:
            raise ContractViolation(f"form degree {k} outside 0..{n}")
        self.n, self.k = n, k
        size = comb(n, k)
        if coeffs is None:
            polys = [Polynomial(n)] * size
        elif isinstance(coeffs, dict):
            polys = [Polynomial(n)] * size
            ranks = rank_table(n, k)
            for H, poly in coeffs.items():
                i = ranks[tuple(H)]
                polys[i] = polys[i] + _as_poly(poly, n)
        else:
            polys = [_as_poly(c, n) for c in coeffs]
            if len(polys) != size:
                raise ContractViolation(f"expected {size} coefficient polynomials, got {len(polys)}")
        self.coeffs = tuple(polys)
        self._table = None

    @classmethod
    def from_terms(cls, n, k, terms):
        """Build from (H, exponents, coeff) triples with 0-based H."""
        acc = {}
        for H, exps, c in terms:
            H = tuple(H)
            acc[H] = acc.get(H, Polynomial(n)) + Polynomial.monomial(exps, c)
        return cls(n, k, acc)

    @classmethod
    def constant(cls, n, k, values):
        return cls(n, k, [Polynomial.const(n, v) for v in np.asarray(values, dtype=float)])

    @classmethod
    def dx(cls, n, *H, coeff=None):
        """Basis form dx^H, optionally with a polynomial coefficient."""
        c = Polynomial.const(n, 1.0) if coeff is None else _as_poly(coeff, n)
        return cls(n, len(H), {tuple(H): c})

    @property
    def degree(self):
        return max((p.degree for p in self.coeffs), default=0)

    def is_zero(self):
        return all(p.is_zero() for p in self.coeffs)

    def equals(self, other, atol=1e-12):
        return (isinstance(other, PolyForm) and other.n == self.n and other.k == self.k
                and all(a.equals(b, atol) for a, b in zip(self.coeffs, other.coeffs)))

    def __repr__(self):
        parts = []
        for H, p in zip(basis(self.n, self.k), self.coeffs):
            if not p.is_zero():
                parts.append(f"{H}: {p.terms}")
        return f"PolyForm(n={self.n}, k={self.k}, {{{', '.join(parts)}}})"

    def _eval_table(self):
        if self._table is None:
            exps = sorted({e for p in self.coeffs for e in p.terms})
            idx = {e: i for i, e in enumerate(exps)}
            mat = np.zeros((len(exps), self.size))
            for h, p in enumerate(self.coeffs):
                for e, c in p.terms.items():
                    mat[idx[e], h] = c
            ex = np.array(exps, dtype=int).reshape(len(exps), self.n)
            self._table = (ex, mat)
        return self._table

    def coeffs_at(self, p):
        pts, single = _as_points(p, self.n)
        exps, mat = self._eval_table()
        if exps.shape[0] == 0:
            vals = np.zeros((pts.shape[0], self.size))
        else:
            vals = _power_products(pts, exps) @ mat
        return vals[0] if single else vals

    def __mul__(self, s):
        if isinstance(s, Polynomial):
            return PolyForm(self.n, self.k, [c * s for c in self.coeffs])
        return PolyForm(self.n, self.k, [c * float(s) for c in self.coeffs])

    def d(self):
        if self.k == self.n:
            return PolyForm(self.n, self.n)
        out = [Polynomial(self.n)] * comb(self.n, self.k + 1)
        ranks = rank_table(self.n, self.k + 1)
        for H, a in zip(basis(self.n, self.k), self.coeffs):
            if a.is_zero():
                continue
            for i in range(self.n):
                s = merge_sign((i,), H)
                if s:
                    g = ranks[tuple(sorted((i,) + H))]
                    out[g] = out[g] + a.deriv(i) * s
        return PolyForm(self.n, self.k + 1, out)

    def star(self):
        m = star_matrix(self.n, self.k)
        out = [Polynomial(self.n)] * m.shape[0]
        for i, j in zip(*np.nonzero(m)):
            out[i] = out[i] + self.coeffs[j] * m[i, j]
        return PolyForm(self.n, self.n - self.k, out)

    def wedge(self, other):
        if not isinstance(other, PolyForm):
            return _callable_wedge(self, other)
        n = self.n
        if self.k + other.k > n:
            return PolyForm(n, n)
        ranks = rank_table(n, self.k + other.k)
        out = [Polynomial(n)] * comb(n, self.k + other.k)
        for H, a in zip(basis(n, self.k), self.coeffs):
            if a.is_zero():
                continue
            for L, b in zip(basis(n, other.k), other.coeffs):
                s = merge_sign(H, L)
                if s and not b.is_zero():
                    o = ranks[tuple(sorted(H + L))]
                    out[o] = out[o] + a * b * s
        return PolyForm(n, self.k + other.k, out)

    def dir_deriv(self, v):
        v = np.asarray(v, dtype=float)
        return PolyForm(self.n, self.k, [c.directional(v) for c in self.coeffs])

    def partial(self, i):
        return PolyForm(self.n, self.k, [c.deriv(i) for c in self.coeffs])

    def shift(self, c):
        """Coefficients re-expanded about c: the form y -> omega(c + y)."""
        return PolyForm(self.n, self.k, [p.shift(c) for p in self.coeffs])

    def interior(self, X):
        """Contraction i_X omega with the vector field X (first slot)."""
        if self.k == 0:
            return PolyForm(self.n, 0)
        comps = X.components if isinstance(X, SmoothMap) else None
        if comps is None:
            return _callable_interior(self, X)
        ranks = rank_table(self.n, self.k)
        out = []
        for G in basis(self.n, self.k - 1):
            acc = Polynomial(self.n)
            for i in range(self.n):
                s = merge_sign((i,), G)
                if s:
                    acc = acc + comps[i] * self.coeffs[ranks[tuple(sorted((i,) + G))]] * s
            out.append(acc)
        return PolyForm(self.n, self.k - 1, out)

    def lie_derivative(self, X):
        """Coordinate formula (L_X omega)(p; a) = (grad_X omega)(p; a) + omega(p; D_J a).

        J is the jacobian of X and D_J its derivation extension. This is an
        independent route to the Lie derivative, kept apart from the Cartan
        formula so the two can check each other.
        """
        comps = X.components
        if comps is None:
            raise ContractViolation("coordinate Lie derivative needs a polynomial vector field")
        n, k = self.n, self.k
        out = [Polynomial(n)] * self.size
        for g in range(self.size):
            acc = Polynomial(n)
            for i in range(n):
                acc = acc + comps[i] * self.coeffs[g].deriv(i)
            out[g] = acc
        for h, g, j, col, s in _derivation_entries(n, k):
            out[g] = out[g] + self.coeffs[h] * comps[j].deriv(col) * s
        return PolyForm(n, k, out)

    def pullback(self, f):
        return pullback_form(f, self)


class CallableForm(DifferentialForm):
    """Black-box form evaluated by a vectorized callback.

    Args:
        n: ambient dimension.
        k: degree.
        func: maps an (m, n) array of points to an (m, C(n, k)) array of
            coefficients.
        order: number of finite-difference derivatives the form supports.
        step: base central-difference step, scaled by max(1, |p|_inf).
        degree: optional polynomial-degree hint used to size quadrature rules.
    """

    def __init__(self, n, k, func, order=2, step=DEFAULT_STEP, degree=None):
        self.n, self.k = n, k
        self.func = func
        self.order = order
        self.step = step
        self.degree = degree

    @classmethod
    def pointwise(cls, n, k, f, **kw):
        """Wrap a single-point callback ``f(p) -> coefficients``."""
        def batch(pts):
            return np.array([np.atleast_1d(f(p)) for p in pts], dtype=float).reshape(len(pts), -1)
        return cls(n, k, batch, **kw)

    def coeffs_at(self, p):
        pts, single = _as_points(p, self.n)
        vals = np.asarray(self.func(pts), dtype=float).reshape(pts.shape[0], self.size)
        return vals[0] if single else vals

    def __mul__(self, s):
        s = float(s)
        f = self.func
        return CallableForm(self.n, self.k, lambda x: s * np.asarray(f(x)), self.order,
                            self.step, self.degree)

    def _derived(self, func):
        return CallableForm(self.n, self.k, func, self.order - 1, self.step * 10, self.degree)

    def dir_deriv(self, v):
        self._need_order(1)
        v = np.asarray(v, dtype=float)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return PolyForm(self.n, self.k)
        u = v / nv
        base, step = self, self.step

        def f(x):
            h = step * np.maximum(1.0, np.max(np.abs(x), axis=1))[:, None]
            return nv * (base.coeffs_at(x + h * u) - base.coeffs_at(x - h * u)) / (2 * h)
        return self._derived(f)

    def partial(self, i):
        return self.dir_deriv(np.eye(self.n)[i])

    def d(self):
        self._need_order(1)
        if self.k == self.n:
            return PolyForm(self.n, self.n)
        parts = [self.partial(i) for i in range(self.n)]
        n, k = self.n, self.k
        ranks = rank_table(n, k + 1)
        entries = []
        for h, H in enumerate(basis(n, k)):
            for i in range(n):
                s = merge_sign((i,), H)
                if s:
                    entries.append((ranks[tuple(sorted((i,) + H))], i, h, s))

        def f(x):
            vals = [p.coeffs_at(x) for p in parts]
            out = np.zeros((x.shape[0], comb(n, k + 1)))
            for g, i, h, s in entries:
                out[:, g] += s * vals[i][:, h]
            return out
        return CallableForm(n, k + 1, f, self.order - 1, self.step * 10, self.degree)

    def star(self):
        m = star_matrix(self.n, self.k)
        base = self
        return CallableForm(self.n, self.n - self.k, lambda x: base.coeffs_at(x) @ m.T,
                            self.order, self.step, self.degree)

    def wedge(self, other):
        return _callable_wedge(self, other)

    def interior(self, X):
        return _callable_interior(self, X)


def _as_poly(c, n):
    if isinstance(c, Polynomial):
        if c.nvars != n:
            raise ContractViolation("coefficient polynomial has the wrong variable count")
        return c
    return Polynomial.const(n, float(c))


def _combine(a, b, sign):
    if a.n != b.n or a.k != b.k:
        raise ContractViolation("forms must share dimension and degree")
    if isinstance(a, PolyForm) and isinstance(b, PolyForm):
        return PolyForm(a.n, a.k, [x + y * sign for x, y in zip(a.coeffs, b.coeffs)])
    order = min(a.order, b.order)
    return CallableForm(a.n, a.k, lambda x: a.coeffs_at(x) + sign * b.coeffs_at(x),
                        order=order if order != math.inf else 2)


def _callable_wedge(a, b):
    n, j, k = a.n, a.k, b.k
    if j + k > n:
        return PolyForm(n, n)
    from .exterior import wedge_coeffs
    order = min(a.order, b.order)
    return CallableForm(n, j + k, lambda x: wedge_coeffs(n, j, k, a.coeffs_at(x), b.coeffs_at(x)),
                        order=order if order != math.inf else 2)


def _callable_interior(w, X):
    from .exterior import contraction_matrices
    n, k = w.n, w.k
    if k == 0:
        return PolyForm(n, 0)
    mats = contraction_matrices(n, k)
    order = w.order if w.order != math.inf else 2

    def f(x):
        vals = w.coeffs_at(x)
        xv = X(x)
        return np.einsum("mi,igh,mh->mg", xv, mats, vals)
    return CallableForm(n, k - 1, f, order=order)


def codifferential(w):
    """delta = (-1)^{n(m+1)+1} * d * on m-forms."""
    n, m = w.n, w.k
    if m == 0:
        return PolyForm(n, 0) if isinstance(w, PolyForm) else CallableForm(n, 0, lambda x: np.zeros((len(x), 1)))
    sign = (-1) ** (n * (m + 1) + 1)
    return w.star().d().star() * sign


def hodge_laplacian(w):
    """Box omega = d delta omega + delta d omega (non-negative convention, -sum of second partials)."""
    parts = []
    if w.k > 0:
        parts.append(codifferential(w).d())
    if w.k < w.n:
        parts.append(codifferential(w.d()))
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


# smooth maps ---------------------------------------------------------------

class SmoothMap:
    """A C^1 map R^n_in -> R^n_out with its jacobian.

    Args:
        forward: single-point callable returning the image.
        jacobian: single-point callable returning an (n_out, n_in) matrix.
        n_in: source dimension.
        n_out: target dimension.
        inverse: optional single-point inverse.
        check_point: point for the finite-difference jacobian check made at
            construction (relative tolerance 1e-5). ``None`` uses 0.3 in every
            coordinate; pass ``check=False`` to skip the check.
    """

    def __init__(self, forward, jacobian, n_in, n_out, inverse=None, check=True,
                 check_point=None):
        self._forward = forward
        self._jacobian = jacobian
        self.n_in, self.n_out = n_in, n_out
        self.inverse = inverse
        self.components = None
        self.affine = None
        if check:
            self._check(check_point)

    @classmethod
    def polynomial(cls, components, inverse=None):
        comps = list(components)
        n_in = comps[0].nvars
        jac = [[c.deriv(i) for i in range(n_in)] for c in comps]
        obj = cls.__new__(cls)
        obj.n_in, obj.n_out = n_in, len(comps)
        obj.inverse = inverse
        obj.components = comps
        obj.jacobian_polys = jac
        obj.affine = None
        obj._forward = None
        obj._jacobian = None
        if all(c.degree <= 1 for c in comps):
            A = np.array([[c.terms.get(tuple(np.eye(n_in, dtype=int)[i]), 0.0)
                           for i in range(n_in)] for c in comps]).reshape(len(comps), n_in)
            b = np.array([c.terms.get((0,) * n_in, 0.0) for c in comps])
            obj.affine = (A, b)
        return obj

    @classmethod
    def affine_map(cls, A, b=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
        comps = [Polynomial.linear(A[i], b[i]) for i in range(A.shape[0])]
        inv = None
        if A.shape[0] == A.shape[1] and abs(np.linalg.det(A)) > 1e-14:
            Ai = np.linalg.inv(A)
            inv = lambda y: Ai @ (np.asarray(y) - b)  # noqa: E731
        return cls.polynomial(comps, inverse=inv)

    @classmethod
    def identity(cls, n):
        return cls.affine_map(np.eye(n))

    @property
    def is_affine(self):
        return self.affine is not None

    def _check(self, p):
        p = np.full(self.n_in, 0.3) if p is None else np.asarray(p, dtype=float)
        J = np.asarray(self._jacobian(p), dtype=float).reshape(self.n_out, self.n_in)
        h = 1e-6 * max(1.0, float(np.max(np.abs(p))))
        fd = np.zeros_like(J)
        for i in range(self.n_in):
            e = np.zeros(self.n_in)
            e[i] = h
            fd[:, i] = (np.asarray(self._forward(p + e)) - np.asarray(self._forward(p - e))) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(J))))
        if np.max(np.abs(fd - J)) > 1e-5 * scale:
            raise ContractViolation("jacobian disagrees with finite differences of forward")

    def __call__(self, x):
        pts, single = _as_points(x, self.n_in)
        if self.components is not None:
            out = np.stack([c(pts) for c in self.components], axis=1)
        else:
            out = np.array([np.atleast_1d(self._forward(p)) for p in pts], dtype=float)
        out = out.reshape(pts.shape[0], self.n_out)
        return out[0] if single else out

    def jacobian(self, x):
        pts, single = _as_points(x, self.n_in)
        if self.components is not None:
            out = np.stack([np.stack([j(pts) for j in row], axis=-1)
                            for row in self.jacobian_polys], axis=1)
        else:
            out = np.array([np.asarray(self._jacobian(p), dtype=float).reshape(self.n_out, self.n_in)
                            for p in pts])
        return out[0] if single else out

    def directional(self, x, vecs, step=DEFAULT_STEP):
        """Iterated directional derivative of the map along ``vecs`` at batch points.

        Args:
            x: (m, n_in) points.
            vecs: (m, s, n_in) directions per point.
        """
        x = np.asarray(x, dtype=float)
        vecs = np.asarray(vecs, dtype=float)
        s = vecs.shape[1]
        if s == 0:
            return self(x)
        if self.components is not None:
            return _poly_directional(self.components, x, vecs)
        if s == 1:
            return np.einsum("moi,mi->mo", self.jacobian(x), vecs[:, 0])
        # nested central differences on the outermost direction
        u = vecs[:, -1]
        h = step * 10 ** (s - 1) * np.maximum(1.0, np.max(np.abs(x), axis=1))[:, None]
        hi = self.directional(x + h * u, vecs[:, :-1], step)
        lo = self.directional(x - h * u, vecs[:, :-1], step)
        return (hi - lo) / (2 * h)

    def compose(self, inner):
        """self after inner."""
        if self.components is not None and inner.components is not None:
            return SmoothMap.polynomial([c.compose(inner.components) for c in self.components])
        outer = self
        return SmoothMap(lambda p: outer(inner(p)),
                         lambda p: outer.jacobian(inner(p)) @ inner.jacobian(p),
                         inner.n_in, self.n_out, check=False)


def _poly_directional(polys, x, vecs):
    """d^s/du_1..du_s of each polynomial at each point, exactly."""
    m, s, n = vecs.shape
    out = np.zeros((m, len(polys)))
    for idx in product(range(n), repeat=s):
        w = np.ones(m)
        for t, i in enumerate(idx):
            w = w * vecs[:, t, i]
        if not np.any(w):
            continue
        for o, p in enumerate(polys):
            q = p
            for i in idx:
                q = q.deriv(i)
                if q.is_zero():
                    break
            if not q.is_zero():
                out[:, o] += w * q(x)
    return out


def _poly_det(mat):
    size = len(mat)
    if size == 0:
        return None
    total = None
    for perm in permutations(range(size)):
        term = mat[0][perm[0]]
        for r in range(1, size):
            term = term * mat[r][perm[r]]
        term = term * _perm_sign(perm)
        total = term if total is None else total + term
    return total


def pullback_form(f, w):
    """f^* omega, with (f^* omega)(p; a) = omega(f(p); Lambda^k Df_p a)."""
    if w.n != f.n_out:
        raise ContractViolation("form lives on a different space than the map's target")
    n, k = f.n_in, w.k
    if k > n:
        raise ContractViolation(f"cannot pull a {k}-form back to R^{n}")
    if isinstance(w, PolyForm) and f.components is not None:
        composed = [c.compose(f.components) for c in w.coeffs]
        out = []
        for G in basis(n, k):
            acc = Polynomial(n)
            for H, a in zip(basis(f.n_out, k), composed):
                if a.is_zero():
                    continue
                if k == 0:
                    acc = acc + a
                    continue
                minor = _poly_det([[f.jacobian_polys[h][g] for g in G] for h in H])
                acc = acc + a * minor
            out.append(acc)
        return PolyForm(n, k, out)

    def func(x):
        lift = compound_matrices(f.jacobian(x), k)
        return np.einsum("mhg,mh->mg", lift, w.coeffs_at(f(x)))
    order = w.order if w.order != math.inf else 2
    return CallableForm(n, k, func, order=order)


# norms ---------------------------------------------------------------------

@dataclass(frozen=True)
class FormNormReport:
    """Estimated B^r norm levels of a form.

    ``levels[i]`` estimates ||omega||_i and ``dlevels[i]`` estimates
    ||d omega||_i. Translation levels are suprema over a finite vector set,
    so they are lower bounds on the true seminorms. ``upper`` is a rigorous
    majorant of |omega|_r over the region for polynomial forms, else None.
    """

    r: int
    levels: tuple
    dlevels: tuple
    combined: float
    upper: float | None
    spacing: float
    translations: np.ndarray = field(repr=False)
    region: tuple = ()
    notes: str = ("level 0 uses the Euclidean coefficient norm, an upper bound for comass; "
                  "translation levels are sampled lower bounds")

    @property
    def certified(self):
        """Best value usable where an upper bound on |omega|_r is required."""
        return self.upper if self.upper is not None else self.combined


def default_translations(n, width):
    """Plus/minus coordinate directions at three scales relative to the region width."""
    vecs = []
    for s in (width / 8.0, width / 64.0, width / 512.0):
        for i in range(n):
            e = np.zeros(n)
            e[i] = s
            vecs.extend([e, -e])
    return np.array(vecs)


def _grid(region, h):
    lo, hi = (np.asarray(x, dtype=float) for x in region)
    axes = [np.linspace(a, b, max(2, int(round((b - a) / h)) + 1)) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _level_sup(w, r, pts, vecs):
    """sup over pts and r-tuples of vecs of |Delta_{v_1..v_r} omega| / prod |v_i|."""
    best = float(np.max(np.linalg.norm(w.coeffs_at(pts), axis=1))) if r == 0 else 0.0
    if r == 0:
        return best
    norms = np.linalg.norm(vecs, axis=1)
    for combo in product(range(len(vecs)), repeat=r):
        acc = np.zeros((pts.shape[0], w.size))
        for signs in product((0, 1), repeat=r):
            shift = sum((vecs[c] for c, s in zip(combo, signs) if s), np.zeros(w.n))
            acc += (-1) ** sum(signs) * w.coeffs_at(pts - shift)
        val = float(np.max(np.linalg.norm(acc, axis=1))) / float(np.prod(norms[list(combo)]))
        best = max(best, val)
    return best


def poly_form_derivative_bound(w, order, center, halfwidth):
    """Majorant of sup_p |D^order omega(p)| (Frobenius over coefficients and partials)."""
    shifted = [p.shift(center) for p in w.coeffs]
    total = 0.0
    for idx in product(range(w.n), repeat=order):
        for p in shifted:
            q = p
            for i in idx:
                q = q.deriv(i)
            total += q.abs_bound(halfwidth) ** 2
    return math.sqrt(total)


def form_norm_upper(w, r, region):
    """Rigorous upper bound of |omega|_r on an axis box for a polynomial form."""
    lo, hi = (np.asarray(x, dtype=float) for x in region)
    c, hw = (lo + hi) / 2, (hi - lo) / 2
    vals = [poly_form_derivative_bound(w, j, c, hw) for j in range(r + 1)]
    if w.k < w.n and r >= 1:
        dw = w.d()
        vals += [poly_form_derivative_bound(dw, j, c, hw) for j in range(r)]
    return max(vals)


def estimate_form_norm(w, r, region, h=None, translations=None):
    """Estimate ||omega||_0..||omega||_r, ||d omega||_0..||d omega||_{r-1} and |omega|_r.

    Args:
        w: the form.
        r: top level.
        region: (lo, hi) corners of an axis box.
        h: grid spacing; defaults to a grid of about 9 points per axis.
        translations: (N, n) array of translation vectors; defaults to
            ``default_translations``.
    """
    lo, hi = (np.asarray(x, dtype=float) for x in region)
    width = float(np.max(hi - lo))
    if width <= 0:
        raise ContractViolation("region must have positive extent")
    if h is None:
        h = width / 8.0
    if h <= 0:
        raise ContractViolation("grid spacing must be positive")
    vecs = default_translations(w.n, width) if translations is None else np.asarray(translations, float)
    if r >= 1 and len(vecs) == 0:
        raise ContractViolation("translation set is empty")
    pts = _grid((lo, hi), h)
    levels = tuple(_level_sup(w, j, pts, vecs) for j in range(r + 1))
    dlevels = ()
    if r >= 1:
        if w.k < w.n:
            dw = w.d()
            dlevels = tuple(_level_sup(dw, j, pts, vecs) for j in range(r))
        else:
            dlevels = (0.0,) * r
    upper = form_norm_upper(w, r, (lo, hi)) if isinstance(w, PolyForm) else None
    return FormNormReport(r, levels, dlevels, max(levels + dlevels), upper, h, vecs,
                          (tuple(lo), tuple(hi)))


def monomial_forms(n, k, degree, center=None):
    """All forms (x - c)^e dx^H with total degree of e at most ``degree``."""
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    subs = [Polynomial.linear(np.eye(n)[i], -c[i]) for i in range(n)]
    out = []
    for H in basis(n, k):
        for e in monomial_exponents(n, degree):
            p = Polynomial.monomial(e).compose(subs) if n else Polynomial(0, {(): 1.0})
            out.append(((H, e), PolyForm(n, k, {H: p})))
    return out


def random_poly_form(rng, n, k, degree, nterms=3, scale=1.0):
    from .polynomial import random_polynomial
    return PolyForm(n, k, [random_polynomial(rng, n, degree, nterms, scale)
                           for _ in range(comb(n, k))])
