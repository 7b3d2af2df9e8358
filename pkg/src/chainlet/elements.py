"""Point-supported k-element chains and their geometric operators.

A term (a, p, alpha, [u_1..u_s]) pairs with a form as
a * (grad_{u_1} ... grad_{u_s} omega)(p; alpha). Terms are grouped by order s
into array blocks, so large quantized chains stay cheap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from math import comb
from typing import NamedTuple

import numpy as np

from .errors import ContractViolation, FlowError, InsufficientOrder, UnsupportedOrder
from .exterior import (KVector, compound_matrices, contraction_matrices, star_matrix,
                       wedge_coeffs)
from .forms import CallableForm, DifferentialForm, PolyForm, SmoothMap, derivation_matrix

DROP_TOL = 1e-14

# Each entry states the pairing identity the implementation satisfies.
# m is the grade of the element chain A, n the ambient dimension, and
# delta = (-1)^{n(q+1)+1} * d * on q-forms, Box = d delta + delta d.
SIGN_CONVENTIONS = {
    "nabla": "int_{grad_v A} w = + int_A grad_v w  (forward derivative)",
    "difference_limit": "2^i (a_p - T_{v/2^i} a_p) -> - grad_v a_p",
    "boundary": "int_{bd A} w = + int_A dw",
    "star_pairing": "int_{*A} *w = + int_A w",
    "star_theorem": "int_{*A} w = (-1)^{m(n-m)} int_A *w",
    "curl": "int_{*A} *dw = + int_{bd A} w",
    "divergence": "int_{* bd A} w = (-1)^{(m-1)(n-m+1)} int_A d*w",
    "coboundary": "int_{<>A} w = (-1)^{n-1} int_A *d*w = (-1)^{n(m+1)} int_A delta w",
    "laplace": "int_{Lap A} w = (-1)^{n-1} int_A (*d*d + d*d*) w; "
               "= (-1)^n int_A Box w when n is even or m in {0, n}",
    "interior": "int_{i_X A} w = int_A i_X w, (i_X w)(a) = w(X ^ a)",
    "lie": "int_{L_X A} w = int_A L_X w = int_A (d i_X + i_X d) w",
    "cup": "int_{A cup w} eta = int_A eta(. ^ Vec w)",
    "cup_leibniz": "bd(A cup c) = (bd A) cup c + (-1)^m grad_c A for a constant 1-form c",
}


def sign_star_theorem(n, m):
    return (-1) ** (m * (n - m))


def sign_divergence(n, m):
    return (-1) ** ((m - 1) * (n - m + 1))


def sign_coboundary_delta(n, m):
    return (-1) ** (n * (m + 1))


class Block(NamedTuple):
    coeffs: np.ndarray
    points: np.ndarray
    kvecs: np.ndarray
    dvecs: np.ndarray


@dataclass(frozen=True)
class ElementTerm:
    coeff: float
    point: np.ndarray
    kvec: KVector
    dvecs: np.ndarray

    @property
    def order(self):
        return self.dvecs.shape[0]


def _empty_block(n, k, s):
    return Block(np.zeros(0), np.zeros((0, n)), np.zeros((0, comb(n, k))), np.zeros((0, s, n)))


def _sort_dvecs(dv):
    s = dv.shape[1]
    if s < 2:
        return dv
    dv = dv.copy()
    for i in range(s):
        for j in range(s - 1 - i):
            a, b = dv[:, j], dv[:, j + 1]
            less = np.zeros(dv.shape[0], dtype=bool)
            eq = np.ones(dv.shape[0], dtype=bool)
            for d in range(dv.shape[2]):
                less |= eq & (b[:, d] < a[:, d])
                eq &= b[:, d] == a[:, d]
            tmp = dv[less, j].copy()
            dv[less, j] = dv[less, j + 1]
            dv[less, j + 1] = tmp
    return dv


def _canonical_block(b):
    m = b.coeffs.shape[0]
    if m == 0:
        return b
    dv = _sort_dvecs(b.dvecs)
    key = np.concatenate([b.points, dv.reshape(m, -1)], axis=1)
    uniq, first, inv, counts = np.unique(key, axis=0, return_index=True, return_inverse=True,
                                         return_counts=True)
    inv = inv.reshape(-1)
    weighted = b.coeffs[:, None] * b.kvecs
    summed = np.zeros((uniq.shape[0], b.kvecs.shape[1]))
    np.add.at(summed, inv, weighted)
    coeffs = np.ones(uniq.shape[0])
    kvecs = summed
    single = counts == 1
    coeffs[single] = b.coeffs[first[single]]
    kvecs[single] = b.kvecs[first[single]]
    keep = np.max(np.abs(summed), axis=1, initial=0.0) >= DROP_TOL
    return Block(coeffs[keep], b.points[first[keep]], kvecs[keep], dv[first[keep]])


class ElementChain:
    """Finite sum of k-elements of mixed orders in R^n.

    Args:
        n: ambient dimension.
        k: grade of every term.
        blocks: mapping order -> Block of arrays.
        canonical: merge equal (point, dvec multiset) keys and drop zero terms.
    """

    def __init__(self, n, k, blocks=None, canonical=True):
        if not 0 <= k <= n:
            raise ContractViolation(f"element grade {k} outside 0..{n}")
        self.n, self.k = n, k
        out = {}
        for s, b in (blocks or {}).items():
            c = np.asarray(b.coeffs, float).reshape(-1)
            m = c.shape[0]
            b = Block(c, np.asarray(b.points, float).reshape(m, n),
                      np.asarray(b.kvecs, float).reshape(m, comb(n, k)),
                      np.asarray(b.dvecs, float).reshape(m, s, n))
            if canonical:
                b = _canonical_block(b)
            if b.coeffs.shape[0]:
                for arr in b:
                    arr.setflags(write=False)
                out[s] = b
        self.blocks = dict(sorted(out.items()))

    # construction -----------------------------------------------------------
    @classmethod
    def zero(cls, n, k):
        return cls(n, k)

    @classmethod
    def element(cls, point, kvec, coeff=1.0, dvecs=()):
        point = np.asarray(point, dtype=float)
        n = point.shape[0]
        dv = np.asarray(dvecs, dtype=float).reshape(-1, n)
        s = dv.shape[0]
        return cls(n, kvec.k, {s: Block(np.array([coeff]), point[None], kvec.coeffs[None],
                                         dv.reshape(1, s, n))})

    @classmethod
    def from_terms(cls, n, k, terms):
        groups = {}
        for t in terms:
            groups.setdefault(t.order, []).append(t)
        blocks = {}
        for s, ts in groups.items():
            blocks[s] = Block(np.array([t.coeff for t in ts]),
                              np.array([t.point for t in ts], dtype=float).reshape(-1, n),
                              np.array([t.kvec.coeffs for t in ts]).reshape(-1, comb(n, k)),
                              np.array([t.dvecs for t in ts], dtype=float).reshape(len(ts), s, n))
        return cls(n, k, blocks)

    @classmethod
    def from_arrays(cls, coeffs, points, kvecs, k, dvecs=None, canonical=True):
        points = np.asarray(points, dtype=float)
        n = points.shape[1]
        m = points.shape[0]
        dv = np.zeros((m, 0, n)) if dvecs is None else np.asarray(dvecs, dtype=float)
        return cls(n, k, {dv.shape[1]: Block(np.asarray(coeffs, float), points,
                                             np.asarray(kvecs, float), dv)}, canonical)

    # container ----------------------------------------------------------------
    def __len__(self):
        return sum(b.coeffs.shape[0] for b in self.blocks.values())

    def __iter__(self):
        for s, b in self.blocks.items():
            for i in range(b.coeffs.shape[0]):
                yield ElementTerm(float(b.coeffs[i]), b.points[i].copy(),
                                  KVector(self.n, self.k, b.kvecs[i]), b.dvecs[i].copy())

    def __repr__(self):
        orders = {s: b.coeffs.shape[0] for s, b in self.blocks.items()}
        return f"ElementChain(n={self.n}, k={self.k}, terms_by_order={orders})"

    @property
    def order(self):
        return max(self.blocks, default=0)

    def is_zero(self):
        return len(self) == 0

    def _same(self, other):
        if other.n != self.n or other.k != self.k:
            raise ContractViolation("element chains must share dimension and grade")

    def __add__(self, other):
        self._same(other)
        blocks = dict(self.blocks)
        for s, b in other.blocks.items():
            blocks[s] = _concat(blocks[s], b) if s in blocks else b
        return ElementChain(self.n, self.k, blocks)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        return self.scale(s)

    __rmul__ = __mul__

    def scale(self, s):
        s = float(s)
        return ElementChain(self.n, self.k, {o: b._replace(coeffs=b.coeffs * s)
                                             for o, b in self.blocks.items()}, canonical=s == 0.0)

    def weights(self):
        """Per-block arrays coeff * kvec."""
        return {s: b.coeffs[:, None] * b.kvecs for s, b in self.blocks.items()}

    def vec(self):
        """Total k-vector of the order-0 part."""
        b = self.blocks.get(0)
        if b is None:
            return KVector.zero(self.n, self.k)
        return KVector(self.n, self.k, b.coeffs @ b.kvecs)

    def translate(self, v):
        v = np.asarray(v, dtype=float)
        return ElementChain(self.n, self.k, {s: b._replace(points=b.points + v)
                                             for s, b in self.blocks.items()})

    def bbox(self):
        pts = [b.points for b in self.blocks.values()]
        if not pts:
            return np.zeros(self.n), np.zeros(self.n)
        allp = np.concatenate(pts)
        return allp.min(axis=0), allp.max(axis=0)

    # integration -------------------------------------------------------------
    def integrate(self, w):
        return integrate_elem(self, w)

    # operators ----------------------------------------------------------------
    def boundary(self):
        return boundary_elem(self)

    def star(self):
        return star_elem(self)

    def coboundary(self):
        return coboundary_elem(self)

    def laplace(self):
        return laplace_elem(self)

    def nabla(self, v):
        return nabla_v(self, v)


def _concat(a, b):
    return Block(*(np.concatenate([x, y]) for x, y in zip(a, b)))


# form derivatives at points -------------------------------------------------

class _PartialCache:
    """Memoized partial derivatives of a polynomial form keyed by sorted axes."""

    def __init__(self, w):
        self.w = w
        self.cache = {(): w}

    def get(self, idx):
        idx = tuple(sorted(idx))
        if idx not in self.cache:
            self.cache[idx] = self.get(idx[:-1]).partial(idx[-1])
        return self.cache[idx]


def form_directional_values(w, points, dirs, cache=None):
    """(grad_{d_1} ... grad_{d_r} omega)(p) coefficients for batches.

    Args:
        w: the form.
        points: (m, n) points.
        dirs: (m, r, n) directions per point.
    Returns:
        (m, C(n, k)) coefficient array.
    """
    m, r, n = dirs.shape
    if r == 0:
        return w.coeffs_at(points).reshape(m, -1)
    if w.order < r:
        raise InsufficientOrder(f"form of order {w.order} cannot pair with order-{r} elements")
    if isinstance(w, PolyForm):
        cache = cache or _PartialCache(w)
        out = np.zeros((m, w.size))
        for idx in product(range(n), repeat=r):
            wt = np.ones(m)
            for t, i in enumerate(idx):
                wt = wt * dirs[:, t, i]
            nz = wt != 0
            if not np.any(nz):
                continue
            f = cache.get(idx)
            if f.is_zero():
                continue
            out[nz] += wt[nz, None] * f.coeffs_at(points[nz])
        return out
    out = np.zeros((m, w.size))
    for i in range(m):
        f = w
        for t in range(r):
            f = f.dir_deriv(dirs[i, t])
        out[i] = f.coeffs_at(points[i])
    return out


def integrate_elem(E, w):
    """Sum over terms of coeff * (grad_{u_1..u_s} omega)(p; kvec)."""
    if w.n != E.n or w.k != E.k:
        raise ContractViolation(f"cannot pair a {w.k}-form with a grade-{E.k} element chain")
    total = 0.0
    cache = _PartialCache(w) if isinstance(w, PolyForm) else None
    for s, b in E.blocks.items():
        vals = form_directional_values(w, b.points, b.dvecs, cache)
        total += float(b.coeffs @ np.einsum("mh,mh->m", vals, b.kvecs))
    return total


# geometric operators ----------------------------------------------------------

def boundary_elem(E):
    """Alternating boundary dual to d: bd(e^H)_p = sum_i (-1)^{i-1} grad_{e_{h_i}} (e^{H - h_i})_p."""
    n, k = E.n, E.k
    if k == 0:
        return ElementChain(n, 0)
    mats = contraction_matrices(n, k)
    eye = np.eye(n)
    blocks = {}
    for s, b in E.blocks.items():
        parts = []
        for i in range(n):
            kv = b.kvecs @ mats[i].T
            nz = np.any(kv != 0, axis=1)
            if not np.any(nz):
                continue
            m = int(nz.sum())
            dv = np.concatenate([b.dvecs[nz], np.broadcast_to(eye[i], (m, 1, n))], axis=1)
            parts.append(Block(b.coeffs[nz], b.points[nz], kv[nz], dv))
        if parts:
            blk = parts[0]
            for p in parts[1:]:
                blk = _concat(blk, p)
            blocks[s + 1] = _concat(blocks[s + 1], blk) if s + 1 in blocks else blk
    return ElementChain(n, k - 1, blocks)


def star_elem(E):
    m = star_matrix(E.n, E.k)
    return ElementChain(E.n, E.n - E.k, {s: b._replace(kvecs=b.kvecs @ m.T)
                                         for s, b in E.blocks.items()}, canonical=False)


def coboundary_elem(E):
    """Coboundary star . boundary . star; the zero chain when k = n."""
    if E.k == E.n:
        return ElementChain(E.n, E.n)
    return star_elem(boundary_elem(star_elem(E)))


def laplace_elem(E):
    """bd <> + <> bd, keeping only the terms defined at the end grades."""
    n, k = E.n, E.k
    out = ElementChain(n, k)
    if k < n:
        out = out + boundary_elem(coboundary_elem(E))
    if k > 0:
        out = out + coboundary_elem(boundary_elem(E))
    return out


def nabla_v(E, v):
    """Append the direction v to every term (order s -> s+1)."""
    v = np.asarray(v, dtype=float)
    blocks = {}
    for s, b in E.blocks.items():
        m = b.coeffs.shape[0]
        dv = np.concatenate([b.dvecs, np.broadcast_to(v, (m, 1, E.n))], axis=1)
        blocks[s + 1] = b._replace(dvecs=dv)
    return ElementChain(E.n, E.k, blocks)


def difference_element(E, v, i):
    """The difference chain 2^i (E - T_{v/2^i} E), which tends to -grad_v E."""
    h = 2.0 ** (-i)
    return (E - E.translate(np.asarray(v, float) * h)) * (1.0 / h)


def pushforward_elem(f, E):
    """Push terms forward: p -> f(p), kvec -> Lambda^k Df_p kvec, u -> Df_p u."""
    if f.n_in != E.n:
        raise ContractViolation("map source dimension does not match the chain")
    n_out, k = f.n_out, E.k
    if k > n_out:
        return ElementChain(n_out, n_out)
    blocks = {}
    for s, b in E.blocks.items():
        J = f.jacobian(b.points).reshape(-1, n_out, E.n)
        lift = compound_matrices(J, k)
        kv = np.einsum("mhg,mg->mh", lift, b.kvecs)
        dv = np.einsum("moi,msi->mso", J, b.dvecs)
        blocks[s] = Block(b.coeffs, f(b.points).reshape(-1, n_out), kv, dv)
    return ElementChain(n_out, k, blocks)


def _scalar_values(fcn, points):
    if isinstance(fcn, DifferentialForm):
        if fcn.k != 0:
            raise ContractViolation("multiplier must be a 0-form")
        return fcn.coeffs_at(points)[:, 0]
    return np.array([float(fcn(p)) for p in points])


def multiply_function(fcn, E):
    """Scale order-0 terms by fcn(point)."""
    if any(s > 0 for s in E.blocks):
        raise UnsupportedOrder("function multiplication is defined for order-0 terms only")
    blocks = {}
    for s, b in E.blocks.items():
        blocks[s] = b._replace(coeffs=b.coeffs * _scalar_values(fcn, b.points))
    return ElementChain(E.n, E.k, blocks)


def _subsets(s):
    for r in range(s + 1):
        for S in combinations(range(s), r):
            rest = tuple(i for i in range(s) if i not in S)
            yield S, rest


def _leibniz(E, field_values, out_k, combine):
    """Expand each term through a pointwise product with a field.

    For a term with directions u, produces for every subset S the term with
    kvec combine(kvec, grad_{u_S} F(p)) and directions u outside S.
    """
    blocks = {}
    for s, b in E.blocks.items():
        for S, rest in _subsets(s):
            F = field_values(b.points, b.dvecs[:, list(S)])
            kv = combine(b.kvecs, F)
            blk = Block(b.coeffs, b.points, kv, b.dvecs[:, list(rest)])
            r = len(rest)
            blocks[r] = _concat(blocks[r], blk) if r in blocks else blk
    return ElementChain(E.n, out_k, blocks)


def cup_with_form(E, w):
    """E cup Ch(w): order-0 terms get kvec ^ Vec(w(p)); higher orders by Leibniz."""
    n, k, j = E.n, E.k, w.k
    if w.n != n:
        raise ContractViolation("form and chain live in different dimensions")
    if k + j > n:
        return ElementChain(n, n)
    cache = _PartialCache(w) if isinstance(w, PolyForm) else None
    return _leibniz(E, lambda p, d: form_directional_values(w, p, d, cache), k + j,
                    lambda kv, F: wedge_coeffs(n, k, j, kv, F))


def _field_directional(X, points, dirs):
    return X.directional(points, dirs)


def interior_elem(X, E):
    """i_X E with int_{i_X E} w = int_E i_X w; kvec -> X(p) ^ kvec with Leibniz terms."""
    n, k = E.n, E.k
    if k == n:
        return ElementChain(n, n)
    return _leibniz(E, lambda p, d: _field_directional(X, p, d), k + 1,
                    lambda kv, F: wedge_coeffs(n, 1, k, F, kv))


def _jacobian_directional(X, points, dirs):
    """grad_{dirs} of the jacobian of X: (m, n, n) with [j, g] = d_g grad_dirs X_j."""
    m, r, n = dirs.shape
    cols = []
    eye = np.eye(n)
    for g in range(n):
        d = np.concatenate([dirs, np.broadcast_to(eye[g], (m, 1, n))], axis=1)
        cols.append(X.directional(points, d))
    return np.stack(cols, axis=-1)


def lie_derivative_elem(X, E, method="exact", t=1e-2, levels=3):
    """Lie derivative of an element chain along the vector field X.

    ``method="exact"`` differentiates the flow pushforward at t = 0: for each
    term and subset S of its directions it emits a transport term along
    grad_{u_S} X(p) and a term whose kvec is acted on by the derivation
    extension of grad_{u_S} DX(p). Pairings are exact for polynomial X and
    forms. ``method="flow"`` (order-0 terms) integrates the flow and its
    variational equation with RK4 (step tau/16) and Richardson-extrapolates
    the central difference over tau in {t, t/2} (``levels=2``) or
    {t, t/2, t/4} (``levels=3``, the default).
    """
    if method == "flow":
        return _lie_flow(X, E, t, levels)
    if method != "exact":
        raise ContractViolation(f"unknown Lie derivative method {method!r}")
    n, k = E.n, E.k
    blocks = {}

    def put(s, blk):
        blocks[s] = _concat(blocks[s], blk) if s in blocks else blk

    for s, b in E.blocks.items():
        for S, rest in _subsets(s):
            dS = b.dvecs[:, list(S)]
            dR = b.dvecs[:, list(rest)]
            Xv = X.directional(b.points, dS)
            put(len(rest) + 1, Block(b.coeffs, b.points, b.kvecs,
                                     np.concatenate([dR, Xv[:, None, :]], axis=1)))
            if k > 0:
                JS = _jacobian_directional(X, b.points, dS)
                D = derivation_matrix(JS, k)
                put(len(rest), Block(b.coeffs, b.points, np.einsum("mhg,mg->mh", D, b.kvecs), dR))
    return ElementChain(n, k, blocks)


def _rk4_flow(X, x0, t, steps=16):
    """Flow positions and jacobians of x' = X(x) from x0 over time t."""
    m, n = x0.shape
    x = x0.copy()
    Phi = np.broadcast_to(np.eye(n), (m, n, n)).copy()
    h = t / steps

    def rhs(x, P):
        return X(x).reshape(m, n), np.einsum("mij,mjk->mik", X.jacobian(x).reshape(m, n, n), P)

    for _ in range(steps):
        k1x, k1p = rhs(x, Phi)
        k2x, k2p = rhs(x + h / 2 * k1x, Phi + h / 2 * k1p)
        k3x, k3p = rhs(x + h / 2 * k2x, Phi + h / 2 * k2p)
        k4x, k4p = rhs(x + h * k3x, Phi + h * k3p)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        Phi = Phi + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(Phi))):
        raise FlowError(f"flow integration diverged over time {t}")
    return x, Phi


RICHARDSON_WEIGHTS = {
    # central differences carry even powers of t; rows eliminate t^2, then t^4
    2: ((0.5, 4.0 / 3.0), (1.0, -1.0 / 3.0)),
    3: ((0.25, 64.0 / 45.0), (0.5, -20.0 / 45.0), (1.0, 1.0 / 45.0)),
}


def _lie_flow(X, E, t, levels=3):
    if any(s > 0 for s in E.blocks):
        raise UnsupportedOrder("flow-based Lie derivative takes order-0 chains")
    n, k = E.n, E.k
    b = E.blocks.get(0)
    if b is None:
        return ElementChain(n, k)
    parts = []
    for frac, weight in RICHARDSON_WEIGHTS[levels]:
        tau = t * frac
        for sgn in (1.0, -1.0):
            x, Phi = _rk4_flow(X, b.points, sgn * tau)
            kv = np.einsum("mhg,mg->mh", compound_matrices(Phi, k), b.kvecs)
            c = b.coeffs * (weight * sgn / (2 * tau))
            parts.append(Block(c, x, kv, np.zeros((len(c), 0, n))))
    blk = parts[0]
    for p in parts[1:]:
        blk = _concat(blk, p)
    return ElementChain(n, k, {0: blk})


def random_element_chain(rng, n, k, max_order=2, terms=3, spread=1.0):
    """Random chain with ``terms`` elements of each order 0..max_order.

    Coefficients, kvec entries and difference vectors are uniform in [-1, 1];
    support points are uniform in [-spread, spread]^n.
    """
    blocks = {}
    for s in range(max_order + 1):
        blocks[s] = Block(rng.uniform(-1, 1, terms), rng.uniform(-spread, spread, (terms, n)),
                          rng.uniform(-1, 1, (terms, comb(n, k))),
                          rng.uniform(-1, 1, (terms, s, n)))
    return ElementChain(n, k, blocks)
