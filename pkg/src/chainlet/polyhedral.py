"""Polyhedral chains: real-weighted sums of oriented affine simplices."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations

import numpy as np

from .errors import ContractViolation, QuadratureWarning
from .exterior import KVector, compound_matrices
from .forms import PolyForm

DEFAULT_QUAD_DEGREE = 10


def _perm_parity(perm):
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


@dataclass(frozen=True)
class Simplex:
    """An oriented affine k-simplex.

    Args:
        vertices: (k+1, n) array.
        orientation: +1 or -1.
    """

    vertices: np.ndarray
    orientation: int = 1

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2:
            raise ContractViolation("simplex vertices must form a 2-d array")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if self.orientation not in (1, -1):
            raise ContractViolation("orientation must be +1 or -1")

    @property
    def k(self):
        return self.vertices.shape[0] - 1

    @property
    def n(self):
        return self.vertices.shape[1]

    @property
    def edges(self):
        return self.vertices[1:] - self.vertices[0]

    @property
    def gram_det(self):
        E = self.edges
        return float(np.linalg.det(E @ E.T)) if self.k else 1.0

    @property
    def degenerate(self):
        return self.k > 0 and self.gram_det <= 1e-12

    @property
    def mass(self):
        if self.k == 0:
            return 1.0
        return math.sqrt(max(self.gram_det, 0.0)) / math.factorial(self.k)

    def chain(self, coeff=1.0):
        return PolyChain(self.n, self.k, [coeff * self.orientation], self.vertices[None])


class PolyChain:
    """Formal sum of oriented k-simplices in R^n, stored as arrays.

    Args:
        n: ambient dimension.
        k: simplex dimension.
        coeffs: (m,) weights.
        vertices: (m, k+1, n) vertex coordinates; the vertex order fixes orientation.
        canonical: merge equal vertex sets and drop zero weights on construction.
        integer: require integral coefficients.
    """

    def __init__(self, n, k, coeffs=(), vertices=None, canonical=True, integer=False):
        c = np.asarray(coeffs, dtype=float).reshape(-1)
        v = (np.zeros((0, k + 1, n)) if vertices is None
             else np.asarray(vertices, dtype=float).reshape(-1, k + 1, n))
        if v.shape[0] != c.shape[0]:
            raise ContractViolation("one coefficient per simplex is required")
        if integer and not np.all(c == np.round(c)):
            raise ContractViolation("integer chain with non-integral coefficient")
        self.n, self.k, self.integer = n, k, integer
        if canonical:
            c, v = _canonicalize(c, v)
        c.setflags(write=False)
        v.setflags(write=False)
        self.coeffs, self.vertices = c, v

    @classmethod
    def zero(cls, n, k):
        return cls(n, k)

    @classmethod
    def from_simplices(cls, items, n=None, k=None):
        """Build from (coeff, Simplex) pairs."""
        items = list(items)
        if not items:
            return cls(n, k)
        s0 = items[0][1]
        coeffs = [c * s.orientation for c, s in items]
        verts = np.stack([s.vertices for _, s in items])
        return cls(s0.n, s0.k, coeffs, verts)

    @classmethod
    def point(cls, p, coeff=1.0):
        p = np.asarray(p, dtype=float)
        return cls(p.shape[0], 0, [coeff], p[None, None, :])

    def __len__(self):
        return self.coeffs.shape[0]

    def __iter__(self):
        for c, v in zip(self.coeffs, self.vertices):
            yield float(c), Simplex(v)

    def __repr__(self):
        return f"PolyChain(n={self.n}, k={self.k}, terms={len(self)})"

    def _same(self, other):
        if other.n != self.n or other.k != self.k:
            raise ContractViolation("chains must share dimension and degree")

    def __add__(self, other):
        self._same(other)
        return PolyChain(self.n, self.k, np.concatenate([self.coeffs, other.coeffs]),
                         np.concatenate([self.vertices, other.vertices]))

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return PolyChain(self.n, self.k, -self.coeffs, self.vertices, canonical=False)

    def __mul__(self, s):
        return PolyChain(self.n, self.k, self.coeffs * float(s), self.vertices)

    __rmul__ = __mul__

    def translate(self, v):
        v = np.asarray(v, dtype=float)
        return PolyChain(self.n, self.k, self.coeffs, self.vertices + v, canonical=False)

    def is_zero(self):
        return len(self) == 0

    def bbox(self):
        if len(self) == 0:
            return np.zeros(self.n), np.zeros(self.n)
        pts = self.vertices.reshape(-1, self.n)
        return pts.min(axis=0), pts.max(axis=0)

    # geometry --------------------------------------------------------------
    def edge_wedges(self):
        """(m, C(n,k)) coefficients of (v_1 - v_0) ^ ... ^ (v_k - v_0) per simplex."""
        if self.k == 0:
            return np.ones((len(self), 1))
        E = np.swapaxes(self.vertices[:, 1:] - self.vertices[:, :1], 1, 2)
        return compound_matrices(E, self.k)[..., 0]

    def simplex_masses(self):
        if self.k == 0:
            return np.ones(len(self))
        return np.linalg.norm(self.edge_wedges(), axis=1) / math.factorial(self.k)

    def mass(self):
        """Sum of |a_i| M(sigma_i); equals the mass when the cells do not overlap."""
        return float(np.abs(self.coeffs) @ self.simplex_masses())

    def vec(self):
        w = self.edge_wedges() / math.factorial(self.k)
        return KVector(self.n, self.k, self.coeffs @ w if len(self) else np.zeros(w.shape[1]))

    def boundary(self):
        if self.k == 0:
            return PolyChain(self.n, 0)
        k = self.k
        coeffs, verts = [], []
        for i in range(k + 1):
            keep = [j for j in range(k + 1) if j != i]
            coeffs.append(self.coeffs * (-1) ** i)
            verts.append(self.vertices[:, keep])
        return PolyChain(self.n, k - 1, np.concatenate(coeffs), np.concatenate(verts))

    def integrate(self, w, degree=None):
        return integrate_poly(self, w, degree)


def _lex_less(a, b):
    """Row-wise lexicographic a < b for (m, n) arrays."""
    less = np.zeros(a.shape[0], dtype=bool)
    eq = np.ones(a.shape[0], dtype=bool)
    for d in range(a.shape[1]):
        less |= eq & (a[:, d] < b[:, d])
        eq &= a[:, d] == b[:, d]
    return less, eq


def _canonicalize(c, v, tol=1e-12):
    m, kp1, n = v.shape
    if m == 0:
        return c.copy(), v.copy()
    # sort vertices of each simplex; track permutation parity
    v = v.copy()
    c = c.copy()
    parity = np.ones(m)
    dead = np.zeros(m, dtype=bool)
    for i in range(kp1):
        for j in range(kp1 - 1 - i):
            less, eq = _lex_less(v[:, j + 1], v[:, j])
            dead |= eq
            tmp = v[less, j].copy()
            v[less, j] = v[less, j + 1]
            v[less, j + 1] = tmp
            parity[less] *= -1
    c = c * parity
    keep = ~dead
    c, v = c[keep], v[keep]
    if c.shape[0] == 0:
        return c, v
    flat = v.reshape(c.shape[0], -1)
    uniq, inv = np.unique(flat, axis=0, return_inverse=True)
    summed = np.bincount(inv.reshape(-1), weights=c, minlength=uniq.shape[0])
    scale = max(1.0, float(np.max(np.abs(c))))
    nz = np.abs(summed) > tol * scale
    return summed[nz], uniq[nz].reshape(-1, kp1, n)


def simplex_chain(vertices, coeff=1.0):
    v = np.asarray(vertices, dtype=float)
    return PolyChain(v.shape[1], v.shape[0] - 1, [coeff], v[None])


def parallelotope(origin, edge_vectors, coeff=1.0):
    """Kuhn triangulation of the parallelotope origin + sum t_i e_i, t in [0,1]^k.

    The chain is positively oriented with Vec = coeff * e_1 ^ ... ^ e_k.
    """
    origin = np.asarray(origin, dtype=float)
    E = np.asarray(edge_vectors, dtype=float).reshape(-1, origin.shape[0])
    k = E.shape[0]
    coeffs, verts = [], []
    for perm in permutations(range(k)):
        pts = [origin]
        for i in perm:
            pts.append(pts[-1] + E[i])
        verts.append(np.stack(pts))
        coeffs.append(coeff * _perm_parity(perm))
    return PolyChain(origin.shape[0], k, coeffs, np.stack(verts))


def cube(origin, edge, axes=None, n=None, coeff=1.0):
    """Axis-aligned cube as a Kuhn-triangulated chain.

    Args:
        origin: lower corner, length n.
        edge: common edge length or one length per axis.
        axes: increasing 0-based axes spanned by the cube (default: all).
        coeff: chain weight.
    """
    origin = np.asarray(origin, dtype=float)
    n = origin.shape[0] if n is None else n
    axes = tuple(range(n)) if axes is None else tuple(axes)
    edges = np.broadcast_to(np.asarray(edge, dtype=float), (len(axes),))
    E = np.zeros((len(axes), n))
    for r, (a, h) in enumerate(zip(axes, edges)):
        E[r, a] = h
    return parallelotope(origin, E, coeff)


# quadrature -----------------------------------------------------------------

@lru_cache(maxsize=None)
def simplex_rule(k, degree):
    """Collapsed Gauss rule on the standard k-simplex, exact to ``degree``.

    Returns barycentric-free coordinates (q, k) and weights summing to 1/k!.
    """
    if k == 0:
        return np.zeros((1, 0)), np.ones(1)
    q = max(1, math.ceil((degree + k) / 2))
    t, w = np.polynomial.legendre.leggauss(q)
    t = (t + 1) / 2
    w = w / 2
    grids = np.meshgrid(*([t] * k), indexing="ij")
    wgrids = np.meshgrid(*([w] * k), indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    lam = np.zeros_like(T)
    rest = np.ones(T.shape[0])
    for i in range(k):
        lam[:, i] = T[:, i] * rest
        rest = rest * (1 - T[:, i])
    jac = np.ones(T.shape[0])
    for i in range(k - 1):
        jac *= (1 - T[:, i]) ** (k - 1 - i)
    return lam, W * jac


def simplex_monomial_integral(exps):
    """Closed form of the integral of prod lambda_i^{a_i} over the standard simplex."""
    k = len(exps)
    return math.prod(math.factorial(a) for a in exps) / math.factorial(sum(exps) + k)


def integrate_poly(P, w, degree=None):
    """Integral of a k-form over a polyhedral k-chain.

    Polynomial forms are integrated exactly (up to rounding) with a Gauss
    rule of matching degree on each simplex. Black-box forms use ``degree``,
    the form's degree hint, or a default of 10, and warn when the hint
    exceeds the rule's exactness.
    """
    if w.k != P.k or w.n != P.n:
        raise ContractViolation(f"cannot integrate a {w.k}-form in R^{w.n} over a {P.k}-chain in R^{P.n}")
    if len(P) == 0:
        return 0.0
    if P.k == 0:
        vals = w.coeffs_at(P.vertices[:, 0])[:, 0]
        return float(P.coeffs @ vals)
    if isinstance(w, PolyForm):
        deg = w.degree
    else:
        hint = getattr(w, "degree", None)
        deg = degree if degree is not None else (hint if hint is not None else DEFAULT_QUAD_DEGREE)
        if hint is not None and hint > deg:
            warnings.warn(f"quadrature degree {deg} below the form's degree hint {hint}",
                          QuadratureWarning, stacklevel=2)
    lam, wts = simplex_rule(P.k, deg)
    v0 = P.vertices[:, 0]
    E = P.vertices[:, 1:] - v0[:, None]
    pts = v0[:, None, :] + np.einsum("qi,min->mqn", lam, E)
    vals = w.coeffs_at(pts.reshape(-1, P.n)).reshape(len(P), lam.shape[0], -1)
    wedges = P.edge_wedges()
    per = np.einsum("q,mqh,mh->m", wts, vals, wedges)
    return float(P.coeffs @ per)


# difference cells ------------------------------------------------------------

@dataclass(frozen=True)
class DifferenceCell:
    """Iterated translation difference of a base chain.

    sigma^0 = base and sigma^{j+1} = sigma^j - T_{v_{j+1}} sigma^j.
    """

    base: PolyChain
    vectors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float).reshape(-1, self.base.n)
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def order(self):
        return self.vectors.shape[0]

    def expand(self):
        out = self.base
        for v in self.vectors:
            out = out - out.translate(v)
        return out

    def norm(self):
        return self.base.mass() * float(np.prod(np.linalg.norm(self.vectors, axis=1)))

    def boundary(self):
        return DifferenceCell(self.base.boundary(), self.vectors)


def expand_difference(D):
    return D.expand()


def difference_norm(D):
    """Difference norm of a cell or of a weighted list of (coeff, cell) pairs."""
    if isinstance(D, DifferenceCell):
        return D.norm()
    return float(sum(abs(a) * cell.norm() for a, cell in D))


def expand_weighted(n, k, items):
    out = PolyChain(n, k)
    for a, cell in items:
        out = out + cell.expand() * a
    return out


@dataclass(frozen=True)
class DecompositionCert:
    """Certificate P = sum_j D^j + boundary(C) for natural-norm upper bounds.

    Args:
        differences: (coeff, DifferenceCell) pairs of any orders.
        witness: the (k+1)-chain C, or None.
        witness_cert: certificate bounding C one level lower (None: use mass).
    """

    differences: tuple = ()
    witness: PolyChain | None = None
    witness_cert: "DecompositionCert | None" = None

    @classmethod
    def trivial(cls, P):
        return cls(((1.0, DifferenceCell(P)),))

    def max_order(self):
        return max((cell.order for _, cell in self.differences), default=0)

    def boundary_transport(self, P):
        """Certificate for boundary(P) built from a certificate for P: witness C = P."""
        return DecompositionCert((), P, self)
