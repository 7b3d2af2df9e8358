"""Exterior algebra of R^n with the Euclidean inner product.

A k-vector is stored densely over the lexicographically ordered basis
e^H, H = (h_1 < ... < h_k). Indices are 0-based throughout the Python API;
the JSON formats use 1-based indices.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import ContractViolation, NotSimple, UnsupportedGrade

MAX_DIM = 8


def _check_dim(n):
    if not 0 <= n <= MAX_DIM:
        raise ContractViolation(f"ambient dimension {n} outside 0..{MAX_DIM}")


@lru_cache(maxsize=None)
def basis(n, k):
    """Lexicographically ordered multi-indices of length k drawn from range(n)."""
    if k < 0 or k > n:
        return ()
    return tuple(combinations(range(n), k))


@lru_cache(maxsize=None)
def rank_table(n, k):
    return {H: i for i, H in enumerate(basis(n, k))}


def rank(H, n):
    """Position of the multi-index H in the lexicographic basis."""
    return rank_table(n, len(H))[tuple(H)]


def merge_sign(H, L):
    """Sign of e^H ^ e^L relative to e^{H u L}; 0 when the indices overlap.

    Counts inversions between two increasing sequences with a two-pointer
    merge, so the sign is exact integer arithmetic.
    """
    i = j = 0
    inversions = 0
    while i < len(H) and j < len(L):
        if H[i] == L[j]:
            return 0
        if H[i] < L[j]:
            i += 1
        else:
            inversions += len(H) - i
            j += 1
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _wedge_table(n, j, k):
    ia, ib, io, sg = [], [], [], []
    out = rank_table(n, j + k)
    for a, H in enumerate(basis(n, j)):
        for b, L in enumerate(basis(n, k)):
            s = merge_sign(H, L)
            if s:
                ia.append(a)
                ib.append(b)
                io.append(out[tuple(sorted(H + L))])
                sg.append(s)
    arrs = [np.array(x, dtype=np.intp) for x in (ia, ib, io)]
    return arrs[0], arrs[1], arrs[2], np.array(sg, dtype=float)


@lru_cache(maxsize=None)
def wedge_tensor(n, j, k):
    """Structure constants W[o, a, b] with e^{H_a} ^ e^{L_b} = sum_o W[o, a, b] e^{O_o}."""
    ia, ib, io, sg = _wedge_table(n, j, k)
    w = np.zeros((comb(n, j + k), comb(n, j), comb(n, k)))
    w[io, ia, ib] = sg
    w.setflags(write=False)
    return w


def wedge_coeffs(n, j, k, a, b):
    """Wedge of coefficient arrays; leading axes of ``a`` and ``b`` broadcast."""
    return np.einsum("oab,...a,...b->...o", wedge_tensor(n, j, k),
                     np.asarray(a, dtype=float), np.asarray(b, dtype=float))


@lru_cache(maxsize=None)
def star_matrix(n, k):
    """Matrix of the Hodge star from grade k to grade n-k."""
    m = np.zeros((comb(n, n - k), comb(n, k)))
    out = rank_table(n, n - k)
    full = set(range(n))
    for i, H in enumerate(basis(n, k)):
        Hc = tuple(sorted(full - set(H)))
        m[out[Hc], i] = merge_sign(H, Hc)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def contraction_matrices(n, k):
    """For each axis i, the matrix of alpha -> contract(alpha, e_i).

    Entry [G, H] is the sign of e_i ^ e^G inside e^H, so the result pairs as
    (alpha contract e_i) . gamma = <alpha, e_i ^ gamma>.
    """
    mats = np.zeros((n, comb(n, k - 1) if k >= 1 else 0, comb(n, k)))
    if k == 0:
        return mats
    src = rank_table(n, k)
    for i in range(n):
        for g, G in enumerate(basis(n, k - 1)):
            s = merge_sign((i,), G)
            if s:
                mats[i, g, src[tuple(sorted((i,) + G))]] = s
    mats.setflags(write=False)
    return mats


class KVector:
    """A k-vector in Lambda^k(R^n), immutable.

    Args:
        n: ambient dimension.
        k: grade.
        coeffs: coefficients over ``basis(n, k)``.
    """

    __slots__ = ("n", "k", "coeffs")

    def __init__(self, n, k, coeffs):
        _check_dim(n)
        if not 0 <= k <= n:
            raise ContractViolation(f"grade {k} outside 0..{n}")
        c = np.array(coeffs, dtype=float).reshape(-1)
        if c.shape[0] != comb(n, k):
            raise ContractViolation(
                f"expected {comb(n, k)} coefficients for grade {k} in R^{n}, got {c.shape[0]}")
        c.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("KVector is immutable")

    @classmethod
    def zero(cls, n, k):
        return cls(n, k, np.zeros(comb(n, k)))

    @classmethod
    def e(cls, n, *H):
        """Basis k-vector e^H for 0-based increasing indices H."""
        H = tuple(H)
        if list(H) != sorted(set(H)):
            raise ContractViolation(f"indices {H} must be strictly increasing")
        c = np.zeros(comb(n, len(H)))
        c[rank(H, n)] = 1.0
        return cls(n, len(H), c)

    @classmethod
    def scalar(cls, n, value=1.0):
        return cls(n, 0, [value])

    @classmethod
    def vol(cls, n):
        return cls(n, n, [1.0])

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v.shape[0], 1, v)

    def _same(self, other):
        if not isinstance(other, KVector) or other.n != self.n or other.k != self.k:
            raise ContractViolation("k-vectors must share dimension and grade")

    def __add__(self, other):
        self._same(other)
        return KVector(self.n, self.k, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._same(other)
        return KVector(self.n, self.k, self.coeffs - other.coeffs)

    def __neg__(self):
        return KVector(self.n, self.k, -self.coeffs)

    def __mul__(self, s):
        return KVector(self.n, self.k, self.coeffs * float(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return KVector(self.n, self.k, self.coeffs / float(s))

    def __xor__(self, other):
        return wedge(self, other)

    def __repr__(self):
        return f"KVector(n={self.n}, k={self.k}, coeffs={self.coeffs.tolist()})"

    def allclose(self, other, atol=1e-12):
        return (self.n == other.n and self.k == other.k
                and np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))

    def is_zero(self, atol=0.0):
        return bool(np.all(np.abs(self.coeffs) <= atol))

    @property
    def mass(self):
        return mass(self)

    def star(self):
        return hodge_star(self)


def wedge(a, b):
    """Exterior product. Grade overflow returns the zero k-vector of grade n."""
    if a.n != b.n:
        raise ContractViolation("wedge needs a common ambient dimension")
    n = a.n
    if a.k + b.k > n:
        return KVector.zero(n, n)
    return KVector(n, a.k + b.k, wedge_coeffs(n, a.k, b.k, a.coeffs, b.coeffs))


def inner(a, b):
    """Euclidean inner product; the basis e^H is orthonormal."""
    a._same(b)
    return float(a.coeffs @ b.coeffs)


def mass(a):
    return float(np.linalg.norm(a.coeffs))


def hodge_star(a):
    return KVector(a.n, a.n - a.k, star_matrix(a.n, a.k) @ a.coeffs)


def vec_of_span(*vectors, n=None):
    """Iterated wedge v_1 ^ ... ^ v_k. With no vectors, returns the unit scalar."""
    if not vectors:
        if n is None:
            raise ContractViolation("dimension required for an empty span")
        return KVector.scalar(n)
    out = KVector.from_vector(vectors[0])
    for v in vectors[1:]:
        out = wedge(out, KVector.from_vector(v))
    return out


def is_simple_2vector(a, atol=1e-12):
    """Decomposability test, exact for grade 2 via a ^ a = 0.

    Grades 0, 1, n-1 and n are simple by convention. Other grades raise
    UnsupportedGrade.
    """
    if a.k in (0, 1, a.n - 1, a.n):
        return True
    if a.k != 2:
        raise UnsupportedGrade(f"simplicity test unsupported for grade {a.k} in R^{a.n}")
    scale = max(mass(a) ** 2, 1.0)
    return bool(np.all(np.abs(wedge(a, a).coeffs) <= atol * scale))


def contract(cov, b):
    """Interior product of a k-covector with a j-vector, j <= k.

    The result g satisfies <g, gamma> = <cov, b ^ gamma> for every
    (k-j)-vector gamma.
    """
    if cov.n != b.n:
        raise ContractViolation("contract needs a common ambient dimension")
    j, k, n = b.k, cov.k, cov.n
    if j > k:
        raise ContractViolation(f"contract needs grade {j} <= {k}")
    ia, ib, io, sg = _wedge_table(n, j, k - j)
    out = np.zeros(comb(n, k - j))
    np.add.at(out, ib, sg * b.coeffs[ia] * cov.coeffs[io])
    return KVector(n, k - j, out)


def cap(cov, b):
    """Cap product of a j-covector with a k-vector, j < k.

    The result g satisfies <eta, g> = <eta ^ cov, b> for every (k-j)-covector eta.
    """
    if cov.n != b.n:
        raise ContractViolation("cap needs a common ambient dimension")
    j, k, n = cov.k, b.k, cov.n
    if j >= k:
        raise ContractViolation(f"cap needs grade {j} < {k}")
    ia, ib, io, sg = _wedge_table(n, k - j, j)
    out = np.zeros(comb(n, k - j))
    np.add.at(out, ia, sg * cov.coeffs[ib] * b.coeffs[io])
    return KVector(n, k - j, out)


def compound_matrices(T, k):
    """k-th compound of a (batch of) m x n matrices.

    Entry [G, H] is the minor det(T[G, H]); this is the matrix of Lambda^k T
    in the lexicographic bases. Leading batch axes are preserved.
    """
    T = np.asarray(T, dtype=float)
    m, n = T.shape[-2:]
    rows, cols = basis(m, k), basis(n, k)
    batch = T.shape[:-2]
    if k == 0:
        return np.ones(batch + (1, 1))
    if not rows or not cols:
        return np.zeros(batch + (len(rows), len(cols)))
    r = np.array(rows)
    c = np.array(cols)
    sub = T[..., r[:, None, :, None], c[None, :, None, :]]
    return np.linalg.det(sub)


class LinearMap:
    """A linear map R^n -> R^m with cached exterior powers."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2:
            raise ContractViolation("LinearMap needs a 2-d matrix")
        m.setflags(write=False)
        self.matrix = m
        self._lifts = {}

    @property
    def shape(self):
        return self.matrix.shape

    def lift(self, k):
        """Matrix of Lambda^k of this map."""
        if k not in self._lifts:
            lk = compound_matrices(self.matrix, k)
            lk.setflags(write=False)
            self._lifts[k] = lk
        return self._lifts[k]

    def compose(self, other):
        """self after other."""
        return LinearMap(self.matrix @ other.matrix)


def pushforward_kv(T, a):
    """Apply Lambda^k T to a k-vector."""
    if not isinstance(T, LinearMap):
        T = LinearMap(T)
    m, n = T.shape
    if a.n != n:
        raise ContractViolation("map domain does not match k-vector dimension")
    return KVector(m, a.k, T.lift(a.k) @ a.coeffs)


def simple_frame(a, atol=1e-10):
    """Orthonormal vectors f_1..f_k with M(a) f_1 ^ ... ^ f_k = a.

    Raises NotSimple when a is not decomposable (checked by reconstruction).
    """
    n, k = a.n, a.k
    m = mass(a)
    if m == 0.0:
        raise NotSimple("zero k-vector has no direction")
    if k == 0:
        return np.zeros((0, n))
    # Contractions of a against (k-1)-vectors span the same k-plane as a.
    rows = np.array([contract(a, KVector.e(n, *G)).coeffs for G in basis(n, k - 1)])
    if k == 1:
        rows = a.coeffs[None, :]
    _, sing, vt = np.linalg.svd(rows)
    frame = vt[:k].copy()
    recon = vec_of_span(*frame)
    if inner(recon, a) < 0:
        frame[0] = -frame[0]
        recon = -recon
    if np.max(np.abs(recon.coeffs * m - a.coeffs)) > atol * max(m, 1.0):
        raise NotSimple("k-vector is not simple")
    return frame
