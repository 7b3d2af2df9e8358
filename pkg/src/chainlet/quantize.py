"""Dyadic quantization of cells, simplices and forms into element chains."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .elements import Block, ElementChain
from .errors import ContractViolation
from .exterior import KVector, mass, rank, simple_frame, vec_of_span
from .forms import DifferentialForm
from .polyhedral import PolyChain, Simplex, cube, parallelotope


@dataclass(frozen=True)
class Cube:
    """Axis-aligned k-cube in R^n.

    Args:
        origin: lower corner (n,).
        edge: common edge length or one per spanned axis.
        axes: increasing 0-based axes spanned (default all n).
        coeff: weight.
    """

    origin: np.ndarray
    edge: object = 1.0
    axes: tuple | None = None
    coeff: float = 1.0

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(-1)
        object.__setattr__(self, "origin", o)
        axes = tuple(range(o.shape[0])) if self.axes is None else tuple(int(a) for a in self.axes)
        if list(axes) != sorted(set(axes)) or (axes and not 0 <= axes[0] <= axes[-1] < o.shape[0]):
            raise ContractViolation("cube axes must be increasing indices in range")
        object.__setattr__(self, "axes", axes)
        e = np.broadcast_to(np.asarray(self.edge, dtype=float), (len(axes),)).copy()
        if np.any(e <= 0):
            raise ContractViolation("cube edges must be positive")
        object.__setattr__(self, "edge", e)

    @property
    def n(self):
        return self.origin.shape[0]

    @property
    def k(self):
        return len(self.axes)

    @property
    def volume(self):
        return float(np.prod(self.edge))

    def mass(self):
        return abs(self.coeff) * self.volume

    def kvec(self):
        return KVector.e(self.n, *self.axes)

    def chain(self):
        return cube(self.origin, self.edge, self.axes, self.n, self.coeff)

    def box(self):
        hi = self.origin.copy()
        hi[list(self.axes)] += self.edge
        return self.origin.copy(), hi


@dataclass
class QuantizationReport:
    """Summary of one quantization.

    ``bound`` is the a-priori 1-natural error bound; for any form w,
    |int_E w - int_source w| <= bound * |w|_1. ``residuals`` holds
    (label, residual, allowed) triples when a dictionary is supplied.
    """

    level: int
    count: int
    mass: float
    bound: float
    deficit: float = 0.0
    covered_mass: float | None = None
    residuals: list = field(default_factory=list)

    @property
    def ok(self):
        return all(res <= allowed + 1e-10 for _, res, allowed in self.residuals)

    def to_json(self):
        return {"level": self.level, "count": self.count, "mass": self.mass, "bound": self.bound,
                "deficit": self.deficit, "covered_mass": self.covered_mass,
                "residuals": [{"form": lab, "residual": r, "allowed": a}
                              for lab, r, a in self.residuals]}


def _lattice(counts):
    grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1) if counts else np.zeros((1, 0), int)


def _score(E, source, dictionary, bound, extra=0.0):
    """Residuals of E against a source chain for (label, form, |form|_1 bound) triples."""
    rows = []
    for label, w, norm1 in dictionary:
        res = abs(E.integrate(w) - source.integrate(w))
        rows.append((label, float(res), float((bound + extra) * norm1)))
    return rows


def _dictionary_triples(dictionary):
    if dictionary is None:
        return []
    if hasattr(dictionary, "norms"):
        return [(lab, w, nr[1] if len(nr) > 1 else nr[0]) for lab, w, nr in dictionary]
    return list(dictionary)


def quantize_cube(c, j, dictionary=None):
    """Replace a cube by 2^{kj} order-0 elements at subcube midpoints.

    Args:
        c: a Cube.
        j: level (>= 0).
        dictionary: optional FormDictionary (or (label, form, |form|_1) triples)
            for observed residuals.

    Returns:
        (ElementChain, QuantizationReport). The bound is
        2^{1-j} * max_edge * M(c), i.e. 2^{1-j} M(c) for unit edges.
    """
    if j < 0:
        raise ContractViolation("level must be non-negative")
    n, k = c.n, c.k
    N = 2 ** j
    h = c.edge / N
    idx = _lattice([N] * k)
    pts = np.repeat(c.origin[None], idx.shape[0], axis=0)
    if k:
        pts[:, list(c.axes)] += (idx + 0.5) * h
    kv = np.zeros((idx.shape[0], comb(n, k)))
    kv[:, rank(tuple(c.axes), n)] = float(np.prod(h))
    coeffs = np.full(idx.shape[0], float(c.coeff))
    E = ElementChain(n, k, {0: Block(coeffs, pts, kv, np.zeros((idx.shape[0], 0, n)))},
                     canonical=False)
    total = float(np.sum(np.abs(coeffs) * kv[:, rank(tuple(c.axes), n)]))
    bound = 2.0 ** (1 - j) * float(np.max(c.edge, initial=0.0)) * c.mass()
    rep = QuantizationReport(j, idx.shape[0], total, bound, 0.0, total)
    triples = _dictionary_triples(dictionary)
    if triples:
        rep.residuals = _score(E, c.chain(), triples, bound)
    return E, rep


# simplices -------------------------------------------------------------------

def _lex_positive(g, tol=1e-12):
    """Row-wise: first component with |g| > tol is positive."""
    out = np.zeros(g.shape[0], dtype=bool)
    decided = np.zeros(g.shape[0], dtype=bool)
    for a in range(g.shape[1]):
        big = (~decided) & (np.abs(g[:, a]) > tol)
        out[big] = g[big, a] > 0
        decided |= big
    return out


def _frame_for(simplex_vertices, n, k, frame=None):
    """Orthonormal (k, n) frame of the simplex plane and the orientation sign."""
    E = simplex_vertices[1:] - simplex_vertices[0]
    if frame is None:
        if k == n:
            F = np.eye(n)
        else:
            F = simple_frame(vec_of_span(*E, n=n))
    else:
        F = np.asarray(frame, dtype=float).reshape(k, n)
    det = np.linalg.det(E @ F.T) if k else 1.0
    if abs(det) <= 1e-14:
        return F, 0
    return F, int(np.sign(det))


def _quantize_simplex_arrays(verts, coeff, j, frame=None):
    """Cells of the dyadic lattice (edge 2^-j in frame coordinates) inside one simplex.

    Returns midpoints (m, n), the element k-vector, the covered cell count, and
    the number of cells meeting the simplex boundary (mass-deficit bound).
    """
    kp1, n = verts.shape
    k = kp1 - 1
    F, sign = _frame_for(verts, n, k, frame)
    h = 2.0 ** (-j)
    if sign == 0:
        return np.zeros((0, n)), None, 0, 0, F
    base = verts[0] - F.T @ (F @ verts[0])
    Y = verts @ F.T  # frame coordinates of the vertices, (k+1, k)
    if k == 0:
        return verts[:1].copy(), KVector.scalar(n).coeffs * coeff, 1, 0, F
    lo = np.floor(Y.min(axis=0) / h).astype(int)
    hi = np.ceil(Y.max(axis=0) / h).astype(int)
    idx = _lattice(list(hi - lo)) + lo
    mids = (idx + 0.5) * h
    # barycentric coordinates lam = A [y; 1]
    M = np.vstack([Y.T, np.ones(kp1)])
    A = np.linalg.inv(M)
    lam = mids @ A[:, :k].T + A[:, k]
    grad = A[:, :k]
    tol = 1e-12
    zero = np.abs(lam) <= tol
    ok = (lam > tol) | (zero & _lex_positive(grad)[None, :])
    inside = np.all(ok, axis=1)
    spread = (h / 2) * np.sum(np.abs(grad), axis=1)
    full = np.all(lam - spread[None, :] >= -tol, axis=1)
    apart = np.any(lam + spread[None, :] <= tol, axis=1)
    touching = int(np.sum(~full & ~apart))
    pts = base[None, :] + mids[inside] @ F
    vol = vec_of_span(*F, n=n)
    kvec = vol.coeffs * (h ** k) * sign * coeff
    return pts, kvec, int(np.sum(inside)), touching, F


def quantize_simplex(s, j, frame=None, dictionary=None):
    """Quantize a simplex, or a PolyChain of simplices, on a uniform dyadic lattice.

    Cells of edge 2^-j (in an orthonormal frame of the simplex plane; the
    identity when k = n) whose midpoint lies in the simplex become order-0
    elements. Midpoints on a face are assigned by a lexicographic
    perturbation rule, so simplices sharing a face never both claim a cell.

    Returns:
        (ElementChain, QuantizationReport) with deficit = mass of cells meeting
        the boundary (a bound on the mass of cover minus simplex, and vice
        versa) and bound = 2^{1-j} * covered_mass + deficit.
    """
    if j < 0:
        raise ContractViolation("level must be non-negative")
    P = s.chain() if isinstance(s, Simplex) else s
    n, k = P.n, P.k
    h = 2.0 ** (-j)
    pts_all, kv_all = [], []
    covered = 0.0
    deficit = 0.0
    for c, verts in zip(P.coeffs, P.vertices):
        pts, kvec, count, touching, _ = _quantize_simplex_arrays(verts, float(c), j, frame)
        deficit += abs(c) * touching * h ** k
        if count == 0:
            continue
        pts_all.append(pts)
        kv_all.append(np.repeat(kvec[None], count, axis=0))
        covered += abs(c) * count * h ** k
    if k == 0:
        deficit = 0.0
    if pts_all:
        pts = np.concatenate(pts_all)
        kv = np.concatenate(kv_all)
    else:
        pts, kv = np.zeros((0, n)), np.zeros((0, comb(n, k)))
    E = ElementChain(n, k, {0: Block(np.ones(len(pts)), pts, kv, np.zeros((len(pts), 0, n)))},
                     canonical=False)
    bound = 2.0 ** (1 - j) * covered + deficit if k else 0.0
    rep = QuantizationReport(j, len(pts), float(np.sum(np.linalg.norm(kv, axis=1))), bound,
                             deficit, covered)
    triples = _dictionary_triples(dictionary)
    if triples:
        rep.residuals = _score(E, P, triples, bound)
    return E, rep


# forms -----------------------------------------------------------------------

def ch_of_form(w, region, j):
    """Element chain of a form on an axis box: kvec = cell volume * riesz_vec(w, midpoint).

    Args:
        w: DifferentialForm.
        region: (lo, hi) box in R^n.
        j: level; the box is split into 2^j cells per axis.
    """
    if not isinstance(w, DifferentialForm):
        raise ContractViolation("ch_of_form needs a differential form")
    lo, hi = (np.asarray(x, dtype=float) for x in region)
    if lo.shape != (w.n,) or np.any(hi <= lo):
        raise ContractViolation("region must be a bounded box in R^n")
    N = 2 ** j
    h = (hi - lo) / N
    idx = _lattice([N] * w.n)
    mids = lo + (idx + 0.5) * h
    kv = w.coeffs_at(mids) * float(np.prod(h))
    return ElementChain(w.n, w.k, {0: Block(np.ones(len(mids)), mids, kv,
                                             np.zeros((len(mids), 0, w.n)))}, canonical=False)


def element_monopole(p, a, level):
    """The weighted cube Q_level(p, a) centered at p.

    Edge 2^-level along an orthonormal frame of a, coefficient 2^{k level} M(a);
    its Vec is a and its mass is M(a). Raises NotSimple for non-simple a.
    """
    p = np.asarray(p, dtype=float)
    F = simple_frame(a)
    h = 2.0 ** (-level)
    E = F * h
    origin = p - E.sum(axis=0) / 2
    return parallelotope(origin, E, 2.0 ** (a.k * level) * mass(a))


def polygon_fan(vertices, center=None):
    """Signed fan of triangles (c, v_i, v_{i+1}); as a chain it equals the polygon."""
    V = np.asarray(vertices, dtype=float)
    c = V.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    W = np.roll(V, -1, axis=0)
    tris = np.stack([np.broadcast_to(c, V.shape), V, W], axis=1)
    return PolyChain(2, 2, np.ones(len(V)), tris, canonical=False)


def polygon_area(vertices):
    """Signed shoelace area."""
    V = np.asarray(vertices, dtype=float)
    W = np.roll(V, -1, axis=0)
    return 0.5 * float(np.sum(V[:, 0] * W[:, 1] - W[:, 0] * V[:, 1]))


def _boundary_cells(vertices, h):
    """Lattice cells whose center lies within a half-diagonal of some polygon edge.

    Every cell meeting the boundary is in this set. Returns an (m, 2) index array.
    """
    V = np.asarray(vertices, dtype=float)
    W = np.roll(V, -1, axis=0)
    r = h * np.sqrt(2) / 2
    found = []
    for a, b in zip(V, W):
        lo = np.floor((np.minimum(a, b) - r) / h).astype(int)
        hi = np.floor((np.maximum(a, b) + r) / h).astype(int)
        idx = _lattice(list(hi - lo + 1)) + lo
        mids = (idx + 0.5) * h
        d = b - a
        t = np.clip(((mids - a) @ d) / max(float(d @ d), 1e-300), 0.0, 1.0)
        dist = np.linalg.norm(mids - (a + t[:, None] * d), axis=1)
        found.append(idx[dist <= r * (1 + 1e-12)])
    if not found:
        return np.zeros((0, 2), dtype=int)
    return np.unique(np.concatenate(found), axis=0)


def clip_halfplane(P, axis, bound, keep_below):
    """Sutherland-Hodgman step: keep the part of polygon P with x_axis <= bound (or >=)."""
    if len(P) == 0:
        return P
    d = P[:, axis] - bound
    if not keep_below:
        d = -d
    inside = d <= 0
    Q = np.roll(P, -1, axis=0)
    dq = np.roll(d, -1)
    inq = np.roll(inside, -1)
    cross = inside != inq
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, d / (d - dq), 0.0)
    X = P + t[:, None] * (Q - P)
    cand = np.stack([P, X], axis=1)
    mask = np.stack([inside, cross], axis=1)
    return cand[mask]


def polygon_moments(P):
    """(area, centroid) of a polygon by the shoelace formulas."""
    if len(P) < 3:
        return 0.0, np.zeros(2)
    Q = np.roll(P, -1, axis=0)
    cr = P[:, 0] * Q[:, 1] - Q[:, 0] * P[:, 1]
    A = 0.5 * float(np.sum(cr))
    if abs(A) < 1e-300:
        return 0.0, P.mean(axis=0)
    c = np.array([np.sum((P[:, 0] + Q[:, 0]) * cr), np.sum((P[:, 1] + Q[:, 1]) * cr)]) / (6 * A)
    return A, c


def polygon_cells(vertices, h):
    """Lattice cells (edge h) whose midpoint is inside a simple polygon.

    Scanline even-odd test on each cell row; an edge counts for the row when
    the row height lies in its half-open y-range.
    """
    V = np.asarray(vertices, dtype=float)
    W = np.roll(V, -1, axis=0)
    lo = np.floor(V.min(axis=0) / h).astype(int)
    hi = np.ceil(V.max(axis=0) / h).astype(int)
    xs_idx = np.arange(lo[0], hi[0])
    xm = (xs_idx + 0.5) * h
    out = []
    for r in range(lo[1], hi[1]):
        y = (r + 0.5) * h
        cross = ((V[:, 1] <= y) & (y < W[:, 1])) | ((W[:, 1] <= y) & (y < V[:, 1]))
        if not np.any(cross):
            continue
        a, b = V[cross], W[cross]
        x = np.sort(a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1]))
        inside = np.searchsorted(x, xm, side="right") % 2 == 1
        if np.any(inside):
            cols = xs_idx[inside]
            out.append(np.stack([cols, np.full(cols.shape, r)], axis=1))
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=int)


def _clipped_pieces(V, cells, h):
    """Areas and centroids of polygon-cell intersections, clipping column strips first."""
    areas = np.zeros(len(cells))
    cents = (cells + 0.5) * h
    for col in np.unique(cells[:, 0]):
        strip = clip_halfplane(clip_halfplane(V, 0, col * h, False), 0, (col + 1) * h, True)
        if len(strip) < 3:
            continue
        for i in np.nonzero(cells[:, 0] == col)[0]:
            row = cells[i, 1]
            piece = clip_halfplane(clip_halfplane(strip, 1, row * h, False), 1, (row + 1) * h, True)
            areas[i], c = polygon_moments(piece)
            if areas[i] > 0:
                cents[i] = c
    return areas, cents


def quantize_polygon(vertices, j, dictionary=None, mode="midpoint"):
    """Quantize the interior of a simple counterclockwise polygon in R^2.

    ``mode="midpoint"``: cells of the dyadic lattice with midpoint inside
    become order-0 elements with kvec h^2 e_1 ^ e_2; no normals or convexity
    are used. The deficit counts cells near the boundary, which bounds the
    mass of the symmetric difference between the cover and the polygon.

    ``mode="clipped"``: interior cells as above, and each cell meeting the
    boundary is intersected with the polygon and replaced by one element at
    the centroid of the piece, weighted by its area. The cover is exact
    (deficit 0); pieces have diameter at most sqrt(2) h.
    """
    V = np.asarray(vertices, dtype=float)
    h = 2.0 ** (-j)
    cells = polygon_cells(V, h)
    near = _boundary_cells(V, h)
    if mode == "midpoint":
        m = len(cells)
        pts = (cells + 0.5) * h
        weights = np.full(m, h * h)
        covered = m * h * h
        deficit = len(near) * h * h
        bound = 2.0 ** (1 - j) * covered + deficit
    elif mode == "clipped":
        interior = np.ones(len(cells), dtype=bool)
        if len(near) and len(cells):
            key = lambda a: a[:, 0].astype(np.int64) * (1 << 32) + a[:, 1]
            interior = ~np.isin(key(cells), key(near))
        areas, cents = _clipped_pieces(V, near, h)
        keep = areas > 0
        pts = np.concatenate([(cells[interior] + 0.5) * h, cents[keep]])
        weights = np.concatenate([np.full(int(interior.sum()), h * h), areas[keep]])
        m = len(pts)
        covered = float(np.sum(weights))
        deficit = 0.0
        bound = 2.0 ** (1 - j) * covered
    else:
        raise ContractViolation(f"unknown polygon quantization mode {mode!r}")
    E = ElementChain(2, 2, {0: Block(np.ones(m), pts, weights[:, None],
                                     np.zeros((m, 0, 2)))}, canonical=False)
    rep = QuantizationReport(j, m, covered, bound, deficit, covered)
    triples = _dictionary_triples(dictionary)
    if triples:
        rep.residuals = _score(E, polygon_fan(vertices), triples, rep.bound)
    return E, rep
