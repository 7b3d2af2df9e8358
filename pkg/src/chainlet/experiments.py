"""Experiment runner: identity checks and convergence tables E1..E8.

Every experiment returns an ExperimentResult made of named tables of
ResultRows plus pass/fail checks. Rows are computed in a fixed order from a
seeded generator, so equal specs give bit-identical output. Wall time is
recorded only when ``timing`` is set.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .elements import (ElementChain, lie_derivative_elem, random_element_chain,
                       sign_divergence, sign_star_theorem)
from .errors import ContractViolation
from .exterior import KVector, star_matrix
from .forms import PolyForm, SmoothMap, form_norm_upper, pullback_form, random_poly_form
from .norms import FormDictionary, bracket, check_integral_inequality, natural_upper
from .polyhedral import DecompositionCert, DifferenceCell, PolyChain, Simplex, cube, simplex_chain
from .polynomial import Polynomial, random_polynomial
from .quantize import (Cube, polygon_area, polygon_fan, quantize_cube, quantize_polygon,
                       quantize_simplex)

COLUMNS = ("level", "lhs", "rhs", "residual", "bound", "seconds")
EXACT_TOL = 1e-12
FLOW_TOL = 1e-8
SLOPE_TOL = -0.9
N_CAP = 6
EXPERIMENTS = ("E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8")


@dataclass
class ExperimentSpec:
    """What to run.

    Args:
        id: experiment id E1..E8.
        n, k: dimension and grade overrides (None: the experiment's sweep).
        levels: increasing level list (None: experiment default).
        dictionary: form dictionary selection; only "default" is defined.
        out: output directory.
        seed: generator seed.
        fmt: "csv" or "json".
        timing: record wall time in the seconds column.
    """

    id: str
    n: int | None = None
    k: int | None = None
    levels: tuple | None = None
    dictionary: str = "default"
    out: str | None = None
    seed: int = 0
    fmt: str = "csv"
    timing: bool = False

    def __post_init__(self):
        if self.id not in EXPERIMENTS:
            raise ContractViolation(f"unknown experiment {self.id!r}")
        if self.levels is not None:
            lv = tuple(int(x) for x in self.levels)
            if not lv or any(b <= a for a, b in zip(lv, lv[1:])) or lv[0] < 0:
                raise ContractViolation("levels must be non-negative and increasing")
            self.levels = lv
        if self.n is not None and not 1 <= self.n <= N_CAP:
            raise ContractViolation(f"dimension must lie in 1..{N_CAP}")
        if self.k is not None and (self.k < 0 or (self.n is not None and self.k > self.n)):
            raise ContractViolation("grade outside 0..n")
        if self.fmt not in ("csv", "json"):
            raise ContractViolation("format must be csv or json")
        if self.dictionary != "default":
            raise ContractViolation("only the default form dictionary is available")

    def level_list(self, default):
        return list(self.levels) if self.levels is not None else list(default)


@dataclass
class ResultRow:
    level: int
    lhs: float
    rhs: float
    residual: float
    bound: float | None = None
    seconds: float = 0.0
    label: str = ""

    @classmethod
    def of(cls, level, lhs, rhs, bound=None, label="", seconds=0.0):
        lhs, rhs = float(lhs), float(rhs)
        return cls(int(level), lhs, rhs, abs(lhs - rhs),
                   None if bound is None else float(bound), float(seconds), label)

    @property
    def within_bound(self):
        return self.bound is None or self.residual <= self.bound * (1 + 1e-12) + 1e-10


@dataclass
class Table:
    name: str
    rows: list = field(default_factory=list)
    threshold: float | None = None
    note: str = ""

    def add(self, *args, **kw):
        self.rows.append(ResultRow.of(*args, **kw))

    @property
    def max_residual(self):
        return max((r.residual for r in self.rows), default=0.0)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    id: str
    spec: ExperimentSpec
    tables: list
    checks: list
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def table(self, name):
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


class _Clock:
    def __init__(self, on):
        self.on = on
        self.t = time.perf_counter()

    def lap(self):
        if not self.on:
            return 0.0
        now = time.perf_counter()
        dt, self.t = now - self.t, now
        return dt


def fit_slope(levels, values):
    """Least-squares slope of log2(values) against levels, ignoring zeros."""
    lv = np.asarray(levels, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 1e-300
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(lv[keep], np.log2(v[keep]), 1)[0])


def _worst(residuals):
    """Index of the (label, residual, allowed) triple closest to its allowance."""
    def ratio(t):
        return t[1] / t[2] if t[2] > 0 else (math.inf if t[1] > 0 else 0.0)
    return max(range(len(residuals)), key=lambda i: ratio(residuals[i]))


def _standard_checks(tables):
    checks = []
    for t in tables:
        if t.threshold is not None:
            checks.append(Check(f"{t.name}: residual <= {t.threshold:g}",
                                t.max_residual <= t.threshold, f"max {t.max_residual:.3e}"))
        bad = [r.level for r in t.rows if not r.within_bound]
        if any(r.bound is not None for r in t.rows):
            checks.append(Check(f"{t.name}: residual <= bound", not bad,
                                f"violations at levels {bad}" if bad else "all rows"))
    return checks


def _finish(spec, tables, checks=(), meta=None):
    meta = dict(meta or {})
    meta.setdefault("seed", spec.seed)
    return ExperimentResult(spec.id, spec, tables, _standard_checks(tables) + list(checks), meta)


# E1 ----------------------------------------------------------------------------

def run_E1_stokes_exact(spec=None):
    """Element-chain Stokes: int over bd E of w against int over E of dw."""
    spec = spec or ExperimentSpec("E1")
    rng = np.random.default_rng(spec.seed)
    clock = _Clock(spec.timing)
    t = Table("stokes", threshold=EXACT_TOL)
    dims = [spec.n] if spec.n else [1, 2, 3, 4]
    i = 0
    t.add(i, ElementChain(2, 1).boundary().integrate(PolyForm(2, 0)), 0.0, label="empty chain",
          seconds=clock.lap())
    i += 1
    vol = ElementChain.element([0.3, -0.2], KVector.vol(2))
    xdy = PolyForm.from_terms(2, 1, [((1,), (1, 0), 1.0)])
    t.add(i, vol.boundary().integrate(xdy), vol.integrate(xdy.d()), label="vol element, x dy",
          seconds=clock.lap())
    for n in dims:
        grades = [spec.k] if spec.k else range(1, n + 1)
        for k in grades:
            for _ in range(3):
                i += 1
                E = random_element_chain(rng, n, k, max_order=2)
                w = random_poly_form(rng, n, k - 1, 4, nterms=4)
                t.add(i, E.boundary().integrate(w), E.integrate(w.d()),
                      label=f"n={n} k={k}", seconds=clock.lap())
    return _finish(spec, [t])


# E2 ----------------------------------------------------------------------------

def _cube_tables(spec, n, k, levels, clock):
    c = Cube(np.zeros(n), 1.0, tuple(range(k)))
    box = c.box()
    region = (box[0], np.where(box[1] > box[0], box[1], box[0] + 1.0))
    dictionary = FormDictionary.default(n, k, region, degree=2, r_max=1)
    H = tuple(range(k))
    x2 = PolyForm.from_terms(n, k, [(H, (2,) + (0,) * (n - 1), 1.0)])
    xy = PolyForm.from_terms(n, k, [(H, (1, 1) + (0,) * (n - 2), 1.0)]) if n >= 2 else None
    const = PolyForm.from_terms(n, k, [(H, (0,) * n, 1.0)])
    src = c.chain()
    tdict = Table(f"cube_n{n}_k{k}_dictionary",
                  note="worst dictionary form per level, integrals divided by its |w|_1 bound")
    tx2 = Table(f"cube_n{n}_k{k}_x2", note="w = x1^2 on the cube covector")
    txy = Table(f"cube_n{n}_k{k}_x1x2", note="w = x1 x2; the midpoint rule is exact here")
    tconst = Table(f"cube_n{n}_k{k}_constant", threshold=EXACT_TOL)
    exact_src = {}
    ok = True
    for j in levels:
        E, rep = quantize_cube(c, j, dictionary)
        ok &= rep.ok
        worst = _worst(rep.residuals)
        lab, res, allowed = rep.residuals[worst]
        nr = dictionary.norms[worst][1]
        w = dictionary.forms[worst]
        tdict.add(j, E.integrate(w) / nr, src.integrate(w) / nr, rep.bound, label=lab)
        for tab, form in ((tx2, x2), (txy, xy), (tconst, const)):
            if form is None:
                continue
            if id(form) not in exact_src:
                exact_src[id(form)] = (src.integrate(form), form_norm_upper(form, 1, region))
            val, nr1 = exact_src[id(form)]
            tab.add(j, E.integrate(form), val, rep.bound * nr1 if tab is not tconst else None)
        tdict.rows[-1].seconds = clock.lap()
    tables = [tdict, tx2, tconst] + ([txy] if xy is not None else [])
    slope = fit_slope([r.level for r in tx2.rows], [r.residual for r in tx2.rows])
    checks = [Check(f"cube_n{n}_k{k}: every dictionary form within bound", ok),
              Check(f"cube_n{n}_k{k}: x1^2 residual slope <= -1", slope <= -1.0, f"slope {slope:.3f}")]
    return tables, checks, {f"slope_cube_n{n}_k{k}_x2": slope}


def run_E2_quantization_rate(spec=None):
    """Cube and simplex quantization residuals against the a-priori bound."""
    spec = spec or ExperimentSpec("E2")
    clock = _Clock(spec.timing)
    n = spec.n or 2
    k = spec.k if spec.k is not None else n
    levels = spec.level_list(range(0, 9 if k <= 2 else 8))
    tables, checks, meta = _cube_tables(spec, n, k, levels, clock)
    if n >= 2:
        verts = np.zeros((3, n))
        verts[1, 0] = verts[2, 1] = 1.0
        tri = Simplex(verts)
        region = (np.zeros(n), np.ones(n))
        dictionary = FormDictionary.default(n, 2, region, degree=2, r_max=1)
        ttri = Table(f"triangle_n{n}", note="worst dictionary form; bound includes the deficit")
        tdef = Table(f"triangle_n{n}_area", note="lhs covered mass, rhs simplex mass, bound deficit")
        ok = True
        for j in [x for x in levels if x <= 8]:
            E, rep = quantize_simplex(tri, j, dictionary=dictionary)
            ok &= rep.ok
            worst = _worst(rep.residuals)
            nr = dictionary.norms[worst][1]
            w = dictionary.forms[worst]
            ttri.add(j, E.integrate(w) / nr, tri.chain().integrate(w) / nr, rep.bound,
                     label=dictionary.labels[worst], seconds=clock.lap())
            tdef.add(j, rep.covered_mass, tri.mass, rep.deficit)
        tables += [ttri, tdef]
        checks.append(Check(f"triangle_n{n}: every dictionary form within bound", ok))
    return _finish(spec, tables, checks, meta)


# E3 ----------------------------------------------------------------------------

def _quantized_star_tables(n, m, levels, rng, clock):
    c = Cube(np.zeros(n), 1.0, tuple(range(m)))
    src = c.chain()
    box = c.box()
    region = (box[0], np.where(box[1] > box[0], box[1], box[0] + 1e-9))
    w_star = random_poly_form(rng, n, n - m, 3, nterms=None)
    w_div = random_poly_form(rng, n, n - m + 1, 3, nterms=None)
    w_curl = random_poly_form(rng, n, m - 1, 3, nterms=None)
    g_star = w_star.star()
    g_div = w_div.star().d()
    g_curl = w_curl.d()
    s_star, s_div = sign_star_theorem(n, m), sign_divergence(n, m)
    exact = (s_star * src.integrate(g_star), s_div * src.integrate(g_div),
             src.boundary().integrate(w_curl))
    norms = [form_norm_upper(g, 1, region) for g in (g_star, g_div, g_curl)]
    ts = Table(f"quantized_star_n{n}_m{m}")
    td = Table(f"quantized_divergence_n{n}_m{m}")
    tc = Table(f"quantized_curl_n{n}_m{m}")
    for j in levels:
        E, rep = quantize_cube(c, j)
        ts.add(j, E.star().integrate(w_star), exact[0], rep.bound * norms[0])
        td.add(j, E.boundary().star().integrate(w_div), exact[1], rep.bound * norms[1])
        tc.add(j, E.star().integrate(w_curl.d().star()), exact[2], rep.bound * norms[2],
               seconds=clock.lap())
    return [ts, td, tc]


def run_E3_star_duality(spec=None):
    """Star, divergence and curl identities on element chains and quantized cubes."""
    spec = spec or ExperimentSpec("E3")
    rng = np.random.default_rng(spec.seed)
    clock = _Clock(spec.timing)
    ts = Table("star", threshold=EXACT_TOL)
    td = Table("divergence", threshold=EXACT_TOL)
    tc = Table("curl", threshold=EXACT_TOL)
    tsign = Table("star_signs", threshold=EXACT_TOL,
                  note="lhs measured sign of int_{*A} w / int_A *w, rhs (-1)^{m(n-m)}")
    dims = [spec.n] if spec.n else [1, 2, 3, 4]
    i = 0
    for n in dims:
        for m in ([spec.k] if spec.k is not None else range(0, n + 1)):
            for _ in range(2):
                A = random_element_chain(rng, n, m, max_order=2)
                w = random_poly_form(rng, n, n - m, 3, nterms=4)
                ts.add(i, A.star().integrate(w), sign_star_theorem(n, m) * A.integrate(w.star()),
                       label=f"n={n} m={m}")
                if m >= 1:
                    w2 = random_poly_form(rng, n, n - m + 1, 3, nterms=4)
                    td.add(i, A.boundary().star().integrate(w2),
                           sign_divergence(n, m) * A.integrate(w2.star().d()), label=f"n={n} m={m}")
                    w3 = random_poly_form(rng, n, m - 1, 3, nterms=4)
                    tc.add(i, A.star().integrate(w3.d().star()), A.boundary().integrate(w3),
                           label=f"n={n} m={m}")
                i += 1
            G = tuple(range(m))
            a = KVector.e(n, *G)
            A = ElementChain.element(np.zeros(n), a)
            w = PolyForm.constant(n, n - m, star_matrix(n, m) @ a.coeffs)
            tsign.add(len(tsign.rows), A.star().integrate(w) / A.integrate(w.star()),
                      sign_star_theorem(n, m), label=f"n={n} m={m}", seconds=clock.lap())
    tables = [ts, td, tc, tsign]
    levels = spec.level_list(range(0, 7))
    for n, m in ((2, 2), (3, 2)):
        if spec.n is None or spec.n == n:
            tables += _quantized_star_tables(n, m, levels, rng, clock)
    return _finish(spec, tables)


# E4 ----------------------------------------------------------------------------

def _fdx(coeffs):
    """The 1-form f dx on R^1 for f = sum c_d x^d."""
    return PolyForm(1, 1, [Polynomial(1, {(d,): c for d, c in enumerate(coeffs)})])


def run_E4_distribution_derivative(spec=None):
    """theta_{* bd A}(f) against theta_A(f') on intervals of R^1."""
    spec = spec or ExperimentSpec("E4")
    rng = np.random.default_rng(spec.seed)
    clock = _Clock(spec.timing)
    tend = Table("endpoints", threshold=EXACT_TOL,
                 note="A = [0,1]; bd A = delta_1 - delta_0; level = degree of f = x^d")
    dA = ElementChain.element([1.0], KVector.scalar(1)) - ElementChain.element([0.0], KVector.scalar(1))
    seg = simplex_chain([[0.0], [1.0]])
    for d in range(6):
        f = _fdx([0.0] * d + [1.0])
        tend.add(d, dA.star().integrate(f), seg.integrate(PolyForm(1, 1, [f.coeffs[0].deriv(0)])))
    telem = Table("elements", threshold=EXACT_TOL,
                  note="quantized interval at level j, f = x^5, both sides on the element chain")
    tq = Table("quantized", note="quantized interval at level j, f = x^5, rhs = f(1) - f(0)")
    f5 = _fdx([0, 0, 0, 0, 0, 1.0])
    df5 = PolyForm(1, 1, [f5.coeffs[0].deriv(0)])
    nr = form_norm_upper(df5, 1, (np.zeros(1), np.ones(1)))
    levels = spec.level_list(range(0, 11))
    for j in levels:
        E, rep = quantize_cube(Cube(np.zeros(1)), j)
        lhs = E.boundary().star().integrate(f5)
        telem.add(j, lhs, E.integrate(df5))
        tq.add(j, lhs, 1.0, rep.bound * nr, seconds=clock.lap())
    trand = Table("random_elements", threshold=EXACT_TOL,
                  note="random 1-element chains of order <= 2, f of degree <= 5")
    for i in range(20):
        E = random_element_chain(rng, 1, 1, max_order=2)
        f = _fdx(rng.uniform(-1, 1, 6))
        trand.add(i, E.boundary().star().integrate(f),
                  E.integrate(PolyForm(1, 1, [f.coeffs[0].deriv(0)])))
    slope = fit_slope([r.level for r in tq.rows], [r.residual for r in tq.rows])
    checks = [Check("quantized: slope <= -0.9", slope <= SLOPE_TOL, f"slope {slope:.3f}")]
    return _finish(spec, [tend, telem, trand, tq], checks, {"slope_quantized": slope})


# E5 ----------------------------------------------------------------------------

def squares_sequence(k):
    """P_k = 4^k times the square [0, 2^-k]^2."""
    return cube(np.zeros(2), 2.0 ** -k, coeff=4.0 ** k)


def squares_cert(k):
    """P_k - P_{k+1} as three order-1 differences of the corner subsquare."""
    h = 2.0 ** (-k - 1)
    s0 = cube(np.zeros(2), h)
    return DecompositionCert(tuple((-(4.0 ** k), DifferenceCell(s0, [v]))
                                   for v in ([h, 0.0], [0.0, h], [h, h])))


def staircase(n_steps):
    """(staircase - diagonal, boundary witness) for the unit diagonal of R^2."""
    i = np.arange(n_steps)[:, None]
    a = np.hstack([i, i]) / n_steps
    b = a + [1.0 / n_steps, 0.0]
    c = a + 1.0 / n_steps
    segs = np.concatenate([np.stack([a, b], 1), np.stack([b, c], 1)])
    S = PolyChain(2, 1, np.ones(len(segs)), segs)
    tris = PolyChain(2, 2, np.ones(n_steps), np.stack([a, b, c], 1))
    return S - simplex_chain([[0.0, 0.0], [1.0, 1.0]]), DecompositionCert((), tris)


def weierstrass_partial(m):
    def f(x):
        return sum(2.0 ** -q * np.sin(2.0 ** (3 * q) * x) for q in range(m + 1))
    return f


def step_graph(f, N):
    """Step-function graph of f on [0, 1] with N intervals: horizontal then vertical pieces."""
    x = np.linspace(0.0, 1.0, N + 1)
    y = f(x)
    a = np.stack([x[:-1], y[:-1]], 1)
    b = np.stack([x[1:], y[:-1]], 1)
    c = np.stack([x[1:], y[1:]], 1)
    segs = np.concatenate([np.stack([a, b], 1), np.stack([b, c], 1)])
    return PolyChain(2, 1, np.ones(len(segs)), segs), x, y


def step_graph_cert(fc, Nc, ff, Nf):
    """Certificate for graph(ff, Nf) - graph(fc, Nc), with Nf a multiple of Nc.

    The witness is minus the signed region between the two step functions;
    the end mismatch at x = 1 is an order-0 difference.
    """
    _, xc, yc = step_graph(fc, Nc)
    _, xf, yf = step_graph(ff, Nf)
    r = Nf // Nc
    g = np.repeat(yc[:-1], r)
    gf = yf[:-1]
    x0, x1 = xf[:-1], xf[1:]
    o = np.stack([x0, g], 1)
    e1 = np.stack([x1 - x0, np.zeros_like(x0)], 1)
    e2 = np.stack([np.zeros_like(x0), gf - g], 1)
    up = np.stack([o, o + e1, o + e1 + e2], 1)
    left = np.stack([o, o + e2, o + e1 + e2], 1)
    C = PolyChain(2, 2, np.concatenate([-np.ones(len(o)), np.ones(len(o))]),
                  np.concatenate([up, left]))
    end = simplex_chain([[1.0, yc[-1]], [1.0, yf[-1]]])
    return DecompositionCert(((1.0, DifferenceCell(end)),), C)


def random_chain_with_cert(rng, n, k):
    """A random chain built from translation differences, with its certificate."""
    terms, diffs = PolyChain.zero(n, k), []
    for _ in range(rng.integers(1, 3)):
        base = simplex_chain(rng.uniform(-0.5, 0.5, (k + 1, n)))
        a = float(rng.uniform(-1, 1))
        if rng.random() < 0.6:
            v = rng.uniform(-0.3, 0.3, n)
            cell = DifferenceCell(base, [v])
        else:
            cell = DifferenceCell(base)
        diffs.append((a, cell))
        terms = terms + cell.expand() * a
    return terms, DecompositionCert(tuple(diffs))


def _fii_rows(table, chain, certs, r, rng, forms=3):
    """Integral-inequality rows: lhs |int_P w|, rhs bracket upper * |w|_r."""
    ok = True
    for _ in range(forms):
        w = random_poly_form(rng, chain.n, chain.k, 3, nterms=3)
        rep = check_integral_inequality(chain, w, r, certs)
        ok &= not rep.violated
        table.add(len(table.rows), abs(rep.integral), rep.bound, rep.bound)
    return ok


def run_E5_norm_brackets(spec=None, random_chains=200):
    """Natural-norm brackets: squares, boundaries, staircases, rough graphs, random chains."""
    spec = spec or ExperimentSpec("E5")
    rng = np.random.default_rng(spec.seed)
    clock = _Clock(spec.timing)
    tsq = Table("squares", note="lhs lower, rhs upper bracket of |P_k - P_{k+1}| at r = 1")
    tbd = Table("squares_boundary",
                note="lhs lower, rhs upper of |bd(P_k - P_{k+1})| at r = 2; bound = upper at r = 1")
    tst = Table("staircase", note="level = steps; lhs lower, rhs upper at r = 1; bound 1/(2 steps)")
    tw = Table("weierstrass", note="lhs lower, rhs upper of |A_{m+1} - A_m| at r = 1; no a-priori bound")
    trb = Table("random_boundary",
                note="lhs upper |bd P| at r, rhs upper |P| at r-1 (bound); lower <= upper checked")
    tfii = Table("integral_inequality", note="lhs |int_P w|, rhs upper * |w|_r (bound)")
    fii_ok = True
    sandwich = []
    levels = spec.level_list(range(0, 6))
    for k in levels:
        X = squares_sequence(k) - squares_sequence(k + 1)
        cert = squares_cert(k)
        b1 = bracket(X, 1, [cert])
        tsq.add(k, b1.lower, b1.upper)
        bc = cert.boundary_transport(X)
        b2 = bracket(X.boundary(), 2, [bc])
        tbd.add(k, b2.lower, b2.upper, b1.upper, seconds=clock.lap())
        sandwich += [b1, b2]
        fii_ok &= _fii_rows(tfii, X, [cert], 1, rng)
    ratios = [b.rhs / a.rhs for a, b in zip(tsq.rows, tsq.rows[1:])]
    for steps in [2 ** i for i in range(1, 7)]:
        D, cert = staircase(steps)
        b = bracket(D, 1, [cert])
        tst.add(steps, b.lower, b.upper, 1.0 / (2 * steps), seconds=clock.lap())
        sandwich.append(b)
        fii_ok &= _fii_rows(tfii, D, [cert], 1, rng)
    for m in range(0, 3):
        Nc, Nf = 8 ** (m + 1), 8 ** (m + 2)
        fc, ff = weierstrass_partial(m), weierstrass_partial(m + 1)
        A0, _, _ = step_graph(fc, Nc)
        A1, _, _ = step_graph(ff, Nf)
        cert = step_graph_cert(fc, Nc, ff, Nf)
        b = bracket(A1 - A0, 1, [cert])
        tw.add(m, b.lower, b.upper, seconds=clock.lap())
        sandwich.append(b)
        fii_ok &= _fii_rows(tfii, A1 - A0, [cert], 1, rng, forms=1)
    order_ok = True
    for i in range(random_chains):
        n = int(rng.integers(2, 4))
        k = int(rng.integers(1, 3))
        r = int(rng.integers(1, 3))
        P, cert = random_chain_with_cert(rng, n, k)
        upP = natural_upper(P, cert, r - 1)
        bd_certs = [cert.boundary_transport(P),
                    DecompositionCert(tuple((a, c.boundary()) for a, c in cert.differences))]
        bB = bracket(P.boundary(), r, bd_certs)
        bP = bracket(P, r - 1, [cert])
        order_ok &= bB.upper <= upP + 1e-12 and bB.lower <= upP + 1e-12
        sandwich += [bB, bP]
        trb.add(i, bB.upper, upP, upP)
        if i < 40:
            fii_ok &= _fii_rows(tfii, P, [cert], r - 1 if r > 1 else 1, rng, forms=1)
    clock.lap()
    checks = [
        Check("brackets: lower <= upper", all(b.consistent for b in sandwich),
              f"{len(sandwich)} brackets"),
        Check("squares: upper decays geometrically", all(q <= 0.75 for q in ratios),
              f"ratios {[round(q, 4) for q in ratios]}"),
        Check("squares: boundary upper <= level-1 upper", all(r.rhs <= r.bound + 1e-12 for r in tbd.rows)),
        Check("staircase: upper <= 1/(2 steps)", all(r.rhs <= r.bound + 1e-12 for r in tst.rows)),
        Check("random chains: |bd P|_r <= |P|_{r-1} ordering", order_ok, f"{random_chains} chains"),
        Check("integral inequality: no violations", fii_ok, f"{len(tfii.rows)} pairs"),
    ]
    return _finish(spec, [tsq, tbd, tst, tw, trb, tfii], checks)


# E6 ----------------------------------------------------------------------------

def _cartan(w, X):
    out = None
    if w.k > 0:
        out = w.interior(X).d()
    if w.k < w.n:
        t = w.d().interior(X)
        out = t if out is None else out + t
    return out


def run_E6_cartan_lie(spec=None):
    """Lie derivative of element chains against the Cartan formula."""
    spec = spec or ExperimentSpec("E6")
    rng = np.random.default_rng(spec.seed)
    clock = _Clock(spec.timing)
    tflow = Table("flow", threshold=FLOW_TOL, note="flow-based element Lie derivative, order-0 chains")
    texact = Table("exact", threshold=EXACT_TOL, note="exact element Lie derivative, orders <= 2")
    tspec = Table("special", threshold=FLOW_TOL)
    dims = [spec.n] if spec.n else [2, 3]
    i = 0
    for n in dims:
        for deg in (1, 2):
            for k in ([spec.k] if spec.k is not None else range(n + 1)):
                X = SmoothMap.polynomial([random_polynomial(rng, n, deg, scale=0.5) for _ in range(n)])
                w = random_poly_form(rng, n, k, 3, nterms=4)
                rhs_form = _cartan(w, X)
                E0 = random_element_chain(rng, n, k, max_order=0, spread=0.5)
                tflow.add(i, lie_derivative_elem(X, E0, "flow").integrate(w), E0.integrate(rhs_form),
                          label=f"n={n} deg={deg} k={k}")
                E = random_element_chain(rng, n, k, max_order=2, spread=0.5)
                texact.add(i, lie_derivative_elem(X, E).integrate(w), E.integrate(rhs_form),
                           label=f"n={n} deg={deg} k={k}", seconds=clock.lap())
                i += 1
    p = rng.uniform(-0.5, 0.5, (3, 2))
    E = ElementChain.from_arrays(rng.uniform(-1, 1, 3), p, rng.uniform(-1, 1, (3, 2)), 1)
    zero = SmoothMap.polynomial([Polynomial(2), Polynomial(2)])
    w = random_poly_form(rng, 2, 1, 3, nterms=4)
    tspec.add(0, lie_derivative_elem(zero, E, "flow").integrate(w), 0.0, label="X = 0")
    rot = SmoothMap.polynomial([Polynomial(2, {(0, 1): -1.0}), Polynomial(2, {(1, 0): 1.0})])
    xdy = PolyForm.from_terms(2, 1, [((1,), (1, 0), 1.0)])
    oracle = PolyForm.from_terms(2, 1, [((0,), (1, 0), 1.0), ((1,), (0, 1), -1.0)])
    tspec.add(1, lie_derivative_elem(rot, E, "flow").integrate(xdy), E.integrate(oracle),
              label="rotation, x dy; oracle x dx - y dy")
    const = SmoothMap.polynomial([Polynomial.const(2, 0.7), Polynomial.const(2, -0.4)])
    cw = PolyForm.constant(2, 1, [0.3, 1.1])
    tspec.add(2, lie_derivative_elem(const, E, "flow").integrate(cw), 0.0,
              label="constant X, constant w", seconds=clock.lap())
    return _finish(spec, [tflow, texact, tspec])


# E7 ----------------------------------------------------------------------------

def pullback_examples():
    """Two reference pullbacks: (x, y) -> x - y with dt, and t -> (t^2, t^3) with x dy."""
    f1 = SmoothMap.polynomial([Polynomial(2, {(1, 0): 1.0, (0, 1): -1.0})])
    dt = PolyForm.dx(1, 0)
    f2 = SmoothMap.polynomial([Polynomial(1, {(2,): 1.0}), Polynomial(1, {(3,): 1.0})])
    xdy = PolyForm.from_terms(2, 1, [((1,), (1, 0), 1.0)])
    return (f1, dt, PolyForm.constant(2, 1, [1.0, -1.0])), \
        (f2, xdy, PolyForm.from_terms(1, 1, [((0,), (4,), 3.0)]))


def run_E7_pullback_examples(spec=None, samples=100):
    """Reference pullbacks at random points against their closed forms."""
    spec = spec or ExperimentSpec("E7")
    rng = np.random.default_rng(spec.seed)
    clock = _Clock(spec.timing)
    (f1, w1, o1), (f2, w2, o2) = pullback_examples()
    tables = []
    n3 = 3
    ident = SmoothMap.identity(n3)
    w3 = random_poly_form(rng, n3, 2, 3, nterms=4)
    for name, f, w, oracle in (("example1", f1, w1, o1), ("example2", f2, w2, o2),
                               ("identity", ident, w3, w3)):
        t = Table(name, threshold=EXACT_TOL, note="lhs (f*w)(p; a), rhs oracle(p; a), random p and a")
        pb = pullback_form(f, w)
        for i in range(samples):
            p = rng.uniform(-2, 2, f.n_in)
            a = KVector(f.n_in, w.k, rng.uniform(-1, 1, comb(f.n_in, w.k)))
            t.add(i, pb.eval(p, a), oracle.eval(p, a))
        t.rows[-1].seconds = clock.lap()
        tables.append(t)
    checks = [Check("example1 symbolic match", pullback_form(f1, w1).equals(o1)),
              Check("example2 symbolic match", pullback_form(f2, w2).equals(o2))]
    return _finish(spec, tables, checks)


# E8 ----------------------------------------------------------------------------

KOCH_AREA0 = math.sqrt(3) / 4


def koch_polygon(g):
    """Counterclockwise Koch snowflake polygon of generation g on a unit triangle."""
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    rot = np.array([[0.5, math.sqrt(3) / 2], [-math.sqrt(3) / 2, 0.5]])
    for _ in range(g):
        Q = np.roll(P, -1, axis=0)
        d = (Q - P) / 3
        a, b = P + d, P + 2 * d
        tip = a + d @ rot.T
        P = np.stack([P, a, tip, b], axis=1).reshape(-1, 2)
    return P


def koch_area(g):
    """Closed-form area of generation g: A0 (8/5 - 3/5 (4/9)^g)."""
    return KOCH_AREA0 * (8.0 / 5.0 - 3.0 / 5.0 * (4.0 / 9.0) ** g)


def _koch_form():
    """w = x^2 y dx + x^3 y dy, so that d*w = 2xy + x^3 is not linear."""
    return PolyForm.from_terms(2, 1, [((0,), (2, 1), 1.0), ((1,), (3, 1), 1.0)])


def run_E8_fractal_flux(spec=None, generations=range(0, 6)):
    """Divergence identity on quantized Koch snowflake interiors."""
    spec = spec or ExperimentSpec("E8")
    clock = _Clock(spec.timing)
    w = _koch_form()
    g_form = w.star().d()
    s = sign_divergence(2, 2)
    levels = spec.level_list(range(3, 9))
    tarea = Table("area", note="level = generation; lhs shoelace area, rhs closed form")
    tflux = Table("exact_flux", threshold=EXACT_TOL,
                  note="level = generation; lhs int_A d*w on a fan, rhs int_{bd A} *w")
    tables = [tarea, tflux]
    checks = []
    slopes = {}
    for g in generations:
        V = koch_polygon(g)
        fan = polygon_fan(V)
        tarea.add(g, polygon_area(V), koch_area(g))
        boundary = PolyChain(2, 1, np.ones(len(V)), np.stack([V, np.roll(V, -1, 0)], 1))
        exact = fan.integrate(g_form)
        tflux.add(g, exact, boundary.integrate(w.star()))
        lo, hi = V.min(axis=0), V.max(axis=0)
        nr = form_norm_upper(g_form, 1, (lo, hi))
        tc = Table(f"g{g}_clipped",
                   note="clipped cover; lhs int over * bd E_j of w, rhs sign * int_A d*w")
        tm = Table(f"g{g}_midpoint",
                   note="midpoint cover; bound includes the boundary-cell deficit")
        for j in levels:
            for tab, mode in ((tc, "clipped"), (tm, "midpoint")):
                E, rep = quantize_polygon(V, j, mode=mode)
                tab.add(j, E.boundary().star().integrate(w), s * exact, rep.bound * nr,
                        seconds=clock.lap())
        res = [r.residual for r in tc.rows]
        slopes[f"slope_g{g}_clipped"] = fit_slope(levels, res)
        slopes[f"slope_g{g}_midpoint"] = fit_slope(levels, [r.residual for r in tm.rows])
        dec = all(b < a for a, b in zip(res, res[1:]))
        checks.append(Check(f"g{g}: clipped residual decreases with level", dec,
                            "residuals " + ", ".join(f"{x:.2e}" for x in res)))
        checks.append(Check(f"g{g}: clipped residual slope <= -0.9",
                            slopes[f"slope_g{g}_clipped"] <= SLOPE_TOL,
                            f"slope {slopes[f'slope_g{g}_clipped']:.3f}"))
        tables += [tc, tm]
    last = tarea.rows[-1]
    checks.append(Check("area at the last generation within 1e-6 of the closed form",
                        last.residual <= 1e-6, f"residual {last.residual:.2e}"))
    return _finish(spec, tables, checks, slopes)


RUNNERS = {
    "E1": run_E1_stokes_exact,
    "E2": run_E2_quantization_rate,
    "E3": run_E3_star_duality,
    "E4": run_E4_distribution_derivative,
    "E5": run_E5_norm_brackets,
    "E6": run_E6_cartan_lie,
    "E7": run_E7_pullback_examples,
    "E8": run_E8_fractal_flux,
}


def run(spec):
    return RUNNERS[spec.id](spec)


# output ------------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def table_csv(table):
    lines = [",".join(COLUMNS)]
    for r in table.rows:
        lines.append(",".join(_fmt(getattr(r, c)) for c in COLUMNS))
    return "\n".join(lines) + "\n"


def result_meta(result):
    spec = asdict(result.spec)
    return {"experiment": result.id, "seed": result.spec.seed, "spec": spec,
            "passed": result.passed,
            "checks": [asdict(c) for c in result.checks],
            "tables": [{"name": t.name, "threshold": t.threshold, "note": t.note,
                        "max_residual": t.max_residual,
                        "labels": [r.label for r in t.rows]} for t in result.tables],
            "meta": result.meta}


def write_result(result, out_dir, fmt="csv"):
    """Write tables and metadata; returns the list of written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        for t in result.tables:
            p = out / f"{result.id}_{t.name}.csv"
            p.write_text(table_csv(t))
            written.append(p)
        p = out / f"{result.id}_meta.json"
        p.write_text(json.dumps(result_meta(result), indent=2, default=_json_default))
        written.append(p)
    else:
        doc = result_meta(result)
        for tj, t in zip(doc["tables"], result.tables):
            tj["rows"] = [{c: getattr(r, c) for c in COLUMNS} for r in t.rows]
        p = out / f"{result.id}.json"
        p.write_text(json.dumps(doc, indent=2, default=_json_default))
        written.append(p)
    return written


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)
