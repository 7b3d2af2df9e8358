"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import itertools
import time
from math import comb

import numpy as np
import pytest

from chainlet.elements import (ElementChain, random_element_chain, sign_divergence,
                               sign_star_theorem)
from chainlet.experiments import (EXACT_TOL, FLOW_TOL, ExperimentSpec, fit_slope,
                                  pullback_examples, random_chain_with_cert, run, squares_cert,
                                  squares_sequence, staircase)
from chainlet.exterior import KVector, basis, hodge_star, inner, mass, vec_of_span, wedge
from chainlet.forms import PolyForm, form_norm_upper, pullback_form, random_poly_form
from chainlet.norms import FormDictionary, check_integral_inequality
from chainlet.polyhedral import simplex_chain
from chainlet.polynomial import Polynomial
from chainlet.quantize import Cube, element_monopole, quantize_cube

CHUNK_LIMIT = 2 ** 21


@pytest.fixture
def report(capsys):
    def emit(number, passed, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
        assert passed, detail
    return emit


@pytest.fixture(scope="module")
def e5():
    return run(ExperimentSpec("E5"))


def _check(result, name):
    return next(c for c in result.checks if c.name == name)


# 1 ------------------------------------------------------------------------------

def _random_kv(rng, n, k):
    return KVector(n, k, rng.uniform(-1, 1, comb(n, k)))


def test_criterion_1_exterior_identities(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for case in range(1000):
        n = int(rng.integers(1, 7))
        j = int(rng.integers(0, n + 1))
        k = int(rng.integers(0, n - j + 1))
        l = int(rng.integers(0, n - j - k + 1))
        a, b, c = _random_kv(rng, n, j), _random_kv(rng, n, k), _random_kv(rng, n, l)
        a2 = _random_kv(rng, n, j)
        res = [
            np.max(np.abs((wedge(a, b) - wedge(b, a) * (-1) ** (j * k)).coeffs)),
            np.max(np.abs((wedge(wedge(a, b), c) - wedge(a, wedge(b, c))).coeffs)),
            abs(inner(a, a2) - inner(a2, a)),
            np.max(np.abs((hodge_star(hodge_star(a)) - a * (-1) ** (j * (n - j))).coeffs)),
            abs(wedge(a, hodge_star(a)).coeffs[0] - mass(a) ** 2),
        ]
        B = basis(n, j)
        G, H = B[int(rng.integers(len(B)))], B[int(rng.integers(len(B)))]
        res.append(abs(inner(KVector.e(n, *G), KVector.e(n, *H)) - float(G == H)))
        if j >= 1:
            # wedge of vectors agrees with the determinant Gram identity
            vs = rng.uniform(-1, 1, (j, n))
            gram = np.linalg.det(vs @ vs.T)
            res.append(abs(mass(vec_of_span(*vs)) ** 2 - gram))
        worst = max(worst, *map(float, res))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-12 and elapsed < 10,
           f"1000 cases, max residual {worst:.2e}, {elapsed:.2f} s")


# 2 ------------------------------------------------------------------------------

def test_criterion_2_pullback_examples(report):
    rng = np.random.default_rng(2)
    (f1, w1, o1), (f2, w2, o2) = pullback_examples()
    worst = 0.0
    for f, w, oracle in ((f1, w1, o1), (f2, w2, o2)):
        pb = pullback_form(f, w)
        for _ in range(100):
            p = rng.uniform(-2, 2, f.n_in)
            a = KVector(f.n_in, w.k, rng.uniform(-1, 1, comb(f.n_in, w.k)))
            worst = max(worst, abs(pb.eval(p, a) - oracle.eval(p, a)))
    symbolic = pullback_form(f1, w1).equals(o1) and pullback_form(f2, w2).equals(o2)
    report(2, worst <= 1e-12 and symbolic,
           f"f*dt = dx - dy and f*(x dy) = 3t^4 dt at 100 points each, max residual {worst:.2e}")


# 3 ------------------------------------------------------------------------------

def test_criterion_3_discrete_identities(report):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = {"stokes": 0.0, "star": 0.0, "divergence": 0.0, "curl": 0.0}
    cases = 0
    for n in range(1, 5):
        for k in range(1, n + 1):
            for order, degree, _ in itertools.product(range(3), range(5), range(3)):
                A = random_element_chain(rng, n, k, max_order=order)
                w_s = random_poly_form(rng, n, k - 1, degree, nterms=None)
                w_h = random_poly_form(rng, n, n - k, degree, nterms=None)
                w_d = random_poly_form(rng, n, n - k + 1, degree, nterms=None)
                bd = A.boundary()
                worst["stokes"] = max(worst["stokes"], abs(bd.integrate(w_s) - A.integrate(w_s.d())))
                worst["star"] = max(worst["star"], abs(
                    A.star().integrate(w_h) - sign_star_theorem(n, k) * A.integrate(w_h.star())))
                worst["divergence"] = max(worst["divergence"], abs(
                    bd.star().integrate(w_d) - sign_divergence(n, k) * A.integrate(w_d.star().d())))
                worst["curl"] = max(worst["curl"], abs(
                    A.star().integrate(w_s.d().star()) - bd.integrate(w_s)))
                cases += 1
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    report(3, top <= EXACT_TOL and elapsed < 60,
           f"{cases} (n, k, order, degree) cases, max residual {top:.2e} "
           f"({', '.join(f'{k} {v:.1e}' for k, v in worst.items())}), {elapsed:.1f} s")


# 4 ------------------------------------------------------------------------------

def _cube_residuals(c, j, dictionary):
    """(residual, allowed) per dictionary form; large levels are summed over subcubes."""
    k = c.k
    exact = [c.chain().integrate(w) for w in dictionary.forms]
    bound = 2.0 ** (1 - j) * float(np.max(c.edge)) * c.mass()
    if 2 ** (k * j) <= CHUNK_LIMIT:
        E, rep = quantize_cube(c, j)
        approx = [E.integrate(w) for w in dictionary.forms]
        assert rep.bound == pytest.approx(bound)
    else:
        # the level-j lattice is the union of the level-(j-1) lattices of the 2^k half-cubes
        approx = [0.0] * len(dictionary.forms)
        half = float(np.max(c.edge)) / 2
        for corner in itertools.product((0.0, half), repeat=k):
            origin = np.array(c.origin, dtype=float)
            origin[list(c.axes)] += corner
            E, _ = quantize_cube(Cube(origin, half, c.axes, c.coeff), j - 1)
            for i, w in enumerate(dictionary.forms):
                approx[i] += E.integrate(w)
            del E
    return [(abs(a - e), bound * nr[1]) for a, e, nr in zip(approx, exact, dictionary.norms)]


def test_criterion_4_quantization_bound(report):
    t0 = time.perf_counter()
    details, ok = [], True
    for n, k in ((1, 1), (2, 1), (2, 2), (3, 2), (3, 3)):
        c = Cube(np.zeros(n), 1.0, tuple(range(k)))
        lo = np.zeros(n)
        hi = np.where(np.arange(n) < k, 1.0, 0.0)
        region = (lo, np.where(hi > lo, hi, 1.0))
        D = FormDictionary.default(n, k, region, degree=2, r_max=1)
        worst = []
        for j in range(9):
            pairs = _cube_residuals(c, j, D)
            ok &= all(r <= a + 1e-13 for r, a in pairs)
            # residual per unit |w|_1 of the worst form
            worst.append(max(r / a for r, a in pairs) * 2.0 ** (1 - j))
        slope = fit_slope(range(9), worst)
        ok &= slope <= -1.0
        details.append(f"k={k} n={n} slope {slope:.2f}")
    elapsed = time.perf_counter() - t0
    report(4, ok, f"every dictionary form within 2^(1-j)|w|_1 for j=0..8; {'; '.join(details)}; "
                  f"{elapsed:.1f} s")


# 5 ------------------------------------------------------------------------------

def test_criterion_5_monopole(report):
    rng = np.random.default_rng(5)
    ok, slopes = True, []
    for n, k in ((2, 1), (2, 2), (3, 1), (3, 2), (3, 3)):
        p = rng.uniform(-0.5, 0.5, n)
        a = vec_of_span(*rng.uniform(-1, 1, (k, n)))
        w = random_poly_form(rng, n, k, 3, nterms=None)
        nr = form_norm_upper(w, 1, (p - 1, p + 1))
        target = w.eval(p, a)
        errs = []
        for level in range(11):
            Q = element_monopole(p, a, level)
            e = abs(Q.integrate(w) - target)
            ok &= e <= 2.0 ** (1 - level) * mass(a) * nr + 1e-14
            errs.append(e)
        s = fit_slope(range(11), errs)
        slopes.append(s)
        ok &= s <= -0.9
    report(5, ok, f"levels 0..10, error within 2^(1-l) M(a) |w|_1, slopes "
                  f"{', '.join(f'{s:.2f}' for s in slopes)}")


# 6 ------------------------------------------------------------------------------

def test_criterion_6_integral_inequality(report, e5):
    rng = np.random.default_rng(6)
    families = []
    for k in range(4):
        families.append((squares_sequence(k) - squares_sequence(k + 1), [squares_cert(k)], 1))
    for steps in (2, 4, 8, 16):
        D, cert = staircase(steps)
        families.append((D, [cert], 1))
    for _ in range(40):
        n, k, r = int(rng.integers(2, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
        P, cert = random_chain_with_cert(rng, n, k)
        families.append((P, [cert], r))
    pairs = violations = 0
    for P, certs, r in families:
        lo, hi = P.bbox()
        D = FormDictionary.default(P.n, P.k, (lo - 0.25, hi + 0.25), degree=2, r_max=0)
        for w in D.forms:
            pairs += 1
            violations += check_integral_inequality(P, w, r, certs).violated
    e5_check = _check(e5, "integral inequality: no violations")
    report(6, violations == 0 and e5_check.passed,
           f"{violations} violations over {pairs} chain/dictionary-form pairs, "
           f"E5 table {e5_check.detail}")


# 7 ------------------------------------------------------------------------------

def test_criterion_7_bracket_sanity(report, e5):
    sandwich = _check(e5, "brackets: lower <= upper")
    order = _check(e5, "random chains: |bd P|_r <= |P|_{r-1} ordering")
    rows = e5.table("random_boundary").rows
    report(7, sandwich.passed and order.passed and len(rows) == 200,
           f"lower <= upper on {sandwich.detail}; boundary ordering on {len(rows)} random chains")


# 8 ------------------------------------------------------------------------------

def test_criterion_8_distribution_derivative(report):
    res = run(ExperimentSpec("E4"))
    rng = np.random.default_rng(8)
    worst = max(res.table(t).max_residual for t in ("endpoints", "elements", "random_elements"))
    # A = [a, b] with bd A = delta_b - delta_a: theta_{* bd A}(f) = f(b) - f(a) = theta_A(f')
    for d in range(6):
        a, b = sorted(rng.uniform(-1, 1, 2))
        coeffs = rng.uniform(-1, 1, d + 1)
        f = Polynomial(1, {(i,): c for i, c in enumerate(coeffs)})
        dA = ElementChain.element([b], KVector.scalar(1)) - ElementChain.element([a], KVector.scalar(1))
        lhs = dA.star().integrate(PolyForm(1, 1, [f]))
        rhs = simplex_chain([[a], [b]]).integrate(PolyForm(1, 1, [f.deriv(0)]))
        oracle = sum(c * (b ** i - a ** i) for i, c in enumerate(coeffs))
        worst = max(worst, abs(lhs - rhs), abs(lhs - oracle))
    report(8, worst <= EXACT_TOL and res.passed,
           f"degrees 0..5 on endpoint and quantized element chains, max residual {worst:.2e}")


# 9 ------------------------------------------------------------------------------

def test_criterion_9_cartan(report):
    res = run(ExperimentSpec("E6"))
    flow = res.table("flow").max_residual
    special = res.table("special").max_residual
    labels = {r.label.split()[1] for r in res.table("flow").rows}
    report(9, flow <= FLOW_TOL and special <= FLOW_TOL and labels == {"deg=1", "deg=2"} and res.passed,
           f"flow oracle residual {flow:.2e} (linear and quadratic X), special cases {special:.2e}")


# 10 -----------------------------------------------------------------------------

def test_criterion_10_koch_flux(report):
    res = run(ExperimentSpec("E8"))
    dec = [c for c in res.checks if "decreases" in c.name]
    area = _check(res, "area at the last generation within 1e-6 of the closed form")
    gens = sorted(int(c.name.split(":")[0][1:]) for c in dec)
    report(10, all(c.passed for c in dec) and gens == list(range(6)) and area.passed,
           f"clipped residual decreasing at g=0..5; {area.detail}")
