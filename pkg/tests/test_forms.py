import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainlet.errors import ContractViolation
from chainlet.exterior import KVector
from chainlet.forms import (CallableForm, PolyForm, SmoothMap, estimate_form_norm,
                            form_norm_upper, pullback_form, random_poly_form)
from chainlet.polynomial import Polynomial, random_polynomial


def test_polynomial_calculus():
    p = Polynomial(2, {(2, 1): 3.0, (0, 0): 1.0})
    assert p.deriv(0).equals(Polynomial(2, {(1, 1): 6.0}))
    assert p.degree == 3
    q = p.compose([Polynomial.var(2, 1), Polynomial.var(2, 0)])
    assert q.equals(Polynomial(2, {(1, 2): 3.0, (0, 0): 1.0}))


def test_xdy_exterior_derivative():
    xdy = PolyForm.from_terms(2, 1, [((1,), (1, 0), 1.0)])
    assert xdy.d().equals(PolyForm.dx(2, 0, 1))


def test_d_squared_is_zero():
    rng = np.random.default_rng(0)
    for n, k in [(2, 0), (3, 1), (4, 2)]:
        w = random_poly_form(rng, n, k, 4)
        assert w.d().d().is_zero()


def test_star_of_dx_in_r2():
    assert PolyForm.dx(2, 0).star().equals(PolyForm.dx(2, 1))
    assert PolyForm.dx(2, 1).star().equals(-PolyForm.dx(2, 0))


def test_eval_matches_coefficients():
    w = PolyForm.from_terms(2, 1, [((0,), (1, 0), 2.0), ((1,), (0, 2), 1.0)])
    a = KVector(2, 1, [1.0, 3.0])
    assert w.eval([2.0, 1.0], a) == 2 * 2 + 3 * 1


def test_eval_grade_mismatch():
    with pytest.raises(ContractViolation):
        PolyForm.dx(2, 0).eval([0, 0], KVector.vol(2))


def test_pullback_examples():
    f1 = SmoothMap.polynomial([Polynomial(2, {(1, 0): 1.0, (0, 1): -1.0})])
    assert pullback_form(f1, PolyForm.dx(1, 0)).equals(PolyForm.constant(2, 1, [1.0, -1.0]))
    f2 = SmoothMap.polynomial([Polynomial(1, {(2,): 1.0}), Polynomial(1, {(3,): 1.0})])
    xdy = PolyForm.from_terms(2, 1, [((1,), (1, 0), 1.0)])
    assert pullback_form(f2, xdy).equals(PolyForm.from_terms(1, 1, [((0,), (4,), 3.0)]))


def test_pullback_commutes_with_d():
    rng = np.random.default_rng(1)
    f = SmoothMap.polynomial([random_polynomial(rng, 2, 2) for _ in range(3)])
    w = random_poly_form(rng, 3, 1, 2)
    assert pullback_form(f, w.d()).equals(pullback_form(f, w).d(), atol=1e-10)


def test_callable_form_agrees_with_polynomial():
    w = PolyForm.from_terms(2, 1, [((0,), (1, 1), 1.0), ((1,), (2, 0), -1.0)])
    cw = CallableForm(2, 1, w.coeffs_at, order=3)
    p = np.array([[0.3, -0.4], [1.0, 2.0]])
    assert np.allclose(cw.d().coeffs_at(p), w.d().coeffs_at(p), atol=1e-6)


def test_lie_derivative_cartan_agree():
    rng = np.random.default_rng(2)
    X = SmoothMap.polynomial([random_polynomial(rng, 3, 2) for _ in range(3)])
    w = random_poly_form(rng, 3, 1, 3)
    cartan = w.interior(X).d() + w.d().interior(X)
    assert w.lie_derivative(X).equals(cartan, atol=1e-10)


def test_form_norm_upper_dominates_sampled_estimate():
    w = PolyForm.from_terms(2, 1, [((0,), (2, 0), 1.0), ((1,), (1, 1), 0.5)])
    region = (np.zeros(2), np.ones(2))
    rep = estimate_form_norm(w, 1, region)
    # sampled differences reach p - v with |v| <= width/8, outside the box
    grown = (region[0] - 0.125, region[1] + 0.125)
    assert form_norm_upper(w, 1, grown) >= rep.combined - 1e-12
    assert form_norm_upper(PolyForm.constant(2, 2, [1.0]), 1, region) == 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_wedge_leibniz(seed):
    rng = np.random.default_rng(seed)
    a = random_poly_form(rng, 3, 1, 2)
    b = random_poly_form(rng, 3, 1, 2)
    lhs = a.wedge(b).d()
    rhs = a.d().wedge(b) - a.wedge(b.d())
    assert lhs.equals(rhs, atol=1e-10)
