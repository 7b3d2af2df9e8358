import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainlet.errors import ContractViolation
from chainlet.forms import PolyForm, random_poly_form
from chainlet.polyhedral import (DecompositionCert, DifferenceCell, PolyChain, Simplex, cube,
                                 parallelotope, simplex_chain, simplex_monomial_integral)


def test_unit_square_integrals():
    sq = cube(np.zeros(2), 1.0)
    assert math.isclose(sq.mass(), 1.0)
    # int x^2 dx dy = 1/3, int x y^3 = 1/8
    assert math.isclose(sq.integrate(PolyForm.from_terms(2, 2, [((0, 1), (2, 0), 1.0)])), 1 / 3)
    assert math.isclose(sq.integrate(PolyForm.from_terms(2, 2, [((0, 1), (1, 3), 1.0)])), 1 / 8)


def test_simplex_monomial_integral_dirichlet():
    # int over the standard 2-simplex of x y = 1/24
    assert math.isclose(simplex_monomial_integral((1, 1)), 1 / 24)


def test_segment_integral_of_x_dx():
    seg = simplex_chain([[0.0], [2.0]])
    assert math.isclose(seg.integrate(PolyForm.from_terms(1, 1, [((0,), (1,), 1.0)])), 2.0)


def test_boundary_of_boundary_is_zero():
    tet = simplex_chain(np.vstack([np.zeros(3), np.eye(3)]))
    assert tet.boundary().boundary().is_zero()


def test_triangle_vec_and_orientation():
    tri = simplex_chain([[0, 0], [1, 0], [0, 1]])
    assert np.allclose(tri.vec().coeffs, [0.5])
    flip = simplex_chain([[0, 0], [0, 1], [1, 0]])
    assert (tri + flip).is_zero()


def test_parallelotope_mass():
    P = parallelotope(np.zeros(3), [[1.0, 0, 0], [0, 2.0, 0]])
    assert math.isclose(P.mass(), 2.0)


def test_difference_cell_expand_and_norm():
    base = cube(np.zeros(2), 1.0)
    D = DifferenceCell(base, [[0.5, 0.0]])
    assert D.order == 1
    assert math.isclose(D.norm(), 0.5)
    assert math.isclose(D.expand().vec().coeffs[0], 0.0, abs_tol=1e-15)


def test_trivial_cert_and_boundary_transport():
    P = cube(np.zeros(2), 1.0)
    c = DecompositionCert.trivial(P)
    assert c.max_order() == 0
    bc = c.boundary_transport(P)
    assert bc.witness is P and bc.witness_cert is c


def test_mismatched_chains():
    with pytest.raises(ContractViolation):
        cube(np.zeros(2), 1.0) + simplex_chain([[0.0, 0.0], [1.0, 0.0]])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_stokes_on_simplices(seed, k):
    rng = np.random.default_rng(seed)
    n = 3
    P = simplex_chain(rng.uniform(-1, 1, (k + 1, n)), coeff=float(rng.uniform(-2, 2)))
    w = random_poly_form(rng, n, k - 1, 3)
    assert math.isclose(P.boundary().integrate(w), P.integrate(w.d()), abs_tol=1e-11)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_integral_additive_under_subdivision(seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.uniform(-1, 1, (3, 2))
    m = (a + b) / 2
    whole = simplex_chain([a, b, c])
    halves = simplex_chain([a, m, c]) + simplex_chain([m, b, c])
    w = random_poly_form(rng, 2, 2, 4)
    assert math.isclose(whole.integrate(w), halves.integrate(w), rel_tol=1e-11, abs_tol=1e-12)
