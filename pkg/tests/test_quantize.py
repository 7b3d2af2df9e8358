import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainlet.errors import NotSimple
from chainlet.exterior import KVector, mass
from chainlet.forms import PolyForm, random_poly_form
from chainlet.norms import FormDictionary
from chainlet.polyhedral import Simplex, cube, simplex_chain
from chainlet.quantize import (Cube, ch_of_form, clip_halfplane, element_monopole, polygon_area,
                               polygon_fan, quantize_cube, quantize_polygon, quantize_simplex)


def test_unit_square_level_three():
    E, rep = quantize_cube(Cube(np.zeros(2)), 3)
    assert len(E) == 64
    assert rep.bound == 0.25
    assert E.vec().allclose(KVector.vol(2))


def test_constant_form_exact():
    E, _ = quantize_cube(Cube(np.zeros(3), 2.0, (0, 2)), 2)
    w = PolyForm.constant(3, 2, [0.0, 1.0, 0.0])
    assert E.integrate(w) == pytest.approx(4.0, abs=1e-14)


def test_x_squared_residual_value():
    # midpoint rule on [0,1] with 2^j cells: error = 1/(12 * 4^j)
    w = PolyForm.from_terms(2, 2, [((0, 1), (2, 0), 1.0)])
    for j in range(5):
        E, _ = quantize_cube(Cube(np.zeros(2)), j)
        assert abs(E.integrate(w) - 1 / 3) == pytest.approx(1 / (12 * 4 ** j), rel=1e-9)


def test_dictionary_bound_holds():
    c = Cube(np.zeros(2))
    D = FormDictionary.default(2, 2, (np.zeros(2), np.ones(2)), degree=2, r_max=1)
    for j in range(6):
        _, rep = quantize_cube(c, j, D)
        assert rep.ok


def test_triangle_deficit_values():
    tri = Simplex(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    _, rep = quantize_simplex(tri, 6)
    assert rep.covered_mass == pytest.approx(0.4921875)
    assert rep.deficit == pytest.approx(0.015625)


def test_cube_as_simplices_matches_cube():
    w = random_poly_form(np.random.default_rng(0), 2, 2, 3)
    E1, _ = quantize_cube(Cube(np.zeros(2)), 3)
    E2, _ = quantize_simplex(cube(np.zeros(2), 1.0), 3)
    assert E1.integrate(w) == pytest.approx(E2.integrate(w), abs=1e-14)


def test_shared_faces_claimed_once():
    # two triangles tiling the square give exactly the square's cells
    P = simplex_chain([[0, 0], [1, 0], [1, 1]]) + simplex_chain([[0, 0], [1, 1], [0, 1]])
    E, rep = quantize_simplex(P, 4)
    assert len(E) == 256
    assert rep.covered_mass == pytest.approx(1.0)


def test_monopole():
    a = KVector(3, 2, [1.0, 2.0, 0.0])
    Q = element_monopole([0.1, 0.2, 0.3], a, 4)
    assert Q.mass() == pytest.approx(mass(a))
    assert Q.vec().allclose(a, atol=1e-12)
    with pytest.raises(NotSimple):
        element_monopole(np.zeros(4), KVector.e(4, 0, 1) + KVector.e(4, 2, 3), 0)


def test_ch_of_form_exact_for_linear():
    w = PolyForm.from_terms(1, 1, [((0,), (1,), 1.0)])
    E = ch_of_form(w, (np.zeros(1), np.ones(1)), 3)
    v = PolyForm.constant(1, 1, [1.0])
    assert E.integrate(v) == pytest.approx(0.5)


def test_polygon_helpers():
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert polygon_area(sq) == pytest.approx(1.0)
    assert polygon_fan(sq).mass() == pytest.approx(1.0)
    half = clip_halfplane(sq, 0, 0.25, True)
    assert polygon_area(half) == pytest.approx(0.25)


@pytest.mark.parametrize("mode", ["midpoint", "clipped"])
def test_polygon_matches_square(mode):
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    E, rep = quantize_polygon(sq, 3, mode=mode)
    assert E.vec().coeffs[0] == pytest.approx(1.0)
    if mode == "clipped":
        assert rep.deficit == 0.0
    else:
        # cells touching an edge are charged to the deficit
        assert rep.deficit >= 0.0 and rep.bound >= 2.0 ** -2


def test_clipped_polygon_mass_is_exact():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.9]])
    E, _ = quantize_polygon(tri, 5, mode="clipped")
    assert E.vec().coeffs[0] == pytest.approx(polygon_area(tri), abs=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 5))
def test_simplex_residual_within_bound(seed, j):
    rng = np.random.default_rng(seed)
    verts = rng.uniform(-1, 1, (3, 2))
    s = Simplex(verts)
    if s.mass < 1e-3:
        return
    w = random_poly_form(rng, 2, 2, 2)
    lo, hi = verts.min(0), verts.max(0)
    D = FormDictionary(2, 2, (lo, hi), ["w"], [w], [[0.0, _norm(w, lo, hi)]], 1)
    _, rep = quantize_simplex(s, j, dictionary=D)
    assert rep.ok


def _norm(w, lo, hi):
    from chainlet.forms import form_norm_upper
    return form_norm_upper(w, 1, (lo, hi))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))),
       st.floats(0.1, 3.0), st.integers(0, 4))
def test_cube_mass_and_bound_halving(nk, edge, j):
    n, k = nk
    c = Cube(np.full(n, -0.3), edge, tuple(range(k)))
    E0, r0 = quantize_cube(c, j)
    E1, r1 = quantize_cube(c, j + 1)
    assert r1.bound / r0.bound == 0.5
    assert E0.vec().coeffs @ E0.vec().coeffs == pytest.approx(c.mass() ** 2, rel=1e-12)
    assert sum(abs(t.coeff) * t.kvec.mass for t in E1) == pytest.approx(c.mass(), rel=1e-12)


def test_element_stokes_tends_to_polyhedral_stokes():
    from chainlet.experiments import fit_slope
    rng = np.random.default_rng(9)
    w = random_poly_form(rng, 2, 1, 3, nterms=None)
    c = Cube(np.zeros(2))
    exact = c.chain().boundary().integrate(w)
    res = []
    for j in range(7):
        E, _ = quantize_cube(c, j)
        res.append(abs(E.boundary().integrate(w) - exact))
    assert fit_slope(range(7), res) <= -0.9
