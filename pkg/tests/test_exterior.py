from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainlet.errors import ContractViolation, NotSimple, UnsupportedGrade
from chainlet.exterior import (KVector, basis, cap, compound_matrices, contract, hodge_star,
                               inner, is_simple_2vector, mass, merge_sign, pushforward_kv,
                               simple_frame, vec_of_span, wedge)


def kvectors(n, k):
    return st.lists(st.floats(-2, 2, allow_nan=False), min_size=comb(n, k),
                    max_size=comb(n, k)).map(lambda c: KVector(n, k, c))


@st.composite
def graded_triple(draw):
    n = draw(st.integers(1, 6))
    j = draw(st.integers(0, n))
    k = draw(st.integers(0, n - j))
    l = draw(st.integers(0, n - j - k))
    return draw(kvectors(n, j)), draw(kvectors(n, k)), draw(kvectors(n, l))


def test_basis_is_lexicographic():
    assert basis(3, 2) == ((0, 1), (0, 2), (1, 2))
    assert basis(2, 3) == ()


def test_merge_sign_counts_inversions():
    assert merge_sign((0,), (1,)) == 1
    assert merge_sign((1,), (0,)) == -1
    assert merge_sign((0, 2), (1,)) == -1
    assert merge_sign((1,), (1,)) == 0


def test_wedge_basis_values():
    e1, e2, e3 = (KVector.e(3, i) for i in range(3))
    assert wedge(e1, e2).allclose(KVector.e(3, 0, 1))
    assert wedge(e2, e1).allclose(-KVector.e(3, 0, 1))
    assert wedge(wedge(e1, e2), e3).allclose(KVector.vol(3))
    assert wedge(e1, e1).is_zero()


def test_wedge_overflow_gives_zero_top_grade():
    out = wedge(KVector.vol(2), KVector.e(2, 0))
    assert out.k == 2 and out.is_zero()


def test_star_in_r3():
    # e1 -> e23, e2 -> -e13, e3 -> e12
    assert hodge_star(KVector.e(3, 0)).allclose(KVector.e(3, 1, 2))
    assert hodge_star(KVector.e(3, 1)).allclose(-KVector.e(3, 0, 2))
    assert hodge_star(KVector.e(3, 2)).allclose(KVector.e(3, 0, 1))
    assert hodge_star(KVector.scalar(3)).allclose(KVector.vol(3))


def test_mass_and_inner():
    a = KVector(2, 1, [3.0, 4.0])
    assert mass(a) == 5.0
    assert inner(a, KVector.e(2, 1)) == 4.0


def test_contract_and_cap_defining_identities():
    rng = np.random.default_rng(3)
    n = 4
    cov = KVector(n, 3, rng.normal(size=4))
    b = KVector(n, 1, rng.normal(size=4))
    g = contract(cov, b)
    for G in basis(n, 2):
        gam = KVector.e(n, *G)
        assert np.isclose(inner(g, gam), inner(cov, wedge(b, gam)), atol=1e-13)
    bb = KVector(n, 3, rng.normal(size=4))
    c1 = KVector(n, 1, rng.normal(size=4))
    h = cap(c1, bb)
    for G in basis(n, 2):
        eta = KVector.e(n, *G)
        assert np.isclose(inner(eta, h), inner(wedge(eta, c1), bb), atol=1e-13)


def test_contract_grade_errors():
    with pytest.raises(ContractViolation):
        contract(KVector.e(3, 0), KVector.e(3, 0, 1))
    with pytest.raises(ContractViolation):
        cap(KVector.e(3, 0, 1), KVector.e(3, 0, 1))


def test_compound_matrix_determinant_and_pushforward():
    T = np.array([[2.0, 1.0], [0.5, 3.0]])
    assert np.isclose(compound_matrices(T, 2)[0, 0], np.linalg.det(T))
    u, v = np.array([1.0, 2.0]), np.array([-1.0, 0.5])
    lhs = pushforward_kv(T, vec_of_span(u, v))
    assert lhs.allclose(vec_of_span(T @ u, T @ v))


def test_simplicity():
    assert is_simple_2vector(vec_of_span([1, 0, 0, 0], [0, 1, 1, 0]))
    assert not is_simple_2vector(KVector.e(4, 0, 1) + KVector.e(4, 2, 3))
    with pytest.raises(UnsupportedGrade):
        is_simple_2vector(KVector(6, 3, np.ones(20)))
    with pytest.raises(NotSimple):
        simple_frame(KVector.e(4, 0, 1) + KVector.e(4, 2, 3))


def test_simple_frame_reconstructs():
    a = vec_of_span([1.0, 2.0, 0.0], [0.0, 1.0, -1.0])
    F = simple_frame(a)
    assert np.allclose(F @ F.T, np.eye(2), atol=1e-12)
    assert (vec_of_span(*F) * mass(a)).allclose(a, atol=1e-12)


def test_bad_construction():
    with pytest.raises(ContractViolation):
        KVector(3, 4, [])
    with pytest.raises(ContractViolation):
        KVector(3, 1, [1, 2])
    with pytest.raises(AttributeError):
        KVector.e(2, 0).n = 3


@settings(max_examples=150, deadline=None)
@given(graded_triple())
def test_wedge_associative_and_graded_commutative(t):
    a, b, c = t
    assert wedge(wedge(a, b), c).allclose(wedge(a, wedge(b, c)), atol=1e-10)
    assert wedge(a, b).allclose(wedge(b, a) * (-1) ** (a.k * b.k), atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.integers(0, n).flatmap(lambda k: kvectors(n, k))))
def test_star_involution_and_mass_identity(a):
    n, k = a.n, a.k
    assert hodge_star(hodge_star(a)).allclose(a * (-1) ** (k * (n - k)), atol=1e-12)
    top = wedge(a, hodge_star(a))
    assert np.isclose(top.coeffs[0], mass(a) ** 2, atol=1e-11)
