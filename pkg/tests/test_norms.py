import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainlet.elements import ElementChain
from chainlet.errors import CertificateMismatch, ContractViolation
from chainlet.experiments import random_chain_with_cert, squares_cert, squares_sequence, staircase
from chainlet.exterior import KVector
from chainlet.forms import PolyForm, random_poly_form
from chainlet.norms import (FormDictionary, bracket, check_integral_inequality, check_reassembly,
                            element_norm_upper, natural_lower, natural_upper, vec_aligned_form)
from chainlet.polyhedral import DecompositionCert, DifferenceCell, cube, simplex_chain


def test_unit_segment_bracket_is_tight():
    seg = simplex_chain([[0.0, 0.0], [1.0, 0.0]])
    b = bracket(seg, 1)
    assert b.lower == pytest.approx(1.0) and b.upper == pytest.approx(1.0)


def test_zero_level_is_mass():
    sq = cube(np.zeros(2), 2.0, coeff=0.5)
    assert natural_upper(sq, r=0) == pytest.approx(2.0)


def test_vec_aligned_form_has_unit_value():
    seg = simplex_chain([[0.0, 0.0], [3.0, 4.0]])
    w = vec_aligned_form(seg)
    assert seg.integrate(w) == pytest.approx(5.0)


def test_squares_sequence_upper():
    # 4^k sum_i (s_0 - T_{v_i} s_0) over a side-h corner square, |v_i| = h, h, sqrt(2) h
    for k in range(4):
        h = 2.0 ** (-k - 1)
        X = squares_sequence(k) - squares_sequence(k + 1)
        up = natural_upper(X, squares_cert(k), 1)
        assert up == pytest.approx(4.0 ** k * h * h * (2 + math.sqrt(2)) * h, rel=1e-12)


def test_staircase_bracket_is_exact():
    for steps in (2, 8):
        D, cert = staircase(steps)
        b = bracket(D, 1, [cert])
        assert b.lower == pytest.approx(1 / (2 * steps), rel=1e-9)
        assert b.upper == pytest.approx(1 / (2 * steps), rel=1e-9)


def test_dipole_element_bracket():
    d = 0.25
    E = ElementChain.element([d, 0.0], KVector.e(2, 0)) - ElementChain.element([0.0, 0.0], KVector.e(2, 0))
    up = element_norm_upper(E, 1)
    assert up == pytest.approx(d)


def test_bad_certificate_is_rejected():
    sq = cube(np.zeros(2), 1.0)
    bad = DecompositionCert(((1.0, DifferenceCell(cube(np.ones(2), 1.0))),))
    with pytest.raises(CertificateMismatch):
        check_reassembly(sq, bad)


def test_certificate_of_excess_order_rejected():
    sq = cube(np.zeros(2), 1.0)
    cert = DecompositionCert(((1.0, DifferenceCell(sq, [[0.1, 0.0], [0.0, 0.1]])),))
    with pytest.raises(ContractViolation):
        natural_upper(cert.differences[0][1].expand(), cert, 1)


def test_dictionary_norms_positive_and_ordered():
    D = FormDictionary.default(2, 1, (np.zeros(2), np.ones(2)), degree=2, r_max=2)
    assert len(D) == 12
    for _, _, nr in D:
        assert 0 < nr[0] <= nr[1] + 1e-15 <= nr[2] + 2e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 2), st.integers(1, 2))
def test_bracket_sandwich_and_integral_inequality(seed, k, r):
    rng = np.random.default_rng(seed)
    P, cert = random_chain_with_cert(rng, 3, k)
    b = bracket(P, r, [cert])
    assert b.consistent
    rep = check_integral_inequality(P, random_poly_form(rng, 3, k, 3), r, [cert])
    assert not rep.violated


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 2))
def test_boundary_bound_ordering(seed, r):
    rng = np.random.default_rng(seed)
    P, cert = random_chain_with_cert(rng, 2, 1)
    upP = natural_upper(P, cert, r - 1)
    bB = bracket(P.boundary(), r, [cert.boundary_transport(P)])
    assert bB.lower <= bB.upper + 1e-12 <= upP + 2e-12


def test_lower_bound_below_mass():
    rng = np.random.default_rng(7)
    P = simplex_chain(rng.uniform(-1, 1, (3, 2)))
    assert natural_lower(P, 2) <= P.mass() + 1e-12
