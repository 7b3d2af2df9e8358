import math

import numpy as np
import pytest

from chainlet.experiments import (COLUMNS, ExperimentSpec, ResultRow, fit_slope, koch_area,
                                  koch_polygon, run, staircase, table_csv)
from chainlet.errors import ContractViolation
from chainlet.forms import PolyForm
from chainlet.quantize import polygon_area


def test_spec_validation():
    with pytest.raises(ContractViolation):
        ExperimentSpec("E0")
    with pytest.raises(ContractViolation):
        ExperimentSpec("E1", n=2, k=3)
    with pytest.raises(ContractViolation):
        ExperimentSpec("E1", fmt="xml")


def test_result_row_residual_and_bound():
    r = ResultRow.of(2, 1.0, 1.5, bound=0.25)
    assert r.residual == 0.5 and not r.within_bound


def test_fit_slope_recovers_rate():
    lv = list(range(6))
    assert fit_slope(lv, [3 * 2.0 ** -j for j in lv]) == pytest.approx(-1.0)


def test_koch_geometry():
    # vertex count 3 * 4^g, area follows the closed form
    for g in range(4):
        V = koch_polygon(g)
        assert len(V) == 3 * 4 ** g
        assert polygon_area(V) == pytest.approx(koch_area(g), abs=1e-14)
    assert koch_area(0) == pytest.approx(math.sqrt(3) / 4)


def test_staircase_difference_is_a_boundary():
    from chainlet.norms import check_reassembly
    D, cert = staircase(4)
    assert D.boundary().integrate(PolyForm.constant(2, 0, [1.0])) == 0.0
    check_reassembly(D, cert)
    # witness triangles have total area n * (1/n)^2 / 2
    assert cert.witness.mass() == pytest.approx(1 / 8)


@pytest.mark.parametrize("eid", ["E1", "E3", "E4", "E6", "E7"])
def test_quick_experiments_pass(eid):
    res = run(ExperimentSpec(eid))
    assert res.passed, [c for c in res.checks if not c.passed]


def test_csv_deterministic():
    a = run(ExperimentSpec("E1", seed=11))
    b = run(ExperimentSpec("E1", seed=11))
    assert [table_csv(t) for t in a.tables] == [table_csv(t) for t in b.tables]
    c = run(ExperimentSpec("E1", seed=12))
    assert [table_csv(t) for t in a.tables] != [table_csv(t) for t in c.tables]


def test_csv_columns_and_zero_seconds():
    res = run(ExperimentSpec("E7"))
    lines = table_csv(res.tables[0]).splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert all(line.endswith(",0.0") for line in lines[1:])


def test_timing_fills_seconds():
    res = run(ExperimentSpec("E1", timing=True))
    assert any(r.seconds > 0 for t in res.tables for r in t.rows)


def test_e2_three_dimensional_cube():
    res = run(ExperimentSpec("E2", n=3, k=3, levels=tuple(range(5))))
    assert res.passed
