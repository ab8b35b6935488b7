import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hotlane.estimation import (
    CdfAccumulator,
    EmpiricalCdfPoint,
    InsufficientData,
    accumulate_cdf_point,
    empirical_pdf,
    estimate_logit_vot,
    logit_vot_series,
    monotone_cdf,
)
from hotlane.lane_choice import LogitModel


@given(st.floats(0.05, 3.0), st.floats(0.2, 3.0), st.floats(-5.0, 5.0), st.floats(0.01, 5.0))
def test_logit_estimator_inverts_the_share(pi, alpha, u, w):
    q2 = 60.0
    p = LogitModel(pi, alpha).choice_fraction(u, w)
    # Near p = 0 or 1 the log-odds of q2 - q3 cancel to a few ulps; no inversion is accurate there.
    if not 1e-6 < p < 1 - 1e-6:
        return
    q3 = p * q2
    assert estimate_logit_vot(u, w, q2, q3, alpha) == pytest.approx(pi, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("args", [(0.3, 0.0, 60, 20), (0.3, -1.0, 60, 20), (0.3, 1.0, 60, 0), (0.3, 1.0, 60, 60)])
def test_logit_estimator_skips_degenerate_samples(args):
    assert estimate_logit_vot(*args) is None


def test_logit_series_marks_skips_as_nan():
    out = logit_vot_series([0.3, 0.3], [1.0, 0.0], [60, 60], [20, 20])
    assert out[0] == pytest.approx(0.3 - math.log(2.0))
    assert math.isnan(out[1])


def test_cdf_point_rules():
    assert accumulate_cdf_point(0.2, 0.5, 60, 15) == EmpiricalCdfPoint(0.4, 0.75)
    assert accumulate_cdf_point(0.0, 0.5, 60, 60) == EmpiricalCdfPoint(0.0, 0.0)
    assert accumulate_cdf_point(0.2, 0.5, 60, 60) is None
    assert accumulate_cdf_point(0.2, 0.0, 60, 10) is None
    assert accumulate_cdf_point(-0.2, 0.5, 60, 10) is None
    assert accumulate_cdf_point(0.2, 0.5, 0, 0) is None


def test_duplicates_are_averaged():
    pts = [EmpiricalCdfPoint(1.0, 0.4), EmpiricalCdfPoint(1.0 + 1e-12, 0.6), EmpiricalCdfPoint(2.0, 0.9)]
    x, F, repaired = monotone_cdf(pts)
    assert x.tolist() == [1.0, 2.0]
    assert F == pytest.approx([0.5, 0.9])
    assert not repaired


def test_isotonic_repair_is_flagged():
    pts = [EmpiricalCdfPoint(1.0, 0.5), EmpiricalCdfPoint(2.0, 0.3), EmpiricalCdfPoint(3.0, 0.9)]
    x, F, repaired = monotone_cdf(pts)
    assert repaired
    assert F == pytest.approx([0.4, 0.4, 0.9])


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 1)), min_size=2, max_size=50))
def test_repaired_cdf_is_nondecreasing(raw):
    _, F, _ = monotone_cdf([EmpiricalCdfPoint(x, f) for x, f in raw])
    assert np.all(np.diff(F) >= -1e-12)


def test_pdf_on_a_grid_matches_exponential_density():
    # Dense exact CDF samples: centred differences are second-order accurate.
    xs = np.linspace(0.05, 2.0, 200)
    pts = [EmpiricalCdfPoint(float(x), float(1 - np.exp(-2 * x))) for x in xs]
    pdf = empirical_pdf(pts)
    assert len(pdf) == len(xs) - 2
    for x, f in pdf:
        assert f == pytest.approx(2 * math.exp(-2 * x), abs=1e-3)


def test_pdf_with_two_points_is_the_midpoint_slope():
    pdf = empirical_pdf([EmpiricalCdfPoint(1.0, 0.2), EmpiricalCdfPoint(3.0, 0.6)])
    assert pdf == [(2.0, pytest.approx(0.2))]


def test_pdf_needs_two_abscissae():
    with pytest.raises(InsufficientData):
        empirical_pdf([EmpiricalCdfPoint(1.0, 0.2), EmpiricalCdfPoint(1.0, 0.3)])


def test_accumulator_collects_valid_points_only():
    acc = CdfAccumulator()
    assert acc.add(0.2, 0.5, 60, 15) is not None
    assert acc.add(0.2, 0.0, 60, 15) is None
    assert len(acc) == 1
    x, F, _ = acc.sorted_cdf()
    assert x.tolist() == [0.4] and F.tolist() == [0.75]
