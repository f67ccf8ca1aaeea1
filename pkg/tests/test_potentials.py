"""Wells, double wells, crossings, regions, growth."""

import numpy as np
import pytest

from dwchain.errors import NoCrossing
from dwchain.potentials import (
    ConvexWell,
    DoubleWell,
    LongRangePotential,
    crossing_points,
    default_slope_range,
)


def test_eval_psi1_prototype(proto_wells):
    value, well = proto_wells.eval_psi1(0.0)
    assert value == pytest.approx(1.0, abs=1e-15)
    assert well == 1  # tie broken toward well 1

    value, well = proto_wells.eval_psi1(1.0)
    assert value == 0.0
    assert well == 2

    value, well = proto_wells.eval_psi1(-3.0)
    assert value == pytest.approx(4.0, abs=1e-15)
    assert well == 1


def test_psi1_below_both_wells(proto_wells):
    rng = np.random.default_rng(1)
    zs = rng.uniform(-6, 6, 500)
    values = proto_wells.psi1(zs)
    v1 = proto_wells.w1.value(zs)
    v2 = proto_wells.w2.value(zs)
    assert np.all(values <= v1 + 1e-15)
    assert np.all(values <= v2 + 1e-15)
    wells = proto_wells.active_well(zs)
    attained = np.where(wells == 1, v1, v2)
    assert np.all(values == attained)


def test_crossing_points_prototype(proto_wells):
    assert crossing_points(proto_wells, -8, 8) == pytest.approx([0.0], abs=1e-12)


def test_crossing_points_symmetric_pair():
    dw = DoubleWell(ConvexWell.quadratic(-2.0, 1.0), ConvexWell.quadratic(2.0, 1.0))
    assert crossing_points(dw, -8, 8) == pytest.approx([0.0], abs=1e-12)


def test_crossing_points_separated_wells():
    dw = DoubleWell(ConvexWell.quadratic(0.0, 1.0), ConvexWell.polynomial([1.0, 0.0, 1.0]))
    with pytest.raises(NoCrossing):
        crossing_points(dw, -8, 8)


def test_crossing_points_identical_wells():
    w = ConvexWell.quadratic(1.0, 1.0)
    dw = DoubleWell(w, w)
    assert crossing_points(dw, -8, 8) == ()
    # both regions cover the line
    assert dw.region_intervals(1, -8, 8) == [(-np.inf, np.inf)]
    assert dw.region_intervals(2, -8, 8) == [(-np.inf, np.inf)]


def test_derivative_examples():
    w = ConvexWell.quadratic(1.0, 1.0)
    assert w.derivative(1.0) == 0.0
    assert w.derivative(3.0) == pytest.approx(4.0, abs=1e-15)
    lr = LongRangePotential.quadratic(0.25)
    assert lr.derivative(2.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize(
    "well",
    [
        ConvexWell.quadratic(-1.3, 0.7),
        ConvexWell.polynomial([0.5, -0.3, 1.0, 0.0, 0.1]),
    ],
)
def test_derivative_matches_finite_difference(well):
    rng = np.random.default_rng(2)
    zs = rng.uniform(-5, 5, 200)
    h = 1e-6
    fd = (well.value(zs + h) - well.value(zs - h)) / (2 * h)
    exact = well.derivative(zs)
    scale = np.maximum(1.0, np.abs(exact))
    assert np.max(np.abs(exact - fd) / scale) < 1e-6


@pytest.mark.parametrize(
    "well",
    [
        ConvexWell.quadratic(2.0, 0.3),
        ConvexWell.polynomial([1.0, 2.0, 3.0, 0.0, 0.5]),
    ],
)
def test_second_difference_convexity(well):
    rng = np.random.default_rng(3)
    centers = rng.uniform(-7, 7, 400)
    steps = rng.uniform(1e-4, 1.0, 400)
    second = well.value(centers + steps) - 2 * well.value(centers) + well.value(centers - steps)
    assert np.min(second) >= -1e-12


def test_polynomial_rejects_nonconvex():
    with pytest.raises(ValueError):
        ConvexWell.polynomial([0.0, 0.0, -3.0, 0.0, 1.0])  # z^4 - 3 z^2
    with pytest.raises(ValueError):
        ConvexWell.polynomial([0.0, 1.0, 0.0, 1.0])  # odd degree
    with pytest.raises(ValueError):
        ConvexWell.quadratic(0.0, -1.0)


def test_polynomial_well_argmin():
    well = ConvexWell.polynomial([2.0, -2.0, 1.0])  # (z-1)^2 + 1
    assert well.argmin == pytest.approx(1.0, abs=1e-9)


def test_growth_bound(proto_wells):
    proto_wells.validate_growth(-16, 16)
    bad = DoubleWell(
        ConvexWell.quadratic(0.0, 0.1),
        ConvexWell.quadratic(1.0, 0.1),
        growth_constant=1.0,
    )
    with pytest.raises(ValueError):
        bad.validate_growth(-16, 16)


def test_superlinearity_sampled(proto_wells):
    zs = np.array([10.0, 50.0, 200.0, -10.0, -50.0, -200.0])
    ratios = proto_wells.psi1(zs) / np.abs(zs)
    assert np.all(np.diff(ratios[:3]) > 0)
    assert np.all(np.diff(ratios[3:]) > 0)
    assert ratios.min() > 5


def test_region_intervals_prototype(proto_wells):
    r1 = proto_wells.region_intervals(1, -16, 16)
    r2 = proto_wells.region_intervals(2, -16, 16)
    assert len(r1) == 1 and len(r2) == 1
    assert r1[0][0] == -np.inf and r1[0][1] == pytest.approx(0.0, abs=1e-12)
    assert r2[0][1] == np.inf and r2[0][0] == pytest.approx(0.0, abs=1e-12)
    assert proto_wells.in_region(1, -0.5) and not proto_wells.in_region(1, 0.5)
    assert proto_wells.in_region(2, 0.5)
    assert proto_wells.in_region(1, 0.0) and proto_wells.in_region(2, 0.0)


def test_default_slope_range(proto_wells):
    lo, hi = default_slope_range(proto_wells)
    assert (lo, hi) == (-16.0, 16.0)


def test_well_dict_roundtrip(proto_wells):
    again = DoubleWell.from_dict(proto_wells.to_dict())
    assert again == proto_wells
    poly = ConvexWell.polynomial([1.0, 0.0, 2.0, 0.0, 0.25])
    assert ConvexWell.from_dict(poly.to_dict()) == poly
