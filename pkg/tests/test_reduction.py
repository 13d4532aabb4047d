"""Cylinder splitting, segment trading, and the equatorial limit."""

import math

import numpy as np
import pytest

from areafun.bodies import ball, ellipsoid
from areafun.errors import DomainError
from areafun.reduction import (
    CylinderSplitReport,
    FlattenedBody,
    circle_functional,
    circle_grid,
    cylinder,
    cylinder_lemma_residual,
    dimension_reduction_limit,
    equator_restriction,
    flattened_ellipse,
    needle,
    project_to_plane,
    reduction_grid,
    scaled_segment_values,
    segment_factor_identity,
)
from areafun.sphere import from_callable


@pytest.fixture(scope="module")
def rgrid():
    return reduction_grid()


@pytest.fixture(scope="module")
def cgrid():
    return circle_grid()


@pytest.fixture(scope="module")
def unit_disc():
    return flattened_ellipse(1.0, 1.0, 0.01)


def const_one():
    return from_callable(3, lambda U: np.ones(len(U)), label="1")


class TestThickenedBodies:
    def test_flattened_ellipse_supports(self):
        K = flattened_ellipse(1.5, 0.7, 0.02)
        assert K.body3d.support([1.0, 0.0, 0.0]) == pytest.approx(1.5)
        assert K.body3d.support([0.0, 0.0, 1.0]) == pytest.approx(0.02)
        assert K.planar.support([0.0, 1.0]) == pytest.approx(0.7)
        K2 = K.rethickened(0.05)
        assert K2.a == K.a and K2.delta == 0.05

    def test_cylinder_support_function(self):
        cyl = cylinder(4.0, 0.01)
        # equator: the disc part dominates, the needle contributes R*delta
        assert cyl.body3d.support([1.0, 0.0, 0.0]) == pytest.approx(
            1.0 + 4.0 * 0.01
        )
        # pole: half-height R/2 plus the disc's thickness
        assert cyl.body3d.support([0.0, 0.0, 1.0]) == pytest.approx(2.0 + 0.01)

    def test_needle_is_unit_length_segment(self):
        seg = needle(0.01)
        assert seg.support([0.0, 0.0, 1.0]) + seg.support([0.0, 0.0, -1.0]) == (
            pytest.approx(1.0)
        )

    def test_projection_and_restriction(self):
        body = ellipsoid([1.5, 0.7, 0.3])
        shadow = project_to_plane(body)
        U = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
        want = np.sqrt(1.5**2 * U[:, 0] ** 2 + 0.7**2 * U[:, 1] ** 2)
        assert np.allclose(shadow.support(U), want, rtol=1e-12)

        f = from_callable(3, lambda V: 1.0 + V[:, 0] * V[:, 1], label="f")
        f2 = equator_restriction(f)
        assert f2.value(U) == pytest.approx(1.0 + U[:, 0] * U[:, 1])

    def test_thin_bodies_rejected(self):
        with pytest.raises(DomainError):
            flattened_ellipse(1.0, 1.0, 1e-4)
        with pytest.raises(DomainError):
            needle(1e-4)
        with pytest.raises(DomainError):
            needle(0.01, half_length=0.0)
        with pytest.raises(DomainError):
            flattened_ellipse(-1.0, 1.0, 0.05)
        with pytest.raises(DomainError):
            cylinder(-2.0, 0.05)


class TestCylinderSplit:
    def test_disc_closed_form(self, rgrid, cgrid, unit_disc):
        # unit disc against a length-R cylinder with unit weight:
        # pi * R from the equator plus 2 pi from the poles
        for R in (1.0, 2.0):
            rep = cylinder_lemma_residual(
                const_one(), unit_disc, R, grid=rgrid, circle=cgrid
            )
            want = math.pi * R + 2.0 * math.pi
            assert rep.rhs == pytest.approx(want, rel=1e-9)
            assert rep.equator_term == pytest.approx(math.pi * R, rel=1e-9)
            assert rep.pole_term == pytest.approx(2.0 * math.pi, rel=1e-9)
            assert abs(rep.lhs_extrapolated - want) <= 0.005 * want
            assert rep.relative_residual <= 0.005

    def test_odd_weight_cancels(self, rgrid, cgrid, unit_disc):
        odd = from_callable(3, lambda U: U[:, 2], label="u3")
        rep = cylinder_lemma_residual(odd, unit_disc, 1.0, grid=rgrid, circle=cgrid)
        # equator restriction vanishes identically and the polar masses cancel
        assert rep.rhs == pytest.approx(0.0, abs=1e-12)
        assert rep.rhs_scale == pytest.approx(2.0 * math.pi, rel=1e-9)
        assert rep.relative_residual <= 1e-8

    def test_affine_in_length(self, rgrid, cgrid, unit_disc):
        # the split is affine in R with slope = half the equatorial integral
        f = from_callable(
            3, lambda U: 1.0 + 0.5 * U[:, 0] ** 2 + 0.2 * U[:, 2] ** 2, label="f"
        )
        reps = {
            R: cylinder_lemma_residual(f, unit_disc, R, grid=rgrid, circle=cgrid)
            for R in (1.0, 2.0, 4.0)
        }
        slope_lo = reps[2.0].lhs_extrapolated - reps[1.0].lhs_extrapolated
        slope_hi = (reps[4.0].lhs_extrapolated - reps[2.0].lhs_extrapolated) / 2.0
        f2 = equator_restriction(f)
        eq, _ = circle_functional(f2, unit_disc.planar, cgrid)
        assert slope_lo == pytest.approx(0.5 * eq, rel=0.01)
        assert slope_hi == pytest.approx(0.5 * eq, rel=0.01)

    def test_extrapolation_stability(self, rgrid, cgrid, unit_disc):
        rep = cylinder_lemma_residual(
            const_one(), unit_disc, 1.0, grid=rgrid, circle=cgrid
        )
        # extrapolating from the coarser delta pair must land nearby: the
        # spread stays below twice the acceptance tolerance of the residual
        assert rep.extrapolation_spread <= 2.0 * 0.02 * rep.rhs_scale

    def test_elliptical_base(self, rgrid, cgrid):
        # non-circular flat body: no closed form needed, the two sides are
        # computed through unrelated code paths (3d mixed density vs planar)
        K = flattened_ellipse(1.3, 0.6, 0.01)
        f = from_callable(3, lambda U: 1.0 + 0.4 * U[:, 1] ** 2, label="f")
        rep = cylinder_lemma_residual(f, K, 3.0, grid=rgrid, circle=cgrid)
        assert rep.relative_residual <= 0.02

    def test_validation(self, rgrid, cgrid, unit_disc):
        f4 = from_callable(4, lambda U: np.ones(len(U)), label="1")
        with pytest.raises(DomainError):
            cylinder_lemma_residual(f4, unit_disc, 1.0, grid=rgrid, circle=cgrid)
        with pytest.raises(DomainError):
            cylinder_lemma_residual(
                const_one(), unit_disc.body3d, 1.0, grid=rgrid, circle=cgrid
            )
        with pytest.raises(DomainError):
            cylinder_lemma_residual(
                const_one(), unit_disc, 1.0, deltas=(0.5, 0.2), grid=rgrid, circle=cgrid
            )
        with pytest.raises(DomainError):
            cylinder_lemma_residual(
                const_one(), unit_disc, 1.0, deltas=(0.05,), grid=rgrid, circle=cgrid
            )


class TestSegmentFactor:
    def test_ball_against_disc(self, rgrid, cgrid, unit_disc):
        # shadow of the ball is the unit disc; planar mixed volume of two
        # unit discs is pi
        rep = segment_factor_identity(unit_disc, ball(3), grid=rgrid, circle=cgrid)
        assert rep.planar_value == pytest.approx(math.pi, rel=1e-9)
        assert rep.relative_residual <= 0.01

    def test_disc_against_disc(self, rgrid, cgrid, unit_disc):
        L = flattened_ellipse(1.0, 1.0, 0.05).body3d
        rep = segment_factor_identity(unit_disc, L, grid=rgrid, circle=cgrid)
        assert rep.planar_value == pytest.approx(math.pi, rel=1e-9)
        assert rep.relative_residual <= 0.01

    def test_translation_invariance(self, rgrid, cgrid, unit_disc):
        L = ellipsoid([0.9, 1.1, 0.5])
        rep = segment_factor_identity(unit_disc, L, grid=rgrid, circle=cgrid)
        rep_t = segment_factor_identity(
            unit_disc, L.translate([0.2, -0.1, 0.3]), grid=rgrid, circle=cgrid
        )
        assert rep_t.ambient_extrapolated == pytest.approx(
            rep.ambient_extrapolated, rel=1e-8
        )
        assert rep_t.planar_value == pytest.approx(rep.planar_value, rel=1e-8)

    def test_validation(self, rgrid, cgrid, unit_disc):
        with pytest.raises(DomainError):
            segment_factor_identity(unit_disc.body3d, ball(3), grid=rgrid, circle=cgrid)
        with pytest.raises(DomainError):
            segment_factor_identity(unit_disc, ball(4), grid=rgrid, circle=cgrid)


class TestReductionLimit:
    def test_disc_limit(self, rgrid, cgrid, unit_disc):
        lim = dimension_reduction_limit(
            const_one(), unit_disc, grid=rgrid, circle=cgrid
        )
        assert lim.circle_value == pytest.approx(math.pi, rel=1e-9)
        assert lim.pole_mass == pytest.approx(2.0 * math.pi, rel=1e-9)
        # raw scaled values decay onto the limit at rate 1/R ...
        assert lim.raw_errors[0] > lim.raw_errors[1] > lim.raw_errors[2]
        for ratio in lim.decay_ratios:
            assert 3.2 <= ratio <= 5.0  # R quadruples each step
        # ... and removing the R-independent polar mass exposes it right away
        assert all(err <= 0.02 for err in lim.corrected_errors)
        assert lim.corrected_errors[-1] <= 0.005

    def test_nonconstant_weight(self, rgrid, cgrid, unit_disc):
        f = from_callable(3, lambda U: 1.0 + 0.4 * U[:, 0] ** 2, label="f")
        lim = dimension_reduction_limit(
            f, unit_disc, R_list=(8.0, 32.0), grid=rgrid, circle=cgrid
        )
        # unit disc: (1/2) * integral of (1 + 0.4 cos^2) over the circle
        assert lim.circle_value == pytest.approx(1.2 * math.pi, rel=1e-9)
        assert lim.corrected_errors[-1] <= 0.02
        assert lim.raw_errors[0] >= 3.0 * lim.raw_errors[1]

    def test_planar_segment_is_affine(self, rgrid, unit_disc):
        f = from_callable(3, lambda U: 1.0 + 0.3 * U[:, 0] ** 2, label="f")
        Kb = flattened_ellipse(0.6, 1.3, 0.01)
        ts, vals, ests = scaled_segment_values(
            f, unit_disc, Kb, R=32.0, t_count=7, grid=rgrid
        )
        d2 = vals[2:] - 2.0 * vals[1:-1] + vals[:-2]
        assert np.max(np.abs(d2)) <= 1e-10 * np.max(np.abs(vals))

    def test_validation(self, rgrid, cgrid, unit_disc):
        with pytest.raises(DomainError):
            dimension_reduction_limit(
                const_one(), unit_disc, R_list=(0.0, 2.0), grid=rgrid, circle=cgrid
            )
