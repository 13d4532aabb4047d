"""Flattened bodies, cylinder splitting, and the equatorial large-R limit.

In ambient dimension 3, the mixed surface-density integral of a nearly flat
body against a long cylinder splits into two parts: an equatorial circle
measure weighted by the cylinder length, and point masses at the two poles
carrying a planar mixed volume.  Everything here realizes that split with
delta-thickened smooth bodies — flat discs, ellipses, and segments become
slim ellipsoids, the point masses emerge as concentration of the density
near the poles — and verifies it in integrated form against a weight
function, including the scaled large-R limit in which only the circle part
survives.

The thickened computations converge as the thickness delta goes to 0 with a
leading error roughly linear in delta, so every verification evaluates at a
few thicknesses and extrapolates linearly to delta = 0, reporting the spread
between extrapolations from different delta pairs as a stability measure.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import SupportBody, certify_c2plus, combine, ellipsoid
from .errors import DomainError
from .functionals import mixed_area_integral, mixed_volume_smooth
from .sphere import from_callable, latitude_grid, make_grid

E3_POLE = np.array([0.0, 0.0, 1.0])


# -- thickened flat bodies ------------------------------------------------------


@dataclass
class FlattenedBody:
    """Planar ellipse with semi-axes (a, b), thickened to a slim ellipsoid.

    body3d is the smooth stand-in used in ambient integrals; planar is the
    genuine two-dimensional ellipse the thickening converges to, used on the
    circle side of every comparison.
    """

    a: float
    b: float
    delta: float
    body3d: SupportBody
    planar: SupportBody

    def rethickened(self, delta):
        return flattened_ellipse(self.a, self.b, delta)


def flattened_ellipse(a, b, delta):
    """Ellipse {x^2/a^2 + y^2/b^2 <= 1} in the equatorial plane, thickness delta."""
    if a <= 0 or b <= 0:
        raise DomainError("ellipse semi-axes must be positive")
    if delta < 1e-3:
        raise DomainError(
            f"thickness {delta:g} is too thin to certify positive curvature; "
            "use delta >= 1e-3"
        )
    return FlattenedBody(
        a=float(a),
        b=float(b),
        delta=float(delta),
        body3d=ellipsoid([a, b, delta], label=f"flat({a:g},{b:g};{delta:g})"),
        planar=ellipsoid([a, b], label=f"ellipse({a:g},{b:g})"),
    )


def needle(delta, half_length=0.5):
    """Slim ellipsoid around a vertical segment of the given half-length.

    The default half-length 1/2 makes it the stand-in for a segment of unit
    total length, the normalization under which the cylinder split carries
    the factor R/2 on its equatorial term.
    """
    if delta < 1e-3:
        raise DomainError("needle thickness must be >= 1e-3 to certify")
    if half_length <= 0:
        raise DomainError("needle half-length must be positive")
    return ellipsoid([delta, delta, half_length], label=f"needle({delta:g})")


@dataclass
class CylinderApprox:
    """Unit disc plus R times a unit-length vertical segment, both thickened.

    The support function converges (delta -> 0) to
    sqrt(u1^2 + u2^2) + (R/2) |u3|: a disc-capped cylinder of half-height
    R/2.  The symmetric segment is the translation-invariant stand-in for a
    one-sided unit segment, so mixed quantities agree with either choice.
    """

    R: float
    delta: float
    body3d: SupportBody


def cylinder(R, delta):
    if R <= 0:
        raise DomainError("cylinder length R must be positive")
    disc = flattened_ellipse(1.0, 1.0, delta).body3d
    body = combine([1.0, float(R)], [disc, needle(delta)], label=f"cyl(R={R:g};{delta:g})")
    return CylinderApprox(R=float(R), delta=float(delta), body3d=body)


# -- equatorial restrictions and circle-side quantities ---------------------------


def equator_restriction(f3):
    """Weight on the circle: f restricted to the equatorial plane u3 = 0."""
    if f3.n != 3:
        raise DomainError("equator restriction expects a weight on the 2-sphere")

    def fn(U2):
        U2 = np.atleast_2d(np.asarray(U2, dtype=float))
        return f3.value(np.column_stack([U2, np.zeros(len(U2))]))

    return from_callable(2, fn, label=f"{f3.label}|equator")


def project_to_plane(body3):
    """Planar shadow of a body: support function restricted to the equator."""
    if body3.n != 3:
        raise DomainError("projection expects a body in ambient dimension 3")

    def fn(U2):
        U2 = np.atleast_2d(np.asarray(U2, dtype=float))
        return body3.support(np.column_stack([U2, np.zeros(len(U2))]))

    return SupportBody(from_callable(2, fn, label=f"h[{body3.label}]|equator"))


def circle_functional(f2, body2, grid2):
    """integral of f2 against the circle curvature density h'' + h of body2."""
    return mixed_area_integral(f2, [body2], grid2)


def planar_mixed_volume(body_a2, body_b2, grid2):
    """Two-dimensional mixed volume (1/2) * integral h_a (h_b'' + h_b)."""
    return mixed_volume_smooth([body_a2, body_b2], grid2)


def reduction_grid(nz=800, naz=96):
    """Polar-refined sphere grid for nearly flat bodies.

    The mixed density of a thin body against a cylinder concentrates in polar
    caps of height ~ delta^2; Gauss-Legendre nodes in the polar coordinate
    cluster near the poles fast enough to resolve that concentration at
    thickness 0.01, where an equal-area grid of any affordable size misses it.
    """
    return latitude_grid(nz, naz)


def circle_grid(m=2048):
    return make_grid(2, m)


# -- delta extrapolation -----------------------------------------------------------


def _certified(body, grid, delta):
    cert = certify_c2plus(body, grid)
    if not cert.ok:
        raise DomainError(
            f"{body.label}: curvature certificate failed at thickness {delta:g} "
            f"(min eigenvalue {cert.min_eig:.3e}); increase delta"
        )
    return body


def _extrapolate(deltas, values):
    """Linear extrapolation to delta = 0 from the last two thicknesses, plus
    the spread against the extrapolation from the first two as a stability
    measure."""
    if len(deltas) < 2:
        raise DomainError("delta extrapolation needs at least two thicknesses")

    def pair(d1, v1, d2, v2):
        return v2 + (v1 - v2) * (0.0 - d2) / (d1 - d2)

    last = pair(deltas[-2], values[-2], deltas[-1], values[-1])
    first = pair(deltas[0], values[0], deltas[1], values[1])
    return last, abs(last - first)


# -- the cylinder splitting identity ------------------------------------------------


@dataclass
class CylinderSplitReport:
    R: float
    deltas: tuple
    lhs_values: list
    lhs_estimates: list
    lhs_extrapolated: float
    extrapolation_spread: float
    equator_term: float
    pole_term: float
    rhs: float
    rhs_scale: float

    @property
    def residual(self):
        return abs(self.lhs_extrapolated - self.rhs)

    @property
    def relative_residual(self):
        return self.residual / self.rhs_scale


def cylinder_lemma_residual(
    f, K1, R, deltas=(0.05, 0.02, 0.01), grid=None, circle=None
):
    """Verify the cylinder splitting identity in integrated form.

    Left side: the mixed surface-density integral of f against (K1, cylinder)
    at each thickness, extrapolated to zero thickness.  Right side, computed
    entirely on the circle: (R/2) times the equatorial integral of f against
    the curvature density of the planar K1, plus the planar mixed volume of
    K1 with the unit disc times f(pole) + f(-pole) — the two point masses the
    flat limit concentrates at the poles.

    The relative residual is measured against the magnitude of the right
    side's ingredients (not their signed sum, which a symmetry may cancel).
    """
    if f.n != 3:
        raise DomainError("the cylinder split is an ambient-dimension-3 statement")
    if not isinstance(K1, FlattenedBody):
        raise DomainError("K1 must be a FlattenedBody")
    deltas = tuple(sorted((float(d) for d in deltas), reverse=True))
    if any(not 0.01 <= d <= 0.1 for d in deltas):
        raise DomainError("thickness sweep must stay within [0.01, 0.1]")
    grid = reduction_grid() if grid is None else grid
    circle = circle_grid() if circle is None else circle

    lhs_values, lhs_estimates = [], []
    for d in deltas:
        body = _certified(K1.rethickened(d).body3d, grid, d)
        cyl = _certified(cylinder(R, d).body3d, grid, d)
        val, est = mixed_area_integral(f, [body, cyl], grid)
        lhs_values.append(val)
        lhs_estimates.append(est)
    extrapolated, spread = _extrapolate(deltas, lhs_values)

    f_eq = equator_restriction(f)
    eq_integral, _ = circle_functional(f_eq, K1.planar, circle)
    equator_term = 0.5 * R * eq_integral
    vol, _ = planar_mixed_volume(ellipsoid([1.0, 1.0]), K1.planar, circle)
    pole_term = vol * (f.value(E3_POLE) + f.value(-E3_POLE))
    rhs = equator_term + pole_term

    eq_abs, _ = circle_functional(
        from_callable(2, lambda U: np.abs(f_eq.value(U)), label="|f||equator"),
        K1.planar,
        circle,
    )
    rhs_scale = max(
        0.5 * R * eq_abs + vol * (abs(f.value(E3_POLE)) + abs(f.value(-E3_POLE))),
        1e-12,
    )
    return CylinderSplitReport(
        R=float(R),
        deltas=deltas,
        lhs_values=lhs_values,
        lhs_estimates=lhs_estimates,
        lhs_extrapolated=extrapolated,
        extrapolation_spread=spread,
        equator_term=equator_term,
        pole_term=pole_term,
        rhs=rhs,
        rhs_scale=rhs_scale,
    )


# -- segment factor: one ambient slot worth half a circle -----------------------------


@dataclass
class SegmentFactorReport:
    deltas: tuple
    ambient_values: list  # 3 V(L, K1_delta, needle_delta) per thickness
    ambient_extrapolated: float
    extrapolation_spread: float
    planar_value: float

    @property
    def residual(self):
        return abs(self.ambient_extrapolated - self.planar_value)

    @property
    def relative_residual(self):
        return self.residual / max(abs(self.planar_value), 1e-12)


def segment_factor_identity(K1, L, deltas=(0.05, 0.02, 0.01), grid=None, circle=None):
    """Trading a vertical unit segment for a planar slot.

    Three times the ambient mixed volume of (L, K1, unit segment) equals the
    planar mixed volume of the equatorial shadows of L and K1; the segment
    contributes only its length and a dimension drop.  Both sides are
    computed independently — the segment as a thickness-extrapolated needle,
    the planar side directly on the circle.
    """
    if not isinstance(K1, FlattenedBody):
        raise DomainError("K1 must be a FlattenedBody")
    if L.n != 3:
        raise DomainError("L must live in ambient dimension 3")
    deltas = tuple(sorted((float(d) for d in deltas), reverse=True))
    grid = reduction_grid() if grid is None else grid
    circle = circle_grid() if circle is None else circle

    vals = []
    for d in deltas:
        body = _certified(K1.rethickened(d).body3d, grid, d)
        seg = _certified(needle(d), grid, d)
        v, _ = mixed_volume_smooth([L, body, seg], grid)
        vals.append(3.0 * v)
    extrapolated, spread = _extrapolate(deltas, vals)
    planar, _ = planar_mixed_volume(project_to_plane(L), K1.planar, circle)
    return SegmentFactorReport(
        deltas=deltas,
        ambient_values=vals,
        ambient_extrapolated=extrapolated,
        extrapolation_spread=spread,
        planar_value=planar,
    )


# -- the large-R limit: only the equator survives -------------------------------------


@dataclass
class ReductionLimitReport:
    R_list: tuple
    deltas: tuple
    scaled_values: list  # (1/R) * extrapolated ambient integral, per R
    pole_mass: float  # R-independent polar contribution
    corrected_values: list  # scaled values with the polar contribution removed
    circle_value: float  # (1/2) * equatorial integral, the limit
    raw_errors: list
    corrected_errors: list

    @property
    def decay_ratios(self):
        """Successive raw-error ratios; ~ R ratio when the error decays like 1/R."""
        return [
            self.raw_errors[k] / max(self.raw_errors[k + 1], 1e-15)
            for k in range(len(self.raw_errors) - 1)
        ]


def dimension_reduction_limit(
    f, K1, R_list=(2, 8, 32), deltas=(0.02, 0.01), grid=None, circle=None
):
    """Scaled cylinder functionals converging onto the circle functional.

    (1/R) times the mixed integral against (K1, cylinder of length R) tends,
    as R grows, to half the equatorial integral of f against the planar K1's
    curvature density.  The polar point masses are R-independent, so the raw
    scaled values approach the limit at rate 1/R exactly; removing the
    independently computed polar contribution exposes the limit at moderate R
    already.  Both the raw decay and the corrected values are reported.
    """
    if f.n != 3:
        raise DomainError("the reduction limit is an ambient-dimension-3 statement")
    if not isinstance(K1, FlattenedBody):
        raise DomainError("K1 must be a FlattenedBody")
    R_list = tuple(float(R) for R in R_list)
    if any(R <= 0 for R in R_list):
        raise DomainError("cylinder lengths must be positive")
    deltas = tuple(sorted((float(d) for d in deltas), reverse=True))
    grid = reduction_grid() if grid is None else grid
    circle = circle_grid() if circle is None else circle

    f_eq = equator_restriction(f)
    eq_integral, _ = circle_functional(f_eq, K1.planar, circle)
    circle_value = 0.5 * eq_integral
    vol, _ = planar_mixed_volume(ellipsoid([1.0, 1.0]), K1.planar, circle)
    pole_mass = vol * (f.value(E3_POLE) + f.value(-E3_POLE))

    scaled, corrected = [], []
    for R in R_list:
        vals = []
        for d in deltas:
            body = _certified(K1.rethickened(d).body3d, grid, d)
            cyl = _certified(cylinder(R, d).body3d, grid, d)
            v, _ = mixed_area_integral(f, [body, cyl], grid)
            vals.append(v)
        extrapolated, _ = _extrapolate(deltas, vals)
        scaled.append(extrapolated / R)
        corrected.append((extrapolated - pole_mass) / R)
    scale = max(abs(circle_value), 1e-12)
    return ReductionLimitReport(
        R_list=R_list,
        deltas=deltas,
        scaled_values=scaled,
        pole_mass=pole_mass,
        corrected_values=corrected,
        circle_value=circle_value,
        raw_errors=[abs(v - circle_value) / scale for v in scaled],
        corrected_errors=[abs(v - circle_value) / scale for v in corrected],
    )


def scaled_segment_values(f, Ka, Kb, R=32.0, delta=0.01, t_count=7, grid=None):
    """Scaled cylinder functional along a planar Minkowski segment.

    The mixed density is linear in its first slot, so these values must be
    affine in t up to quadrature — the finite-R shadow of the limit
    functional's linearity on planar bodies.  Returns (ts, values, estimates).
    """
    if not (isinstance(Ka, FlattenedBody) and isinstance(Kb, FlattenedBody)):
        raise DomainError("segment endpoints must be FlattenedBody instances")
    grid = reduction_grid() if grid is None else grid
    cyl = _certified(cylinder(R, delta).body3d, grid, delta)
    A = _certified(Ka.rethickened(delta).body3d, grid, delta)
    B = _certified(Kb.rethickened(delta).body3d, grid, delta)
    ts = np.linspace(0.0, 1.0, int(t_count))
    values, estimates = [], []
    for t in ts:
        body = A if t == 0.0 else B if t == 1.0 else combine([1.0 - t, t], [A, B])
        v, e = mixed_area_integral(f, [body, cyl], grid)
        values.append(v / R)
        estimates.append(e / R)
    return ts, np.asarray(values), np.asarray(estimates)
