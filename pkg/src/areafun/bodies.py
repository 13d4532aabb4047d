"""Smooth convex bodies represented by their support functions.

A body is the sublevel-set hull K = {x : <x,u> <= h(u) for all unit u}.  All
geometry is read off the support function h: the tangent-frame Hessian form
q_matrix(h, u) of its 1-homogeneous extension is positive definite exactly
when K has a C^2 boundary with everywhere positive curvature, and its
eigenvalues are the principal radii of curvature at the boundary point with
outer normal u.

Bodies cache per-grid Hessian-form stacks and their eigendecompositions, so
repeated functional evaluations over the same grid cost one batched eigh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, DomainError
from . import sphere
from .sphere import SphericalFunction, q_batch, q_matrix, tangent_frame


class SupportBody:
    """Convex body given by a support function (a SphericalFunction)."""

    def __init__(self, h, label=None):
        if not isinstance(h, SphericalFunction):
            raise DomainError("SupportBody expects a SphericalFunction support function")
        self.h = h
        self.n = h.n
        self.label = label or f"K[{h.label}]"
        self._cache = {}

    def __repr__(self):
        return f"SupportBody({self.label}, n={self.n})"

    def support(self, U):
        return self.h.value(U)

    def q_at(self, u, frame=None):
        return q_matrix(self.h, u, frame=frame)

    def q_stack(self, grid):
        """Hessian forms at all grid nodes, (m, n-1, n-1); cached per grid."""
        key = ("q", grid.grid_id)
        if key not in self._cache:
            self._cache[key] = q_batch(self.h, grid.nodes, grid.frames())
        return self._cache[key]

    def q_eigs(self, grid):
        """Eigenvalues of the Hessian forms, (m, n-1), ascending; cached."""
        key = ("eigs", grid.grid_id)
        if key not in self._cache:
            self._cache[key] = np.linalg.eigvalsh(self.q_stack(grid))
        return self._cache[key]

    def translate(self, v):
        v = np.asarray(v, dtype=float)
        moved = sphere.combination(
            [1.0, 1.0], [self.h, sphere.linear(self.n, v)], label=f"{self.h.label}+lin"
        )
        return SupportBody(moved, label=f"{self.label}+t")

    def scale(self, t):
        t = float(t)
        if t <= 0:
            raise DomainError("scale factor must be positive")
        return SupportBody(
            sphere.combination([t], [self.h], label=f"{t:g}*{self.h.label}"),
            label=f"{t:g}*{self.label}",
        )


def ball(n, radius=1.0, label=None):
    if radius <= 0:
        raise DomainError("ball radius must be positive")
    return SupportBody(
        sphere.constant(n, radius, label=f"h_ball({radius:g})"),
        label=label or f"B({radius:g})",
    )


def ellipsoid(semi_axes, label=None):
    """Axis-aligned ellipsoid sum x_k^2/a_k^2 <= 1; support sqrt(sum a_k^2 u_k^2)."""
    a = np.asarray(semi_axes, dtype=float)
    if a.ndim != 1 or len(a) < 2 or np.any(a <= 0):
        raise DomainError("need at least two positive semi-axes")
    f = sphere.quadratic_support(np.diag(a * a), label="h_ellipsoid")
    return SupportBody(f, label=label or "E(" + ",".join(f"{x:g}" for x in a) + ")")


def from_form(M, label=None):
    """Ellipsoid with support function sqrt(u^T M u), M symmetric positive definite."""
    return SupportBody(sphere.quadratic_support(M), label=label or "E(form)")


def combine(coeffs, bodies, label=None):
    """Minkowski combination sum_k coeffs[k] K_k (coefficients >= 0)."""
    if len(coeffs) != len(bodies) or not bodies:
        raise DomainError("need matching, nonempty coefficient/body lists")
    if any(c < 0 for c in coeffs):
        raise DomainError("Minkowski coefficients must be nonnegative")
    h = sphere.combination([float(c) for c in coeffs], [b.h for b in bodies])
    lab = label or "(" + " + ".join(f"{c:g}*{b.label}" for c, b in zip(coeffs, bodies)) + ")"
    return SupportBody(h, label=lab)


def perturb(body, phi, s, label=None):
    """Body with support function h + s*phi (valid only while still convex)."""
    h = sphere.combination([1.0, float(s)], [body.h, phi])
    return SupportBody(h, label=label or f"{body.label}+{s:g}*{phi.label}")


# -- curvature certification -------------------------------------------------


@dataclass
class Certificate:
    """Grid certificate of uniformly positive boundary curvature."""

    ok: bool
    min_eig: float
    worst_node: np.ndarray
    margin: float
    grid_id: str

    def __bool__(self):
        return self.ok


def certify_c2plus(body, grid, margin=1e-6):
    """Check lambda_min(q_matrix(h,u)) >= margin at every grid node.

    A grid certificate, not a proof: between nodes the minimum eigenvalue is
    controlled by the modulus of continuity of the Hessian form, which is not
    estimated here.  Pair with fine grids (>= 8192 nodes in R^3) in anger.
    """
    eigs = body.q_eigs(grid)
    mins = eigs[:, 0]
    k = int(np.argmin(mins))
    return Certificate(
        ok=bool(mins[k] >= margin),
        min_eig=float(mins[k]),
        worst_node=grid.nodes[k].copy(),
        margin=float(margin),
        grid_id=grid.grid_id,
    )


def require_c2plus(body, grid, margin=1e-6):
    cert = certify_c2plus(body, grid, margin)
    if not cert.ok:
        raise ConstructionError(
            f"{body.label} fails curvature certification: min eigenvalue "
            f"{cert.min_eig:.3e} < {margin:.1e} at u={cert.worst_node}"
        )
    return cert


# -- prescribing the Hessian form at a point ---------------------------------


def realize_q(A, u, label=None):
    """Build a smooth body whose Hessian form at normal u is exactly A.

    For symmetric positive definite A = T diag(a) T^T set
    M = sum_k a_k f_k f_k^T + u u^T with f_k = E(u) T e_k; the quadratic
    support function sqrt(x^T M x) then has h(u) = 1, M u = u, and
    tangent-frame Hessian form exactly A at u (its extension Hessian at u is
    M - u u^T).  The construction is exact — no optimisation, no fitting.
    """
    u = np.asarray(u, dtype=float)
    n = len(u)
    if abs(np.linalg.norm(u) - 1.0) > 1e-10:
        raise DomainError("realize_q: direction must be a unit vector")
    A = np.asarray(A, dtype=float)
    N = n - 1
    if A.shape != (N, N):
        raise DomainError(f"realize_q: form must be {N}x{N} for ambient dimension {n}")
    if not np.allclose(A, A.T, atol=1e-12):
        raise DomainError("realize_q: form must be symmetric")
    a, T = np.linalg.eigh(A)
    if a[0] <= 0:
        raise ConstructionError(
            f"realize_q: form must be positive definite (min eigenvalue {a[0]:.3e})"
        )
    E = tangent_frame(u)
    F = E @ T
    M = (F * a) @ F.T + np.outer(u, u)
    M = 0.5 * (M + M.T)
    body = from_form(M, label=label or "realized")
    return body


# -- one-parameter support perturbations --------------------------------------


@dataclass
class PerturbationFamily:
    """Family s -> body(h + s*phi), with certified convexity range.

    For each grid node, lambda_min(Q_h + s Q_phi) is a concave function of s
    (a minimum of affine functions of s), so the nodewise minimum over the
    grid is concave too; once it is >= margin at s=0 and at s=eps it is
    >= margin on the whole interval.  eps_plus/eps_minus are therefore valid
    for every intermediate s, not just the sampled ones.
    """

    body: SupportBody
    phi: SphericalFunction
    eps_plus: float
    eps_minus: float
    margin: float
    grid_id: str

    @property
    def eps_max(self):
        return min(self.eps_plus, self.eps_minus)

    def at(self, s):
        s = float(s)
        if not (-self.eps_minus <= s <= self.eps_plus):
            raise DomainError(
                f"s={s:g} outside certified range [{-self.eps_minus:g}, {self.eps_plus:g}]"
            )
        return perturb(self.body, self.phi, s)


def perturbation_family(body, phi, grid, margin=1e-6, rel_tol=1e-3, max_doublings=60):
    """Largest certified symmetric-range perturbation of a body by phi.

    Bisects (to relative width rel_tol) for the largest s in each direction
    with min-eigenvalue level >= margin over the grid.  The default rel_tol
    matches interactive use; pass a smaller value when the returned range is
    compared against analytic bounds.
    """
    if phi.n != body.n:
        raise DomainError("perturbation direction has wrong ambient dimension")
    Qh = body.q_stack(grid)
    Qp = q_batch(phi, grid.nodes, grid.frames())

    def level(s):
        return float(np.min(np.linalg.eigvalsh(Qh + s * Qp)[:, 0]))

    base = level(0.0)
    if base < margin:
        raise ConstructionError(
            f"base body fails curvature margin: min eigenvalue {base:.3e} < {margin:.1e}"
        )

    def frontier(direction):
        lo, hi = 0.0, 1.0
        for _ in range(max_doublings):
            if level(direction * hi) < margin:
                break
            lo, hi = hi, 2.0 * hi
        else:
            return math.inf
        while hi - lo > rel_tol * max(lo, 1e-300):
            mid = 0.5 * (lo + hi)
            if level(direction * mid) >= margin:
                lo = mid
            else:
                hi = mid
        return lo

    return PerturbationFamily(
        body=body,
        phi=phi,
        eps_plus=frontier(+1.0),
        eps_minus=frontier(-1.0),
        margin=float(margin),
        grid_id=grid.grid_id,
    )
