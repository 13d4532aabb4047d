"""Integral functionals weighted by curvature-measure densities.

The central object is

    F(K) = int_{S^{n-1}} f(u) * density_i(K, u) du,

where density_i(K, u) = elem_sym(q_matrix(h_K, u), i) is the i-th elementary
symmetric function of the principal curvature radii.  This density convention
carries no binomial normalisation; convention_factor(n, i) converts to the
mixed-form normalisation in which the order-i density of the unit ball is 1
(divide by it).  The two agree at i = n-1.

Derivatives of F along support-function perturbations h + s*phi follow from
the matrix calculus of elem_sym: the s-derivative of the density is
trace(cofactor(Q_h, i) Q_phi) and its second derivative is the contraction of
the order-2 derivative tensor with Q_phi twice.  Both admit "adjoint" forms
with f and phi exchanged — the weighted cofactor field is divergence-free, so
second-order integration by parts on the sphere swaps them at no cost; the
agreement of the forms is itself a strong correctness check (see
areafun.identities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EvaluationError
from .sphere import q_batch
from .symfun import (
    contract2_batch,
    cofactor_batch,
    elem_sym_from_eigs,
    mixed_discriminant_batch,
)


def convention_factor(n, i):
    """elem-sym density = convention_factor * (ball-normalised mixed density)."""
    if not (1 <= i <= n - 1):
        raise DomainError(f"order must satisfy 1 <= i <= {n - 1}")
    return math.comb(n - 1, i)


def _check_order(n, i):
    if not (1 <= i <= n - 1):
        raise DomainError(f"order must satisfy 1 <= i <= {n - 1}, got {i}")


def _finite(vals, what):
    if not np.all(np.isfinite(vals)):
        raise EvaluationError(f"non-finite values in {what}")
    return vals


def _paired_integral(grid, node_vals):
    """Integrate per-node values given on the fine and coarse grid.

    node_vals(g) must return one value per node of g.  Returns
    (fine value, |fine - coarse|) — the standard self-calibrating estimate;
    assert against ~5x the estimate plus a small absolute floor.
    """
    vf = _finite(np.asarray(node_vals(grid), dtype=float), "integrand")
    fine = float(grid.weights @ vf)
    cg = grid.coarse()
    vc = _finite(np.asarray(node_vals(cg), dtype=float), "integrand (coarse)")
    coarse = float(cg.weights @ vc)
    return fine, abs(fine - coarse)


def area_density(body, i, grid):
    """Per-node order-i curvature density elem_sym(Q(h,u), i) on the grid."""
    _check_order(body.n, i)
    return elem_sym_from_eigs(body.q_eigs(grid), i)


def functional_value(f, body, i, grid):
    """F(K) = int f * density_i(K); returns (value, error_estimate)."""
    if f.n != body.n:
        raise DomainError("weight function and body live in different dimensions")
    _check_order(body.n, i)

    def vals(g):
        return f.value(g.nodes) * elem_sym_from_eigs(body.q_eigs(g), i)

    return _paired_integral(grid, vals)


def functional_difference(f, body_k, body_l, i, grid):
    """F(K) - F(L) as one integral of the pointwise density difference.

    Numerically very different from subtracting two functional_value results:
    on a shared grid the common part of the two integrands cancels node by
    node, so both the value and the error estimate scale with the *difference*
    — decisive when the bodies are close and the grid is Monte Carlo, where
    independent estimates carry common noise far larger than the gap.
    Returns (value, error_estimate).
    """
    if body_k.n != body_l.n or f.n != body_k.n:
        raise DomainError("bodies and weight must share one dimension")
    _check_order(body_k.n, i)

    def vals(g):
        dens_k = elem_sym_from_eigs(body_k.q_eigs(g), i)
        dens_l = elem_sym_from_eigs(body_l.q_eigs(g), i)
        return f.value(g.nodes) * (dens_k - dens_l)

    return _paired_integral(grid, vals)


def functional_segment(f, body_k, body_l, i, ts, grid):
    """F along the Minkowski segment (1-t) K + t L for each t in ts.

    The Hessian form is affine in the support function, so the segment costs
    one batched eigendecomposition per t on cached endpoint stacks.
    Returns (values, error_estimates) as arrays over ts.
    """
    if body_k.n != body_l.n or f.n != body_k.n:
        raise DomainError("segment endpoints and weight must share one dimension")
    _check_order(body_k.n, i)
    ts = np.asarray(ts, dtype=float)
    out = np.empty(len(ts))
    est = np.empty(len(ts))
    for k, t in enumerate(ts):
        def vals(g, t=t):
            Q = (1.0 - t) * body_k.q_stack(g) + t * body_l.q_stack(g)
            lam = np.linalg.eigvalsh(Q)
            return f.value(g.nodes) * elem_sym_from_eigs(lam, i)

        out[k], est[k] = _paired_integral(grid, vals)
    return out, est


def mixed_area_integral(f, bodies, grid):
    """int f(u) * D(Q_1, ..., Q_{n-1}) du for exactly n-1 bodies.

    D is the mixed discriminant (fully polarised determinant); with all
    bodies equal this is the top-order density integral, and with i copies of
    K and n-1-i unit balls it equals functional_value(f, K, i)/binom(n-1,i).
    """
    if not bodies:
        raise DomainError("need at least one body")
    n = bodies[0].n
    if any(b.n != n for b in bodies) or f.n != n:
        raise DomainError("all bodies and the weight must share one dimension")
    if len(bodies) != n - 1:
        raise DomainError(f"mixed integral needs exactly {n - 1} bodies, got {len(bodies)}")

    def vals(g):
        stacks = [b.q_stack(g) for b in bodies]
        return f.value(g.nodes) * mixed_discriminant_batch(stacks)

    return _paired_integral(grid, vals)


def mixed_functional(f, body, i, companions, grid):
    """binom(n-1, i) * int f * D(Q_K x i, Q_companions) — order-i functional
    relative to companion bodies instead of the unit ball."""
    n = body.n
    _check_order(n, i)
    if len(companions) != n - 1 - i:
        raise DomainError(f"need {n - 1 - i} companion bodies, got {len(companions)}")
    val, est = mixed_area_integral(f, [body] * i + list(companions), grid)
    c = convention_factor(n, i)
    return c * val, c * est


def mixed_volume_smooth(bodies, grid):
    """V(K_1, ..., K_n) = (1/n) int h_{K_1} D(Q_{K_2}, ..., Q_{K_n}) du.

    Symmetric in all n slots (a fact worth testing, not assuming), Minkowski
    multilinear, and equal to volume when all slots agree.
    """
    n = bodies[0].n if bodies else 0
    if len(bodies) != n:
        raise DomainError(f"mixed volume needs exactly n={n} bodies, got {len(bodies)}")
    if any(b.n != n for b in bodies):
        raise DomainError("mixed volume: dimension mismatch")

    def vals(g):
        stacks = [b.q_stack(g) for b in bodies[1:]]
        return bodies[0].support(g.nodes) * mixed_discriminant_batch(stacks)

    v, e = _paired_integral(grid, vals)
    return v / n, e / n


def volume(body, grid):
    return mixed_volume_smooth([body] * body.n, grid)


# -- variations of F along support perturbations ------------------------------


def _tangential_gradient(f, grid):
    """Per-node frame components of the spherical gradient of f, (m, n-1)."""
    G = f.extension_gradient(grid.nodes)
    return np.einsum("mia,mi->ma", grid.frames(), G)


def first_variation(f, body, phi, i, grid, form="direct"):
    """d/ds F(h + s phi) at s = 0; returns (value, error_estimate).

    form="direct":  int f * trace(cofactor(Q_h, i) Q_phi)
    form="adjoint": int phi * trace(cofactor(Q_h, i) Q_f)

    The two agree for C^2 data (divergence-free cofactor fields); "adjoint"
    needs second derivatives of f instead of phi, which is the right trade
    when phi is rough and f is smooth.
    """
    _check_order(body.n, i)
    if form not in ("direct", "adjoint"):
        raise DomainError(f"unknown first-variation form {form!r}")
    a, b = (f, phi) if form == "direct" else (phi, f)

    def vals(g):
        cof = cofactor_batch(body.q_stack(g), i)
        Qb = q_batch(b, g.nodes, g.frames())
        return a.value(g.nodes) * np.einsum("mjk,mjk->m", cof, Qb)

    return _paired_integral(grid, vals)


def second_variation(f, body, phi, i, grid, form="quadratic"):
    """d^2/ds^2 F(h + s phi) at s = 0; returns (value, error_estimate).

    form="quadratic": int f * <T(Q_h, i) Q_phi, Q_phi>   (f weighted, phi twice)
    form="adjoint":   int phi * <T(Q_h, i) Q_f, Q_phi>   (one phi slot swapped)
    form="gradient":  int phi^2 trace(m) - <m grad phi, grad phi>,
                      m = T(Q_h, i) Q_f

    T is the second-derivative tensor of elem_sym(., i).  The gradient form
    uses only first derivatives of phi — the variant of choice for highly
    oscillatory perturbations whose Hessians are numerically poisonous.
    """
    _check_order(body.n, i)
    if form == "quadratic":

        def vals(g):
            Qp = q_batch(phi, g.nodes, g.frames())
            M = contract2_batch(body.q_stack(g), i, Qp)
            return f.value(g.nodes) * np.einsum("mjk,mjk->m", M, Qp)

    elif form == "adjoint":

        def vals(g):
            Qf = q_batch(f, g.nodes, g.frames())
            Qp = q_batch(phi, g.nodes, g.frames())
            M = contract2_batch(body.q_stack(g), i, Qf)
            return phi.value(g.nodes) * np.einsum("mjk,mjk->m", M, Qp)

    elif form == "gradient":

        def vals(g):
            Qf = q_batch(f, g.nodes, g.frames())
            M = contract2_batch(body.q_stack(g), i, Qf)
            pv = phi.value(g.nodes)
            gp = _tangential_gradient(phi, g)
            trm = np.einsum("mjj->m", M)
            return pv * pv * trm - np.einsum("mj,mjk,mk->m", gp, M, gp)

    else:
        raise DomainError(f"unknown second-variation form {form!r}")
    return _paired_integral(grid, vals)


# -- Brunn-Minkowski-type second-order criterion ------------------------------


@dataclass
class ConcavityReport:
    """Second-order test of s -> F(K_s)^{1/i} concavity at s = 0.

    criterion = F * F'' - ((i-1)/i) * F'^2 must be <= 0 (up to quadrature
    tolerance) whenever the power-concavity inequality holds along the family;
    a confidently positive value certifies failure.
    """

    value: float
    functional: float
    first: float
    second: float
    order: int
    tolerance: float
    form: str

    @property
    def consistent_with_concavity(self):
        return self.value <= self.tolerance

    @property
    def violates_concavity(self):
        return self.value > self.tolerance


def concavity_criterion(f, body, phi, i, grid, form="quadratic"):
    """Assemble the power-concavity second-order criterion with tolerances.

    Error propagation: first-order in each quadrature estimate, inflated 5x
    (the usual doubling-estimate safety factor) plus a relative floor.
    """
    F, eF = functional_value(f, body, i, grid)
    dF, edF = first_variation(f, body, phi, i, grid)
    d2F, ed2F = second_variation(f, body, phi, i, grid, form=form)
    c = (i - 1.0) / i
    value = F * d2F - c * dF * dF
    tol = 5.0 * (abs(eF * d2F) + abs(F) * ed2F + 2.0 * c * abs(dF) * edF)
    tol += 1e-9 * (1.0 + abs(F) * abs(d2F) + c * dF * dF)
    return ConcavityReport(
        value=float(value),
        functional=float(F),
        first=float(dF),
        second=float(d2F),
        order=int(i),
        tolerance=float(tol),
        form=form,
    )
