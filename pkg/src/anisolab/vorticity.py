"""Horizontal vorticity of the remainder and its evolution residual.

The remainder's horizontal vorticity omega = curl_h v^h satisfies a
transport-diffusion equation whose sources split into stretching by the
vertical velocity and a shear interaction between the planar field and
the corrector:

  d_t omega + (v+g).grad Omega + w.grad_h omega - Lap omega
      = Omega d3 u^3 + d2 u^3 d3 u^1 - d1 u^3 d3 u^2
        + d1 w . grad_h g^2 - d2 w . grad_h g^1

(w planar, g corrector, Omega = curl_h u^h = omega + curl_h w + curl_h g^h).
The vertical remainder velocity satisfies

  d_t v^3 + (v+g).grad u^3 + w.grad_h v^3 - Lap v^3
      = -d3 (-Lap)^{-1} (sum_{l,m} d_l u^m d_m u^l
                         - sum_{l,m} d_l w^m d_m g^l)

where the nonlocal term is the vertical pressure gradient d3(p - pt)
written through the two Poisson representations.  Both forms are
algebraic consequences of the remainder system; `omega_equation_gap` and
`vertical_equation_gap` verify them against the implemented right sides
with no time discretization involved, and `vorticity_residual` probes
them along a run with a second-order centered difference in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import (
    ScalarField,
    VectorField,
    curl_h,
    dealiased_product,
    derivative,
)
from .project import leray_project
from .stepping import SolverState

__all__ = [
    "VorticityFields",
    "vorticity_residual",
    "omega_equation_gap",
    "vertical_equation_gap",
]


@dataclass(frozen=True)
class VorticityFields:
    """curl_h of the three velocity blocks plus their sum.

    Built from the subtraction route for the remainder by default, which
    makes Omega_h equal curl_h u^h identically; the solver-evolved route
    differs from it by the recomposition residual.
    """

    omega: ScalarField
    omega_bar: ScalarField
    omega_tilde: ScalarField
    Omega_h: ScalarField

    @classmethod
    def from_state(cls, state: SolverState, route: str = "subtraction"):
        if route == "subtraction":
            v = state.v_by_subtraction()
        elif route == "solver":
            v = state.v
        else:
            raise ValueError(f"unknown remainder route {route!r}")
        om = curl_h(VectorField((v[0], v[1])))
        om_bar = curl_h(state.ubar_h)
        om_tilde = curl_h(VectorField((state.utilde[0], state.utilde[1])))
        return cls(om, om_bar, om_tilde, om + om_bar + om_tilde)

    def consistency_residual(self, u: VectorField) -> float:
        """Relative gap between Omega_h and curl_h u^h."""
        target = curl_h(VectorField((u[0], u[1])))
        denom = max(target.l2(), 1e-300)
        return (self.Omega_h - target).l2() / denom


def _advect(a: VectorField, f: ScalarField) -> ScalarField:
    """a . grad f with dealiased products (a 3- or 2-component)."""
    out = dealiased_product(a[0], derivative(f, 0))
    for m in range(1, len(a)):
        out = out + dealiased_product(a[m], derivative(f, m))
    return out


def _laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, -f.grid.xi_sq * f.coef)


def _omega_sources(state: SolverState) -> ScalarField:
    """Right side of the omega equation (stretching + planar shear)."""
    u = state.u
    w = state.ubar_h
    g = state.utilde
    Omega = curl_h(VectorField((u[0], u[1])))
    s = dealiased_product(Omega, derivative(u[2], 2))
    s = s + dealiased_product(derivative(u[2], 1), derivative(u[0], 2))
    s = s - dealiased_product(derivative(u[2], 0), derivative(u[1], 2))
    for m in range(2):
        s = s + dealiased_product(derivative(w[m], 0), derivative(g[1], m))
        s = s - dealiased_product(derivative(w[m], 1), derivative(g[0], m))
    return s


def _strain_contraction(a: VectorField, b: VectorField) -> ScalarField:
    """sum_{l,m} d_l a^m d_m b^l, the double-divergence Poisson source.

    a may have two components (planar), in which case m runs over the
    horizontal indices only.
    """
    grid = a.grid
    out = ScalarField(grid, np.zeros(grid.shape, complex))
    for m in range(len(a)):
        for l in range(len(b)):
            out = out + dealiased_product(
                derivative(a[m], l), derivative(b[l], m)
            )
    return out


def _neg_inv_laplacian(f: ScalarField) -> ScalarField:
    """(-Lap)^{-1} with the mean mode mapped to zero.

    Callers only feed double-divergence sources, whose mean vanishes for
    divergence-free fields; no tolerance gate here because the residual
    functions measure the defect themselves.
    """
    g = f.grid
    inv = np.zeros_like(g.xi_sq)
    np.divide(1.0, g.xi_sq, out=inv, where=g.xi_sq != 0)
    return ScalarField(g, f.coef * inv)


def _vertical_pressure_term(state: SolverState) -> ScalarField:
    """d3 (-Lap)^{-1} (S_u - S_wg), the nonlocal source of the v^3 form."""
    s_u = _strain_contraction(state.u, state.u)
    s_wg = _strain_contraction(state.ubar_h, state.utilde)
    return derivative(_neg_inv_laplacian(s_u - s_wg), 2)


def _omega_transport(state: SolverState) -> ScalarField:
    """(v+g).grad Omega + w.grad_h omega - Lap omega - sources."""
    u, w, g, v = state.u, state.ubar_h, state.utilde, state.v
    Omega = curl_h(VectorField((u[0], u[1])))
    omega = curl_h(VectorField((v[0], v[1])))
    adv = v + g
    out = _advect(adv, Omega)
    out = out + _advect(w, omega)
    out = out - _laplacian(omega)
    return out - _omega_sources(state)


def _v3_transport(state: SolverState) -> ScalarField:
    """(v+g).grad u^3 + w.grad_h v^3 - Lap v^3 + pressure term."""
    u, w, g, v = state.u, state.ubar_h, state.utilde, state.v
    adv = v + g
    out = _advect(adv, u[2])
    out = out + _advect(w, v[2])
    out = out - _laplacian(v[2])
    return out + _vertical_pressure_term(state)


def vorticity_residual(prev: SolverState, curr: SolverState):
    """L^2 residuals of the omega and v^3 evolution forms across one
    ledger interval, probed with a centered (trapezoidal) difference.

    Second-order in the interval length on top of the solver error; the
    caller owns interpreting the scale.
    """
    if not prev.grid.compatible(curr.grid):
        raise ValueError("states live on different grids")
    dt = curr.t - prev.t
    if dt <= 0:
        raise ValueError(
            f"states not consecutive: t went from {prev.t} to {curr.t}"
        )
    om0 = curl_h(VectorField((prev.v[0], prev.v[1])))
    om1 = curl_h(VectorField((curr.v[0], curr.v[1])))
    d_om = (om1 - om0) * (1.0 / dt)
    res_om = d_om + 0.5 * (_omega_transport(prev) + _omega_transport(curr))

    d_v3 = (curr.v[2] - prev.v[2]) * (1.0 / dt)
    res_v3 = d_v3 + 0.5 * (_v3_transport(prev) + _v3_transport(curr))
    return res_om.l2(), res_v3.l2()


# ---------------------------------------------------------------------------
# algebraic identity checks (no time derivative): the curl form must agree
# with the implemented remainder right side exactly, provided the state is
# consistent (u = (w,0) + g + v).  These double as the manufactured-field
# oracle for the source-term signs.

def _remainder_rhs(state: SolverState) -> VectorField:
    """Lap v - P((v+g).grad u + w.grad_h v + (0,0,d3 pb)) at field level."""
    u, w, g, v = state.u, state.ubar_h, state.utilde, state.v
    grid = state.grid
    adv = v + g
    A = [
        _advect(adv, u[j])
        + _advect(w, (v[0], v[1], v[2])[j])
        for j in range(3)
    ]
    # planar pressure from its per-plane Poisson problem
    bar_adv = VectorField(tuple(_advect(w, w[i]) for i in range(2)))
    div_h = derivative(bar_adv[0], 0) + derivative(bar_adv[1], 1)
    invh = np.zeros_like(grid.xi_h_sq)
    np.divide(1.0, grid.xi_h_sq, out=invh, where=grid.xi_h_sq != 0)
    pbar = ScalarField(grid, div_h.coef * invh)  # (-Lap_h)^{-1} div_h
    A[2] = A[2] + derivative(pbar, 2)
    proj = leray_project(VectorField(tuple(A)))
    return VectorField(
        tuple(_laplacian(v[j]) - proj[j] for j in range(3))
    )


def omega_equation_gap(state: SolverState) -> float:
    """|| curl_h(remainder rhs)^h - curl form of d_t omega ||_{L^2}.

    Zero to roundoff for consistent states; order-one if any source sign
    were wrong.
    """
    rhs = _remainder_rhs(state)
    lhs = curl_h(VectorField((rhs[0], rhs[1])))
    # d_t omega = -(transport + dissipation + sources as bundled above)
    target = -_omega_transport(state)
    return (lhs - target).l2()


def vertical_equation_gap(state: SolverState) -> float:
    """Same consistency check for the vertical remainder equation."""
    rhs = _remainder_rhs(state)
    target = -_v3_transport(state)
    return (rhs[2] - target).l2()
