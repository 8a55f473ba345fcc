"""Mode-wise projections and inverse Laplacians.

Zero-mode conventions, fixed here and relied on everywhere else:

  * the 3-D Leray projection leaves the xi = 0 mode untouched (constants
    are divergence-free);
  * the horizontal Helmholtz split assigns xi_h = 0 coefficients to
    neither part; `horizontal_mean_part` exposes what was left out;
  * inverse Laplacians return 0 on the modes where the symbol vanishes
    and complain if those modes carry mass above a tolerance.
"""

from __future__ import annotations

import numpy as np

from .field import ScalarField, VectorField, curl_h, divergence, divergence_h
from .grid import Grid

__all__ = [
    "leray_project",
    "helmholtz_h",
    "horizontal_mean_part",
    "inverse_laplacian",
    "inverse_laplacian_h",
    "assert_divergence_free",
]


def _inv(symbol: np.ndarray) -> np.ndarray:
    out = np.zeros_like(symbol)
    np.divide(1.0, symbol, out=out, where=symbol != 0)
    return out


def leray_project(u: VectorField) -> VectorField:
    """P u = u - grad lap^{-1} div u, applied coefficient-wise.

    Per mode: u_i -> u_i - xi_i (xi . u) / |xi|^2, with xi = 0 passed
    through unchanged.
    """
    if len(u) != 3:
        raise ValueError("leray_project expects a 3-component field")
    g = u.grid
    xi_dot_u = (
        g.xi1 * u[0].coef + g.xi2 * u[1].coef + g.xi3 * u[2].coef
    )
    s = xi_dot_u * _inv(g.xi_sq)
    return VectorField(
        (
            ScalarField(g, u[0].coef - g.xi1 * s),
            ScalarField(g, u[1].coef - g.xi2 * s),
            ScalarField(g, u[2].coef - g.xi3 * s),
        )
    )


def helmholtz_h(uh: VectorField):
    """Split a horizontal field into curl-free-free and gradient parts.

    Returns (curl_part, div_part) with

        curl_part = grad_h^perp lap_h^{-1} curl_h u^h
        div_part  = grad_h   lap_h^{-1} div_h  u^h

    Both parts vanish on xi_h = 0; the identity
    u^h = curl_part + div_part + horizontal_mean_part(u^h) is exact.
    """
    if len(uh) != 2:
        raise ValueError("helmholtz_h expects a 2-component field")
    g = uh.grid
    inv_h = _inv(np.broadcast_to(g.xi_h_sq, (g.shape[0], g.shape[1], 1)))
    w = curl_h(uh).coef * inv_h  # lap_h^{-1} curl_h, up to sign handled below
    d = divergence_h(uh).coef * inv_h
    # grad_h^perp = (-d2, d1); symbols: lap_h^{-1} has symbol -1/|xi_h|^2
    curl_part = VectorField(
        (
            ScalarField(g, (1j * g.xi2) * w * 1.0),
            ScalarField(g, -(1j * g.xi1) * w * 1.0),
        )
    )
    div_part = VectorField(
        (
            ScalarField(g, -(1j * g.xi1) * d),
            ScalarField(g, -(1j * g.xi2) * d),
        )
    )
    return curl_part, div_part


def horizontal_mean_part(f):
    """The xi_h = 0 content (per-plane horizontal mean) of a field."""
    if isinstance(f, VectorField):
        return VectorField(tuple(horizontal_mean_part(c) for c in f))
    g = f.grid
    return ScalarField(g, np.where(g.h_zero_mask, f.coef, 0.0))


def inverse_laplacian(f: ScalarField, tol: float = 1e-10) -> ScalarField:
    """Solve lap p = f; requires the xi = 0 mode of f to (nearly) vanish."""
    g = f.grid
    zero_mass = abs(f.coef.flat[0])
    scale = f.l2()
    if scale > 0 and zero_mass > tol * scale:
        raise ValueError(
            f"inverse_laplacian: mean mode carries {zero_mass:.3e} "
            f"(> {tol:.1e} * ||f||)"
        )
    return ScalarField(g, f.coef * -_inv(g.xi_sq))


def inverse_laplacian_h(f: ScalarField, tol: float = 1e-10) -> ScalarField:
    """Solve lap_h p = f plane-by-plane; xi_h = 0 content of f must vanish."""
    g = f.grid
    mask = np.broadcast_to(g.h_zero_mask, g.shape)
    zero_mass = np.sqrt(g.vol * np.sum(np.abs(f.coef[mask]) ** 2))
    scale = f.l2()
    if scale > 0 and zero_mass > tol * scale:
        raise ValueError(
            f"inverse_laplacian_h: xi_h = 0 modes carry {zero_mass:.3e} "
            f"(> {tol:.1e} * ||f||)"
        )
    inv_h = _inv(np.broadcast_to(g.xi_h_sq, (g.shape[0], g.shape[1], 1)))
    return ScalarField(g, f.coef * -inv_h)


def assert_divergence_free(u: VectorField, tol: float, what: str = "field"):
    if len(u) == 3:
        d = divergence(u)
    else:
        d = divergence_h(u)
    rel = d.l2() / max(u.l2(), 1e-300)
    if rel > tol:
        raise ValueError(
            f"{what} is not divergence-free: relative residual {rel:.3e} > {tol:.1e}"
        )
    return rel
