"""Smallness and largeness functionals of the initial data.

Three tiers, assembled verbatim from named component norms:

  * planar_budget(u0h): controls the horizontal flow alone.  Shape:
    (||grad_h u0h||^2 * Q^{2/delta} + ||u0h||^2) * exp(c_delta (1 + ||u0h||^4)),
    where Q is the ratio of the per-plane dyadic sup norm to the
    per-plane L2 norm, all three base norms taken as sup over planes.
    A vanishing field has budget zero; the ratio is read as zero when
    its denominator vanishes.
  * coupling_budget(u0): geometric mean of the field's split-exponent
    norms at +-delta and of the vertical gradient's at +-1/2, inflated
    by exp(c * planar_budget).
  * smallness_product(u0): ||d3 u0||^2 at horizontal exponent -1/2
    times exp(c * (planar + coupling)).  Small data in this product
    sense can still be large in the sup-type dyadic norm reported
    alongside, which is the whole point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bands import Bands
from .field import VectorField, derivative, gradient_h
from .norms import (NormError, aniso_sobolev, bneg1_inf, sup_vertical_hbesov,
                    sup_vertical_l2h)

__all__ = [
    "SmallnessReport",
    "planar_budget",
    "coupling_budget",
    "smallness_report",
]


def _check_delta(delta: float):
    if not 0 < delta < 1:
        raise NormError(f"delta must lie in (0, 1), got {delta}")


def _finite(name: str, value: float) -> float:
    if not np.isfinite(value):
        raise NormError(f"component norm {name} is not finite: {value}")
    return float(value)


def _horizontal(u) -> VectorField:
    if len(u) == 2:
        return u
    return VectorField([u[0], u[1]])


def planar_budget(u0h, delta: float, c_delta: float = 1.0,
                  bands: Bands | None = None,
                  components: dict | None = None) -> float:
    """Budget of the horizontal part; constant under the vertical
    rescalings that shrink the smallness product."""
    _check_delta(delta)
    uh = _horizontal(u0h)
    grads = [derivative(c, axis) for c in uh.components for axis in (0, 1)]
    grad_sup = _finite("grad_h sup_v L2h", sup_vertical_l2h(grads))
    base_sup = _finite("u_h sup_v L2h", sup_vertical_l2h(uh))
    dyadic_sup = _finite("u_h sup_v B(-delta,2,inf)h",
                         sup_vertical_hbesov(uh, -delta, np.inf, bands))
    if components is not None:
        components["grad_h_sup_v_l2h"] = grad_sup
        components["u_h_sup_v_l2h"] = base_sup
        components["u_h_sup_v_hbesov"] = dyadic_sup
    ratio = 0.0 if base_sup == 0 else dyadic_sup / base_sup
    bracket = grad_sup**2 * ratio ** (2.0 / delta) + base_sup**2
    return float(bracket * np.exp(c_delta * (1.0 + base_sup**4)))


def coupling_budget(u0: VectorField, delta: float, c: float = 1.0,
                    planar: float | None = None,
                    c_delta: float = 1.0,
                    bands: Bands | None = None,
                    components: dict | None = None) -> float:
    _check_delta(delta)
    if planar is None:
        planar = planar_budget(u0, delta, c_delta, bands)
    d3u = VectorField([derivative(comp, 2) for comp in u0.components])
    vals = {
        "u_aniso_minus_delta": aniso_sobolev(u0, -delta, 0.0, name="data"),
        "u_aniso_plus_delta": aniso_sobolev(u0, delta, 0.0, name="data"),
        "d3u_aniso_minus_half": aniso_sobolev(d3u, -0.5, 0.0, name="d3 data"),
        "d3u_aniso_plus_half": aniso_sobolev(d3u, 0.5, 0.0, name="d3 data"),
    }
    for k, v in vals.items():
        _finite(k, v)
    if components is not None:
        components.update(vals)
    prod = (vals["u_aniso_minus_delta"] * vals["u_aniso_plus_delta"]
            * vals["d3u_aniso_minus_half"] * vals["d3u_aniso_plus_half"]) ** 0.5
    # overflow is legitimate for data far outside the small regime; the
    # caller reports the non-finite product instead of raising here
    with np.errstate(over="ignore", invalid="ignore"):
        return float(prod * np.exp(c * planar))


@dataclass(frozen=True)
class SmallnessReport:
    delta: float
    c: float
    c_delta: float
    planar_budget: float
    coupling_budget: float
    vertical_gradient_sq: float
    smallness_product: float
    largeness: float
    components: dict

    def rows(self):
        out = [
            ("planar_budget", self.planar_budget),
            ("coupling_budget", self.coupling_budget),
            ("vertical_gradient_sq", self.vertical_gradient_sq),
            ("smallness_product", self.smallness_product),
            ("largeness_bneg1_inf", self.largeness),
        ]
        out.extend(sorted(self.components.items()))
        return out


def smallness_report(u0: VectorField, delta: float = 0.5, c: float = 1.0,
                     c_delta: float = 1.0,
                     bands: Bands | None = None) -> SmallnessReport:
    """Evaluate all three tiers plus the sup-type largeness norm.

    The product is assembled from exactly the component values stored
    in the report, so report consumers can re-check the arithmetic.
    """
    _check_delta(delta)
    if bands is None:
        bands = Bands(u0[0].grid)
    comps: dict = {}
    a_val = planar_budget(u0, delta, c_delta, bands, comps)
    b_val = coupling_budget(u0, delta, c, a_val, c_delta, bands, comps)
    lhs_sq = comps["d3u_aniso_minus_half"] ** 2
    product = lhs_sq * np.exp(c * (a_val + b_val))
    large = _finite("largeness", bneg1_inf(u0, bands))
    if not np.isfinite(product):
        raise NormError(
            "smallness product overflowed; budgets "
            f"A={a_val:.3e} B={b_val:.3e} are too large for exp"
        )
    return SmallnessReport(delta, c, c_delta, float(a_val), float(b_val),
                           float(lhs_sq), float(product), large, comps)
