"""Paraproduct splitting of a pointwise product along horizontal bands.

    a b = T[a, b] + T[b, a] + R[a, b]

with  T[a, b] = sum_j S_{j-1} a * delta_j b  (low-high) and the
remainder collecting the diagonal interactions |j - j'| <= 1.  The
horizontal-mean parts of a and b (modes with xi_h = 0) are invisible to
the band operators; their mutual product goes into the remainder, while
their products against the banded parts are picked up by the low-pass
factors S_{j-1}.  With that convention the three pieces sum exactly to
the dealiased product: every piece is a (filtered a * filtered b)
dealiased product, and dealiasing is bilinear, so the telescoping
identity of the cutoffs survives discretization verbatim.
"""

from __future__ import annotations

from .bands import Bands
from .field import ScalarField, dealiased_product
from .project import horizontal_mean_part

__all__ = ["bony_split"]


def _zero_like(f: ScalarField) -> ScalarField:
    import numpy as np
    return ScalarField(f.grid, np.zeros(f.grid.shape, dtype=complex))


def paraproduct(bands: Bands, a: ScalarField, b: ScalarField) -> ScalarField:
    """T[a, b] = sum_j S_{j-1} a * delta_j b over the grid's band range."""
    out = _zero_like(a)
    for j in bands.range_h:
        lo = bands.s_low_h(a, j - 1)
        hi = bands.delta_h(b, j)
        out = out + dealiased_product(lo, hi)
    return out


def bony_split(bands: Bands, a: ScalarField, b: ScalarField):
    """Return (T[a,b], T[b,a], R[a,b]); the three sum to the dealiased
    product of a and b exactly."""
    t_ab = paraproduct(bands, a, b)
    t_ba = paraproduct(bands, b, a)
    rem = dealiased_product(horizontal_mean_part(a), horizontal_mean_part(b))
    for j in bands.range_h:
        da = bands.delta_h(a, j)
        for d in (-1, 0, 1):
            jp = j + d
            if jp not in bands.range_h:
                continue
            rem = rem + dealiased_product(da, bands.delta_h(b, jp))
    return t_ab, t_ba, rem
