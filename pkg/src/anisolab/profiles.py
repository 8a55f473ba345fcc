"""Smooth localized profiles with closed-form derivatives.

Generators build divergence-free data from two scalar shapes: a stream
bump psi giving a horizontal swirl (-d2 psi, d1 psi), and a vector
potential (p1 z2 g, p2 z1 g, p3 g) whose curl supplies the fully
three-dimensional part.  Both identities (horizontal divergence of the
swirl, divergence of a curl) hold for the continuous functions, at
every point, so sampled fields are solenoidal up to the Gaussian's
spectral tail beyond the grid.

The x-weighted first two potential slots are arranged so every curl
component has zero horizontal mean on each plane: the offending means
reduce to integrals of (1 - 2 z^2 / w^2) g, which vanish by the second
moment of the Gaussian, separately in each term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Bump", "ProfileSpec", "ProfileError"]

BOUNDARY_TOL = 1e-8


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Bump:
    """amplitude * exp(-sum_i (z_i / width_i)^2), z = x - center."""

    amplitude: float = 1.0
    width: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if any(w <= 0 for w in self.width):
            raise ProfileError(f"bump widths must be positive, got {self.width}")

    def value(self, z1, z2, z3):
        w = self.width
        return self.amplitude * np.exp(
            -((z1 / w[0]) ** 2 + (z2 / w[1]) ** 2 + (z3 / w[2]) ** 2)
        )

    def d(self, axis: int, z1, z2, z3):
        z = (z1, z2, z3)[axis]
        return -2.0 * z / self.width[axis] ** 2 * self.value(z1, z2, z3)

    def required_length(self, axis: int, tol: float = BOUNDARY_TOL,
                        weighted: bool = False) -> float:
        """Box length on `axis` for boundary values <= tol * amplitude.

        `weighted` accounts for an extra |z| prefactor (the potential's
        x-weighted slots); solved by bisection on (1+h) exp(-(h/w)^2).
        """
        w = self.width[axis]

        def f(h):
            pre = (1.0 + h) if weighted else 1.0
            return pre * np.exp(-((h / w) ** 2)) - tol

        lo, hi = 0.0, 100.0 * w
        if f(hi) > 0:
            raise ProfileError("profile does not decay; widths unreasonable")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
        return 2.0 * hi


@dataclass(frozen=True)
class ProfileSpec:
    """Shapes and amplitudes for the two generator profiles.

    swirl_amplitude scales the stream bump psi; potential_amplitude
    scales the vector potential, and potential_coeffs are the slot
    factors (p1, p2, p3) of (p1 z2 g, p2 z1 g, p3 g).  Setting
    potential_amplitude = 0 produces purely horizontal data.  The
    default uses the potential part alone, which carries the vertical
    velocity and the horizontal divergence, so generated data exercises
    the corrector channel; the swirl channel is opt-in.
    """

    swirl_amplitude: float = 0.0
    swirl_width: tuple[float, float, float] = (1.0, 1.0, 1.0)
    potential_amplitude: float = 1.0
    potential_width: tuple[float, float, float] = (1.0, 1.0, 1.0)
    potential_coeffs: tuple[float, float, float] = (1.0, 0.6, 0.8)

    def _psi(self) -> Bump:
        return Bump(self.swirl_amplitude, tuple(self.swirl_width))

    def _g(self) -> Bump:
        return Bump(self.potential_amplitude, tuple(self.potential_width))

    def swirl(self, z1, z2, z3):
        """(-d2 psi, d1 psi): horizontally divergence-free by symmetry
        of mixed partials."""
        psi = self._psi()
        return -psi.d(1, z1, z2, z3), psi.d(0, z1, z2, z3)

    def solenoid(self, z1, z2, z3):
        """curl of (p1 z2 g, p2 z1 g, p3 g), written out in closed form."""
        p1, p2, p3 = self.potential_coeffs
        g = self._g()
        gv = g.value(z1, z2, z3)
        g1 = g.d(0, z1, z2, z3)
        g2 = g.d(1, z1, z2, z3)
        g3 = g.d(2, z1, z2, z3)
        w1 = p3 * g2 - p2 * z1 * g3
        w2 = p1 * z2 * g3 - p3 * g1
        w3 = p2 * (gv + z1 * g1) - p1 * (gv + z2 * g2)
        return w1, w2, w3

    def required_box(self, tol: float = BOUNDARY_TOL) -> tuple[float, float, float]:
        """Smallest box (per axis) on which both profiles decay to tol
        relative to peak, including the |z| prefactors of the curl."""
        psi, g = self._psi(), self._g()
        out = []
        for axis in range(3):
            need = psi.required_length(axis, tol)
            if self.potential_amplitude != 0.0:
                need = max(need, g.required_length(axis, tol, weighted=True))
            out.append(need)
        return tuple(out)

    def validate_box(self, box: tuple[float, float, float],
                     tol: float = BOUNDARY_TOL):
        req = self.required_box(tol)
        bad = [i for i in range(3) if box[i] < req[i]]
        if bad:
            raise ProfileError(
                "profile does not fit the box: axis lengths "
                f"{tuple(round(box[i], 3) for i in bad)} are below the "
                f"required {tuple(round(req[i], 3) for i in bad)} "
                f"(axes {bad}, boundary tolerance {tol:g})"
            )
