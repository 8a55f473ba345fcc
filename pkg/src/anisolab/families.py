"""Initial-data families and the auxiliary split of a velocity field.

Four generators share one pipeline: produce component samples (or
coefficients directly), move to spectral space, apply the dealias mask,
project solenoidal, and verify the divergence and boundary-decay
invariants.  The slow-type families evaluate profiles at rescaled
coordinates while the box stretches by the inverse factor, so the grid
samples are literally parameter-independent and only the box metadata
(volume elements, wavenumbers) carries the parameter.  That makes the
advertised scaling laws exact identities of the discretization rather
than asymptotic statements.

Family conventions:

  * Slow(eps): components (v1 + eps w1, v2 + eps w2, w3) evaluated at
    (x_h, eps x3); box3 = base3 / eps.
  * MultiScale(eps_1..eps_N): sum of slow parts sharing one physical
    grid sized for the smallest eps.  Parts with larger eps are
    narrower relative to the grid; an explicit resolution check bounds
    their unresolved vertical tail.
  * SlowFast(eps, lam): (v1 + eps w1, lam (v2 + eps w2), lam w3) at
    (lam x1, x2, eps x3); box1 = base1 / lam, box3 = base3 / eps.  The
    (1, lam, lam) amplitude pattern keeps the divergence identity.
  * FreqCut(cut_radius): a spectrally defined solenoidal wave packet
    with all horizontal wavenumbers |xi_h| <= cut_radius removed
    exactly, rescaled so || d3 u ||_L2 matches the uncut packet.  The
    construction never round-trips through physical space, so the far
    spectral tail is exact to rounding rather than drowned in
    transform noise.
  * TaylorGreen(amplitude): the planar swirl (sin x1 cos x2,
    -cos x1 sin x2, 0), given spectrally.  Its vorticity sits on a
    single Laplacian shell and is advected along its own streamlines,
    so the exact solution is pure heat decay and the planar system
    reproduces the full flow: a null case for the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import ScalarField, VectorField, derivative, divergence_h, from_values
from .grid import Grid
from .norms import aniso_sobolev
from .profiles import BOUNDARY_TOL, ProfileError, ProfileSpec
from .project import (assert_divergence_free, helmholtz_h, inverse_laplacian_h,
                      leray_project)

__all__ = [
    "FamilyError",
    "Slow",
    "MultiScale",
    "SlowFast",
    "FreqCut",
    "SpectralTail",
    "TaylorGreen",
    "generate",
    "make_grid",
    "scaling_sweep",
    "SweepReport",
    "bar_u0",
    "tilde_u0",
]

DIV_TOL = 1e-12
_DEFAULT_BASE = (4 * np.pi, 4 * np.pi, 4 * np.pi)


class FamilyError(ValueError):
    pass


def _centered_axes(grid: Grid, scale=(1.0, 1.0, 1.0), center=None):
    """Broadcastable profile coordinates scale_i * x_i - center_i."""
    a1, a2, a3 = grid.axes()
    c = center
    return (
        (scale[0] * a1 - c[0]).reshape(-1, 1, 1),
        (scale[1] * a2 - c[1]).reshape(1, -1, 1),
        (scale[2] * a3 - c[2]).reshape(1, 1, -1),
    )


@dataclass(frozen=True)
class Slow:
    eps: float
    profile: ProfileSpec = dc_field(default_factory=ProfileSpec)
    base_box: tuple[float, float, float] = _DEFAULT_BASE

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise FamilyError(f"eps must lie in (0, 1], got {self.eps}")

    def box(self) -> tuple[float, float, float]:
        b = self.base_box
        return (b[0], b[1], b[2] / self.eps)

    def _samples(self, grid: Grid):
        self.profile.validate_box(self.base_box)
        center = tuple(b / 2 for b in self.base_box)
        z = _centered_axes(grid, (1.0, 1.0, self.eps), center)
        v1, v2 = self.profile.swirl(*z)
        w1, w2, w3 = self.profile.solenoid(*z)
        e = self.eps
        return (v1 + e * w1, v2 + e * w2, np.broadcast_to(w3, grid.shape))


@dataclass(frozen=True)
class MultiScale:
    eps: tuple[float, ...]
    profiles: tuple[ProfileSpec, ...] = ()
    base_box: tuple[float, float, float] = (4 * np.pi, 4 * np.pi, 6 * np.pi)
    resolution_tol: float = 1e-6

    def __post_init__(self):
        if len(self.eps) < 1:
            raise FamilyError("MultiScale needs at least one eps")
        if any(not 0 < e <= 1 for e in self.eps):
            raise FamilyError(f"every eps must lie in (0, 1], got {self.eps}")
        if not self.profiles:
            wide = ProfileSpec(swirl_width=(1.0, 1.0, 2.0),
                               potential_width=(1.0, 1.0, 2.0))
            object.__setattr__(self, "profiles", (wide,) * len(self.eps))
        if len(self.profiles) != len(self.eps):
            raise FamilyError("need one profile per eps (or none for defaults)")

    def box(self) -> tuple[float, float, float]:
        b = self.base_box
        return (b[0], b[1], b[2] / min(self.eps))

    def _check_resolution(self, grid: Grid):
        # a part squeezed by eps_k on a grid sized for eps_min keeps only
        # 1/ratio of its vertical bandwidth; bound the lost Gaussian tail
        nyq = np.pi * grid.shape[2] / grid.box[2]
        for e, spec in zip(self.eps, self.profiles):
            w3 = min(spec.swirl_width[2], spec.potential_width[2])
            tail = np.exp(-((0.5 * w3 * nyq / e) ** 2))
            if tail > self.resolution_tol:
                need = int(np.ceil(
                    2 * np.sqrt(np.log(1 / self.resolution_tol))
                    * e * grid.box[2] / (np.pi * w3)))
                raise FamilyError(
                    f"part eps={e} is vertically under-resolved (tail "
                    f"{tail:.1e} > {self.resolution_tol:g}); "
                    f"need vertical resolution >= {need}"
                )

    def _samples(self, grid: Grid):
        self._check_resolution(grid)
        out = [np.zeros(grid.shape) for _ in range(3)]
        for e, spec in zip(self.eps, self.profiles):
            spec.validate_box(self.base_box)
            center = tuple(b / 2 for b in self.base_box)
            z = _centered_axes(grid, (1.0, 1.0, e), center)
            v1, v2 = spec.swirl(*z)
            w1, w2, w3 = spec.solenoid(*z)
            out[0] += v1 + e * w1
            out[1] += v2 + e * w2
            out[2] += np.broadcast_to(w3, grid.shape)
        return tuple(out)


@dataclass(frozen=True)
class SlowFast:
    eps: float
    lam: float
    profile: ProfileSpec = dc_field(default_factory=ProfileSpec)
    base_box: tuple[float, float, float] = _DEFAULT_BASE

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise FamilyError(f"eps must lie in (0, 1], got {self.eps}")
        if self.lam < 1:
            raise FamilyError(f"lam must be >= 1, got {self.lam}")

    def box(self) -> tuple[float, float, float]:
        b = self.base_box
        return (b[0] / self.lam, b[1], b[2] / self.eps)

    def _samples(self, grid: Grid):
        self.profile.validate_box(self.base_box)
        center = tuple(b / 2 for b in self.base_box)
        z = _centered_axes(grid, (self.lam, 1.0, self.eps), center)
        v1, v2 = self.profile.swirl(*z)
        w1, w2, w3 = self.profile.solenoid(*z)
        e, lam = self.eps, self.lam
        return (v1 + e * w1, lam * (v2 + e * w2),
                np.broadcast_to(lam * w3, grid.shape))


@dataclass(frozen=True)
class SpectralTail:
    """Solenoidal wave packet i xi x A with a Gaussian spectral
    envelope; defined directly by its Fourier coefficients."""

    amplitude: float = 1.0
    sigma_h: float = 3.0
    sigma_v: float = 2.0
    coeffs: tuple[float, float, float] = (1.0, 0.6, 0.8)

    def coefficients(self, grid: Grid):
        env = self.amplitude * np.exp(
            -(grid.xi_h_sq / (2 * self.sigma_h**2)
              + grid.xi3**2 / (2 * self.sigma_v**2))
        )
        a1 = self.coeffs[0] * env
        a2 = self.coeffs[1] * env
        a3 = self.coeffs[2] * env
        c1 = 1j * (grid.xi2 * a3 - grid.xi3 * a2)
        c2 = 1j * (grid.xi3 * a1 - grid.xi1 * a3)
        c3 = 1j * (grid.xi1 * a2 - grid.xi2 * a1)
        m = grid.dealias_mask
        return (np.broadcast_to(c1, grid.shape) * m,
                np.broadcast_to(c2, grid.shape) * m,
                np.broadcast_to(c3, grid.shape) * m)


@dataclass(frozen=True)
class FreqCut:
    cut_radius: float
    base: SpectralTail = dc_field(default_factory=SpectralTail)
    box_lengths: tuple[float, float, float] = (2 * np.pi, 2 * np.pi, 2 * np.pi)

    def __post_init__(self):
        if self.cut_radius <= 0:
            raise FamilyError(f"cut_radius must be positive, got {self.cut_radius}")

    def box(self) -> tuple[float, float, float]:
        return self.box_lengths

    def _coefficients(self, grid: Grid):
        keep = grid.dealias_keep
        bound = min(2 * np.pi * keep[0] / grid.box[0],
                    2 * np.pi * keep[1] / grid.box[1])
        if self.cut_radius >= bound:
            raise FamilyError(
                f"cut_radius {self.cut_radius:g} must lie below the dealiased "
                f"horizontal wavenumber bound {bound:g} of this grid"
            )
        raw = self.base.coefficients(grid)
        d3_sq_before = sum(
            float(np.sum(grid.xi3**2 * (c.real**2 + c.imag**2))) for c in raw)
        cut = grid.xi_h_sq <= self.cut_radius**2
        c = [np.where(cut, 0.0, x) for x in raw]
        d3_sq_after = sum(
            float(np.sum(grid.xi3**2 * (x.real**2 + x.imag**2))) for x in c)
        if d3_sq_after == 0.0:
            raise FamilyError(
                f"cut_radius {self.cut_radius:g} removed the whole spectrum")
        s = np.sqrt(d3_sq_before / d3_sq_after)
        return tuple(s * x for x in c)


@dataclass(frozen=True)
class TaylorGreen:
    """Planar x3-independent swirl from the stream function
    -amplitude sin(xi1 x1) sin(xi2 x2); u = (-d2 psi, d1 psi, 0)."""

    amplitude: float = 1.0
    modes: tuple[int, int] = (1, 1)
    box_lengths: tuple[float, float, float] = (2 * np.pi, 2 * np.pi, 2 * np.pi)

    def __post_init__(self):
        if self.modes[0] < 1 or self.modes[1] < 1:
            raise FamilyError(f"modes must be positive, got {self.modes}")

    def box(self) -> tuple[float, float, float]:
        return self.box_lengths

    def _coefficients(self, grid: Grid):
        m1, m2 = self.modes
        if m1 > grid.dealias_keep[0] or m2 > grid.dealias_keep[1]:
            raise FamilyError(
                f"modes {self.modes} exceed the dealiased bounds "
                f"{grid.dealias_keep[:2]} of this grid"
            )
        psi = np.zeros(grid.shape, dtype=complex)
        for s1 in (1, -1):
            for s2 in (1, -1):
                psi[s1 * m1, s2 * m2, 0] = 0.25 * s1 * s2 * self.amplitude
        return (-1j * grid.xi2 * psi, 1j * grid.xi1 * psi,
                np.zeros(grid.shape, dtype=complex))


def make_grid(family, shape) -> Grid:
    """Grid whose box the family mandates at the given resolution."""
    return Grid(family.box(), shape)


def generate(family, grid: Grid) -> VectorField:
    """Build the family's velocity field on `grid`: sample (or fill in
    coefficients), dealias, project solenoidal, verify invariants."""
    expect = family.box()
    if not np.allclose(grid.box, expect, rtol=1e-12, atol=0.0):
        raise FamilyError(
            f"grid box {tuple(grid.box)} does not match the family's "
            f"required box {tuple(expect)}"
        )
    if hasattr(family, "_coefficients"):
        u = VectorField([ScalarField(grid, np.ascontiguousarray(c, dtype=complex))
                         for c in family._coefficients(grid)])
    else:
        comps = family._samples(grid)
        _check_boundary_decay(comps)
        u = VectorField([from_values(grid, v).dealiased() for v in comps])
    u = leray_project(u)
    assert_divergence_free(u, DIV_TOL, "generated data")
    return u


def _check_boundary_decay(comps, tol: float = BOUNDARY_TOL):
    peak = max(np.abs(v).max() for v in comps)
    if peak == 0:
        return
    worst = 0.0
    for v in comps:
        v = np.broadcast_to(v, np.broadcast_shapes(*(c.shape for c in comps)))
        worst = max(worst, np.abs(v[0]).max(), np.abs(v[:, 0]).max(),
                    np.abs(v[:, :, 0]).max())
    if worst > tol * peak:
        raise ProfileError(
            f"sampled data does not decay at the box boundary: boundary/peak "
            f"= {worst / peak:.2e} > {tol:g}; enlarge the box"
        )


@dataclass(frozen=True)
class SweepReport:
    parameter: str
    values: tuple[float, ...]
    norms: tuple[float, ...]
    slope: float | None
    intercept: float | None
    max_log_residual: float | None
    exact_zero: bool

    def as_rows(self):
        rows = []
        for v, n in zip(self.values, self.norms):
            rows.append({"parameter": self.parameter, "value": v,
                         "d3_norm": n})
        return rows


def _geometric(values) -> bool:
    v = np.asarray(values, dtype=float)
    if len(v) < 2 or np.any(v <= 0):
        return False
    r = v[1:] / v[:-1]
    return bool(np.allclose(r, r[0], rtol=1e-9))


def scaling_sweep(make_family, values, shape, parameter="eps") -> SweepReport:
    """Evaluate || d3 u0 ||_{H^{-1/2,0}} along a geometric parameter
    sweep and fit the log-log slope.

    make_family maps a parameter value to a family instance; the grid
    resolution stays fixed while each family picks its own box.
    """
    values = tuple(float(v) for v in values)
    if len(values) < 4:
        raise FamilyError(f"sweep needs at least 4 values, got {len(values)}")
    if not _geometric(values):
        raise FamilyError("sweep values must form a geometric progression")
    out = []
    for v in values:
        fam = make_family(v)
        grid = make_grid(fam, shape)
        u = generate(fam, grid)
        d3 = VectorField([derivative(c, 2) for c in u.components])
        out.append(aniso_sobolev(d3, -0.5, 0.0, name=f"d3 u0 ({parameter}={v})"))
    norms_t = tuple(out)
    scale = max(norms_t)
    if scale == 0 or all(n <= 1e-14 * max(scale, 1.0) for n in norms_t):
        return SweepReport(parameter, values, norms_t, None, None, None, True)
    ln_v = np.log(values)
    ln_n = np.log(norms_t)
    slope, intercept = np.polyfit(ln_v, ln_n, 1)
    resid = ln_n - (slope * ln_v + intercept)
    return SweepReport(parameter, values, norms_t, float(slope),
                       float(intercept), float(np.abs(resid).max()), False)


def bar_u0(u0h: VectorField) -> VectorField:
    """Divergence-free part of a horizontal field: the curl piece of
    its Helmholtz split (per mode xi_h^perp (xi_h^perp . u) / |xi_h|^2).

    Requires zero horizontal mean per plane; those modes belong to
    neither Helmholtz part.
    """
    if len(u0h) != 2:
        raise FamilyError("bar_u0 expects a horizontal (2-component) field")
    g = u0h[0].grid
    mean_sq = sum(
        float(np.sum((np.abs(c.coef) ** 2) * g.h_zero_mask)) for c in u0h.components)
    tot_sq = sum(float(np.sum(np.abs(c.coef) ** 2)) for c in u0h.components)
    if tot_sq > 0 and mean_sq > 1e-20 * tot_sq:
        raise FamilyError(
            "bar_u0 input carries horizontal plane means (relative mass "
            f"{np.sqrt(mean_sq / tot_sq):.2e}); remove them first"
        )
    curl_part, _ = helmholtz_h(u0h)
    return curl_part


def tilde_u0(u0: VectorField, tol: float = 1e-10) -> VectorField:
    """Corrector initial state: horizontal part -grad_h lap_h^{-1} d3 u3,
    vertical part u3 itself.

    For solenoidal input this equals u0 minus its planar part
    (bar_u0(u0^h), 0) mode by mode away from xi_h = 0, which is the
    decomposition identity the tests pin down.
    """
    if len(u0) != 3:
        raise FamilyError("tilde_u0 expects a 3-component field")
    assert_divergence_free(u0, tol, "tilde_u0 input")
    d3u3 = derivative(u0[2], 2)
    phi = inverse_laplacian_h(d3u3)
    th = VectorField([
        ScalarField(u0[0].grid, -derivative(phi, 0).coef),
        ScalarField(u0[0].grid, -derivative(phi, 1).coef),
    ])
    return VectorField([th[0], th[1], u0[2].copy()])
