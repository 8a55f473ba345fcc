"""Dyadic frequency localization: cutoffs, band operators, band sums.

The radial cutoff pair (chi, phi) is built from the normalized integral
of the standard bump exp(-1/(1-r^2)):

    chi = 1 on |t| <= 3/4, 0 on |t| >= 4/3, smooth step in between
    phi(t) = chi(t/2) - chi(t)

so Supp phi = {3/4 <= |t| <= 8/3},

    sum_{j in Z} phi(2^-j t) = 1   for t > 0, and
    chi(t) + sum_{j >= 0} phi(2^-j t) = 1,

both holding exactly by telescoping (independent of how accurately the
step integral is tabulated).  At any t > 0 at most two consecutive phi
bands are nonzero, which gives the two-sided factor-2 almost-
orthogonality used by the norm layer.

Band operators act as real Fourier multipliers:

    delta_h(k):  phi(2^-k |xi_h|)      delta_v(l):  phi(2^-l |xi_3|)
    s_low_h(k):  chi(2^-k |xi_h|)      s_low_v(l):  chi(2^-l |xi_3|)
    delta_iso(j): phi(2^-j |xi|)

Band index ranges are computed from the wavenumbers actually present on
the grid; boxes longer than 2*pi produce negative indices.
"""

from __future__ import annotations

import math

import numpy as np

from .field import ScalarField, VectorField
from .grid import Grid

__all__ = ["CutoffPair", "Bands", "default_cutoff"]

_LOG2_LO = math.log2(8.0 / 3.0)   # band k covers [3/4 * 2^k, 8/3 * 2^k]
_LOG2_HI = math.log2(4.0 / 3.0)


class CutoffPair:
    """Smooth radial cutoff chi and induced annulus bump phi."""

    def __init__(self, resolution: int = 8192, corrupt: bool = False):
        r = np.linspace(-1.0, 1.0, resolution + 1)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            bump = np.where(np.abs(r) < 1.0, np.exp(-1.0 / (1.0 - r * r)), 0.0)
        cum = np.concatenate(([0.0], np.cumsum((bump[1:] + bump[:-1]) * 0.5)))
        self._knots = r
        self._step = cum / cum[-1]
        # deliberately broken variant used as a verification negative control
        self._phi_scale = 2.02 if corrupt else 2.0
        self.corrupt = corrupt

    def chi(self, t):
        """1 on |t| <= 3/4, 0 on |t| >= 4/3, smooth monotone in between."""
        t = np.abs(np.asarray(t, dtype=np.float64))
        s = 2.0 * (t - 0.75) / (4.0 / 3.0 - 0.75) - 1.0
        out = 1.0 - np.interp(s, self._knots, self._step)
        return np.where(t <= 0.75, 1.0, np.where(t >= 4.0 / 3.0, 0.0, out))

    def phi(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.chi(t / self._phi_scale) - self.chi(t)


_DEFAULT = None


def default_cutoff() -> CutoffPair:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = CutoffPair()
    return _DEFAULT


def _band_range(xi_min: float, xi_max: float) -> range:
    """Indices k for which [3/4 2^k, 8/3 2^k] meets [xi_min, xi_max]."""
    if xi_max <= 0:
        return range(0)
    lo = math.ceil(math.log2(xi_min) - _LOG2_LO)
    hi = math.floor(math.log2(xi_max) + _LOG2_HI)
    return range(lo, hi + 1)


class _Axis:
    """Per-mode compact band data for one magnitude array.

    Every positive magnitude lies in at most two consecutive bands
    (k0, k0 + 1); we store k0 with both weights, which turns any
    sum-over-bands of L2 masses into a pair of bincounts.
    """

    def __init__(self, cutoff: CutoffPair, mag: np.ndarray, rng: range):
        self.range = rng
        pos = mag > 0
        k0 = np.zeros(mag.shape, dtype=np.int64)
        with np.errstate(divide="ignore"):
            k0[pos] = np.ceil(np.log2(mag[pos]) - _LOG2_LO).astype(np.int64)
        w0 = np.where(pos, cutoff.phi(mag / np.exp2(k0)), 0.0)
        w1 = np.where(pos, cutoff.phi(mag / np.exp2(k0 + 1)), 0.0)
        nb = max(len(rng), 1)
        idx0 = np.clip(k0 - (rng.start if rng else 0), 0, nb - 1)
        self.nbands = nb
        self.idx0 = idx0
        self.idx1 = np.minimum(idx0 + 1, nb - 1)
        self.w0sq = np.where(pos, w0 * w0, 0.0)
        self.w1sq = np.where(pos, w1 * w1, 0.0)

    def accumulate(self, mass: np.ndarray) -> np.ndarray:
        """sum_m phi_k(m)^2 * mass[m] for every band k, as a vector."""
        a = np.bincount(
            self.idx0.ravel(), weights=(self.w0sq * mass).ravel(),
            minlength=self.nbands,
        )
        a += np.bincount(
            self.idx1.ravel(), weights=(self.w1sq * mass).ravel(),
            minlength=self.nbands,
        )
        return a


class Bands:
    """Band operators and fast band-mass sums for one grid."""

    def __init__(self, grid: Grid, cutoff: CutoffPair | None = None):
        self.grid = grid
        self.cutoff = cutoff if cutoff is not None else default_cutoff()
        g = grid
        self.range_h = _band_range(g.min_positive_xi_h(), g.max_xi_h())
        self.range_v = _band_range(g.min_positive_xi3(), g.max_xi3())
        self.range_iso = _band_range(
            min(g.min_positive_xi_h(), g.min_positive_xi3()), g.max_xi_iso()
        )
        self._axis_h = _Axis(self.cutoff, g.xi_h[..., 0], self.range_h)
        self._axis_v = _Axis(self.cutoff, g.xi3_abs[0, 0, :], self.range_v)
        self._mult_cache: dict = {}

    # --- multipliers -------------------------------------------------

    def mult_h(self, k: int) -> np.ndarray:
        key = ("h", k)
        if key not in self._mult_cache:
            m = self.cutoff.phi(self.grid.xi_h / 2.0**k)
            self._mult_cache[key] = m
        return self._mult_cache[key]

    def mult_low_h(self, k: int) -> np.ndarray:
        key = ("lh", k)
        if key not in self._mult_cache:
            self._mult_cache[key] = self.cutoff.chi(self.grid.xi_h / 2.0**k)
        return self._mult_cache[key]

    def mult_v(self, l: int) -> np.ndarray:
        key = ("v", l)
        if key not in self._mult_cache:
            self._mult_cache[key] = self.cutoff.phi(self.grid.xi3_abs / 2.0**l)
        return self._mult_cache[key]

    def mult_low_v(self, l: int) -> np.ndarray:
        key = ("lv", l)
        if key not in self._mult_cache:
            self._mult_cache[key] = self.cutoff.chi(self.grid.xi3_abs / 2.0**l)
        return self._mult_cache[key]

    def mult_iso(self, j: int) -> np.ndarray:
        key = ("iso", j)
        if key not in self._mult_cache:
            self._mult_cache[key] = self.cutoff.phi(self.grid.xi_abs / 2.0**j)
        return self._mult_cache[key]

    # --- band-pass operators ----------------------------------------

    def delta_h(self, f: ScalarField, k: int) -> ScalarField:
        return ScalarField(self.grid, f.coef * self.mult_h(k))

    def s_low_h(self, f: ScalarField, k: int) -> ScalarField:
        return ScalarField(self.grid, f.coef * self.mult_low_h(k))

    def delta_v(self, f: ScalarField, l: int) -> ScalarField:
        return ScalarField(self.grid, f.coef * self.mult_v(l))

    def s_low_v(self, f: ScalarField, l: int) -> ScalarField:
        return ScalarField(self.grid, f.coef * self.mult_low_v(l))

    def delta_iso(self, f: ScalarField, j: int) -> ScalarField:
        return ScalarField(self.grid, f.coef * self.mult_iso(j))

    # --- fast squared band masses -----------------------------------

    def _mass_arrays(self, fields) -> np.ndarray:
        """|c|^2 summed over the given scalar fields (vol weight applied)."""
        if isinstance(fields, ScalarField):
            fields = (fields,)
        elif isinstance(fields, VectorField):
            fields = fields.components
        acc = None
        for f in fields:
            m = (f.coef.real**2 + f.coef.imag**2)
            acc = m if acc is None else acc + m
        return self.grid.vol * acc

    def band_l2sq_h(self, fields) -> np.ndarray:
        """||delta_h(k) f||_L2^2 for every k in range_h (vector-valued
        input combines components in l2)."""
        mass = self._mass_arrays(fields).sum(axis=2)
        return self._axis_h.accumulate(mass)

    def band_l2sq_v(self, fields) -> np.ndarray:
        mass = self._mass_arrays(fields).sum(axis=(0, 1))
        return self._axis_v.accumulate(mass)

    def band_l2sq_hv(self, fields) -> np.ndarray:
        """2-D array of ||delta_h(k) delta_v(l) f||_L2^2."""
        mass = self._mass_arrays(fields)
        ax_h, ax_v = self._axis_h, self._axis_v
        nh, nv = ax_h.nbands, ax_v.nbands
        out = np.zeros(nh * nv)
        for hi, hw in ((ax_h.idx0, ax_h.w0sq), (ax_h.idx1, ax_h.w1sq)):
            for vi, vw in ((ax_v.idx0, ax_v.w0sq), (ax_v.idx1, ax_v.w1sq)):
                idx = (hi[:, :, None] * nv + vi[None, None, :]).ravel()
                wts = (hw[:, :, None] * vw[None, None, :] * mass).ravel()
                out += np.bincount(idx, weights=wts, minlength=nh * nv)
        return out.reshape(nh, nv)
