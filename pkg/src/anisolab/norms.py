"""Norm evaluation on top of the band machinery.

Conventions, fixed once:

  * Anisotropic Sobolev:  ||f||_{s_h, s_v}^2 = vol * sum_m
    |xi_h|^{2 s_h} |xi_3|^{2 s_v} |c[m]|^2.  A vanishing wavenumber
    contributes weight 1 when its exponent is 0 and weight 0 when the
    exponent is positive.  Negative exponents require the corresponding
    zero modes to be (numerically) empty; `zero_mode_tol` controls the
    rejection threshold and violations raise with the field's name.

  * Anisotropic Besov with p = 2 is computed from squared band masses
    (no transforms); p != 2 walks the bands in physical space.  The
    vertical-mean plane (xi_3 = 0) and horizontal means (xi_h = 0) are
    invisible to band norms, mirroring the vanishing weight that a
    shrinking frequency shell carries in the whole-space norm.

  * Vector input combines components in l2 inside each mode/band for
    the quadratic and band norms; sup-type norms use the pointwise
    magnitude.

All of these are plain functions of the coefficients, hence exactly
invariant under translations.
"""

from __future__ import annotations

import numpy as np

from .bands import Bands
from .field import ScalarField, VectorField
from .grid import Grid

__all__ = [
    "NormError",
    "aniso_sobolev",
    "aniso_besov",
    "horizontal_l1",
    "besov_iso_sup",
    "bneg1_inf",
    "sup_vertical_l2h",
    "sup_vertical_hbesov",
    "mixed_lp_h_lr_v",
    "evaluate_norm",
    "NORM_KINDS",
]


class NormError(ValueError):
    pass


def _scalars(f):
    if isinstance(f, ScalarField):
        return (f,)
    if isinstance(f, VectorField):
        return f.components
    return tuple(f)


def _mode_mass(f) -> np.ndarray:
    comps = _scalars(f)
    acc = None
    for c in comps:
        m = c.coef.real**2 + c.coef.imag**2
        acc = m if acc is None else acc + m
    return acc


def _power_weight(base_sq: np.ndarray, s: float, zero_mask, mass,
                  tol: float, name: str, axis_label: str):
    """(base_sq)^s with the zero-mode convention; rejects s < 0 on
    occupied zero modes."""
    if s == 0.0:
        return 1.0
    if s < 0.0:
        total = mass.sum()
        bad = (mass * np.broadcast_to(zero_mask, mass.shape)).sum()
        if total > 0 and bad > tol**2 * total:
            raise NormError(
                f"{name}: {axis_label} zero modes carry relative mass "
                f"{np.sqrt(bad / total):.3e}, too large for exponent {s}"
            )
    w = np.zeros(base_sq.shape)
    np.power(base_sq, s, out=w, where=base_sq > 0)
    return w


def aniso_sobolev(f, s_h: float, s_v: float = 0.0, *,
                  zero_mode_tol: float = 1e-8, name: str = "field") -> float:
    """Homogeneous anisotropic Sobolev norm with split exponents."""
    comps = _scalars(f)
    g = comps[0].grid
    mass = _mode_mass(comps)
    wh = _power_weight(g.xi_h_sq, s_h, g.h_zero_mask, mass,
                       zero_mode_tol, name, "horizontal")
    wv = _power_weight(g.xi3**2, s_v, g.v_zero_mask, mass,
                       zero_mode_tol, name, "vertical")
    return float(np.sqrt(g.vol * np.sum(mass * wh * wv)))


def horizontal_l1(f, s: float, bands: Bands | None = None) -> float:
    """sum_k 2^{ks} ||delta_h(k) f||_L2 (horizontal dyadic l1 norm)."""
    comps = _scalars(f)
    b = bands if bands is not None else Bands(comps[0].grid)
    sq = b.band_l2sq_h(comps)
    k = np.asarray(b.range_h, dtype=np.float64)
    return float(np.sum(2.0 ** (k * s) * np.sqrt(sq)))


def aniso_besov(f, s_h: float, s_v: float, p: float, q: float,
                bands: Bands | None = None) -> float:
    """Anisotropic Besov norm over horizontal x vertical dyadic blocks."""
    comps = _scalars(f)
    b = bands if bands is not None else Bands(comps[0].grid)
    kh = np.asarray(b.range_h, dtype=np.float64)
    kv = np.asarray(b.range_v, dtype=np.float64)
    if p == 2:
        blocks = np.sqrt(b.band_l2sq_hv(comps))
    else:
        blocks = np.zeros((len(b.range_h), len(b.range_v)))
        for i, k in enumerate(b.range_h):
            mh = b.mult_h(k)
            for j, l in enumerate(b.range_v):
                piece = [
                    ScalarField(c.grid, c.coef * mh * b.mult_v(l))
                    for c in comps
                ]
                vals = [x.values() for x in piece]
                mag = np.sqrt(sum(v**2 for v in vals))
                if p == np.inf:
                    blocks[i, j] = mag.max()
                else:
                    blocks[i, j] = (comps[0].grid.dV * (mag**p).sum()) ** (1 / p)
    w = 2.0 ** (kh[:, None] * s_h + kv[None, :] * s_v) * blocks
    if q == np.inf:
        return float(w.max()) if w.size else 0.0
    return float((w**q).sum() ** (1.0 / q))


def besov_iso_sup(f, s: float, bands: Bands | None = None) -> float:
    """sup_j 2^{js} ||delta_iso(j) f||_Linf over the grid's band range."""
    comps = _scalars(f)
    b = bands if bands is not None else Bands(comps[0].grid)
    best = 0.0
    for j in b.range_iso:
        m = b.mult_iso(j)
        mag_sq = None
        for c in comps:
            v = c.grid.inverse(c.coef * m)
            mag_sq = v * v if mag_sq is None else mag_sq + v * v
        best = max(best, 2.0 ** (j * s) * float(np.sqrt(mag_sq.max())))
    return best


def bneg1_inf(f, bands: Bands | None = None) -> float:
    return besov_iso_sup(f, -1.0, bands)


def _plane_coefs(c: np.ndarray, ntot3: int) -> np.ndarray:
    # horizontal Fourier coefficients of every vertical plane
    return np.fft.ifft(c, axis=2) * ntot3


def sup_vertical_l2h(f) -> float:
    """max over x3 of the horizontal L2 norm of the plane."""
    comps = _scalars(f)
    g = comps[0].grid
    area = g.box[0] * g.box[1]
    acc = None
    for c in comps:
        p = _plane_coefs(c.coef, g.shape[2])
        m = (p.real**2 + p.imag**2).sum(axis=(0, 1))
        acc = m if acc is None else acc + m
    return float(np.sqrt(area * acc.max()))


def sup_vertical_hbesov(f, s: float, q: float,
                        bands: Bands | None = None) -> float:
    """max over x3 of the per-plane horizontal Besov B^s_{2,q} norm."""
    comps = _scalars(f)
    g = comps[0].grid
    b = bands if bands is not None else Bands(g)
    area = g.box[0] * g.box[1]
    per_band = []  # band -> per-plane squared l2 mass
    for k in b.range_h:
        mh = b.mult_h(k)
        m = None
        for c in comps:
            p = _plane_coefs(c.coef * mh, g.shape[2])
            mm = (p.real**2 + p.imag**2).sum(axis=(0, 1))
            m = mm if m is None else m + mm
        per_band.append(area * m)
    if not per_band:
        return 0.0
    kh = np.asarray(b.range_h, dtype=np.float64)
    mat = 2.0 ** (kh[:, None] * s) * np.sqrt(np.stack(per_band))
    if q == np.inf:
        plane_norms = mat.max(axis=0)
    else:
        plane_norms = (mat**q).sum(axis=0) ** (1.0 / q)
    return float(plane_norms.max())


def mixed_lp_h_lr_v(f, p: float, r: float) -> float:
    """|| ||f||_{L^r(dx3)} ||_{L^p(dx_h)} in physical space."""
    comps = _scalars(f)
    g = comps[0].grid
    mag_sq = None
    for c in comps:
        v = c.values()
        mag_sq = v * v if mag_sq is None else mag_sq + v * v
    mag = np.sqrt(mag_sq)
    d3 = g.box[2] / g.shape[2]
    if r == np.inf:
        inner = mag.max(axis=2)
    else:
        inner = ((mag**r).sum(axis=2) * d3) ** (1.0 / r)
    dA = (g.box[0] / g.shape[0]) * (g.box[1] / g.shape[1])
    if p == np.inf:
        return float(inner.max())
    return float(((inner**p).sum() * dA) ** (1.0 / p))


def _as_float(x, inf_ok=True):
    if isinstance(x, str) and x.lower() in ("inf", "infinity"):
        x = np.inf
    x = float(x)
    if not inf_ok and not np.isfinite(x):
        raise NormError("exponent must be finite")
    return x


NORM_KINDS = (
    "l2",
    "linf",
    "aniso_sobolev",
    "aniso_besov",
    "horizontal_l1",
    "besov_iso_sup",
    "sup_vertical_l2h",
    "sup_vertical_hbesov",
)


def evaluate_norm(spec: dict, f, bands: Bands | None = None) -> float:
    """Evaluate a norm described by a {kind, ...parameters} mapping."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in NORM_KINDS:
        raise NormError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")
    try:
        if kind == "l2":
            comps = _scalars(f)
            val = float(np.sqrt(sum(c.l2() ** 2 for c in comps)))
        elif kind == "linf":
            comps = _scalars(f)
            if len(comps) == 1:
                val = comps[0].linf()
            else:
                val = VectorField(comps).linf()
        elif kind == "aniso_sobolev":
            val = aniso_sobolev(f, _as_float(spec.pop("s_h"), inf_ok=False),
                                _as_float(spec.pop("s_v", 0.0), inf_ok=False))
        elif kind == "aniso_besov":
            val = aniso_besov(f, _as_float(spec.pop("s_h"), inf_ok=False),
                              _as_float(spec.pop("s_v"), inf_ok=False),
                              _as_float(spec.pop("p")), _as_float(spec.pop("q")),
                              bands)
        elif kind == "horizontal_l1":
            val = horizontal_l1(f, _as_float(spec.pop("s"), inf_ok=False), bands)
        elif kind == "besov_iso_sup":
            val = besov_iso_sup(f, _as_float(spec.pop("s"), inf_ok=False), bands)
        elif kind == "sup_vertical_l2h":
            val = sup_vertical_l2h(f)
        else:
            val = sup_vertical_hbesov(f, _as_float(spec.pop("s"), inf_ok=False),
                                      _as_float(spec.pop("q")), bands)
    except KeyError as e:
        raise NormError(f"norm {kind!r} is missing parameter {e.args[0]!r}") from None
    if spec:
        raise NormError(f"norm {kind!r} got unknown parameters {sorted(spec)}")
    if not np.isfinite(val):
        raise NormError(f"norm {kind!r} evaluated to a non-finite value")
    return val
