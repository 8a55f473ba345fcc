"""Periodic anisotropic box and its discrete Fourier conventions.

The domain is [0, L1) x [0, L2) x [0, L3) sampled on an N1 x N2 x N3 grid,
arrays indexed [i1, i2, i3].  A real field f is represented canonically by
its normalized DFT coefficients

    c[m] = fftn(f) / (N1*N2*N3),   so   f(x_j) = sum_m c[m] exp(i xi_m . x_j)

with wavenumbers xi_m = 2*pi*(m1/L1, m2/L2, m3/L3) and the usual fftn
integer-frequency layout per axis.  Horizontal means (xi_h = 0) and the
vertical-mean plane (xi3 = 0) keep their literal discrete meaning; norm
code decides what to do with them.

Quadrature conventions (fixed once, relied on by every dual-route check):

    ||f||_L2^2      = vol * sum_m |c[m]|^2 = dV * sum_j |f(x_j)|^2
    integral f dx   = vol * c[0]

where vol = L1*L2*L3 and dV = vol / (N1*N2*N3).

Dealiasing keeps |m_i| <= K_i with K_i the largest integer satisfying
3*K_i < N_i.  Pointwise grid products of two fields supported in the kept
region followed by re-masking are then exact: aliased images of the true
(bandwidth 2K) product land strictly outside the mask.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.fft as _sfft

__all__ = ["Grid", "fft_workers", "set_fft_workers"]

_FFT_WORKERS = max(1, int(os.environ.get("ANISOLAB_THREADS", "1") or 1))


def fft_workers() -> int:
    return _FFT_WORKERS


def set_fft_workers(n: int) -> None:
    """Thread count for the FFT backend (also settable via ANISOLAB_THREADS)."""
    global _FFT_WORKERS
    if n < 1:
        raise ValueError("worker count must be >= 1")
    _FFT_WORKERS = int(n)


def _dealias_keep(n: int) -> int:
    # largest K with 3K < n; guarantees alias images of a K*K product
    # fall outside |m| <= K
    return (n - 1) // 3


class Grid:
    """Geometry, wavenumbers and masks for one periodic box."""

    def __init__(self, box, shape):
        box = tuple(float(L) for L in box)
        shape = tuple(int(n) for n in shape)
        if len(box) != 3 or len(shape) != 3:
            raise ValueError("box and shape must have three entries")
        if any(L <= 0 for L in box):
            raise ValueError(f"box lengths must be positive, got {box}")
        if any(n < 4 or n % 2 for n in shape):
            raise ValueError(f"resolutions must be even and >= 4, got {shape}")
        self.box = box
        self.shape = shape
        self.ntot = shape[0] * shape[1] * shape[2]
        self.vol = box[0] * box[1] * box[2]
        self.dV = self.vol / self.ntot

        # integer frequencies per axis, fftn layout
        self.modes = tuple(
            np.fft.fftfreq(n, d=1.0 / n).astype(np.int64) for n in shape
        )
        k1 = 2.0 * np.pi * self.modes[0] / box[0]
        k2 = 2.0 * np.pi * self.modes[1] / box[1]
        k3 = 2.0 * np.pi * self.modes[2] / box[2]
        # broadcastable wavenumber arrays
        self.xi1 = k1[:, None, None]
        self.xi2 = k2[None, :, None]
        self.xi3 = k3[None, None, :]
        self.xi_h_sq = self.xi1**2 + self.xi2**2          # (N1, N2, 1)
        self.xi_h = np.sqrt(self.xi_h_sq)
        self.xi3_abs = np.abs(self.xi3)                    # (1, 1, N3)
        self.xi_sq = self.xi_h_sq + self.xi3**2            # full (N1, N2, N3)
        self.xi_abs = np.sqrt(self.xi_sq)

        self.dealias_keep = tuple(_dealias_keep(n) for n in shape)
        masks = [
            np.abs(m) <= k for m, k in zip(self.modes, self.dealias_keep)
        ]
        self.dealias_mask = (
            masks[0][:, None, None]
            & masks[1][None, :, None]
            & masks[2][None, None, :]
        )

        # horizontal zero modes: one vertical line of coefficients
        self.h_zero_mask = (self.xi_h_sq == 0.0)           # (N1, N2, 1)
        self.v_zero_mask = (self.xi3 == 0.0)               # (1, 1, N3)

    def axes(self):
        """Physical coordinate arrays (1-D) along each axis."""
        return tuple(
            np.arange(n) * (L / n) for n, L in zip(self.shape, self.box)
        )

    def meshgrid(self):
        x1, x2, x3 = self.axes()
        return np.meshgrid(x1, x2, x3, indexing="ij")

    # smallest positive wavenumber magnitudes actually on the grid; used
    # by the dyadic band-range computation
    def min_positive_xi_h(self) -> float:
        return 2.0 * np.pi * min(1.0 / self.box[0], 1.0 / self.box[1])

    def max_xi_h(self) -> float:
        vals = self.xi_h[..., 0]
        return float(vals.max())

    def min_positive_xi3(self) -> float:
        return 2.0 * np.pi / self.box[2]

    def max_xi3(self) -> float:
        return float(self.xi3_abs.max())

    def max_xi_iso(self) -> float:
        return float(np.sqrt(self.xi_sq.max()))

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Real samples -> normalized coefficients."""
        if values.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {values.shape}")
        return _sfft.fftn(values, workers=_FFT_WORKERS) / self.ntot

    def inverse(self, coef: np.ndarray) -> np.ndarray:
        """Normalized coefficients -> real samples (imaginary part dropped)."""
        return _sfft.ifftn(coef * self.ntot, workers=_FFT_WORKERS).real

    def compatible(self, other: "Grid") -> bool:
        return self.box == other.box and self.shape == other.shape

    def __eq__(self, other):
        return isinstance(other, Grid) and self.compatible(other)

    def __hash__(self):
        return hash((self.box, self.shape))

    def __repr__(self):
        return f"Grid(box={self.box}, shape={self.shape})"
