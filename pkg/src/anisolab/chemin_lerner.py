"""Time-integrated band norms.

The discretization keeps the defining order of operations: per dyadic
block, integrate the squared band mass in time first (trapezoid on the
sample times the caller provides), then combine blocks.  Swapping the
two (integrating a combined norm) gives a genuinely different, smaller
quantity and is exactly what these accumulators exist to avoid.

`time_p` selects the time exponent of each block: 2 integrates the
squared mass, `inf` tracks its running supremum.  An optional scalar
weight multiplies the squared mass before it enters the integral, for
budgets of the form  integral w(t) ||block u(t)||^2 dt.
"""

from __future__ import annotations

import numpy as np

from .bands import Bands

__all__ = ["CheminLernerAccumulator"]


class CheminLernerAccumulator:
    """Accumulate banded time norms from a stream of (t, field) samples.

    Parameters
    ----------
    bands : band machinery for the fields' grid
    s_h : horizontal dyadic exponent
    s_v : vertical dyadic exponent, or None for horizontal-only blocks
    time_p : 2 (time integral of squared mass) or inf (running sup)
    combine : "l1" or "l2" combination across blocks
    """

    def __init__(self, bands: Bands, s_h: float, s_v: float | None = None,
                 time_p: float = 2, combine: str = "l1"):
        if time_p not in (2, np.inf):
            raise ValueError("time_p must be 2 or inf")
        if combine not in ("l1", "l2"):
            raise ValueError("combine must be 'l1' or 'l2'")
        self.bands = bands
        self.s_h = float(s_h)
        self.s_v = None if s_v is None else float(s_v)
        self.time_p = time_p
        self.combine = combine
        kh = np.asarray(bands.range_h, dtype=np.float64)
        if self.s_v is None:
            self._wsq = 2.0 ** (2.0 * self.s_h * kh)
        else:
            kv = np.asarray(bands.range_v, dtype=np.float64)
            self._wsq = 2.0 ** (2.0 * (self.s_h * kh[:, None] + self.s_v * kv[None, :]))
        self.reset()

    def reset(self):
        self._t_prev = None
        self._integrand_prev = None
        self._acc = np.zeros_like(self._wsq)

    def _block_sq(self, fields) -> np.ndarray:
        if self.s_v is None:
            return self.bands.band_l2sq_h(fields)
        return self.bands.band_l2sq_hv(fields)

    def update(self, t: float, fields, weight: float = 1.0):
        t = float(t)
        sq = float(weight) * self._block_sq(fields)
        if self.time_p == np.inf:
            np.maximum(self._acc, sq, out=self._acc)
        else:
            if self._t_prev is not None:
                dt = t - self._t_prev
                if dt < 0:
                    raise ValueError("samples must arrive in time order")
                self._acc += 0.5 * dt * (self._integrand_prev + sq)
            self._integrand_prev = sq
        self._t_prev = t

    def block_values(self) -> np.ndarray:
        """Per-block contributions 2^{.s} * (time part)^{1/2}."""
        return np.sqrt(self._wsq * self._acc)

    def value(self) -> float:
        v = self.block_values()
        if self.combine == "l1":
            return float(v.sum())
        return float(np.sqrt((v**2).sum()))
