"""Self-verification suites: cutoff identities, product splitting, norm
consistency, measured-constant sanity.

Each suite evaluates named properties and reports measured values
against bounds; failures are report content, never exceptions, so a
driver can render the whole table and exit nonzero at the end.  The
cutoff under test is injectable, which lets a negative control (a
deliberately detuned cutoff) demonstrate that the properties actually
constrain anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bands import Bands, CutoffPair, default_cutoff
from .bony import bony_split
from .field import ScalarField, dealiased_product, random_band_limited, translate
from .grid import Grid
from .measured import measured_constant, scaling_largeness
from .norms import aniso_besov, aniso_sobolev, horizontal_l1

__all__ = ["SUITES", "PropertyResult", "VerifyReport", "run_verify"]

SUITES = ("partition", "orthogonality", "bony", "norms", "measured")


@dataclass(frozen=True)
class PropertyResult:
    suite: str
    prop: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "property": self.prop,
            "passed": self.passed,
            "measured": self.measured,
            "bound": self.bound,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class VerifyReport:
    results: tuple[PropertyResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self):
        return tuple(r for r in self.results if not r.passed)

    def to_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "properties": [r.to_dict() for r in self.results],
        }


def _samples():
    return np.logspace(-3.0, 3.0, 10_000)


def _suite_partition(cutoff: CutoffPair, out: list):
    t = _samples()
    jlo, jhi = -14, 14
    total = np.zeros_like(t)
    for j in range(jlo, jhi + 1):
        total += cutoff.phi(t / 2.0**j)
    dev = float(np.max(np.abs(total - 1.0)))
    out.append(PropertyResult(
        "partition", "homogeneous_partition", dev <= 1e-10, dev, 1e-10,
        "sum of annulus bumps over all scales vs 1",
    ))
    inh = cutoff.chi(t).copy()
    for j in range(0, jhi + 1):
        inh += cutoff.phi(t / 2.0**j)
    dev = float(np.max(np.abs(inh - 1.0)))
    out.append(PropertyResult(
        "partition", "inhomogeneous_partition", dev <= 1e-10, dev, 1e-10,
        "low-pass plus nonnegative scales vs 1",
    ))


def _suite_orthogonality(cutoff: CutoffPair, out: list):
    t = _samples()
    vals = np.stack([cutoff.phi(t / 2.0**j) for j in range(-14, 15)])
    active = int(np.max(np.sum(vals > 0, axis=0)))
    out.append(PropertyResult(
        "orthogonality", "band_overlap_count", active <= 2, float(active), 2.0,
        "max simultaneously active bands at one frequency",
    ))
    worst = 0.0
    for a in range(vals.shape[0]):
        for b in range(a + 2, vals.shape[0]):
            worst = max(worst, float(np.max(vals[a] * vals[b])))
    out.append(PropertyResult(
        "orthogonality", "disjoint_band_product", worst == 0.0, worst, 0.0,
        "bands two or more scales apart share no support",
    ))


def _suite_bony(cutoff: CutoffPair, grid: Grid, seed: int, out: list):
    bands = Bands(grid, cutoff)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(3):
        a = random_band_limited(grid, rng)
        b = random_band_limited(grid, rng)
        ab = dealiased_product(a, b)
        t_ab, t_ba, rem = bony_split(bands, a, b)
        res = (t_ab + t_ba + rem - ab).l2()
        worst = max(worst, res / max(ab.l2(), 1e-300))
    out.append(PropertyResult(
        "bony", "paraproduct_recomposition", worst <= 1e-10, worst, 1e-10,
        "low-high + high-low + diagonal vs the dealiased product",
    ))


def _suite_norms(cutoff: CutoffPair, grid: Grid, seed: int, out: list):
    bands = Bands(grid, cutoff)
    rng = np.random.default_rng(seed)
    f = random_band_limited(grid, rng)

    vals = f.values()
    phys = float(np.sqrt(grid.dV * np.sum(vals * vals)))
    dev = abs(phys - f.l2()) / f.l2()
    out.append(PropertyResult(
        "norms", "parseval", dev <= 1e-12, dev, 1e-12,
        "physical quadrature vs coefficient sum",
    ))

    worst = 0.0
    for _ in range(3):
        shift = tuple(rng.uniform(0, L) for L in grid.box)
        g = translate(f, shift)
        for val0, val1 in (
            (aniso_sobolev(f, 0.5, 0.25), aniso_sobolev(g, 0.5, 0.25)),
            (horizontal_l1(f, 0.5, bands), horizontal_l1(g, 0.5, bands)),
        ):
            worst = max(worst, abs(val0 - val1) / val0)
    out.append(PropertyResult(
        "norms", "translation_invariance", worst <= 1e-12, worst, 1e-12,
        "norms are Fourier multipliers, shifts cannot move them",
    ))

    # any field's two-index band-sum/weighted-sum ratio must land inside
    # the bracket realized mode by mode, whoever the field is
    s1, s2 = 0.0, 0.5
    wh = np.zeros(grid.xi_h_sq.shape)
    for k in bands.range_h:
        wh += bands.mult_h(k) ** 2 * 4.0 ** (k * s1)
    wv = np.zeros(grid.xi3.shape)
    for l in bands.range_v:
        wv += bands.mult_v(l) ** 2 * 4.0 ** (l * s2)
    mask_h = grid.xi_h_sq > 0
    mask_v = np.abs(grid.xi3) > 0
    rh = wh[mask_h] / grid.xi_h_sq[mask_h] ** s1
    rv = wv[mask_v] / np.abs(grid.xi3[mask_v]) ** (2.0 * s2)
    lo = float(np.sqrt(rh.min() * rv.min()))
    hi = float(np.sqrt(rh.max() * rv.max()))
    excess = 0.0
    for _ in range(5):
        g = random_band_limited(grid, rng)
        c = g.coef.copy()
        c[np.broadcast_to(grid.h_zero_mask, grid.shape)] = 0.0
        c[np.broadcast_to(grid.v_zero_mask, grid.shape)] = 0.0
        g = ScalarField(grid, c)
        ratio = aniso_besov(g, s1, s2, 2, 2, bands) / aniso_sobolev(
            g, s1, s2, name="sample")
        excess = max(excess, lo - ratio, ratio - hi)
    out.append(PropertyResult(
        "norms", "sobolev_band_bracket", excess <= 1e-12, float(excess), 1e-12,
        f"sampled ratios inside the per-mode bracket [{lo:.4f}, {hi:.4f}]",
    ))


def _suite_measured(cutoff: CutoffPair, seed: int, out: list):
    for test in ("bernstein_h_ball", "product_bh", "embedding_bneg1"):
        rep = measured_constant(test, ensemble=20, seed=seed)
        ok = np.isfinite(rep.max_ratio) and rep.max_ratio > 0
        out.append(PropertyResult(
            "measured", f"{test}_finite", bool(ok), rep.max_ratio, np.inf,
            "ensemble ratio maximum is a usable constant",
        ))
    sc = scaling_largeness()
    out.append(PropertyResult(
        "measured", "scaling_drift", sc["drift"] <= 0.2, sc["drift"], 0.2,
        "sup-norm of the rescaled family is scale-stable",
    ))


def run_verify(suites=None, cutoff: CutoffPair | None = None,
               grid: Grid | None = None, seed: int = 0) -> VerifyReport:
    """Run the named suites (all by default) and collect the results."""
    chosen = tuple(suites) if suites else SUITES
    unknown = [s for s in chosen if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; choose from {SUITES}")
    co = cutoff if cutoff is not None else default_cutoff()
    g = grid if grid is not None else Grid((2 * np.pi, 2 * np.pi, 4 * np.pi),
                                           (24, 24, 24))
    out: list[PropertyResult] = []
    for suite in chosen:
        if suite == "partition":
            _suite_partition(co, out)
        elif suite == "orthogonality":
            _suite_orthogonality(co, out)
        elif suite == "bony":
            _suite_bony(co, g, seed, out)
        elif suite == "norms":
            _suite_norms(co, g, seed, out)
        elif suite == "measured":
            _suite_measured(co, seed, out)
    return VerifyReport(tuple(out))
