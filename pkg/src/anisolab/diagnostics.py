"""Scalar diagnostics recorded along a coupled run.

Everything here consumes solver states, or the time series extracted
from them, and feeds nothing back into the stepping.  The centerpiece
is a pair of remainder functionals built from the vertical remainder
velocity and the horizontal remainder vorticity, both measured with the
horizontal weight |xi_h|^{-1}:

    M = ||grad v3||^2 + ||omega||^2
    N = ||grad^2 v3||^2 + ||grad omega||^2

Around them sit the ledgers: per-step series of the energy budget, the
displayed norm groups of the two remainder differential inequalities,
the time-accumulated left sides of the planar and corrector a-priori
estimates, and two blow-up monitors (a dyadic sup-norm derivative sum
and a vertical-shear Lebesgue norm).  Constants fitted here (the
minimal C making an inequality hold, the realized budget sup) are
measured artifacts of one run, reported as such and never assumed.

Time derivatives of recorded norms use centered differences on the
sampling grid, so inequality ledgers only cover interior sample times.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .bands import Bands
from .chemin_lerner import CheminLernerAccumulator
from .field import ScalarField, VectorField, curl_h, derivative
from .norms import (
    NormError,
    aniso_besov,
    aniso_sobolev,
    besov_iso_sup,
    bneg1_inf,
    horizontal_l1,
    mixed_lp_h_lr_v,
    sup_vertical_l2h,
)
from .smallness import coupling_budget, planar_budget
from .stepping import recompose_check, run_coupled, v_gap

__all__ = [
    "CSV_HEADER",
    "DiagnosticsLedger",
    "GronwallReport",
    "LedgerSampler",
    "PropAccumulators",
    "blowup_monitors",
    "compute_MN",
    "energy_report",
    "evaluate_gronwall",
    "gronwall_ledger",
    "kz_q_for_p",
    "largeness_report",
    "mn_budget",
    "mn_parts",
    "prop_estimates_report",
    "run_with_ledger",
    "validate_shear_exponents",
    "write_runs_csv",
]

CSV_HEADER = ("run_id", "t", "metric", "params", "value")


# ---------------------------------------------------------------------------
# remainder functionals

def _hneg_mass_sum(grid, mass: np.ndarray, tol: float, what: str) -> float:
    """vol * sum |xi_h|^{-1} * mass, rejecting horizontal zero-mode mass."""
    total = float(mass.sum())
    if total > 0.0:
        bad = float((mass * np.broadcast_to(grid.h_zero_mask, mass.shape)).sum())
        if bad > tol**2 * total:
            raise NormError(
                f"{what}: horizontal zero modes carry relative mass "
                f"{np.sqrt(bad / total):.3e}, undefined under weight |xi_h|^-1"
            )
    w = np.zeros(grid.xi_h_sq.shape)
    np.divide(1.0, np.sqrt(grid.xi_h_sq), out=w, where=grid.xi_h_sq > 0)
    return float(grid.vol * (w * mass).sum())


def mn_parts(v3: ScalarField, omega: ScalarField, *,
             zero_mode_tol: float = 1e-8):
    """The four squared pieces (M_v3, M_omega, N_v3, N_omega).

    All four are plain Fourier quadratures: gradient weights are |xi|^2
    per derivative, the anisotropic weight is |xi_h|^{-1}.  Fields with
    relative mass above `zero_mode_tol` on the xi_h = 0 modes are
    rejected by name, since the weight is undefined there.
    """
    grid = v3.grid
    if not grid.compatible(omega.grid):
        raise ValueError("v3 and omega live on different grids")
    mass_v3 = v3.coef.real**2 + v3.coef.imag**2
    mass_om = omega.coef.real**2 + omega.coef.imag**2
    g2 = grid.xi_sq
    m_v3 = _hneg_mass_sum(grid, g2 * mass_v3, zero_mode_tol, "grad v3")
    m_om = _hneg_mass_sum(grid, mass_om, zero_mode_tol, "omega")
    n_v3 = _hneg_mass_sum(grid, g2 * g2 * mass_v3, zero_mode_tol, "grad^2 v3")
    n_om = _hneg_mass_sum(grid, g2 * mass_om, zero_mode_tol, "grad omega")
    return m_v3, m_om, n_v3, n_om


def compute_MN(v, omega: ScalarField, *, zero_mode_tol: float = 1e-8):
    """(M, N) of a remainder field and its horizontal vorticity.

    `v` may be the full remainder vector (its third component is used)
    or the vertical component directly.
    """
    v3 = v.components[2] if isinstance(v, VectorField) else v
    m_v3, m_om, n_v3, n_om = mn_parts(v3, omega, zero_mode_tol=zero_mode_tol)
    return m_v3 + m_om, n_v3 + n_om


def remainder_vorticity(v: VectorField) -> ScalarField:
    """Horizontal curl of the remainder's horizontal part."""
    return curl_h(VectorField(v.components[:2]))


# ---------------------------------------------------------------------------
# ledger

class DiagnosticsLedger:
    """Append-only (t, metric, params, value) store for one run.

    Timestamps must strictly increase within each (metric, params)
    series; everything else is free-form.  Values are plain floats so
    the ledger serializes losslessly to the delimited schema
    run_id,t,metric,params,value.
    """

    def __init__(self, run_id: str = "run"):
        self.run_id = str(run_id)
        self._rows: list[tuple[float, str, str, float]] = []
        self._last: dict[tuple[str, str], float] = {}

    def __len__(self):
        return len(self._rows)

    def record(self, t: float, metric: str, value, params: str = ""):
        t = float(t)
        value = float(value)
        key = (metric, params)
        last = self._last.get(key)
        if last is not None and t <= last:
            raise ValueError(
                f"ledger time must increase: {metric!r} got t={t} after t={last}"
            )
        self._last[key] = t
        self._rows.append((t, metric, params, value))

    def metrics(self) -> list[str]:
        return sorted({m for _, m, _, _ in self._rows})

    def params_for(self, metric: str) -> list[str]:
        return sorted({p for _, m, p, _ in self._rows if m == metric})

    def series(self, metric: str, params: str | None = None):
        """(t, values) arrays for one metric, optionally one params tag."""
        ts, vs = [], []
        for t, m, p, v in self._rows:
            if m == metric and (params is None or p == params):
                ts.append(t)
                vs.append(v)
        if not ts:
            tag = f" with params {params!r}" if params is not None else ""
            raise KeyError(f"no samples for metric {metric!r}{tag}")
        return np.asarray(ts), np.asarray(vs)

    def rows(self):
        for t, m, p, v in self._rows:
            yield (self.run_id, t, m, p, v)

    def write_csv(self, path):
        write_runs_csv(path, [self])


def write_runs_csv(path, ledgers):
    """One delimited file for one or more runs, header included."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for led in ledgers:
            for run_id, t, metric, params, value in led.rows():
                w.writerow([run_id, f"{t:.17g}", metric, params, f"{value:.17g}"])


# ---------------------------------------------------------------------------
# per-step sampling

def _grad_comps(f) -> list[ScalarField]:
    comps = f.components if isinstance(f, VectorField) else (f,)
    return [derivative(c, ax) for c in comps for ax in range(3)]


def _d3(f: VectorField) -> VectorField:
    return VectorField([derivative(c, 2) for c in f.components])


def _weighted_mass(grid, comps, w) -> float:
    acc = 0.0
    for c in comps:
        mass = c.coef.real**2 + c.coef.imag**2
        acc += float((w * mass).sum())
    return grid.vol * acc


def _mass_sq(comps) -> float:
    comps = comps.components if isinstance(comps, VectorField) else comps
    return float(sum((c.coef.real**2 + c.coef.imag**2).sum() for c in comps))


def _sobolev_noise_floor(comps, s: float, ref_sq: float, name: str,
                         rel: float = 1e-12) -> float:
    """Negative-index norm treating numerically empty fields as zero.

    A field whose entire mass is below `rel` times the reference mass is
    roundoff debris of an exact zero (a decomposition component the data
    never excites); its zero-mode content is then all of its own mass
    and the relative rejection gate inside the norm would fire
    spuriously.  Genuine zero-mode violations still raise.
    """
    try:
        return aniso_sobolev(comps, s, name=name)
    except NormError:
        if _mass_sq(comps) <= rel**2 * ref_sq:
            return 0.0
        raise


def validate_shear_exponents(p: float, q: float):
    """Admissibility of the vertical-shear monitor exponents."""
    if not 2.25 < p < 3.0:
        raise ValueError(f"shear monitor needs p in (9/4, 3), got {p}")
    if abs(2.0 / q + 3.0 / p - 2.0) > 1e-9:
        raise ValueError(
            f"shear monitor needs 2/q + 3/p = 2, got {2.0 / q + 3.0 / p:.6f}"
        )


def kz_q_for_p(p: float) -> float:
    """The time exponent paired with a given p by 2/q + 3/p = 2."""
    return 2.0 / (2.0 - 3.0 / p)


class LedgerSampler:
    """Observer for coupled runs: records the standard series per step.

    Cheap metrics (remainder functionals, energy pair, the displayed
    norm groups of the differential inequalities, the planar weight,
    recomposition checks, the vertical-shear integrand) are sampled on
    every call.  Sup-type monitors needing per-band physical maxima
    (dyadic derivative sum, data-norm embedding ratio) run every
    `heavy_stride` calls; 0 disables them.

    `also` is an iterable of extra observers invoked with the same
    state, for chaining accumulators into one run.
    """

    def __init__(self, ledger: DiagnosticsLedger, bands: Bands | None = None,
                 heavy_stride: int = 0, kz_exponents=(2.5, 2.5),
                 dyadic_exponent: float = 2.0, also=()):
        p, q = kz_exponents
        validate_shear_exponents(p, q)
        if not dyadic_exponent > 1.0:
            raise ValueError("dyadic monitor exponent must exceed 1")
        self.ledger = ledger
        self.bands = bands
        self.heavy_stride = int(heavy_stride)
        self.kz_p = float(p)
        self.kz_q = float(q)
        self.dyadic_p = float(dyadic_exponent)
        self.also = tuple(also)
        self._kz_params = f"p={self.kz_p:g},q={self.kz_q:g}"
        self._dyadic_params = f"p_ij={self.dyadic_p:g}"
        self._count = 0
        self._finalized = False

    def __call__(self, state):
        g = state.grid
        if self.bands is None:
            self.bands = Bands(g)
        b = self.bands
        t = state.t
        rec = self.ledger.record

        omega = remainder_vorticity(state.v)
        m_v3, m_om, n_v3, n_om = mn_parts(state.v.components[2], omega)
        rec(t, "M", m_v3 + m_om)
        rec(t, "N", n_v3 + n_om)
        rec(t, "grad_v3_hneg_sq", m_v3)
        rec(t, "omega_hneg_sq", m_om)
        rec(t, "grad2_v3_hneg_sq", n_v3)
        rec(t, "grad_omega_hneg_sq", n_om)

        u = state.u
        rec(t, "energy", 0.5 * u.l2() ** 2)
        rec(t, "grad_u_sq", _weighted_mass(g, u.components, g.xi_sq))

        ub = state.ubar_h
        ut = state.utilde
        uth = VectorField(ut.components[:2])
        rec(t, "grad_utilde_bh", aniso_besov(_grad_comps(ut), 0.0, 0.5, 2, 1, b))
        rec(t, "grad_ubar_bh", aniso_besov(_grad_comps(ub), 0.0, 0.5, 2, 1, b))
        rec(t, "utilde_h_hhalf", aniso_sobolev(uth, 0.5))
        rec(t, "grad_utilde3_bh",
            aniso_besov(_grad_comps(ut.components[2]), 0.0, 0.5, 2, 1, b))
        ref_sq = _mass_sq(u)
        rec(t, "grad_d3_ubar_hneg",
            _sobolev_noise_floor(_grad_comps(_d3(ub)), -0.5, ref_sq,
                                 "grad d3 planar"))
        rec(t, "grad_d3_utilde_hneg",
            _sobolev_noise_floor(_grad_comps(_d3(ut)), -0.5, ref_sq,
                                 "grad d3 corrector"))
        rec(t, "ubar_bh", aniso_besov(ub, 0.0, 0.5, 2, 1, b))
        rec(t, "utilde_bh", aniso_besov(ut, 0.0, 0.5, 2, 1, b))
        rec(t, "grad_utilde_h_hhalf", aniso_sobolev(_grad_comps(uth), 0.5))

        grads_h = [derivative(c, ax) for c in ub.components for ax in (0, 1)]
        rec(t, "f_planar", sup_vertical_l2h(grads_h) ** 2)

        rec(t, "recompose_rel", recompose_check(state))
        rec(t, "v_gap_rel", v_gap(state))

        d3u = _d3(u)
        rec(t, "kz_integrand",
            mixed_lp_h_lr_v(d3u, self.kz_p, self.kz_p) ** self.kz_q,
            self._kz_params)

        if self.heavy_stride and self._count % self.heavy_stride == 0:
            s = -2.0 + 2.0 / self.dyadic_p
            total = 0.0
            for ci in u.components:
                for ax in range(3):
                    total += besov_iso_sup(derivative(ci, ax), s, b) ** self.dyadic_p
            rec(t, "dyadic_sup_sum", total, self._dyadic_params)
            den = aniso_besov(u, 0.0, 0.5, 2, 1, b)
            rec(t, "embedding_ratio",
                bneg1_inf(u, b) / den if den > 0 else 0.0)

        for fn in self.also:
            fn(state)
        self._count += 1

    def finalize(self):
        """Append the cumulative dissipation and relative energy margin.

        Dissipation integrates ||grad u||^2 with a cumulative Simpson
        rule (trapezoid when fewer than three samples exist); the margin
        is (E(0) - E(t) - dissipation) / E(0).  Call once, after the
        run.
        """
        if self._finalized:
            raise RuntimeError("sampler already finalized")
        self._finalized = True
        led = self.ledger
        t, e = led.series("energy")
        _, gsq = led.series("grad_u_sq")
        if len(t) < 2:
            return
        if len(t) >= 3:
            diss = cumulative_simpson(gsq, x=t, initial=0.0)
        else:
            diss = cumulative_trapezoid(gsq, t, initial=0.0)
        e0 = e[0]
        margin = (e0 - e - diss) / e0 if e0 > 0 else np.zeros_like(e)
        for ti, di, mi in zip(t, diss, margin):
            led.record(ti, "dissipation_cum", di)
            led.record(ti, "energy_margin", mi)


def run_with_ledger(state, cfg, sampler: LedgerSampler):
    """Sample the initial state, march to the end, finalize the ledger.

    The stepping loop only reports accepted steps, so the t = 0 row
    (where the remainder functionals must vanish for zero remainder
    data) is taken here before the first step.
    """
    sampler(state)
    final, info = run_coupled(state, cfg, observer=sampler)
    sampler.finalize()
    return final, info


# ---------------------------------------------------------------------------
# energy budget

def energy_report(ledger: DiagnosticsLedger) -> dict:
    """Arrays of the energy pair and the relative budget margin."""
    t, e = ledger.series("energy")
    try:
        _, diss = ledger.series("dissipation_cum")
        _, margin = ledger.series("energy_margin")
    except KeyError:
        diss = (cumulative_simpson(ledger.series("grad_u_sq")[1], x=t, initial=0.0)
                if len(t) >= 3 else
                cumulative_trapezoid(ledger.series("grad_u_sq")[1], t, initial=0.0))
        margin = (e[0] - e - diss) / e[0] if e[0] > 0 else np.zeros_like(e)
    return {
        "t": t,
        "energy": e,
        "dissipation": diss,
        "margin": margin,
        "min_margin": float(margin.min()) if len(margin) else 0.0,
    }


def mn_budget(ledger: DiagnosticsLedger) -> dict:
    """Running M(t) + int_0^t N and its realized sup over the run."""
    t, m = ledger.series("M")
    _, n = ledger.series("N")
    curve = m + cumulative_trapezoid(n, t, initial=0.0)
    i = int(np.argmax(curve))
    return {
        "t": t,
        "curve": curve,
        "sup": float(curve[i]),
        "t_sup": float(t[i]),
    }


# ---------------------------------------------------------------------------
# differential-inequality ledger

_GROWTH_SERIES = (
    "grad_utilde_bh", "grad_ubar_bh", "utilde_h_hhalf", "grad_utilde3_bh",
    "grad_d3_ubar_hneg", "grad_d3_utilde_hneg", "ubar_bh", "utilde_bh",
    "grad_utilde_h_hhalf",
)


@dataclass
class GronwallReport:
    """Fitted minimal constants for the two remainder inequalities.

    For each inequality the recorded left side is the centered time
    derivative of the monitored squared norm plus twice its dissipation
    piece, and the right side splits into a constant-free base term and
    a growth term scaled by the fitted constant.  `margin` is
    base + c_hat * growth - lhs, nonnegative by construction of the fit
    wherever the fit is finite.
    """

    t: np.ndarray
    lhs_vertical: np.ndarray
    base_vertical: np.ndarray
    growth_vertical: np.ndarray
    c_hat_vertical: float
    margin_vertical: np.ndarray
    lhs_vorticity: np.ndarray
    base_vorticity: np.ndarray
    growth_vorticity: np.ndarray
    c_hat_vorticity: float
    margin_vorticity: np.ndarray
    eta_hat: float

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _gronwall_arrays(ledger: DiagnosticsLedger) -> dict:
    t, m = ledger.series("M")
    arr = {"t": t, "M": m, "N": ledger.series("N")[1]}
    for name in ("grad_v3_hneg_sq", "omega_hneg_sq",
                 "grad2_v3_hneg_sq", "grad_omega_hneg_sq"):
        ts, vs = ledger.series(name)
        if len(ts) != len(t) or not np.allclose(ts, t):
            raise ValueError(f"series {name!r} not sampled on the common grid")
        arr[name] = vs
    for name in _GROWTH_SERIES:
        arr[name] = ledger.series(name)[1]
    if len(t) < 3:
        raise ValueError("inequality ledger needs at least three samples")
    inner = slice(1, -1)
    ddt = lambda y: (y[2:] - y[:-2]) / (t[2:] - t[:-2])

    m_i, n_i = m[inner], arr["N"][inner]
    sq = lambda name: arr[name][inner] ** 2
    shared = (np.sqrt(m_i) * n_i
              + m_i * (sq("grad_utilde_bh") + sq("grad_ubar_bh")))
    planar_group = sq("ubar_bh") + sq("utilde_bh")
    d3_group = sq("grad_d3_ubar_hneg") + sq("grad_d3_utilde_hneg")

    arr["t_inner"] = t[inner]
    arr["lhs_vertical"] = ddt(arr["grad_v3_hneg_sq"]) + 2.0 * arr["grad2_v3_hneg_sq"][inner]
    arr["base_vertical"] = 0.25 * n_i
    arr["growth_vertical"] = (shared
                              + sq("utilde_h_hhalf") * sq("grad_utilde3_bh")
                              + d3_group * planar_group)
    arr["lhs_vorticity"] = ddt(arr["omega_hneg_sq"]) + 2.0 * arr["grad_omega_hneg_sq"][inner]
    arr["base_vorticity"] = (0.25 + m_i) * n_i
    arr["growth_vorticity"] = (shared
                               + sq("grad_utilde_h_hhalf")
                               + d3_group * (1.0 + planar_group))
    return arr


def _fit_c(lhs, base, growth, noise_floor: float = 1e-12) -> float:
    """Smallest nonnegative c with lhs <= base + c * growth samplewise.

    Excesses below `noise_floor` (absolute, against the larger of the
    run's own scale and 1) are roundoff of an identically satisfied
    inequality and are skipped; otherwise a vanishing growth term makes
    the fit infinite, which is reported rather than clipped.
    """
    excess = lhs - base
    floor = noise_floor * max(1.0, float(np.abs(lhs).max()))
    g_floor = noise_floor * max(1.0, float(growth.max()))
    c = 0.0
    for e, g in zip(excess, growth):
        if e <= floor:
            continue
        if g <= g_floor:
            return np.inf
        c = max(c, e / g)
    return float(c)


def gronwall_ledger(ledger: DiagnosticsLedger) -> GronwallReport:
    """Fit the minimal constants of both remainder inequalities.

    The monitored squared norms are differentiated with centered
    differences on the sampling grid, so the report covers interior
    sample times.  `eta_hat` is the realized sup of M + int N over the
    whole run.
    """
    arr = _gronwall_arrays(ledger)
    c_v = _fit_c(arr["lhs_vertical"], arr["base_vertical"], arr["growth_vertical"])
    c_w = _fit_c(arr["lhs_vorticity"], arr["base_vorticity"], arr["growth_vorticity"])
    margin_v = arr["base_vertical"] + c_v * arr["growth_vertical"] - arr["lhs_vertical"]
    margin_w = arr["base_vorticity"] + c_w * arr["growth_vorticity"] - arr["lhs_vorticity"]
    budget = mn_budget(ledger)
    return GronwallReport(
        t=arr["t_inner"],
        lhs_vertical=arr["lhs_vertical"],
        base_vertical=arr["base_vertical"],
        growth_vertical=arr["growth_vertical"],
        c_hat_vertical=c_v,
        margin_vertical=margin_v,
        lhs_vorticity=arr["lhs_vorticity"],
        base_vorticity=arr["base_vorticity"],
        growth_vorticity=arr["growth_vorticity"],
        c_hat_vorticity=c_w,
        margin_vorticity=margin_w,
        eta_hat=budget["sup"],
    )


def evaluate_gronwall(ledger: DiagnosticsLedger, c_vertical: float,
                      c_vorticity: float) -> dict:
    """Margins of both inequalities under externally frozen constants."""
    arr = _gronwall_arrays(ledger)
    margin_v = (arr["base_vertical"] + c_vertical * arr["growth_vertical"]
                - arr["lhs_vertical"])
    margin_w = (arr["base_vorticity"] + c_vorticity * arr["growth_vorticity"]
                - arr["lhs_vorticity"])
    return {
        "t": arr["t_inner"],
        "margin_vertical": margin_v,
        "margin_vorticity": margin_w,
        "min_margin_vertical": float(margin_v.min()),
        "min_margin_vorticity": float(margin_w.min()),
        "holds": bool(margin_v.min() >= 0.0 and margin_w.min() >= 0.0),
    }


# ---------------------------------------------------------------------------
# planar / corrector a-priori ledger

class _SupInTime:
    def __init__(self):
        self.value = 0.0

    def update(self, v: float):
        if v > self.value:
            self.value = float(v)


class _L2InTime:
    """Trapezoid accumulator of a squared integrand; value() is the root."""

    def __init__(self):
        self._t = None
        self._prev = None
        self._acc = 0.0

    def update(self, t: float, sq: float):
        if self._t is not None:
            dt = t - self._t
            if dt < 0:
                raise ValueError("samples must arrive in time order")
            self._acc += 0.5 * dt * (self._prev + sq)
        self._t = t
        self._prev = sq

    @property
    def value(self) -> float:
        return float(np.sqrt(self._acc))


class PropAccumulators:
    """Left sides of the planar and corrector a-priori estimates.

    Per sample this accumulates, at exponents (sigma1, sigma2):

    * banded sup-in-time and integrated-gradient norms of the planar
      field and the corrector (dyadic blocks first, time norm second,
      l1 across blocks);
    * sup-in-time and integrated-gradient anisotropic Sobolev norms of
      their vertical shears;
    * sup-in-time horizontal-part norms of the corrector at sigma2.

    Use `observe` as a run observer, or `update` with explicit fields
    (for closed-form driver tests).
    """

    def __init__(self, grid, sigma1: float = 0.0, sigma2: float = 0.5,
                 bands: Bands | None = None):
        if not -1.0 < sigma1 < 1.0:
            raise ValueError(f"sigma1 must lie in (-1, 1), got {sigma1}")
        if not 0.0 < sigma2 < 1.0:
            raise ValueError(f"sigma2 must lie in (0, 1), got {sigma2}")
        self.sigma1 = float(sigma1)
        self.sigma2 = float(sigma2)
        self.bands = bands if bands is not None else Bands(grid)
        b = self.bands
        self.cl_bar = CheminLernerAccumulator(b, sigma1, sigma2, np.inf, "l1")
        self.cl_grad_bar = CheminLernerAccumulator(b, sigma1, sigma2, 2, "l1")
        self.cl_tilde = CheminLernerAccumulator(b, sigma1, sigma2, np.inf, "l1")
        self.cl_grad_tilde = CheminLernerAccumulator(b, sigma1, sigma2, 2, "l1")
        self.sup_d3_bar = _SupInTime()
        self.int_grad_d3_bar = _L2InTime()
        self.sup_d3_tilde = _SupInTime()
        self.int_grad_d3_tilde = _L2InTime()
        self.sup_tilde_h = _SupInTime()
        self.sup_grad_tilde_h = _SupInTime()

    def update(self, t: float, ubar_h: VectorField, utilde: VectorField):
        s1, s2 = self.sigma1, self.sigma2
        self.cl_bar.update(t, ubar_h.components)
        self.cl_grad_bar.update(t, _grad_comps(ubar_h))
        self.cl_tilde.update(t, utilde.components)
        self.cl_grad_tilde.update(t, _grad_comps(utilde))
        d3b = _d3(ubar_h)
        d3t = _d3(utilde)
        ref_sq = _mass_sq(ubar_h) + _mass_sq(utilde)
        self.sup_d3_bar.update(
            _sobolev_noise_floor(d3b, s1, ref_sq, "d3 planar"))
        self.int_grad_d3_bar.update(
            t, _sobolev_noise_floor(_grad_comps(d3b), s1, ref_sq,
                                    "grad d3 planar") ** 2)
        self.sup_d3_tilde.update(
            _sobolev_noise_floor(d3t, s1, ref_sq, "d3 corrector"))
        self.int_grad_d3_tilde.update(
            t, _sobolev_noise_floor(_grad_comps(d3t), s1, ref_sq,
                                    "grad d3 corrector") ** 2)
        uth = VectorField(utilde.components[:2])
        self.sup_tilde_h.update(aniso_sobolev(uth, s2))
        self.sup_grad_tilde_h.update(aniso_sobolev(_grad_comps(uth), s2))

    def observe(self, state):
        self.update(state.t, state.ubar_h, state.utilde)

    def left_sides(self) -> dict:
        return {
            "planar_besov": self.cl_bar.value() + self.cl_grad_bar.value(),
            "planar_shear": self.sup_d3_bar.value + self.int_grad_d3_bar.value,
            "corrector_besov": self.cl_tilde.value() + self.cl_grad_tilde.value(),
            "corrector_shear": (self.sup_d3_tilde.value
                                + self.int_grad_d3_tilde.value),
            "corrector_horizontal": (self.sup_tilde_h.value**2
                                     + self.sup_grad_tilde_h.value**2),
        }


def prop_estimates_report(acc: PropAccumulators, u0: VectorField,
                          delta: float = 0.5) -> dict:
    """Realized left/right ratios of the five a-priori estimates.

    Right sides are pure initial-data norms: interpolated horizontal-l1
    products for the banded estimates, anisotropic Sobolev norms of the
    vertical shear for the rest.  The unknown absolute constants and
    exponential budget factors are reported alongside but kept out of
    the ratio, which is what sweep tests compare across data scalings.
    """
    s1, s2 = acc.sigma1, acc.sigma2
    u0h = VectorField(u0.components[:2])
    d3u0 = _d3(u0)
    d3u0h = VectorField(d3u0.components[:2])
    a_budget, b_budget = _soft_budgets(u0, delta)
    rhs = {
        "planar_besov": (horizontal_l1(u0h, s1) ** (1.0 - s2)
                         * horizontal_l1(d3u0h, s1) ** s2),
        "planar_shear": aniso_sobolev(d3u0h, s1, name="d3 planar data"),
        "corrector_besov": (horizontal_l1(u0, s1) ** (1.0 - s2)
                            * horizontal_l1(d3u0, s1) ** s2),
        "corrector_shear": aniso_sobolev(d3u0, s1, name="d3 data"),
        "corrector_horizontal":
            aniso_sobolev(d3u0, s2 - 1.0, name="d3 data") ** 2,
    }
    lhs = acc.left_sides()
    estimates = {}
    for name, r in rhs.items():
        left = lhs[name]
        if r > 0:
            ratio = left / r
        else:
            # a left side this small over an exactly-zero right side is
            # roundoff debris of a component the data never excites
            ratio = 0.0 if left <= 1e-20 else np.inf
        estimates[name] = {"lhs": left, "rhs": r, "ratio": ratio}
    return {
        "sigma1": s1,
        "sigma2": s2,
        "delta": delta,
        "planar_budget": a_budget,
        "coupling_budget": b_budget,
        "exp_arguments": {
            "b00_data": horizontal_l1(u0, 0.0),
            "b00_shear": horizontal_l1(d3u0, 0.0),
        },
        "estimates": estimates,
    }


# ---------------------------------------------------------------------------
# blow-up monitors and largeness

def _soft_budgets(u0: VectorField, delta: float):
    """(planar, coupling) budgets, tolerating exponential overflow.

    The strict smallness report refuses data whose budget exponentials
    leave IEEE range; diagnostics reports want the honest value, which
    in that case is simply infinity.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        a = planar_budget(u0, delta)
        b = coupling_budget(u0, delta, planar=a)
    if np.isnan(b):
        b = np.inf
    return float(a), float(b)

def blowup_monitors(ledger: DiagnosticsLedger, p: float = 2.5,
                    q_exp: float | None = None,
                    dyadic_exponent: float = 2.0) -> dict:
    """Time integrals of the two blow-up integrands recorded in a run.

    The vertical-shear monitor integrates ||d3 u||_{L^p}^q with the
    admissible pairing 2/q + 3/p = 2, p in (9/4, 3); the dyadic monitor
    integrates the sup-norm derivative sum at its own exponent.  Both
    are monitors of a finite run, with no claim about breakdown times.
    The requested exponents must match a recorded series (they are
    baked into the integrand at sampling time and carried in the params
    column); otherwise this raises KeyError.
    """
    if q_exp is None:
        q_exp = kz_q_for_p(p)
    validate_shear_exponents(p, q_exp)
    params = f"p={float(p):g},q={float(q_exp):g}"
    t, kz = ledger.series("kz_integrand", params)
    out = {
        "vertical_shear_integral": float(np.trapezoid(kz, t)),
        "vertical_shear_params": params,
    }
    dyn_params = f"p_ij={float(dyadic_exponent):g}"
    try:
        td, dyn = ledger.series("dyadic_sup_sum", dyn_params)
    except KeyError:
        out["dyadic_integral"] = None
    else:
        out["dyadic_integral"] = float(np.trapezoid(dyn, td))
        out["dyadic_params"] = dyn_params
    return out


def largeness_report(u0: VectorField, ledger: DiagnosticsLedger | None = None,
                     delta: float = 0.5, c_emb: float | None = None,
                     bands: Bands | None = None) -> dict:
    """Pair the sup-type largeness of the data with its smallness product.

    The point of the construction: the dyadic sup norm of the data stays
    order one while the anisotropic smallness product shrinks.  When a
    ledger is supplied, the report also integrates the squared banded
    gradient norms of the planar and corrector fields and summarizes the
    recorded embedding ratios; `c_emb` is an externally measured
    embedding constant the ratios are compared against.
    """
    b = bands if bands is not None else Bands(u0.grid)
    largeness = bneg1_inf(u0, b)
    a_budget, b_budget = _soft_budgets(u0, delta)
    d3u0 = _d3(u0)
    shear_sq = aniso_sobolev(d3u0, -0.5, name="d3 data") ** 2
    with np.errstate(over="ignore", invalid="ignore"):
        product = float(shear_sq * np.exp(a_budget + b_budget))
    if shear_sq == 0.0:
        product = 0.0
    besov_data = aniso_besov(u0, 0.0, 0.5, 2, 1, b)
    if besov_data > 0:
        embed = largeness / besov_data
    else:
        embed = 0.0 if largeness == 0.0 else np.inf
    out = {
        "largeness_bneg1_inf": largeness,
        "smallness_lhs": product,
        "data_besov_bh": besov_data,
        "data_embedding_ratio": embed,
    }
    if c_emb is not None:
        out["embedding_constant"] = float(c_emb)
        out["data_embedding_ok"] = out["data_embedding_ratio"] <= c_emb
    if ledger is not None:
        t, g_bar = ledger.series("grad_ubar_bh")
        _, g_til = ledger.series("grad_utilde_bh")
        out["gradient_besov_integral"] = float(
            np.trapezoid(g_bar**2 + g_til**2, t))
        try:
            _, ratios = ledger.series("embedding_ratio")
        except KeyError:
            pass
        else:
            out["run_embedding_max"] = float(ratios.max())
            if c_emb is not None:
                out["run_embedding_ok"] = out["run_embedding_max"] <= c_emb
    return out
