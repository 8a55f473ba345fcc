import csv

import numpy as np
import pytest

from anisolab.bands import Bands
from anisolab.families import Slow, generate, make_grid
from anisolab.field import (VectorField, derivative, from_function,
                            random_band_limited_vector)
from anisolab.norms import NormError, aniso_besov, aniso_sobolev
from anisolab.profiles import ProfileSpec
from anisolab.stepping import StepperConfig, initial_state
from anisolab.diagnostics import (CSV_HEADER, DiagnosticsLedger, LedgerSampler,
                                  PropAccumulators, blowup_monitors,
                                  compute_MN, energy_report, evaluate_gronwall,
                                  gronwall_ledger, kz_q_for_p, largeness_report,
                                  mn_budget, mn_parts, prop_estimates_report,
                                  run_with_ledger, validate_shear_exponents,
                                  write_runs_csv)

MIXED = ProfileSpec(swirl_amplitude=0.35, potential_amplitude=0.35)


# ---------------------------------------------------------------------------
# remainder functionals

def test_mn_parts_closed_form(grid16):
    vol = grid16.vol
    v3 = from_function(grid16, lambda x1, x2, x3: np.cos(x1) * np.cos(x3))
    om = from_function(grid16, lambda x1, x2, x3: np.cos(2 * x2) * np.cos(x3))
    m_v3, m_om, n_v3, n_om = mn_parts(v3, om)
    # four modes of weight 1/16 each; |xi|^2 = 2 resp 5, |xi_h| = 1 resp 2
    assert np.isclose(m_v3, 0.5 * vol, rtol=1e-12)
    assert np.isclose(n_v3, 1.0 * vol, rtol=1e-12)
    assert np.isclose(m_om, vol / 8, rtol=1e-12)
    assert np.isclose(n_om, 5 * vol / 8, rtol=1e-12)
    m, n = compute_MN(v3, om)
    assert np.isclose(m, m_v3 + m_om, rtol=1e-14)
    assert np.isclose(n, n_v3 + n_om, rtol=1e-14)


def test_mn_matches_sobolev_route(grid16, rng):
    def spectrum(grid):
        # keep horizontal zero modes empty so the weight is defined
        env = np.exp(-grid.xi_sq / 9.0)
        return env * (~grid.h_zero_mask)

    from anisolab.field import random_band_limited
    v3 = random_band_limited(grid16, rng, spectrum)
    om = random_band_limited(grid16, rng, spectrum)
    m_v3, m_om, n_v3, n_om = mn_parts(v3, om)
    grad = [derivative(v3, ax) for ax in range(3)]
    assert np.isclose(m_v3, aniso_sobolev(grad, -0.5) ** 2, rtol=1e-10)
    assert np.isclose(m_om, aniso_sobolev(om, -0.5) ** 2, rtol=1e-10)
    grad2 = [derivative(g, ax) for g in grad for ax in range(3)]
    assert np.isclose(n_v3, aniso_sobolev(grad2, -0.5) ** 2, rtol=1e-10)
    grad_om = [derivative(om, ax) for ax in range(3)]
    assert np.isclose(n_om, aniso_sobolev(grad_om, -0.5) ** 2, rtol=1e-10)


def test_mn_rejects_horizontal_mean_mass(grid16):
    v3 = from_function(grid16, lambda x1, x2, x3: np.cos(x3) + 0 * x1 * x2)
    ok = from_function(grid16, lambda x1, x2, x3: np.cos(x1) + 0 * x2 * x3)
    with pytest.raises(NormError, match="grad v3"):
        mn_parts(v3, ok)
    with pytest.raises(NormError, match="omega"):
        mn_parts(ok, v3)


# ---------------------------------------------------------------------------
# ledger mechanics

def test_ledger_series_roundtrip():
    led = DiagnosticsLedger("demo")
    for i, t in enumerate((0.0, 0.1, 0.2)):
        led.record(t, "a", float(i))
        led.record(t, "kz", 10.0 + i, params="p=2.5")
    assert len(led) == 6
    t, v = led.series("a")
    assert np.array_equal(t, [0.0, 0.1, 0.2])
    assert np.array_equal(v, [0.0, 1.0, 2.0])
    assert led.metrics() == ["a", "kz"]
    assert led.params_for("kz") == ["p=2.5"]
    with pytest.raises(KeyError):
        led.series("missing")
    with pytest.raises(KeyError):
        led.series("kz", params="p=3")


def test_ledger_requires_increasing_time():
    led = DiagnosticsLedger()
    led.record(0.0, "a", 1.0)
    with pytest.raises(ValueError, match="increase"):
        led.record(0.0, "a", 2.0)
    # a different params tag is its own series
    led.record(0.0, "a", 2.0, params="other")


def test_csv_schema_and_roundtrip(tmp_path):
    led = DiagnosticsLedger("runA")
    led.record(0.0, "m", 1.0 / 3.0)
    led.record(0.125, "m", np.pi, params="p=2")
    other = DiagnosticsLedger("runB")
    other.record(0.5, "m", 7.25)
    path = tmp_path / "runs.csv"
    write_runs_csv(path, [led, other])
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_HEADER == ("run_id", "t", "metric", "params",
                                            "value")
    assert [r[0] for r in rows[1:]] == ["runA", "runA", "runB"]
    # 17 significant digits reproduce the doubles exactly
    assert float(rows[1][4]) == 1.0 / 3.0
    assert float(rows[2][4]) == np.pi
    assert rows[2][3] == "p=2"


def test_shear_exponent_admissibility():
    validate_shear_exponents(2.5, 2.5)
    assert kz_q_for_p(2.5) == pytest.approx(2.5, rel=1e-12)
    validate_shear_exponents(2.8, kz_q_for_p(2.8))
    with pytest.raises(ValueError, match="9/4"):
        validate_shear_exponents(2.0, 4.0)
    with pytest.raises(ValueError, match="2/q"):
        validate_shear_exponents(2.5, 2.0)


# ---------------------------------------------------------------------------
# sampling a real run

EXPECTED_METRICS = {
    "M", "N", "grad_v3_hneg_sq", "omega_hneg_sq", "grad2_v3_hneg_sq",
    "grad_omega_hneg_sq", "energy", "grad_u_sq", "grad_utilde_bh",
    "grad_ubar_bh", "utilde_h_hhalf", "grad_utilde3_bh", "grad_d3_ubar_hneg",
    "grad_d3_utilde_hneg", "ubar_bh", "utilde_bh", "grad_utilde_h_hhalf",
    "f_planar", "recompose_rel", "v_gap_rel", "kz_integrand",
    "dissipation_cum", "energy_margin",
}


def ledgered_run(heavy_stride=0, dt=5e-3, end=0.02):
    fam = Slow(0.5, MIXED)
    state = initial_state(generate(fam, make_grid(fam, (16, 16, 24))))
    led = DiagnosticsLedger("unit")
    sampler = LedgerSampler(led, heavy_stride=heavy_stride)
    final, info = run_with_ledger(state, StepperConfig(dt=dt, end_time=end),
                                  sampler)
    return led, sampler, final, info


def test_sampler_records_expected_series():
    led, sampler, final, info = ledgered_run(heavy_stride=2)
    assert not info.blew_up
    got = set(led.metrics())
    assert EXPECTED_METRICS | {"dyadic_sup_sum", "embedding_ratio"} == got
    t, m = led.series("M")
    assert len(t) == info.steps + 1
    assert t[0] == 0.0 and m[0] == 0.0  # remainder starts at zero
    # heavy metrics run on calls 0, 2, 4 of the 5
    td, _ = led.series("dyadic_sup_sum", "p_ij=2")
    assert len(td) == 3
    _, e = led.series("energy")
    assert np.all(np.diff(e) < 0)
    _, margin = led.series("energy_margin")
    assert np.abs(margin).max() < 1e-6
    with pytest.raises(RuntimeError, match="finalized"):
        sampler.finalize()


def test_sampler_validation():
    led = DiagnosticsLedger()
    with pytest.raises(ValueError, match="9/4"):
        LedgerSampler(led, kz_exponents=(2.0, 4.0))
    with pytest.raises(ValueError, match="exceed 1"):
        LedgerSampler(led, dyadic_exponent=1.0)


def test_energy_report_on_synthetic_decay():
    # E = E0 exp(-4t) with ||grad u||^2 = 4 E closes the budget exactly
    led = DiagnosticsLedger()
    for t in np.linspace(0.0, 0.1, 11):
        e = 2.0 * np.exp(-4.0 * t)
        led.record(t, "energy", e)
        led.record(t, "grad_u_sq", 4.0 * e)
    rep = energy_report(led)
    assert abs(rep["min_margin"]) < 1e-6
    assert rep["dissipation"][0] == 0.0
    assert rep["energy"][0] == 2.0


def test_mn_budget_trapezoid():
    led = DiagnosticsLedger()
    for t in np.linspace(0.0, 1.0, 21):
        led.record(t, "M", 1.0 - t)
        led.record(t, "N", 2.0)
    out = mn_budget(led)
    assert np.isclose(out["sup"], 2.0, rtol=1e-12)
    assert out["t_sup"] == 1.0
    assert np.allclose(out["curve"], 1.0 + out["t"], rtol=1e-12)


# ---------------------------------------------------------------------------
# differential-inequality ledger against a synthetic run

GROWTH_NAMES = (
    "grad_utilde_bh", "grad_ubar_bh", "utilde_h_hhalf", "grad_utilde3_bh",
    "grad_d3_ubar_hneg", "grad_d3_utilde_hneg", "ubar_bh", "utilde_bh",
    "grad_utilde_h_hhalf",
)


def synthetic_ledger(t, **series):
    base = {name: np.zeros_like(t) for name in GROWTH_NAMES}
    base.update({"M": np.zeros_like(t), "N": np.zeros_like(t),
                 "grad_v3_hneg_sq": np.zeros_like(t),
                 "omega_hneg_sq": np.zeros_like(t),
                 "grad2_v3_hneg_sq": np.zeros_like(t),
                 "grad_omega_hneg_sq": np.zeros_like(t)})
    base.update(series)
    led = DiagnosticsLedger("syn")
    for name, vals in base.items():
        for ti, vi in zip(t, vals):
            led.record(ti, name, vi)
    return led


def test_gronwall_fit_matches_hand_construction():
    # quadratic monitored norms make the centered difference exact:
    # lhs = 2 + 4t on both channels, growth = sqrt(M) N = 4t, and the
    # binding sample is the first interior time
    t = np.linspace(0.0, 1.0, 11)
    led = synthetic_ledger(
        t, M=t**2, N=np.full_like(t, 4.0),
        grad_v3_hneg_sq=t**2, grad2_v3_hneg_sq=1.0 + t,
        omega_hneg_sq=t**2, grad_omega_hneg_sq=1.0 + t,
    )
    rep = gronwall_ledger(led)
    t1 = t[1]
    assert np.isclose(rep.c_hat_vertical, (1.0 + 4 * t1) / (4 * t1),
                      rtol=1e-12)
    assert np.isclose(rep.c_hat_vorticity,
                      (1.0 + 4 * t1 - 4 * t1**2) / (4 * t1), rtol=1e-12)
    assert np.allclose(rep.lhs_vertical, 2.0 + 4.0 * t[1:-1], rtol=1e-12)
    assert np.allclose(rep.base_vertical, 1.0, rtol=1e-12)
    assert np.allclose(rep.base_vorticity, 1.0 + 4.0 * t[1:-1] ** 2,
                       rtol=1e-12)
    assert rep.margin_vertical.min() > -1e-10
    assert abs(rep.margin_vertical.min()) < 1e-10  # binds at t1
    assert np.isclose(rep.eta_hat, 5.0, rtol=1e-12)  # M(1) + int N = 1 + 4

    frozen = evaluate_gronwall(led, 4.0, 4.0)
    assert frozen["holds"]
    assert frozen["min_margin_vertical"] > 0
    loose = evaluate_gronwall(led, 1.0, 1.0)
    assert not loose["holds"]
    assert loose["min_margin_vertical"] < 0


def test_gronwall_infinite_when_growth_vanishes():
    t = np.linspace(0.0, 1.0, 11)
    led = synthetic_ledger(t, M=t**2, grad_v3_hneg_sq=t**2,
                           grad2_v3_hneg_sq=1.0 + t)
    with np.errstate(invalid="ignore"):  # margin is inf * 0 here
        rep = gronwall_ledger(led)
    assert rep.c_hat_vertical == np.inf


def test_gronwall_ledger_validation():
    t = np.linspace(0.0, 1.0, 11)
    led = synthetic_ledger(t, M=t**2)
    led2 = DiagnosticsLedger()
    for ti in (0.0, 0.5):
        for name in GROWTH_NAMES + ("M", "N", "grad_v3_hneg_sq",
                                    "omega_hneg_sq", "grad2_v3_hneg_sq",
                                    "grad_omega_hneg_sq"):
            led2.record(ti, name, 0.0)
    with pytest.raises(ValueError, match="at least three"):
        gronwall_ledger(led2)
    short = synthetic_ledger(t, M=t**2)
    short._rows = [r for r in short._rows if not
                   (r[1] == "grad_v3_hneg_sq" and r[0] > 0.5)]
    with pytest.raises(ValueError, match="common grid"):
        gronwall_ledger(short)


def test_gronwall_on_real_run():
    led, _, _, _ = ledgered_run(dt=5e-3, end=0.05)
    rep = gronwall_ledger(led)
    assert np.isfinite(rep.c_hat_vertical)
    assert np.isfinite(rep.c_hat_vorticity)
    assert rep.margin_vertical.min() > -1e-12
    assert rep.margin_vorticity.min() > -1e-12
    assert rep.eta_hat > 0
    out = evaluate_gronwall(led, 2 * rep.c_hat_vertical,
                            2 * rep.c_hat_vorticity)
    assert out["holds"]
    # report serializes
    d = rep.to_dict()
    assert isinstance(d["t"], list)
    assert "eta_hat" in rep.to_json()


# ---------------------------------------------------------------------------
# a-priori accumulators

def test_prop_accumulator_validation(grid16):
    with pytest.raises(ValueError, match="sigma1"):
        PropAccumulators(grid16, sigma1=1.5)
    with pytest.raises(ValueError, match="sigma2"):
        PropAccumulators(grid16, sigma2=0.0)


def test_prop_accumulator_constant_driver(grid16, rng):
    bands = Bands(grid16)
    ub = random_band_limited_vector(grid16, rng, 2)
    ut = random_band_limited_vector(grid16, rng, 3)
    acc = PropAccumulators(grid16, bands=bands)
    for t in (0.0, 0.5, 1.0):
        acc.update(t, ub, ut)
    lhs = acc.left_sides()

    def besov(f):
        return aniso_besov(f, 0.0, 0.5, 2, 1, bands)

    def grads(f):
        return [derivative(c, ax) for c in f.components for ax in range(3)]

    d3b = VectorField([derivative(c, 2) for c in ub.components])
    d3t = VectorField([derivative(c, 2) for c in ut.components])
    uth = VectorField(ut.components[:2])
    # constant drivers over a unit window: sup and time-L2 both equal
    # the per-sample value, and the trapezoid is exact
    assert np.isclose(lhs["planar_besov"],
                      besov(ub) + besov(grads(ub)), rtol=1e-10)
    assert np.isclose(lhs["corrector_besov"],
                      besov(ut) + besov(grads(ut)), rtol=1e-10)
    assert np.isclose(lhs["planar_shear"],
                      aniso_sobolev(d3b, 0.0) + aniso_sobolev(grads(d3b), 0.0),
                      rtol=1e-10)
    assert np.isclose(lhs["corrector_shear"],
                      aniso_sobolev(d3t, 0.0) + aniso_sobolev(grads(d3t), 0.0),
                      rtol=1e-10)
    assert np.isclose(lhs["corrector_horizontal"],
                      aniso_sobolev(uth, 0.5) ** 2
                      + aniso_sobolev(grads(uth), 0.5) ** 2, rtol=1e-10)


def test_prop_report_zero_data(grid16):
    from anisolab.stepping import zero_vector
    acc = PropAccumulators(grid16)
    z3 = zero_vector(grid16, 3)
    z2 = VectorField(z3.components[:2])
    for t in (0.0, 1.0):
        acc.update(t, z2, z3)
    rep = prop_estimates_report(acc, z3)
    assert rep["planar_budget"] == 0.0
    for est in rep["estimates"].values():
        assert est["ratio"] == 0.0


def test_prop_report_on_run():
    # 24 horizontal points push the sampled profiles' aliased plane-mean
    # debris below the negative-index rejection gates
    fam = Slow(0.5, MIXED)
    state = initial_state(generate(fam, make_grid(fam, (24, 24, 32))))
    u0 = state.u
    acc = PropAccumulators(state.grid)
    led = DiagnosticsLedger()
    sampler = LedgerSampler(led, also=(acc.observe,))
    run_with_ledger(state, StepperConfig(dt=5e-3, end_time=0.02), sampler)
    rep = prop_estimates_report(acc, u0)
    assert set(rep["estimates"]) == {
        "planar_besov", "planar_shear", "corrector_besov", "corrector_shear",
        "corrector_horizontal"}
    for est in rep["estimates"].values():
        assert np.isfinite(est["ratio"]) and est["ratio"] > 0
        assert est["lhs"] > 0 and est["rhs"] > 0


# ---------------------------------------------------------------------------
# monitors and largeness

def test_blowup_monitors_roundtrip():
    led, _, _, _ = ledgered_run(heavy_stride=1)
    out = blowup_monitors(led)
    assert out["vertical_shear_integral"] > 0
    assert out["vertical_shear_params"] == "p=2.5,q=2.5"
    assert out["dyadic_integral"] > 0
    with pytest.raises(KeyError):
        blowup_monitors(led, p=2.8)
    with pytest.raises(ValueError, match="9/4"):
        blowup_monitors(led, p=2.1)


def test_blowup_monitors_without_heavy_series():
    led, _, _, _ = ledgered_run(heavy_stride=0)
    out = blowup_monitors(led)
    assert out["dyadic_integral"] is None


def test_largeness_report_pairs_the_scales():
    fam = Slow(0.5, MIXED)
    grid = make_grid(fam, (24, 24, 32))
    u0 = generate(fam, grid)
    state = initial_state(u0)
    led = DiagnosticsLedger("large")
    sampler = LedgerSampler(led, heavy_stride=2)
    run_with_ledger(state, StepperConfig(dt=5e-3, end_time=0.02), sampler)
    rep = largeness_report(u0, led, c_emb=1.0)
    assert rep["largeness_bneg1_inf"] > 0
    assert rep["smallness_lhs"] > 0
    assert 0 < rep["data_embedding_ratio"] <= 1.0
    assert rep["data_embedding_ok"]
    assert rep["gradient_besov_integral"] > 0
    assert rep["run_embedding_max"] > 0
    assert rep["run_embedding_ok"]
