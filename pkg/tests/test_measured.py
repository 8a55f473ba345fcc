import numpy as np
import pytest

from anisolab.bands import Bands
from anisolab.field import ScalarField, random_band_limited
from anisolab.grid import Grid
from anisolab.norms import aniso_sobolev, horizontal_l1
from anisolab.measured import (MEASURED_TESTS, MeasuredError, measured_constant,
                               scaling_largeness)


def test_roster_is_complete():
    assert len(MEASURED_TESTS) == 10
    for name in MEASURED_TESTS:
        rep = measured_constant(name, ensemble=2)
        assert rep.test == name


def test_reports_are_deterministic():
    a = measured_constant("product_bh", ensemble=8, seed=3)
    b = measured_constant("product_bh", ensemble=8, seed=3)
    assert a.max_ratio == b.max_ratio
    assert a.min_ratio == b.min_ratio
    assert a.quantiles() == b.quantiles()
    c = measured_constant("product_bh", ensemble=8, seed=4)
    assert c.max_ratio != a.max_ratio


def test_quantiles_are_ordered_and_finite():
    for name in ("bernstein_h_ball", "embedding_bneg1", "sobolev_bracket"):
        rep = measured_constant(name, ensemble=16)
        q = rep.quantiles()
        assert 0 < q["min"] <= q["median"] <= q["q90"] <= q["max"]
        assert np.isfinite(q["max"])


def test_bracket_stays_inside_the_orthogonality_window():
    rep = measured_constant("sobolev_bracket", ensemble=16)
    assert 0.45 < rep.min_ratio
    assert rep.max_ratio < 1.01


def test_exponent_admissibility():
    cases = [
        ("bernstein_h_ball", {"alpha": (-1, 0)}, "nonnegative"),
        ("bernstein_h_ball", {"p1": 2.0, "p2": 4.0}, "p2 <= p1"),
        ("bernstein_h_ball", {"q1": 0.5}, "q1 >= 1"),
        ("bernstein_v_ball", {"beta": -1}, "beta"),
        ("bernstein_v_ball", {"q1": 2.0, "q2": 4.0}, "q2 <= q1"),
        ("bernstein_h_ring", {"n_deriv": 0}, "at least one derivative"),
        ("bernstein_v_ring", {"n_deriv": 0}, "at least one derivative"),
        ("product_bh", {"s1": 1.5}, "s1, s2 <= 1"),
        ("product_bh", {"s1": -0.5, "s2": 0.3}, "s1 \\+ s2 > 0"),
        ("product_sobolev", {"s1": 1.0}, "s1, s2 < 1"),
        ("product_sobolev", {"r1": 0.5}, "r1, r2 < 1/2"),
        ("product_mixed", {"s3": 1.2}, "s3 <= 1"),
        ("product_mixed", {"r3": 0.6}, "r3 <= 1/2"),
        ("interpolation_h", {"s": 1.5}, "s1 < s < s2"),
    ]
    for name, kw, msg in cases:
        with pytest.raises(MeasuredError, match=msg):
            measured_constant(name, ensemble=1, **kw)


def test_unknown_test_and_exponent_rejected():
    with pytest.raises(MeasuredError, match="unknown test"):
        measured_constant("bernstein_diagonal")
    with pytest.raises(MeasuredError, match="no exponent"):
        measured_constant("embedding_bneg1", sigma=1.0)
    with pytest.raises(MeasuredError, match="positive"):
        measured_constant("product_bh", ensemble=0)


def test_interpolation_is_near_equality_on_one_band():
    # a single dyadic block makes both sides weigh the same shell, so
    # the ratio collapses to the cutoff bookkeeping
    grid = Grid((2 * np.pi,) * 3, (32, 32, 32))
    bands = Bands(grid)
    rng = np.random.default_rng(11)
    f = random_band_limited(grid, rng)
    c = f.coef * bands.mult_h(3)
    c[np.broadcast_to(grid.h_zero_mask, grid.shape)] = 0.0
    c[np.broadcast_to(grid.v_zero_mask, grid.shape)] = 0.0
    f = ScalarField(grid, c)
    num = horizontal_l1(f, 0.5, bands)
    den = np.sqrt(aniso_sobolev(f, 0.0) * aniso_sobolev(f, 1.0))
    assert 0.5 < num / den < 1.5


def test_scaling_largeness_drift_is_small():
    out = scaling_largeness()
    assert out["factors"] == (4, 8, 16)
    assert len(out["values"]) == 3
    assert out["drift"] < 0.2
    with pytest.raises(MeasuredError, match="Nyquist"):
        scaling_largeness(factors=(32,))
