import numpy as np
import pytest

from anisolab.grid import Grid
from anisolab.field import (ScalarField, VectorField, from_values, from_function,
                            derivative, gradient, gradient_h, divergence,
                            divergence_h, curl_h, dealiased_product, translate,
                            random_band_limited, random_band_limited_vector)

TWO_PI = 2.0 * np.pi


def wave(grid, m=(2, 1, 1)):
    return from_function(grid, lambda x1, x2, x3:
                         np.sin(m[0] * x1) * np.cos(m[1] * x2) * np.cos(m[2] * x3))


def test_l2_closed_form(grid16):
    f = wave(grid16)
    # each factor contributes 1/2 of the volume
    assert np.isclose(f.l2(), np.sqrt(grid16.vol / 8), rtol=1e-13)
    assert np.isclose(f.linf(), 1.0, rtol=1e-12)
    assert abs(f.mean()) < 1e-15


def test_lp_matches_quadrature(grid16, rng):
    f = random_band_limited(grid16, rng)
    vals = f.values()
    w = grid16.vol / vals.size
    for p in (1.0, 3.0, 4.0):
        assert np.isclose(f.lp(p), (np.sum(np.abs(vals) ** p) * w) ** (1 / p),
                          rtol=1e-12)
    assert np.isclose(f.lp(2.0), f.l2(), rtol=1e-12)


def test_derivative_single_mode(grid16):
    f = from_function(grid16, lambda x1, x2, x3: np.sin(3 * x1))
    d = derivative(f, 0)
    target = from_function(grid16, lambda x1, x2, x3: 3 * np.cos(3 * x1))
    assert np.abs(d.values() - target.values()).max() < 1e-12
    d2 = derivative(f, 0, order=2)
    assert np.abs(d2.values() + 9 * f.values()).max() < 1e-11


def test_derivative_respects_box():
    g = Grid((TWO_PI, TWO_PI, 4.0 * TWO_PI), (8, 8, 16))
    f = from_function(g, lambda x1, x2, x3: np.sin(0.5 * x3))
    d = derivative(f, 2)
    target = from_function(g, lambda x1, x2, x3: 0.5 * np.cos(0.5 * x3))
    assert np.abs(d.values() - target.values()).max() < 1e-12


def test_vector_calculus_identities(grid16, rng):
    f = random_band_limited(grid16, rng)
    lap = sum(derivative(f, i, order=2).coef for i in range(3))
    div_grad = divergence(gradient(f))
    assert np.abs(div_grad.coef - lap).max() < 1e-12
    # curl_h of a horizontal gradient vanishes
    gh = gradient_h(f)
    assert curl_h(gh).l2() < 1e-12 * max(f.l2(), 1.0)
    assert divergence_h(VectorField((gh.components[0], gh.components[1]))).l2() > 0


def test_dealiased_product_exact_on_narrow_factors(grid16):
    # factors supported below keep//2 multiply alias-free
    a = from_function(grid16, lambda x1, x2, x3: np.sin(2 * x1))
    b = from_function(grid16, lambda x1, x2, x3: np.cos(x1))
    ab = dealiased_product(a, b)
    target = from_function(grid16, lambda x1, x2, x3: np.sin(2 * x1) * np.cos(x1))
    assert np.abs(ab.values() - target.values()).max() < 1e-13


def test_dealiased_product_masks_high_output(grid16):
    keep = grid16.dealias_keep[0]
    a = from_function(grid16, lambda x1, x2, x3: np.sin(keep * x1))
    ab = dealiased_product(a, a)
    # sin^2 has a 2*keep harmonic; the mask must remove it
    assert np.abs(ab.coef[2 * keep % 16, 0, 0]) < 1e-15
    assert np.isclose(ab.coef[0, 0, 0].real, 0.5, atol=1e-13)


def test_product_rejects_operator_misuse(grid16):
    f = wave(grid16)
    with pytest.raises(TypeError):
        f * f  # pointwise products must go through dealiased_product
    g = 2.0 * f
    assert np.isclose(g.l2(), 2.0 * f.l2(), rtol=1e-14)


def test_translate_shifts_samples(grid16):
    f = from_function(grid16, lambda x1, x2, x3: np.sin(x1 + 2 * x3))
    s = (0.7, 0.0, 1.3)
    g = translate(f, s)
    target = from_function(grid16, lambda x1, x2, x3:
                           np.sin((x1 - s[0]) + 2 * (x3 - s[2])))
    assert np.abs(g.values() - target.values()).max() < 1e-12
    assert np.isclose(g.l2(), f.l2(), rtol=1e-13)


def test_from_values_roundtrip(grid16, rng):
    vals = rng.standard_normal(grid16.shape)
    f = from_values(grid16, vals)
    assert np.abs(f.values() - vals).max() < 1e-12


def test_random_band_limited_properties(grid16):
    rng = np.random.default_rng(3)
    f = random_band_limited(grid16, rng)
    assert np.isclose(f.l2(), 1.0, rtol=1e-12)
    assert np.abs(f.coef[~grid16.dealias_mask]).max() == 0.0
    # deterministic for a fixed seed
    g = random_band_limited(grid16, np.random.default_rng(3))
    assert np.array_equal(f.coef, g.coef)


def test_random_vector_component_count(grid16, rng):
    v3 = random_band_limited_vector(grid16, rng)
    assert len(v3.components) == 3
    v2 = random_band_limited_vector(grid16, rng, ncomp=2)
    assert len(v2.components) == 2
    with pytest.raises(ValueError):
        VectorField((v3.components[0],))


def test_vector_norm_is_component_sum(grid16, rng):
    v = random_band_limited_vector(grid16, rng)
    direct = np.sqrt(sum(c.l2() ** 2 for c in v.components))
    assert np.isclose(v.l2(), direct, rtol=1e-13)


def test_grid_mismatch_rejected(grid16, grid24, rng):
    f = random_band_limited(grid16, rng)
    g = random_band_limited(grid24, rng)
    with pytest.raises(ValueError):
        dealiased_product(f, g)
