import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tentspace.gamma import (
    GammaNormEstimate,
    GaussianSampler,
    averaging_operator_matrix,
    covariance_domination_check,
    domination_multiplier,
    gamma_boundedness_probe,
    gamma_norm,
    integral_samples,
    khintchine_kahane_ratio,
    lp_function_norm,
    shrinking_region_norms,
    stochastic_integral_sample,
)
from tentspace.halfspace import GridFunction, NormedSpace, build_grid, restrict
from tentspace.sets import Ball


def _random(grid, space, seed, density=0.3):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=grid.shape + (space.d,)) * (rng.random(grid.shape) < density)[..., None]
    return GridFunction(grid, space, v)


def test_single_cell_variance(small1, euclid):
    f = GridFunction.impulse(small1, euclid, 1, 3, [1.0, 0.0])
    X = integral_samples(f, None, 100_000, GaussianSampler(7))
    mu = small1.level_measure[1]
    var = X[:, 0].var()
    # variance of a sample variance of N(0, mu) is 2 mu^2 / M
    assert abs(var - mu) <= 3 * mu * math.sqrt(2 / 100_000)
    assert np.all(X[:, 1] == 0)


@given(st.integers(0, 2**31))
def test_integral_additive_over_regions(seed):
    g = build_grid(1, 2, 1 / 8, 1, 3)
    f = _random(g, NormedSpace(2), seed)
    draws = GaussianSampler(seed).cell_draws(g, 1)[0]
    A = np.random.default_rng(seed).random(g.shape) < 0.5
    whole = stochastic_integral_sample(f, None, draws=draws)
    parts = stochastic_integral_sample(f, A, draws=draws) + stochastic_integral_sample(f, ~A, draws=draws)
    assert np.abs(whole - parts).max() <= 1e-12


def test_rank_one_max_norm(small1):
    sp = NormedSpace(3, math.inf)
    xi = np.array([0.5, -2.0, 1.0])
    f = GridFunction.impulse(small1, sp, 0, 2, xi)
    est = gamma_norm(f, M=50_000, sampler=GaussianSampler(3))
    want = math.sqrt(small1.level_measure[0]) * 2.0
    assert est.path == "mc"
    assert abs(est.value - want) <= 4 * est.stderr + 1e-12


@pytest.mark.parametrize("p", [1.0, 3.0, math.inf])
def test_mc_matches_exact_on_rank_one(small2, p):
    # a rank-one function f = phi xi has gamma-norm |phi|_2 |xi| in any norm
    sp = NormedSpace(2, p)
    rng = np.random.default_rng(1)
    phi = rng.normal(size=small2.shape) * (rng.random(small2.shape) < 0.2)
    xi = np.array([1.0, -0.5])
    f = GridFunction(small2, sp, phi[..., None] * xi)
    exact = math.sqrt(float(np.sum(small2.cell_measures * phi**2))) * float(sp.norm(xi))
    est = gamma_norm(f, M=40_000, sampler=GaussianSampler(11))
    assert abs(est.value - exact) <= 4 * est.stderr


def test_exact_path_matches_mc(small1, euclid):
    f = _random(small1, euclid, 2)
    ex = gamma_norm(f)
    mc = gamma_norm(f, M=40_000, path="mc", sampler=GaussianSampler(5))
    assert ex.path == "exact" and ex.stderr == 0
    assert abs(ex.value - mc.value) <= 4 * mc.stderr


def test_exact_path_needs_hilbert(small1):
    f = _random(small1, NormedSpace(2, 1.0), 0)
    with pytest.raises(ValueError):
        gamma_norm(f, path="exact")


def test_khintchine_kahane_scalar(small1):
    # |N(0, s^2)|: E|X| / (E X^2)^(1/2) = sqrt(2 / pi)
    f = GridFunction.impulse(small1, NormedSpace(1), 0, 0, [1.3])
    r, se = khintchine_kahane_ratio(f, M=100_000, sampler=GaussianSampler(4))
    assert abs(r - math.sqrt(2 / math.pi)) <= 3 * se


def test_khintchine_kahane_equal_moments(small1, euclid):
    f = _random(small1, euclid, 3)
    r, se = khintchine_kahane_ratio(f, p=2, q=2, M=2000)
    assert r == pytest.approx(1.0, abs=1e-14)


def test_khintchine_kahane_rank_one_norm_independent(small1):
    phi = np.zeros(small1.shape)
    phi[0, :4] = 1.0
    vals = []
    for p in (1.0, 2.0, math.inf):
        sp = NormedSpace(2, p)
        f = GridFunction(small1, sp, phi[..., None] * np.array([1.0, 2.0]))
        vals.append(khintchine_kahane_ratio(f, M=20_000, sampler=GaussianSampler(9))[0])
    assert max(vals) - min(vals) <= 1e-12


def test_domination(small1, euclid):
    f = _random(small1, euclid, 4)
    assert np.allclose(domination_multiplier(f * 0.5, f)[f.support], 0.5)
    A = np.zeros(small1.shape, dtype=bool)
    A[1:] = True
    m = domination_multiplier(restrict(f, A), f)
    assert set(np.unique(m[f.support])) <= {0.0, 1.0}
    rep = covariance_domination_check(restrict(f, A), f)
    assert rep["holds"]
    with pytest.raises(ValueError):
        domination_multiplier(f * 2.0, f)
    with pytest.raises(ValueError):
        domination_multiplier(_random(small1, euclid, 5), f)


def test_domination_mc(small1):
    sp = NormedSpace(2, 1.0)
    f = _random(small1, sp, 6)
    rep = covariance_domination_check(f * 0.7, f, M=20_000)
    assert rep["holds"]


def test_shrinking_regions(small1, euclid):
    f = GridFunction(small1, euclid, np.ones(small1.shape + (2,)))
    vals = shrinking_region_norms(f, [1, 2, 4, 8, 16])
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    # below the finest level nothing is left
    assert vals[-1] == 0.0


def test_probe_identity_and_multipliers(small1):
    D = small1.nb
    rng = np.random.default_rng(0)
    xi = rng.normal(size=(6, D))
    assert gamma_boundedness_probe([np.eye(D)], xi) == pytest.approx(1.0, abs=1e-14)
    mults = [np.diag(rng.uniform(-1, 1, D)) for _ in range(4)]
    assert gamma_boundedness_probe(mults, xi) <= 1.0 + 1e-12


def test_probe_averaging_operators(small1):
    base = small1.base
    ops = [averaging_operator_matrix(base, Ball([c], r)) for c in (-0.5, 0.25, 1.0) for r in (0.2, 0.6)]
    for T in ops:
        assert np.allclose(T @ T, T)
    xi = np.random.default_rng(1).normal(size=(5, base.nb))
    val = gamma_boundedness_probe(ops, xi, norm=lp_function_norm(1.0, base.h), M=4000)
    assert math.isfinite(val) and val > 0


def test_stderr_scales(small1):
    f = _random(small1, NormedSpace(2, 1.0), 7)
    a = gamma_norm(f, M=2000, sampler=GaussianSampler(1))
    b = gamma_norm(f, M=32_000, sampler=GaussianSampler(1))
    assert 2.0 <= a.stderr / b.stderr <= 8.0


def test_integral_linear(small1, euclid):
    f, g = _random(small1, euclid, 8), _random(small1, euclid, 9)
    draws = GaussianSampler(2).cell_draws(small1, 1)[0]
    lhs = stochastic_integral_sample(f * 2.0 + g, draws=draws)
    rhs = 2 * stochastic_integral_sample(f, draws=draws) + stochastic_integral_sample(g, draws=draws)
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_reproducible(small1):
    f = _random(small1, NormedSpace(2, 3.0), 10)
    a = gamma_norm(f, M=5000, sampler=GaussianSampler(42))
    b = gamma_norm(f, M=5000, sampler=GaussianSampler(42))
    c = gamma_norm(f, M=5000, sampler=GaussianSampler(43))
    assert a == b and a.value != c.value


def test_estimate_validation():
    with pytest.raises(ValueError):
        GammaNormEstimate(-1.0)
    with pytest.raises(ValueError):
        GammaNormEstimate(1.0, 0.1)
    with pytest.raises(ValueError):
        GammaNormEstimate(1.0, path="mc")
