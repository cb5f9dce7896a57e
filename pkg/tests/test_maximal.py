import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tentspace.geometry import random_open_set
from tentspace.halfspace import build_grid
from tentspace.maximal import (
    WEAK_TYPE_CONSTANT,
    ball_ratios,
    disk_rectangle_area,
    extension,
    maximal_at,
    maximal_indicator,
    maximal_profile,
    weak_type_bound,
)
from tentspace.sets import Ball, OpenSet

from . import oracles


def _disk_rect_quadrature(r, x0, x1, y0, y1, nodes=400):
    # integrate the chord length of the disc over x in [x0, x1]
    def chord(x):
        half = np.sqrt(np.clip(r * r - x * x, 0, None))
        return np.clip(np.minimum(half, y1) - np.maximum(-half, y0), 0, None)

    a, b = max(x0, -r), min(x1, r)
    if b <= a:
        return 0.0
    # split at the kinks of the chord function
    cuts = sorted({a, b, *[c for c in (-math.sqrt(max(r * r - y * y, 0)) for y in (y0, y1)) if a < c < b], *[c for c in (math.sqrt(max(r * r - y * y, 0)) for y in (y0, y1)) if a < c < b]})
    return sum(oracles.gl_integral(chord, lo, hi, nodes) for lo, hi in zip(cuts[:-1], cuts[1:]))


@given(st.floats(0.05, 2), st.floats(-2, 2), st.floats(0.01, 1), st.floats(-2, 2), st.floats(0.01, 1))
def test_disk_rectangle_area(r, x0, w, y0, hgt):
    got = disk_rectangle_area(r, x0, x0 + w, y0, y0 + hgt)
    assert got == pytest.approx(_disk_rect_quadrature(r, x0, x0 + w, y0, y0 + hgt), abs=1e-6)


def test_disk_rectangle_tangent():
    # radius h/2 ball inscribed in its own cell
    assert disk_rectangle_area(0.5, -0.5, 0.5, -0.5, 0.5) == pytest.approx(math.pi / 4, abs=1e-14)


def test_family_contains_inscribed_balls(grid1, grid2):
    for g in (grid1, grid2):
        prof = maximal_profile(g.base)
        assert prof.radii[0] == g.h / 2
        assert prof.radii[-1] == pytest.approx(2 * g.L)


def test_maximal_matches_oracle_1d(small1):
    rng = np.random.default_rng(0)
    for _ in range(5):
        E = random_open_set(small1.base, rng)
        got = maximal_indicator(E)
        want = [oracles.maximal_1d(E.mask, small1.base, x) for x in small1.base.centers[:, 0]]
        assert np.allclose(got, want, atol=1e-14)


def test_ball_ratios_2d_against_quadrature(small2):
    base = small2.base
    E = OpenSet.from_balls(base, [Ball([0.1, -0.2], 0.5)])
    rho = ball_ratios(E)
    rng = np.random.default_rng(1)
    for _ in range(10):
        k = int(rng.integers(len(base.ball_radii())))
        b = int(rng.integers(base.nb))
        r = base.ball_radii()[k]
        c = base.centers[b]
        inter = sum(
            disk_rectangle_area(r, lo[0] - c[0], lo[0] - c[0] + base.h, lo[1] - c[1], lo[1] - c[1] + base.h)
            for lo in base.centers[E.mask] - base.h / 2
        )
        assert rho[k, b] == pytest.approx(inter / (math.pi * r * r), abs=1e-12)


def test_interval_maximal_far_point(grid1):
    E = OpenSet.from_intervals(grid1.base, [(0.0, 1.0)])
    v = float(maximal_at(E, [[2.0]])[0])
    # continuum value 1/2, approached from below on the lattice family
    assert v == pytest.approx(oracles.maximal_1d(E.mask, grid1.base, 2.0), abs=1e-14)
    assert v == pytest.approx(16 / 33, abs=1e-14)
    assert v <= 0.5 + grid1.h


def test_maximal_on_E_is_one(grid1):
    E = OpenSet.from_intervals(grid1.base, [(0.0, 1.0)])
    M = maximal_indicator(E)
    assert np.all(M[E.mask] == 1.0)
    assert np.all((0 <= M) & (M <= 1))


def test_maximal_empty(grid1):
    assert not np.any(maximal_indicator(OpenSet.empty(grid1.base)))
    assert extension(OpenSet.empty(grid1.base), 0.5).is_empty()


def test_interval_extension(grid1):
    E = OpenSet.from_intervals(grid1.base, [(0.0, 1.0)])
    Es = extension(E, 0.5)
    # closed form (-1, 2): |E*| = 3 within 2h; the lattice family gives 3 - 2h
    assert abs(Es.measure - 3.0) <= 2 * grid1.h + 1e-12
    assert Es.measure == pytest.approx(2.875, abs=1e-12)
    assert Es.measure <= weak_type_bound(E, 0.5)


def test_extension_near_one(grid1):
    E = OpenSet.from_intervals(grid1.base, [(0.0, 1.0)])
    Es = extension(E, 1 - 1e-9)
    assert E.issubset(Es) and len(Es) - len(E) <= 1


def test_extension_rejects_threshold(grid1):
    E = OpenSet.from_intervals(grid1.base, [(0.0, 1.0)])
    for lam in (0, 1, 1.5):
        with pytest.raises(ValueError):
            extension(E, lam)


@given(st.integers(0, 2**31), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_extension_properties(seed, a, b):
    g = build_grid(1, 4, 1 / 16, 2, 5)
    E = random_open_set(g.base, np.random.default_rng(seed))
    lo, hi = min(a, b), max(a, b)
    Elo, Ehi = extension(E, lo), extension(E, hi)
    assert E.issubset(Ehi) and Ehi.issubset(Elo)
    assert Ehi.measure <= WEAK_TYPE_CONSTANT[1] * E.measure / hi * (1 + 1e-12)


@given(st.integers(0, 2**31), st.floats(0.05, 0.95))
def test_weak_type_2d(seed, lam):
    g = build_grid(2, 2, 1 / 8, 2, 5)
    E = random_open_set(g.base, np.random.default_rng(seed), scale=0.3)
    assert extension(E, lam).measure <= weak_type_bound(E, lam) * (1 + 1e-12)
