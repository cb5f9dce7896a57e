import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tentspace.halfspace import (
    GridFunction,
    NormedSpace,
    build_grid,
    function_from_document,
    function_to_document,
    load_function,
    region_measure,
    restrict,
    save_function,
    shadow_inside,
    slab_measure,
)

from . import oracles


def test_cell_count():
    g = build_grid(1, 4, 0.25, 2, 3)
    assert g.nb == 32 and g.J == 3 and g.ncells == 96


def test_top_level_cell_measure():
    g = build_grid(1, 4, 0.25, 2, 3)
    # y-width 0.25, t in [1, 2): 0.25 (1 - 1/2)
    assert g.t_lo[0] == 1 and g.t_hi[0] == 2
    assert g.level_measure[0] == pytest.approx(0.125, abs=1e-15)


@pytest.mark.parametrize("n,L,h,T,J", [(1, 4, 0.25, 2, 3), (1, 4, 1 / 16, 2, 5), (2, 2, 1 / 8, 2, 5)])
def test_cell_measures_match_quadrature(n, L, h, T, J):
    g = build_grid(n, L, h, T, J)
    for j in range(J):
        assert g.level_measure[j] == pytest.approx(oracles.cell_measure(h, n, g.t_lo[j], g.t_hi[j]), rel=1e-12)
        assert g.level_measure[j] > 0


def test_slab_closed_form_vs_cell_sum():
    g = build_grid(1, 4, 0.25, 2, 3)
    top = np.zeros(g.shape, dtype=bool)
    top[0] = True
    assert slab_measure(g, 0) == pytest.approx(4.0, abs=1e-14)
    assert region_measure(g, top) == pytest.approx(4.0, abs=1e-12)
    g2 = build_grid(2, 2, 1 / 8, 2, 5)
    for j in range(5):
        lv = np.zeros(g2.shape, dtype=bool)
        lv[j] = True
        assert region_measure(g2, lv) == pytest.approx(slab_measure(g2, j), rel=1e-12)


@pytest.mark.parametrize("bad", [(1, 4, 0, 2, 3), (1, 4, 0.25, -1, 3), (1, 4, 0.25, 2, 0), (3, 4, 0.25, 2, 3), (1, 1, 0.25, 2, 3), (1, 4, 0.3, 2, 3)])
def test_build_grid_rejects(bad):
    with pytest.raises(ValueError):
        build_grid(*bad)


@given(st.integers(0, 2**32 - 1))
def test_measure_additivity(seed):
    g = build_grid(1, 4, 1 / 16, 2, 5)
    rng = np.random.default_rng(seed)
    a = rng.random(g.shape) < 0.3
    b = rng.random(g.shape) < 0.3
    b &= ~a
    assert abs(region_measure(g, a | b) - region_measure(g, a) - region_measure(g, b)) <= 1e-12 * max(1.0, region_measure(g, a | b))


def test_refinement_consistency():
    """int f dmu for a smooth f changes by O(h) when h halves."""
    prof = lambda y, t: np.exp(-y[..., 0] ** 2) * t**2

    def integral(h):
        g = build_grid(1, 4, h, 2, 5)
        y, t = g.cell_coordinates()
        f = GridFunction(g, NormedSpace(1), prof(y, t)[..., None])
        return float(f.integral()[0])

    vals = [integral(h) for h in (1 / 4, 1 / 8, 1 / 16, 1 / 32)]
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] <= diffs[:-1] * 0.75 + 1e-15)
    assert diffs[-1] <= 1 / 32


def test_restrict_examples(grid1, euclid):
    rng = np.random.default_rng(1)
    f = GridFunction(grid1, euclid, rng.normal(size=(grid1.J, grid1.nb, 2)))
    assert np.array_equal(restrict(f, None).values, f.values)
    assert restrict(f, np.zeros(grid1.shape, bool)).is_zero()
    a = rng.random(grid1.shape) < 0.5
    assert restrict(restrict(f, a), ~a).is_zero()
    assert not np.any(restrict(f, a).support & ~a)


def test_restrict_by_predicate(grid1, euclid):
    f = GridFunction(grid1, euclid, np.ones((grid1.J, grid1.nb, 2)))
    r = restrict(f, lambda y, t: t < 0.5)
    _, t = grid1.cell_coordinates()
    assert np.array_equal(r.support, t < 0.5)


def test_grid_function_invariants(grid1, euclid):
    with pytest.raises(ValueError):
        GridFunction(grid1, euclid, np.zeros((grid1.J, grid1.nb, 3)))
    bad = np.zeros((grid1.J, grid1.nb, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        GridFunction(grid1, euclid, bad)
    f = GridFunction.zeros(grid1, euclid)
    with pytest.raises(AttributeError):
        f.values = None
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), st.sampled_from(["euclidean", "pnorm(1)", "pnorm(3)", "max"]))
def test_norm_axioms(u, v, tag):
    X = NormedSpace.from_tag(3, tag)
    u, v = np.array(u), np.array(v)
    assert X.norm(u) >= 0
    assert X.norm(u + v) <= X.norm(u) + X.norm(v) + 1e-9 * (1 + X.norm(u) + X.norm(v))
    assert (X.norm(u) == 0) == (not np.any(u))


def test_norm_tags_and_duals():
    assert NormedSpace.from_tag(2, "euclidean").is_hilbert
    assert NormedSpace.from_tag(2, "pnorm(3)").dual().p == pytest.approx(1.5)
    assert NormedSpace.from_tag(2, "max").dual().p == 1
    assert NormedSpace.from_tag(2, "pnorm(1)").dual().tag == "max"
    with pytest.raises(ValueError):
        NormedSpace.from_tag(2, "sobolev")


def test_shadow_inside(grid1, euclid):
    f = GridFunction.impulse(grid1, euclid, 0, 0, [1, 0])
    assert not shadow_inside(f)
    mid = grid1.base.locate([[0.0]])[0]
    assert shadow_inside(GridFunction.impulse(grid1, euclid, 0, mid, [1, 0]))


@pytest.mark.parametrize("binary", [False, True])
def test_serialization_roundtrip(tmp_path, grid2, binary):
    rng = np.random.default_rng(0)
    X = NormedSpace.from_tag(3, "pnorm(3)")
    f = GridFunction(grid2, X, rng.normal(size=(grid2.J, grid2.nb, 3)))
    path = save_function(f, tmp_path / "f.json", binary=binary)
    doc = json.loads(path.read_text())
    assert {"n", "L", "h", "T", "J", "d", "norm_tag"} <= doc.keys()
    if binary:
        raw = np.fromfile(tmp_path / doc["values_file"], dtype="<f8")
        assert raw.size == grid2.ncells * 3
    g = load_function(path)
    assert g.grid == f.grid and g.space == f.space
    assert np.array_equal(g.values, f.values)


def test_document_rejects_wrong_length(grid1):
    doc = function_to_document(GridFunction.zeros(grid1, NormedSpace(1)))
    doc["values"] = doc["values"][:-1]
    with pytest.raises(ValueError):
        function_from_document(doc)
