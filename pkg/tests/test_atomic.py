import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tentspace.atomic import (
    ball_cover_report,
    decompose,
    l1_constant,
    level_sets,
    validate_atom,
    verify_cone_bound,
)
from tentspace.corpus import generate, random_tent_field
from tentspace.halfspace import GridFunction, NormedSpace, build_grid, load_function
from tentspace.sets import Ball
from tentspace.tentnorm import square_function_field, tent_norm_p


def _single_cell_atom(grid, space, ball, j, y, scale=1.0):
    base = grid.base
    b = int(base.locate([y])[0])
    f = GridFunction.impulse(grid, space, j, b, [1.0] + [0.0] * (space.d - 1))
    inside = ball.contains(base.centers)
    shadow = np.linalg.norm(base.centers - base.centers[b], axis=1) < grid.t_mid[j]
    # integral over B of S^2 = #(B and shadow) h^n mu |xi|^2, solved for |xi|
    integral = np.count_nonzero(inside & shadow) * base.cell_volume * grid.level_measure[j]
    return f * (scale / math.sqrt(integral * ball.lattice_measure(base)))


def _atom_on(grid, space, ball, seed):
    f = random_tent_field(grid, space, np.random.default_rng(seed), ball=ball)
    S = square_function_field(f).values
    inside = ball.contains(grid.base.centers)
    integral = float(np.sum(grid.base.cell_volume * S[inside] ** 2))
    return f * (1 / math.sqrt(integral * ball.lattice_measure(grid.base)))


def test_zero_atom_valid(grid1, euclid):
    rep = validate_atom(GridFunction.zeros(grid1, euclid), Ball([0.5], 0.25))
    assert rep.valid and rep.integral == 0


def test_single_cell_atom_equality(grid1, grid2, euclid):
    for g, y in ((grid1, [0.0]), (grid2, [0.0, 0.0])):
        ball = Ball(y, 1.0)
        a = _single_cell_atom(g, euclid, ball, 3, y)
        rep = validate_atom(a, ball)
        assert rep.valid and rep.support_ok
        assert rep.integral == pytest.approx(rep.bound, rel=1e-12)
        assert not validate_atom(a * 1.01, ball).valid


def test_leaks_are_named(grid1, euclid):
    ball = Ball([0.0], 0.5)
    b = int(grid1.base.locate([[2.0]])[0])
    a = GridFunction.impulse(grid1, euclid, 4, b, [1e-3, 0.0])
    rep = validate_atom(a, ball)
    assert not rep.valid and not rep.support_ok
    assert rep.leaks == [(4, b)]


def test_level_sets_zero(grid1, euclid):
    assert level_sets(GridFunction.zeros(grid1, euclid)) == []


@given(st.integers(0, 2**31))
@settings(max_examples=15)
def test_level_sets_nested(seed):
    g = build_grid(1, 4, 1 / 16, 2, 5)
    f = generate(g, NormedSpace(2), 1, seed=seed)[0][1]
    lev = level_sets(f)
    for (k0, E0), (k1, E1) in zip(lev, lev[1:]):
        assert k1 == k0 + 1 and E1.issubset(E0)
    assert lev[-1][1].is_empty()
    assert not lev[0][1].is_empty()


def test_level_sets_single_cell(grid1, euclid):
    base = grid1.base
    b = int(base.locate([[0.0]])[0])
    f = GridFunction.impulse(grid1, euclid, 2, b, [0.7, 0.0])
    amp = math.sqrt(grid1.level_measure[2]) * 0.7
    shadow = np.abs(base.centers[:, 0] - base.centers[b, 0]) < grid1.t_mid[2]
    for k, E in level_sets(f):
        assert np.array_equal(E.mask, shadow if 2.0**k < amp else np.zeros_like(shadow))


def test_decompose_zero(grid1, euclid):
    dec = decompose(GridFunction.zeros(grid1, euclid))
    assert dec.terms == [] and dec.l1 == 0


def test_decompose_multiple_of_atom(grid1, euclid):
    ball = Ball([0.5], 0.75)
    a = _atom_on(grid1, euclid, ball, 0)
    assert validate_atom(a, ball).valid
    f = a * 0.01
    dec = decompose(f)
    norm = tent_norm_p(f).value
    assert dec.reconstruction_error() <= 1e-10
    assert norm <= dec.l1 <= l1_constant(1) * norm
    for t in dec.terms:
        assert validate_atom(t.atom, t.ball).valid


def test_decompose_two_far_atoms(grid1, euclid):
    b1, b2 = Ball([-2.5], 0.5), Ball([2.5], 0.5)
    a1, a2 = _atom_on(grid1, euclid, b1, 1), _atom_on(grid1, euclid, b2, 2)
    dec = decompose(a1 + a2 * 3.0)
    assert dec.reconstruction_error() <= 1e-10
    families = set()
    for t in dec.terms:
        s = t.atom.support
        in1, in2 = bool(np.any(s & a1.support)), bool(np.any(s & a2.support))
        assert in1 != in2
        families.add(in1)
        assert abs(t.ball.center[0]) > 1
    assert families == {True, False}


@pytest.mark.parametrize("dim", [1, 2])
def test_decompose_corpus_invariants(grid1, grid2, euclid, dim):
    g = grid1 if dim == 1 else grid2
    for _, f in generate(g, euclid, 4 if dim == 1 else 2, seed=5):
        dec = decompose(f)
        assert dec.reconstruction_error() <= 1e-10
        assert dec.partition_check() == {"sum_violations": 0, "overlaps": 0, "A_overlaps": 0}
        assert dec.l1 <= l1_constant(dim) * dec.source_norm
        assert ball_cover_report(dec)["bad_levels"] == 0
        rep = verify_cone_bound(dec)
        assert rep.violations == 0 and rep.chain_violations == 0
        for t in dec.terms:
            assert validate_atom(t.atom, t.ball).valid


def test_cone_bound_off_next_level(grid1, euclid):
    f = generate(grid1, euclid, 2, seed=8)[1][1]
    dec = decompose(f)
    for lv, nxt in zip(dec.levels, dec.levels[1:]):
        # 1_{A_k} f vanishes on the tent over E_{k+1}*
        assert not np.any(lv.A & nxt.tent)


def test_manifest_and_save(tmp_path, grid1, euclid):
    f = generate(grid1, euclid, 1, seed=3)[0][1]
    dec = decompose(f)
    path = dec.save(tmp_path)
    doc = json.loads(path.read_text())
    assert len(doc["terms"]) == len(dec.terms)
    assert doc["l1"] == pytest.approx(dec.l1)
    first = doc["terms"][0]
    atom = load_function(tmp_path / first["atom_ref"])
    assert np.array_equal(atom.values, dec.terms[0].atom.values)
    assert set(first) >= {"lambda", "k", "j", "ball", "atom_ref"}


def test_l1_constant():
    assert l1_constant(1) == pytest.approx(320.0)
    assert l1_constant(2) == pytest.approx(28800.0)


def test_decompose_rejects_escaping_support(grid1, euclid):
    f = GridFunction.impulse(grid1, euclid, 0, 0, [1.0, 0.0])
    with pytest.raises(ValueError):
        decompose(f)
