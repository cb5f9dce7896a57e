"""Seeded test-function generators on a HalfSpaceGrid."""

from __future__ import annotations

import math

import numpy as np

from .halfspace import GridFunction, HalfSpaceGrid, NormedSpace
from .sets import Ball, ball_tent_mask
from .tentnorm import square_function_field

KINDS = ("impulse", "tent", "atom", "bump")


def admissible_cells(grid: HalfSpaceGrid, aperture: float = 1.0) -> np.ndarray:
    """(J, nb) cells whose aperture-alpha cone shadow stays in the box."""
    y, t = grid.cell_coordinates()
    return np.abs(y).max(axis=-1) + aperture * t <= grid.L


def random_impulse(grid, space, rng, aperture: float = 1.0) -> GridFunction:
    j, b = _pick(admissible_cells(grid, aperture), rng)
    return GridFunction.impulse(grid, space, j, b, rng.normal(size=space.d))


def _pick(mask, rng):
    cells = np.argwhere(mask)
    if len(cells) == 0:
        raise ValueError("no admissible cells on this grid")
    return tuple(int(i) for i in cells[rng.integers(len(cells))])


def random_ball(grid: HalfSpaceGrid, rng, aperture: float = 1.0, max_radius: float | None = None) -> Ball:
    """Ball whose tent holds at least one admissible cell."""
    base = grid.base
    ok = admissible_cells(grid, aperture)
    top = grid.L / 2 if max_radius is None else max_radius
    for _ in range(1000):
        r = rng.uniform(max(grid.t_mid.min() * 1.5, base.h), top)
        c = rng.uniform(-grid.L / 2, grid.L / 2, base.n)
        c = base.centers[base.locate(c[None])[0]]
        b = Ball(c, r)
        if np.any(ball_tent_mask(grid, b) & ok):
            return b
    raise ValueError("could not place a ball with a nonempty tent")


def random_tent_field(grid, space, rng, aperture: float = 1.0, density: float = 0.5, ball: Ball | None = None) -> GridFunction:
    """Random values on a random subset of the tent over a random ball."""
    b = ball or random_ball(grid, rng, aperture)
    mask = ball_tent_mask(grid, b) & admissible_cells(grid, aperture)
    keep = mask & (rng.random(grid.shape) < density)
    if not keep.any():
        keep[_pick(mask, rng)] = True
    vals = rng.normal(size=(grid.J, grid.nb, space.d)) * keep[..., None]
    return GridFunction(grid, space, vals)


def random_atom(grid, space, rng, aperture: float = 1.0) -> tuple:
    """(atom, ball): a tent field scaled so that sum_{x in B} h^n S^2 = 1/|B|."""
    b = random_ball(grid, rng, aperture)
    f = random_tent_field(grid, space, rng, aperture, ball=b)
    base = grid.base
    S = square_function_field(f, path="exact" if space.is_hilbert else "mc").values
    inside = b.contains(base.centers)
    integral = float(np.sum(base.cell_volume * S[inside] ** 2))
    return f * (1.0 / math.sqrt(integral * b.lattice_measure(base))), b


def smooth_bump(grid, space, center, width: float, height: float, vector, aperture: float = 1.0) -> GridFunction:
    """Cell-center samples of a product bump in (y, t), cut to admissible cells.

    Defined pointwise so it can be re-sampled on refined grids.
    """
    y, t = grid.cell_coordinates()
    c = np.asarray(center, dtype=float)
    ry = np.linalg.norm(y - c, axis=-1) / width
    rt = np.abs(np.log2(t / height))
    prof = np.clip(1 - ry**2, 0, None) ** 2 * np.clip(1 - rt**2 / 4, 0, None)
    prof = prof * admissible_cells(grid, aperture)
    return GridFunction(grid, space, prof[..., None] * np.asarray(vector, dtype=float))


def random_bump(grid, space, rng, aperture: float = 1.0) -> GridFunction:
    c = rng.uniform(-grid.L / 4, grid.L / 4, grid.n)
    width = rng.uniform(grid.L / 8, grid.L / 3)
    height = grid.t_mid[rng.integers(grid.J)]
    return smooth_bump(grid, space, c, width, height, rng.normal(size=space.d), aperture)


def generate_entries(grid: HalfSpaceGrid, space: NormedSpace, count: int, seed: int = 0, kinds=KINDS, aperture: float = 1.0) -> list:
    """[(kind, GridFunction, ball or None)] cycling through the requested kinds.

    Atom entries carry their ball so they can be validated later.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        ball = None
        if kind == "impulse":
            f = random_impulse(grid, space, rng, aperture)
        elif kind == "tent":
            f = random_tent_field(grid, space, rng, aperture)
        elif kind == "atom":
            f, ball = random_atom(grid, space, rng, aperture)
        elif kind == "bump":
            f = random_bump(grid, space, rng, aperture)
            if f.is_zero():
                f = random_impulse(grid, space, rng, aperture)
        else:
            raise ValueError(f"unknown corpus kind {kind!r}")
        out.append((kind, f, ball))
    return out


def generate(grid: HalfSpaceGrid, space: NormedSpace, count: int, seed: int = 0, kinds=KINDS, aperture: float = 1.0) -> list:
    """[(kind, GridFunction)] cycling through the requested kinds."""
    return [(k, f) for k, f, _ in generate_entries(grid, space, count, seed, kinds, aperture)]
