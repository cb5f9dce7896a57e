"""Open sets made of base cells, Euclidean balls, tents, and lattice ball sums."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .halfspace import BaseGrid, HalfSpaceGrid


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def n(self) -> int:
        return len(self.center)

    def scaled(self, k: float) -> "Ball":
        return Ball(self.center, k * self.radius)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.linalg.norm(p - np.asarray(self.center), axis=-1) < self.radius

    def tent_contains(self, y, t) -> np.ndarray:
        """(y, t) lies in the tent over the ball iff B(y, t) is inside it."""
        y = np.asarray(y, dtype=float)
        d = np.linalg.norm(y - np.asarray(self.center), axis=-1)
        return d + t <= self.radius

    def volume(self) -> float:
        return unit_ball_volume(self.n) * self.radius**self.n

    def lattice_measure(self, base: BaseGrid) -> float:
        """h^n times the number of base cell centers inside the ball.

        All x-integrals are cell-center sums, so this is the ball measure that
        keeps atom normalizations exact on the grid.
        """
        return base.cell_volume * int(np.count_nonzero(self.contains(base.centers)))

    def as_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius}


def balls_disjoint(a: Ball, b: Ball) -> bool:
    d = math.dist(a.center, b.center)
    return d >= a.radius + b.radius


class OpenSet:
    """Open subset of [-L, L]^n given as a union of open base cells.

    Shared faces between member cells count as interior, i.e. the set is the
    interior of the closure of the cell union.  Everything outside the box is
    in the complement.
    """

    def __init__(self, base: BaseGrid, mask):
        m = np.array(mask, dtype=bool).ravel()
        if m.size != base.nb:
            raise ValueError("mask size does not match the base grid")
        m.setflags(write=False)
        self.base = base
        self.mask = m

    # constructors -----------------------------------------------------------
    @classmethod
    def empty(cls, base: BaseGrid) -> "OpenSet":
        return cls(base, np.zeros(base.nb, dtype=bool))

    @classmethod
    def from_indices(cls, base: BaseGrid, indices) -> "OpenSet":
        m = np.zeros(base.nb, dtype=bool)
        m[np.asarray(list(indices), dtype=np.int64)] = True
        return cls(base, m)

    @classmethod
    def from_intervals(cls, base: BaseGrid, intervals) -> "OpenSet":
        """Cells (n = 1) whose centers lie in one of the open intervals."""
        if base.n != 1:
            raise ValueError("intervals need n = 1")
        c = base.centers[:, 0]
        m = np.zeros(base.nb, dtype=bool)
        for a, b in intervals:
            m |= (c > a) & (c < b)
        return cls(base, m)

    @classmethod
    def from_balls(cls, base: BaseGrid, balls) -> "OpenSet":
        """Cells whose centers lie in one of the balls."""
        m = np.zeros(base.nb, dtype=bool)
        for b in balls:
            m |= b.contains(base.centers)
        return cls(base, m)

    # basic set algebra ------------------------------------------------------
    def __eq__(self, other):
        return isinstance(other, OpenSet) and self.base == other.base and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.base, self.mask.tobytes()))

    def __or__(self, other):
        return OpenSet(self.base, self.mask | other.mask)

    def __and__(self, other):
        return OpenSet(self.base, self.mask & other.mask)

    def issubset(self, other) -> bool:
        return not np.any(self.mask & ~other.mask)

    def is_empty(self) -> bool:
        return not self.mask.any()

    def __len__(self):
        return int(self.mask.sum())

    @property
    def indices(self) -> list:
        return np.flatnonzero(self.mask).tolist()

    @property
    def measure(self) -> float:
        return self.base.cell_volume * len(self)

    def __repr__(self):
        return f"OpenSet(n={self.base.n}, cells={len(self)}, measure={self.measure:g})"

    # geometry ---------------------------------------------------------------
    def contains(self, points) -> np.ndarray:
        idx = self.base.locate(points)
        return (idx >= 0) & self.mask[np.maximum(idx, 0)]

    @cached_property
    def _complement_centers(self) -> np.ndarray:
        return self.base.centers[~self.mask]

    def _box_gap(self, p: np.ndarray) -> np.ndarray:
        return np.clip(self.base.L - np.abs(p), 0, None).min(axis=-1)

    @staticmethod
    def _cell_gap(p: np.ndarray, centers: np.ndarray, h: float) -> np.ndarray:
        """Distances from points (P, n) to closed cubes (C, n) -> (P, C)."""
        g = np.clip(np.abs(p[:, None, :] - centers[None, :, :]) - h / 2, 0, None)
        return np.sqrt(np.einsum("pck,pck->pc", g, g))

    @cached_property
    def center_distance(self) -> np.ndarray:
        """Distance from each base cell center to the complement."""
        return self.distance_to_complement_bruteforce(self.base.centers)

    def distance_to_complement_bruteforce(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = self._box_gap(p)
        cc = self._complement_centers
        if len(cc):
            for s in range(0, len(p), 2048):
                blk = p[s : s + 2048]
                d = self._cell_gap(blk, cc, self.base.h).min(axis=1)
                out[s : s + 2048] = np.minimum(out[s : s + 2048], d)
        return out

    @cached_property
    def _candidates(self) -> np.ndarray:
        """Per base cell, complement cells that can be nearest to a point in it."""
        base = self.base
        cc_idx = np.flatnonzero(~self.mask)
        if len(cc_idx) == 0:
            return np.zeros((base.nb, 0), dtype=np.int64)
        h = base.h
        bound = self.center_distance + h * math.sqrt(base.n) / 2
        c = base.centers
        gap = np.clip(np.abs(c[:, None, :] - c[None, cc_idx, :]) - h, 0, None)
        cellgap = np.sqrt(np.einsum("pck,pck->pc", gap, gap))
        ok = cellgap <= bound[:, None] + 1e-12
        width = max(1, int(ok.sum(axis=1).max()))
        cand = np.full((base.nb, width), -1, dtype=np.int64)
        for q in range(base.nb):
            sel = cc_idx[ok[q]]
            cand[q, : len(sel)] = sel
        return cand

    def distance_to_complement(self, points) -> np.ndarray:
        """Exact distance from arbitrary points to the closed complement."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        base = self.base
        out = self._box_gap(p)
        q = base.locate(p)
        inside = q >= 0
        out[~inside] = 0.0
        cand = self._candidates
        if cand.shape[1] == 0:
            return out
        pi = p[inside]
        cq = cand[q[inside]]
        valid = cq >= 0
        cen = base.centers[np.maximum(cq, 0)]
        g = np.clip(np.abs(pi[:, None, :] - cen) - base.h / 2, 0, None)
        d = np.sqrt(np.einsum("pck,pck->pc", g, g))
        d = np.where(valid, d, np.inf).min(axis=1)
        out[inside] = np.minimum(out[inside], d)
        return out

    def tent_mask(self, grid: HalfSpaceGrid) -> np.ndarray:
        """(J, nb) cells whose center (y, t) has B(y, t) inside the set."""
        return self.center_distance[None, :] >= grid.t_mid[:, None]

    def tent_contains(self, y, t) -> np.ndarray:
        return self.distance_to_complement(y) >= np.asarray(t)


def ball_tent_mask(grid: HalfSpaceGrid, ball: Ball) -> np.ndarray:
    y, t = grid.cell_coordinates()
    return ball.tent_contains(y, t)


# -- sums over the lattice ball family ---------------------------------------


def ball_sums(base: BaseGrid, values: np.ndarray, radius: float) -> np.ndarray:
    """For every center c, sum of values[x] over centers x with |x - c| < radius.

    values has shape (nb, ...) with arbitrary trailing channels.  The sum is a
    direct masked reduction, so exact zeros stay exact zeros.
    """
    vals = np.asarray(values, dtype=float)
    inside = (base.center_distances < radius).astype(float)
    flat = vals.reshape(base.nb, -1)
    return (inside @ flat).reshape(vals.shape)


def ball_counts(base: BaseGrid, radius: float) -> np.ndarray:
    """Number of in-box centers inside each lattice ball of the given radius."""
    return np.rint(ball_sums(base, np.ones(base.nb), radius))
