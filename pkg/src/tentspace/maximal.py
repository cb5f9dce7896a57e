"""
Uncentered Hardy-Littlewood maximal function of cell-union indicators and the
super-level extension E*_lambda = {M 1_E > lambda}.

The supremum over all balls is replaced by a finite candidate family: centers at
base cell centers, radii k h/2 for k = 1 .. 4L/h.  Every family member is a true
ball and |B cap E| is computed exactly, so the computed maximal function never
exceeds the true one and the computed extension is contained in the true one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .halfspace import BaseGrid
from .sets import OpenSet, unit_ball_volume

#: weak (1,1) constants for the uncentered operator; C_w(1) = 2 is sharp
WEAK_TYPE_CONSTANT = {1: 2.0, 2: 4.0}


def _antiderivative_sqrt(u, r):
    """Primitive of sqrt(r^2 - u^2)."""
    u = min(max(u, -r), r)
    return 0.5 * (u * math.sqrt(max(r * r - u * u, 0.0)) + r * r * math.asin(u / r))


def disk_rectangle_area(r: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Area of the origin-centered disk of radius r inside [x0, x1] x [y0, y1]."""
    a, b = max(x0, -r), min(x1, r)
    if a >= b or y0 >= y1:
        return 0.0
    cuts = {a, b}
    for yv in (y0, y1):
        if abs(yv) <= r:
            u = math.sqrt(r * r - yv * yv)
            for c in (-u, u):
                if a < c < b:
                    cuts.add(c)
    pts = sorted(cuts)
    total = 0.0
    for p, q in zip(pts[:-1], pts[1:]):
        m = 0.5 * (p + q)
        s = math.sqrt(max(r * r - m * m, 0.0))
        top_s = s < y1
        bot_s = -s > y0
        if min(y1, s) - max(y0, -s) <= 0:
            continue
        coef = int(top_s) + int(bot_s)
        const = (0.0 if top_s else y1) - (0.0 if bot_s else y0)
        if coef:
            total += coef * (_antiderivative_sqrt(q, r) - _antiderivative_sqrt(p, r))
        total += const * (q - p)
    return total


@dataclass(frozen=True)
class MaximalProfile:
    """Candidate ball family and its cell-overlap kernels.

    kernels[k, o] is |B(0, r_k) cap cell(o)|, the overlap of the radius r_k ball
    centered at a cell center with the cell at lattice offset o.
    """

    base: BaseGrid
    radii: np.ndarray
    kernels: np.ndarray
    reach: int

    @property
    def volumes(self) -> np.ndarray:
        return unit_ball_volume(self.base.n) * self.radii**self.base.n


@lru_cache(maxsize=8)
def maximal_profile(base: BaseGrid) -> MaximalProfile:
    h = base.h
    radii = base.ball_radii()
    reach = int(math.ceil(radii[-1] / h)) + 1
    offs = np.arange(-reach, reach + 1)
    if base.n == 1:
        lo = offs * h - h / 2
        hi = offs * h + h / 2
        kern = np.clip(np.minimum(hi[None, :], radii[:, None]) - np.maximum(lo[None, :], -radii[:, None]), 0, None)
    else:
        size = 2 * reach + 1
        kern = np.zeros((len(radii), size, size))
        ox, oy = np.meshgrid(offs * h, offs * h, indexing="ij")
        near = np.hypot(np.clip(np.abs(ox) - h / 2, 0, None), np.clip(np.abs(oy) - h / 2, 0, None))
        far = np.hypot(np.abs(ox) + h / 2, np.abs(oy) + h / 2)
        for k, r in enumerate(radii):
            full = far <= r
            kern[k][full] = h * h
            partial = np.argwhere((near < r) & ~full)
            for i, j in partial:
                cx, cy = ox[i, j], oy[i, j]
                kern[k, i, j] = disk_rectangle_area(r, cx - h / 2, cx + h / 2, cy - h / 2, cy + h / 2)
    kern.setflags(write=False)
    return MaximalProfile(base, radii, kern, reach)


def ball_ratios(E: OpenSet) -> np.ndarray:
    """|B cap E| / |B| for every family ball: shape (K, nb)."""
    prof = maximal_profile(E.base)
    base = E.base
    K = len(prof.radii)
    members = np.flatnonzero(E.mask)
    if len(members) == 0:
        return np.zeros((K, base.nb))
    grid_idx = np.stack(np.unravel_index(np.arange(base.nb), base.shape), axis=1)
    mem_idx = grid_idx[members]
    off = grid_idx[:, None, :] - mem_idx[None, :, :] + prof.reach
    valid = np.all((off >= 0) & (off <= 2 * prof.reach), axis=-1)
    off = np.clip(off, 0, 2 * prof.reach)
    out = np.empty((K, base.nb))
    for k in range(K):
        kk = prof.kernels[k]
        vals = kk[tuple(off[..., a] for a in range(base.n))]
        out[k] = np.where(valid, vals, 0.0).sum(axis=1)
    return out / prof.volumes[:, None]


def _containing_index(dist: np.ndarray, h: float) -> np.ndarray:
    """Index of the smallest family radius r_k = (k+1) h/2 with r_k > dist."""
    return np.floor(dist / (h / 2)).astype(np.int64)


def maximal_at(E: OpenSet, points) -> np.ndarray:
    """Family maximal function M 1_E evaluated at arbitrary points."""
    base = E.base
    p = np.atleast_2d(np.asarray(points, dtype=float))
    rho = ball_ratios(E)
    # best ratio among balls at each center with radius >= r_k
    tail = np.maximum.accumulate(rho[::-1], axis=0)[::-1]
    tail = np.vstack([tail, np.zeros((1, base.nb))])
    K = len(rho)
    out = np.empty(len(p))
    for s in range(0, len(p), 512):
        blk = p[s : s + 512]
        d = np.linalg.norm(blk[:, None, :] - base.centers[None, :, :], axis=-1)
        k = np.minimum(_containing_index(d, base.h), K)
        out[s : s + 512] = tail[k, np.arange(base.nb)[None, :]].max(axis=1)
    return np.clip(out, 0.0, 1.0)


def maximal_indicator(E: OpenSet) -> np.ndarray:
    """M 1_E at every base cell center."""
    base = E.base
    if E.is_empty():
        return np.zeros(base.nb)
    rho = ball_ratios(E)
    tail = np.maximum.accumulate(rho[::-1], axis=0)[::-1]
    tail = np.vstack([tail, np.zeros((1, base.nb))])
    k = np.minimum(_containing_index(base.center_distances, base.h), len(rho))
    return np.clip(tail[k, np.arange(base.nb)[None, :]].max(axis=1), 0.0, 1.0)


def extension(E: OpenSet, lam: float) -> OpenSet:
    """E*_lambda: base cells whose center has M 1_E > lambda."""
    if not 0 < lam < 1:
        raise ValueError("extension threshold must lie in (0, 1)")
    if E.is_empty():
        return E
    return OpenSet(E.base, maximal_indicator(E) > lam)


def weak_type_bound(E: OpenSet, lam: float, constant: float | None = None) -> float:
    """C_w(n) |E| / lambda."""
    c = WEAK_TYPE_CONSTANT[E.base.n] if constant is None else constant
    return c * E.measure / lam
