"""
Cones, tents, direction nets, sectors and the two covering constructions:
a greedy disjoint-ball cover whose 5-fold tents cover a tent, and the finite
set of boundary points whose cones cover a cone outside an extended tent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .halfspace import BaseGrid, HalfSpaceGrid
from .maximal import extension
from .sets import Ball, OpenSet, ball_tent_mask

COS30 = math.sqrt(3.0) / 2.0


# -- cones and tents --------------------------------------------------------


@dataclass(frozen=True)
class Cone:
    """Gamma_alpha(x; r) = {(y, t): |x - y| < alpha t, t < r}."""

    vertex: tuple
    aperture: float = 1.0
    height: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "vertex", tuple(float(c) for c in np.ravel(self.vertex)))
        if self.aperture < 1:
            raise ValueError("cone aperture must be >= 1")
        if not self.height > 0:
            raise ValueError("cone height must be positive")

    def contains(self, y, t) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        d = np.linalg.norm(y - np.asarray(self.vertex), axis=-1)
        return (d < self.aperture * t) & (t < self.height)

    def cell_mask(self, grid: HalfSpaceGrid) -> np.ndarray:
        """(J, nb) cells whose center lies in the cone."""
        y, t = grid.cell_coordinates()
        return self.contains(y, t)


@dataclass(frozen=True)
class Tent:
    """Tent over an open cell union: (y, t) with B(y, t) inside the set."""

    base_set: OpenSet

    def contains(self, y, t) -> np.ndarray:
        return self.base_set.tent_contains(y, t)

    def cell_mask(self, grid: HalfSpaceGrid) -> np.ndarray:
        return self.base_set.tent_mask(grid)


def cone_mask(grid: HalfSpaceGrid, x, aperture: float = 1.0, height: float = math.inf) -> np.ndarray:
    return Cone(x, aperture, height).cell_mask(grid)


# -- direction nets and sectors ---------------------------------------------


@dataclass(frozen=True)
class DirectionNet:
    n: int
    vectors: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.vectors)

    @property
    def angles(self) -> np.ndarray:
        if self.n != 2:
            raise ValueError("angles only exist for n = 2")
        return np.arctan2(self.vectors[:, 1], self.vectors[:, 0])

    def worst_cosine(self, samples: int = 36_000) -> float:
        """min over a dense sample of unit v of max_m v . v_m."""
        v = sphere_sample(self.n, samples)
        return float((v @ self.vectors.T).max(axis=1).min())

    def is_valid(self, samples: int = 36_000) -> bool:
        norms_ok = np.allclose(np.linalg.norm(self.vectors, axis=1), 1.0, atol=1e-12)
        return bool(norms_ok and self.worst_cosine(samples) >= COS30 - 1e-12)


def sphere_sample(n: int, count: int) -> np.ndarray:
    """Deterministic dense sample of the unit sphere (the two points for n = 1)."""
    if n == 1:
        return np.array([[-1.0], [1.0]])
    if n == 2:
        th = np.linspace(0.0, 2 * math.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    raise ValueError(f"unsupported dimension {n}")


def build_direction_net(n: int, count: int | None = None) -> DirectionNet:
    """Unit vectors with every direction within 30 degrees of one of them.

    n = 1 gives {-1, +1}; n = 2 gives `count` (default 6) equally spaced
    angles.  Other counts are allowed so that coarser nets can be rejected by
    DirectionNet.is_valid.
    """
    if n == 1:
        return DirectionNet(1, np.array([[-1.0], [1.0]]))
    if n == 2:
        k = 6 if count is None else int(count)
        th = 2 * math.pi * np.arange(k) / k
        return DirectionNet(2, np.stack([np.cos(th), np.sin(th)], axis=1))
    raise ValueError(f"direction nets are implemented for n in (1, 2), got {n}")


def sector_constant(n: int) -> float:
    """|R_m(x, t)| / |B(x, t)|: 1/2 on the line, 60/360 in the plane."""
    if n == 1:
        return 0.5
    if n == 2:
        return 1.0 / 6.0
    raise ValueError(f"unsupported dimension {n}")


def in_sector(net: DirectionNet, m: int, x, t: float, y) -> np.ndarray:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = y - np.asarray(x, dtype=float)
    r = np.linalg.norm(d, axis=1)
    cos = (d @ net.vectors[m]) / np.where(r > 0, r, 1.0)
    return (r < t) & ((cos >= COS30) | (r == 0))


def sample_sector(net: DirectionNet, m: int, x, t: float, count: int, rng) -> np.ndarray:
    """Uniform points of R_m(x, t)."""
    x = np.asarray(x, dtype=float)
    if net.n == 1:
        return x + net.vectors[m] * (t * rng.random(count))[:, None]
    th = net.angles[m] + rng.uniform(-math.pi / 6, math.pi / 6, count)
    r = t * np.sqrt(rng.random(count))
    return x + np.stack([r * np.cos(th), r * np.sin(th)], axis=1)


def sector_fraction_mc(n: int, samples: int, rng) -> tuple:
    """Monte Carlo |R_1(0, 1)| / |B(0, 1)| with its binomial standard error."""
    net = build_direction_net(n)
    if n == 1:
        pts = rng.uniform(-1, 1, (samples, 1))
    else:
        pts = rng.uniform(-1, 1, (4 * samples, 2))
        pts = pts[np.einsum("ij,ij->i", pts, pts) < 1][:samples]
    hit = in_sector(net, 0, np.zeros(n), 1.0, pts)
    p = hit.mean()
    return float(p), float(math.sqrt(p * (1 - p) / len(pts)))


def sector_diameter_check(net: DirectionNet, pairs: int, rng) -> float:
    """Largest |y - y'| / t over sampled pairs from the same sector."""
    worst = 0.0
    for m in range(net.N):
        t = 1.0
        a = sample_sector(net, m, np.zeros(net.n), t, pairs // net.N + 1, rng)
        b = sample_sector(net, m, np.zeros(net.n), t, pairs // net.N + 1, rng)
        worst = max(worst, float(np.linalg.norm(a - b, axis=1).max()) / t)
    return worst


def net_two_point_check(net: DirectionNet, pairs: int, rng) -> float:
    """Largest |v - v'| over sampled unit vectors v, v' of the same S_m."""
    worst = 0.0
    for m in range(net.N):
        a = sample_sector(net, m, np.zeros(net.n), 1.0, pairs // net.N + 1, rng)
        b = sample_sector(net, m, np.zeros(net.n), 1.0, pairs // net.N + 1, rng)
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        worst = max(worst, float(np.linalg.norm(a - b, axis=1).max()))
    return worst


# -- distances restricted to a sector ---------------------------------------


def _complement_boxes(E: OpenSet) -> tuple:
    """Closed boxes whose union is the complement of E, plus box-exterior flags."""
    base = E.base
    h, L = base.h, base.L
    cc = E.base.centers[~E.mask]
    lo = cc - h / 2
    hi = cc + h / 2
    far = 1e3 * L
    ext_lo, ext_hi = [], []
    for axis in range(base.n):
        for side in (-1, 1):
            a = np.full(base.n, -far)
            b = np.full(base.n, far)
            if side < 0:
                b[axis] = -L
            else:
                a[axis] = L
            ext_lo.append(a)
            ext_hi.append(b)
    lo = np.vstack([lo, np.array(ext_lo)])
    hi = np.vstack([hi, np.array(ext_hi)])
    exterior = np.zeros(len(lo), dtype=bool)
    exterior[len(cc):] = True
    return lo, hi, exterior


def _ray_entry(x, e, lo, hi):
    """Smallest s >= 0 with x + s e in the closed box [lo, hi]; inf if none."""
    s_lo = np.zeros(len(lo))
    s_hi = np.full(len(lo), np.inf)
    for i in range(len(x)):
        if abs(e[i]) < 1e-15:
            out = (x[i] < lo[:, i]) | (x[i] > hi[:, i])
            s_hi = np.where(out, -np.inf, s_hi)
            continue
        a = (lo[:, i] - x[i]) / e[i]
        b = (hi[:, i] - x[i]) / e[i]
        s_lo = np.maximum(s_lo, np.minimum(a, b))
        s_hi = np.minimum(s_hi, np.maximum(a, b))
    return np.where(s_lo <= s_hi, s_lo, np.inf)


def sector_distance(E: OpenSet, x, v, _boxes=None) -> tuple:
    """Nearest point of the closed complement of E in the closed cone of
    directions within 30 degrees of v, seen from x.

    Returns (distance, point, on_box_boundary).  Exact: the minimizer over
    box cap cone is either the plain projection onto the box (if it lies in the
    cone) or sits on one of the two bounding rays.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    lo, hi, exterior = _complement_boxes(E) if _boxes is None else _boxes
    proj = np.clip(x, lo, hi) - x
    r = np.linalg.norm(proj, axis=1)
    in_cone = (proj @ v) >= COS30 * r - 1e-14 * np.maximum(r, 1)
    best = np.where(in_cone, r, np.inf)
    pts = proj.copy()
    if len(x) == 1:
        rays = [v]
    else:
        c, s = COS30, 0.5
        rays = [np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]]), np.array([c * v[0] + s * v[1], -s * v[0] + c * v[1]])]
    for e in rays:
        s_in = _ray_entry(x, e, lo, hi)
        better = s_in < best
        best = np.where(better, s_in, best)
        pts[better] = s_in[better, None] * e[None, :]
    i = int(np.argmin(best))
    return float(best[i]), x + pts[i], bool(exterior[i])


@dataclass
class ConeCover:
    x: np.ndarray
    points: np.ndarray
    distances: np.ndarray
    on_box_boundary: np.ndarray


def cone_cover_points(E: OpenSet, net: DirectionNet, x) -> ConeCover:
    """For each direction v_m, the nearest boundary point x_m of E whose direction
    from x lies in S_m; t_m = |x_m - x| and R_m(x, t_m) is inside E."""
    x = np.asarray(x, dtype=float).ravel()
    if not E.contains(x[None])[0] or E.distance_to_complement(x[None])[0] <= 0:
        raise ValueError("cone cover needs a point of E")
    boxes = _complement_boxes(E)
    pts, dist, flags = [], [], []
    for v in net.vectors:
        d, p, ext = sector_distance(E, x, v, boxes)
        pts.append(p)
        dist.append(d)
        flags.append(ext)
    return ConeCover(x, np.array(pts), np.array(dist), np.array(flags))


@dataclass
class CoverCheck:
    samples: int
    violations: int
    marginal: int
    box_points: int

    @property
    def marginal_fraction(self) -> float:
        return self.marginal / max(self.samples, 1)

    def as_dict(self) -> dict:
        return {
            "samples": self.samples,
            "violations": self.violations,
            "marginal": self.marginal,
            "marginal_fraction": self.marginal_fraction,
            "box_points": self.box_points,
        }


def _box_gap(base: BaseGrid, y: np.ndarray) -> np.ndarray:
    return base.L - np.abs(y).max(axis=1)


def check_cone_cover(E: OpenSet, Estar: OpenSet, cover: ConeCover, samples: int, rng) -> CoverCheck:
    """Sample (y, t) in Gamma(x) minus the tent over Estar and test membership in
    the union of the cones Gamma(x_m).

    y is uniform in B(x, rho) with rho = 2 max t_m, and t is uniform on
    (max(|x - y|, dist(y, Estar^c)), that + rho), cut where B(y, t) would leave
    the box: beyond that the truncated Estar says nothing about the true one.
    A miss by less than h/2 in |y - x_m| < t is counted as marginal, anything
    worse as a violation.
    """
    base = E.base
    n = base.n
    x = cover.x
    rho = max(2 * float(cover.distances.max()), base.h)
    ys, ts = [], []
    got = 0
    for _ in range(50):
        k = samples + samples // 4
        if n == 1:
            y = x + rng.uniform(-rho, rho, (k, 1))
        else:
            th = rng.uniform(0, 2 * math.pi, k)
            r = rho * np.sqrt(rng.random(k))
            y = x + np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
        lo = np.maximum(np.linalg.norm(y - x, axis=1), Estar.distance_to_complement(y))
        hi = np.minimum(lo + rho, _box_gap(base, y))
        ok = hi > lo
        t = lo + (hi - lo) * (1.0 - rng.random(k))
        ys.append(y[ok])
        ts.append(t[ok])
        got += int(ok.sum())
        if got >= samples or got == 0:
            break
    y = np.concatenate(ys)[:samples]
    t = np.concatenate(ts)[:samples]
    gap = np.linalg.norm(y[:, None, :] - cover.points[None, :, :], axis=-1).min(axis=1)
    miss = gap >= t
    marginal = miss & (gap < t + base.h / 2)
    return CoverCheck(len(t), int(np.count_nonzero(miss & ~marginal)), int(np.count_nonzero(marginal)), int(cover.on_box_boundary.sum()))


@dataclass
class SectorLemmaCheck:
    trials: int
    violations: int
    marginal: int
    worst_shortfall: float


def sector_lemma_check(E: OpenSet, Estar: OpenSet, net: DirectionNet, trials: int, rng, points_per_trial: int = 16) -> SectorLemmaCheck:
    """Sample x in E, a direction m, a radius t with R_m(x, t) inside E and
    points y of that sector; test that B(y, t) is inside Estar.

    Points whose ball B(y, t) leaves the box are skipped.  Shortfalls
    dist(y, Estar^c) < t smaller than the cell diagonal are counted as
    marginal, since Estar comes from a finite ball family.
    """
    base = E.base
    members = np.flatnonzero(E.mask)
    boxes = _complement_boxes(E)
    viol = marg = 0
    worst = 0.0
    if len(members) == 0:
        return SectorLemmaCheck(0, 0, 0, 0.0)
    for _ in range(trials):
        c = base.centers[rng.choice(members)]
        x = c + rng.uniform(-base.h / 2, base.h / 2, base.n)
        if not E.contains(x[None])[0]:
            continue
        m = int(rng.integers(net.N))
        tm, _, _ = sector_distance(E, x, net.vectors[m], boxes)
        t = tm * (1.0 - rng.random())
        y = sample_sector(net, m, x, t, points_per_trial, rng)
        y = y[_box_gap(base, y) >= t]
        short = t - Estar.distance_to_complement(y)
        bad = short > 0
        excused = bad & (short < base.h * math.sqrt(base.n))
        viol += int(np.count_nonzero(bad & ~excused))
        marg += int(np.count_nonzero(excused))
        if bad.any():
            worst = max(worst, float(short.max()))
    return SectorLemmaCheck(trials, viol, marg, worst)


# -- greedy disjoint ball cover ---------------------------------------------


@dataclass
class BallCover:
    balls: list
    available: list  # largest available lattice radius at each step


def greedy_ball_cover(E: OpenSet) -> BallCover:
    """Disjoint lattice balls inside E, largest first.

    Candidates have centers at cell centers and radii k h/2 capped at L.  Each
    step takes the largest candidate disjoint from the balls chosen so far (so
    the chosen radius is the step's available supremum on the lattice, which is
    more than half of it) with ties going to the lexicographically smallest
    center.  The loop stops once no radius-h/2 candidate fits.
    """
    base = E.base
    if E.is_empty():
        return BallCover([], [])
    q = base.h / 2
    eps = 1e-9
    cap = math.floor(base.L / q + eps)
    units = np.floor(E.center_distance / q + eps).astype(np.int64)
    avail = np.minimum(units, cap)
    c = base.centers
    balls, sup = [], []
    while True:
        i = int(np.argmax(avail))
        k = int(avail[i])
        if k < 1:
            break
        b = Ball(c[i], k * q)
        balls.append(b)
        sup.append(b.radius)
        # remaining room at every center so that new balls stay disjoint from b
        room = np.floor((base.center_distances[i] - b.radius) / q + eps).astype(np.int64)
        avail = np.minimum(avail, room)
    return BallCover(balls, sup)


@dataclass
class BallCoverCheck:
    balls: int
    overlapping_pairs: int
    outside_E: int
    uncovered_cells: int

    @property
    def ok(self) -> bool:
        return self.overlapping_pairs == 0 and self.outside_E == 0 and self.uncovered_cells == 0


def check_ball_cover(E: OpenSet, grid: HalfSpaceGrid, balls: list, dilation: float = 5.0) -> BallCoverCheck:
    """Exhaustive grid check: disjointness, B^j inside E and tent(E) covered by
    the union of the tents over the dilated balls."""
    overl = 0
    for a in range(len(balls)):
        for b in range(a + 1, len(balls)):
            if math.dist(balls[a].center, balls[b].center) < balls[a].radius + balls[b].radius - 1e-12:
                overl += 1
    if balls:
        cen = np.array([b.center for b in balls])
        rad = np.array([b.radius for b in balls])
        outside = int(np.count_nonzero(E.distance_to_complement(cen) < rad - 1e-12))
    else:
        outside = 0
    tent = E.tent_mask(grid)
    cov = np.zeros(grid.shape, dtype=bool)
    for b in balls:
        cov |= ball_tent_mask(grid, b.scaled(dilation))
    return BallCoverCheck(len(balls), overl, outside, int(np.count_nonzero(tent & ~cov)))


def random_open_set(base: BaseGrid, rng, pieces: int | None = None, scale: float = 0.5) -> OpenSet:
    """Union of a few random intervals (n = 1) or discs and rectangles (n = 2).

    Piece sizes are at most scale * L and pieces stay in the middle half of
    the box, so extensions of the set have room before reaching the boundary.
    """
    k = int(rng.integers(1, 4)) if pieces is None else pieces
    L = base.L
    s = max(scale * L, 2.5 * base.h)
    m = np.zeros(base.nb, dtype=bool)
    c = base.centers
    for _ in range(k):
        if base.n == 1:
            a = rng.uniform(-L / 2, L / 2)
            w = rng.uniform(2 * base.h, s)
            m |= (c[:, 0] > a) & (c[:, 0] < a + w)
        elif rng.random() < 0.5:
            ctr = rng.uniform(-L / 2, L / 2, 2)
            r = rng.uniform(base.h, s / 2)
            m |= np.linalg.norm(c - ctr, axis=1) < r
        else:
            lo = rng.uniform(-L / 2, L / 2, 2)
            w = rng.uniform(2 * base.h, s, 2)
            m |= np.all((c > lo) & (c < lo + w), axis=1)
    if not m.any():
        m[base.locate(rng.uniform(-L / 2, L / 2, (1, base.n)))[0]] = True
    return OpenSet(base, m)


SET_SCALE = {1: 0.15, 2: 0.2}


def random_point_in(E: OpenSet, rng) -> np.ndarray:
    """A point of E: a member cell center jittered inside its cell."""
    base = E.base
    c = base.centers[rng.choice(np.flatnonzero(E.mask))]
    return c + rng.uniform(-base.h / 2, base.h / 2, base.n) * (1 - 1e-9)


def cone_lemma_run(base: BaseGrid, pairs: int, samples: int, rng, scale: float | None = None, max_redraws: int = 20) -> dict:
    """Cone-cover containment over random (E, x) pairs with E* = E*_{c(n)/2}.

    A pair whose sampler finds no admissible (y, t) (E* fills the box near x)
    is redrawn, at most max_redraws times per pair; redraws are counted.
    """
    n = base.n
    net = build_direction_net(n)
    scale = SET_SCALE[n] if scale is None else scale
    tot = {"pairs": 0, "samples": 0, "violations": 0, "marginal": 0, "box_points": 0, "redraws": 0}
    for _ in range(pairs):
        for attempt in range(max_redraws + 1):
            E = random_open_set(base, rng, scale=scale)
            Es = extension(E, sector_constant(n) / 2)
            x = random_point_in(E, rng)
            chk = check_cone_cover(E, Es, cone_cover_points(E, net, x), samples, rng)
            if chk.samples > 0:
                break
            tot["redraws"] += 1
        tot["pairs"] += 1
        tot["samples"] += chk.samples
        tot["violations"] += chk.violations
        tot["marginal"] += chk.marginal
        tot["box_points"] += chk.box_points
    tot["marginal_fraction"] = tot["marginal"] / max(tot["samples"], 1)
    return tot
