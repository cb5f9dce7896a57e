"""Independent brute-force oracles.

Everything here is written with plain loops or quadrature and shares no code
with the package beyond the grid geometry, so agreement is a real check.
"""

from __future__ import annotations

import math

import numpy as np


def gl_integral(fn, a: float, b: float, nodes: int = 40) -> float:
    x, w = np.polynomial.legendre.leggauss(nodes)
    t = a + (b - a) * (x + 1) / 2
    return float(np.sum(w * fn(t)) * (b - a) / 2)


def cell_measure(h: float, n: int, t_lo: float, t_hi: float) -> float:
    """h^n int t^-(n+1) dt by quadrature."""
    return h**n * gl_integral(lambda t: t ** (-n - 1.0), t_lo, t_hi)


def cell_list(grid):
    """[(j, b, y, t, mu)] for every cell."""
    out = []
    for j in range(grid.J):
        lo = grid.T / 2 ** (j + 1)
        hi = grid.T / 2**j
        mu = grid.h**grid.n * (lo ** (-grid.n) - hi ** (-grid.n)) / grid.n
        for b, y in enumerate(grid.base.centers):
            out.append((j, b, np.array(y), (lo + hi) / 2, mu))
    return out


def square_sq(f, x, alpha=1.0, r=math.inf, weight=None) -> float:
    """sum over cells with |x - y| < alpha t and t < r of mu |f|^2 (euclidean)."""
    total = 0.0
    for j, b, y, t, mu in cell_list(f.grid):
        v = f.values[j, b]
        if not np.any(v):
            continue
        d = math.dist(x, y)
        if weight is None:
            if d < alpha * t and t < r:
                total += mu * float(v @ v)
        else:
            total += weight(d / t) ** 2 * mu * float(v @ v)
    return total


def tent_norm(f, p=1.0, alpha=1.0) -> float:
    base = f.grid.base
    s = [math.sqrt(square_sq(f, x, alpha)) for x in base.centers]
    return sum(base.h**base.n * v**p for v in s) ** (1 / p)


def tent_infty(g, alpha=1.0) -> float:
    """max over all family balls, each evaluated by loops."""
    base = g.grid.base
    best = 0.0
    cache = {}
    for r in base.ball_radii():
        key = int(np.count_nonzero(g.grid.t_mid < r))
        if key == 0:
            continue
        if key not in cache:
            cache[key] = np.array([square_sq(g, x, alpha, r) for x in base.centers])
        s2 = cache[key]
        for c in base.centers:
            ins = np.linalg.norm(base.centers - c, axis=1) < r
            best = max(best, float(s2[ins].mean()))
    return math.sqrt(best)


def interval_overlap(a0, a1, b0, b1) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def maximal_1d(mask, base, x) -> float:
    """max over family intervals (c - r, c + r) containing x of |B cap E| / |B|."""
    cells = [(c - base.h / 2, c + base.h / 2) for c, m in zip(base.centers[:, 0], mask) if m]
    best = 0.0
    for r in base.ball_radii():
        for c in base.centers[:, 0]:
            if abs(x - c) >= r:
                continue
            inter = sum(interval_overlap(c - r, c + r, lo, hi) for lo, hi in cells)
            best = max(best, inter / (2 * r))
    return min(best, 1.0)


def greedy_1d(mask, base):
    """Greedy disjoint intervals inside E, radius multiple of h/2, capped at L,
    ties to the smallest center.  Interval (c - r, c + r) fits when every cell it
    meets is in E and it stays in the box."""
    h = base.h
    cent = base.centers[:, 0]
    chosen = []
    kmax = int(round(base.L / (h / 2)))
    while True:
        best = None
        for k in range(kmax, 0, -1):
            r = k * h / 2
            for c in cent:
                if c - r < -base.L - 1e-12 or c + r > base.L + 1e-12:
                    continue
                meets = [(lo < c + r - 1e-12) and (lo + h > c - r + 1e-12) for lo in cent - h / 2]
                if any(m and not e for m, e in zip(meets, mask)):
                    continue
                if any(abs(c - c2) < r + r2 - 1e-12 for c2, r2 in chosen):
                    continue
                best = (c, r)
                break
            if best:
                break
        if best is None:
            return chosen
        chosen.append(best)


def pairing(f, g) -> float:
    grid = f.grid
    cn = math.pi ** (grid.n / 2) / math.gamma(grid.n / 2 + 1)
    total = 0.0
    for j, b, y, t, mu in cell_list(grid):
        lo, hi = grid.T / 2 ** (j + 1), grid.T / 2**j
        total += float(f.values[j, b] @ g.values[j, b]) * grid.h**grid.n * gl_integral(lambda s: 1 / s, lo, hi)
    return cn * total


def cell_integral_1d(profile, lo, hi, y, t, pieces=4000) -> float:
    """Composite Simpson for int_lo^hi profile(|z - y| / t) dz."""
    z = np.linspace(lo, hi, 2 * pieces + 1)
    v = profile(np.abs(z - y) / t)
    dz = (hi - lo) / (2 * pieces)
    return float(dz / 3 * (v[0] + v[-1] + 4 * v[1:-1:2].sum() + 2 * v[2:-1:2].sum()))
