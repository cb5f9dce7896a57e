"""
Smooth cutoff embedding J_psi, the averaging projection N_psi, its kernel,
the BMO oscillation functional and the H^1-atom image checks.

An embedded field F(x; y, t) is sampled at base cell centers x and stored with
shape (nb_x, J, nb, d).  The x-integrals of psi(|z - y| / t) against cells are
exact for n = 1 (antiderivative of the piecewise linear profile) and a 4 x 4
Gauss-Legendre rule per cell for n = 2.

N_psi is normalized by the discrete constant
    c_hat(y, t) = sum_c w_c(y, t) psi(|z_c - y| / t),  w_c = int_{cell c} psi(|z - y| / t) dz,
which approximates c_psi t^n and makes N o N = N and N J = J exact identities
of the discrete model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gamma import DEFAULT_SAMPLES, GaussianSampler, grouped_jackknife
from .halfspace import BaseGrid, GridFunction, HalfSpaceGrid, NormedSpace, build_grid
from .sets import Ball
from .tentnorm import Cutoff

KNOTS = 1024
MAX_PRODUCT_BYTES = 512 * 2**20
_DESCENT = 0.25  # width of the smooth drop after r = 1
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_SUBCELLS = 4  # per axis, for the composite rule in n = 2


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3 - 2 * u)


def _smoothstep_slope(u):
    u = np.asarray(u, dtype=float)
    return np.where((u > 0) & (u < 1), 6 * u * (1 - u), 0.0)


def _sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 points for n = 1)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def _radial_moment(knots, vals, n: int) -> float:
    """int_0^alpha v(r) r^(n-1) dr for the piecewise linear v, exact.

    Simpson per segment is exact here: v is linear and r^(n-1) has degree <= 1.
    """
    a, b = knots[:-1], knots[1:]
    va, vb = vals[:-1], vals[1:]
    m = (a + b) / 2
    vm = (va + vb) / 2
    w = lambda r: r ** (n - 1)
    return float(np.sum((b - a) / 6 * (va * w(a) + 4 * vm * w(m) + vb * w(b))))


def _radial_square_moment(knots, vals, n: int) -> float:
    """int_0^alpha v(r)^2 r^(n-1) dr, exact (cubic integrand at most)."""
    a, b = knots[:-1], knots[1:]
    va, vb = vals[:-1], vals[1:]
    m = (a + b) / 2
    vm = (va + vb) / 2
    w = lambda r: r ** (n - 1)
    return float(np.sum((b - a) / 6 * (va**2 * w(a) + 4 * vm**2 * w(m) + vb**2 * w(b))))


def _profile_parts(alpha: float, knots: np.ndarray):
    """Positive part (1 then smooth descent) and unit bump with their slopes."""
    r = knots
    pos = 1 - _smoothstep((r - 1) / _DESCENT)
    dpos = -_smoothstep_slope((r - 1) / _DESCENT) / _DESCENT
    a0 = 1 + _DESCENT
    q = (alpha - a0) / 4
    up = _smoothstep((r - a0) / q)
    down = _smoothstep((alpha - r) / q)
    bump = np.minimum(up, down)
    dbump = np.where(r < (a0 + alpha) / 2, _smoothstep_slope((r - a0) / q), -_smoothstep_slope((alpha - r) / q)) / q
    return pos, dpos, bump, dbump, [0.0, 1.0, a0, a0 + q, alpha - q, alpha]


def _knots(alpha: float, breaks, count: int = KNOTS) -> np.ndarray:
    k = np.linspace(0.0, alpha, count - len(breaks))
    return np.unique(np.concatenate([k, breaks]))


def _solve_beta(n: int, alpha: float):
    breaks = _profile_parts(alpha, np.zeros(1))[-1]
    knots = _knots(alpha, breaks)
    pos, dpos, bump, dbump, _ = _profile_parts(alpha, knots)
    beta = _radial_moment(knots, pos, n) / _radial_moment(knots, bump, n)
    return beta, knots, pos, dpos, bump, dbump


def minimal_alpha(n: int, tol: float = 1e-6) -> float:
    """Smallest alpha for which the construction has bump amplitude <= 1."""
    lo, hi = 1 + _DESCENT + 1e-9, 2.0
    while _solve_beta(n, hi)[0] > 1:
        hi *= 2
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if _solve_beta(n, mid)[0] > 1:
            lo = mid
        else:
            hi = mid
    return hi


class InfeasibleCutoff(ValueError):
    def __init__(self, n: int, alpha: float, beta: float):
        self.minimal_alpha = minimal_alpha(n)
        super().__init__(f"alpha={alpha:g} needs bump amplitude {beta:.4f} > 1 in dimension {n}; minimal feasible alpha is {self.minimal_alpha:.6f}")


@dataclass(frozen=True)
class SmoothCutoff:
    """Radial profile psi: 1 on [0, 1], C^1 descent to 0 on [1, 1.25], a negative
    bump of amplitude beta on [1.25, alpha] with zero radial mean in R^n."""

    n: int
    alpha: float
    beta: float
    knots: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)
    c_psi: float
    zero_mean: float

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r < self.alpha, np.interp(r, self.knots, self.values), 0.0)

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r < self.alpha, np.interp(r, self.knots, self.slopes), 0.0)

    @property
    def max_slope(self) -> float:
        return float(np.abs(self.slopes).max())

    def antiderivative(self, u) -> np.ndarray:
        """Phi(u) = int_0^u psi(|s|) ds, odd in u; exact for the interpolant."""
        u = np.asarray(u, dtype=float)
        k, v = self.knots, self.values
        cum = np.concatenate([[0.0], np.cumsum(np.diff(k) * (v[:-1] + v[1:]) / 2)])
        a = np.minimum(np.abs(u), self.alpha)
        i = np.clip(np.searchsorted(k, a, side="right") - 1, 0, len(k) - 2)
        s = (v[i + 1] - v[i]) / (k[i + 1] - k[i])
        du = a - k[i]
        return np.sign(u) * (cum[i] + v[i] * du + s * du * du / 2)

    def as_cutoff(self) -> Cutoff:
        return Cutoff.from_table(self.knots, self.values, self.alpha, f"smooth(n={self.n},alpha={self.alpha:g})")

    def check(self) -> dict:
        rep = self.as_cutoff().check()
        rep["zero_mean"] = abs(self.zero_mean) <= 1e-10
        rep["continuous"] = bool(self.values[-1] == 0 and self.values[0] == 1)
        rep["valid"] = rep["valid"] and rep["zero_mean"] and rep["continuous"]
        return rep

    def to_dict(self) -> dict:
        return {"n": self.n, "alpha": self.alpha, "beta": self.beta, "c_psi": self.c_psi, "zero_mean": self.zero_mean, "max_slope": self.max_slope}


def build_smooth_cutoff(n: int, alpha: float) -> SmoothCutoff:
    if n not in (1, 2):
        raise ValueError("cutoffs are built for n = 1 or 2")
    if not alpha > 2:
        raise ValueError("the smooth cutoff needs alpha > 2")
    beta, knots, pos, dpos, bump, dbump = _solve_beta(n, alpha)
    if beta > 1:
        raise InfeasibleCutoff(n, alpha, beta)
    vals = pos - beta * bump
    slopes = dpos - beta * dbump
    area = _sphere_area(n)
    zero_mean = area * _radial_moment(knots, vals, n)
    c_psi = area * _radial_square_moment(knots, vals, n)
    for a in (knots, vals, slopes):
        a.setflags(write=False)
    return SmoothCutoff(n, float(alpha), float(beta), knots, vals, slopes, c_psi, zero_mean)


# -- cell integrals of psi(|z - y| / t) --------------------------------------


def cell_integrals(cutoff: SmoothCutoff, lower: np.ndarray, h: float, y, t: float) -> np.ndarray:
    """int over each cube [lower, lower + h]^n of psi(|z - y| / t) dz."""
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if lower.shape[1] == 1:
        a = (lower[:, 0] - y[0]) / t
        b = (lower[:, 0] + h - y[0]) / t
        return t * (cutoff.antiderivative(b) - cutoff.antiderivative(a))
    # composite 4-point Gauss-Legendre on _SUBCELLS^2 subsquares
    sub = h / _SUBCELLS
    u = (np.arange(_SUBCELLS)[:, None] * sub + (_GL_NODES + 1) / 2 * sub).ravel()
    wq = np.tile(_GL_WEIGHTS / 2 * sub, _SUBCELLS)
    px = lower[:, 0:1, None] + u[None, :, None] - y[0]
    py = lower[:, 1:2, None] + u[None, None, :] - y[1]
    vals = cutoff(np.sqrt(px * px + py * py) / t)
    return np.einsum("kab,a,b->k", vals, wq, wq)


def _lattice_lower(base: BaseGrid) -> np.ndarray:
    return base.centers - base.h / 2


def _offset_table(cutoff: SmoothCutoff, base: BaseGrid, t: float) -> np.ndarray:
    """w for the cell at integer offset k from a center, k in [-(m-1), m-1]^n."""
    m = base.m
    off = np.arange(-(m - 1), m) * base.h
    mesh = np.meshgrid(*([off] * base.n), indexing="ij")
    lower = np.stack([g.ravel() for g in mesh], axis=1) - base.h / 2
    return cell_integrals(cutoff, lower, base.h, np.zeros(base.n), t).reshape((2 * m - 1,) * base.n)


def slice_weights(cutoff: SmoothCutoff, grid: HalfSpaceGrid) -> np.ndarray:
    """(J, nb_z, nb_y) exact cell integrals w_z(y, t) with y, t at cell centers."""
    base = grid.base
    m = base.m
    idx = np.stack(np.unravel_index(np.arange(base.nb), base.shape), axis=1)
    diff = idx[:, None, :] - idx[None, :, :] + (m - 1)
    out = np.empty((grid.J, base.nb, base.nb))
    for j, t in enumerate(grid.t_mid):
        table = _offset_table(cutoff, base, float(t))
        out[j] = table[tuple(diff[..., k] for k in range(base.n))]
    return out


def profile_weights(cutoff, grid: HalfSpaceGrid) -> np.ndarray:
    """(J, nb_x, nb_y) center samples psi(|x - y| / t)."""
    D = grid.base.center_distances
    return cutoff(D[None, :, :] / grid.t_mid[:, None, None])


# -- embedded fields --------------------------------------------------------


def product_grid_bytes(grid: HalfSpaceGrid, d: int = 1) -> int:
    return 8 * grid.nb * grid.ncells * max(d, 1)


def _guard(grid: HalfSpaceGrid, d: int, limit: int | None = None):
    need = product_grid_bytes(grid, d)
    cap = MAX_PRODUCT_BYTES if limit is None else limit
    if need > cap:
        raise MemoryError(f"product grid needs {need / 2**20:.0f} MiB (> {cap / 2**20:.0f} MiB); use a coarser base mesh")


class EmbeddedField:
    """R^d-valued F(x; y, t) on (base centers) x (half-space cells)."""

    __slots__ = ("grid", "space", "values")

    def __init__(self, grid: HalfSpaceGrid, space: NormedSpace, values):
        v = np.array(values, dtype=float)
        shape = (grid.nb, grid.J, grid.nb, space.d)
        if v.shape != shape:
            raise ValueError(f"values shape {v.shape} != {shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedded field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "values", v)

    def __setattr__(self, key, value):
        raise AttributeError("EmbeddedField is immutable")

    @classmethod
    def zeros(cls, grid, space) -> "EmbeddedField":
        return cls(grid, space, np.zeros((grid.nb, grid.J, grid.nb, space.d)))

    def with_values(self, values) -> "EmbeddedField":
        return EmbeddedField(self.grid, self.space, values)

    def at(self, x: int) -> GridFunction:
        """The slice F(x; .) as a grid function."""
        return GridFunction(self.grid, self.space, self.values[x])

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def max_abs_diff(self, other: "EmbeddedField") -> float:
        return float(np.abs(self.values - other.values).max(initial=0.0))

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def to_document(self) -> dict:
        doc = dict(self.grid.config())
        doc.update(d=self.space.d, norm_tag=self.space.tag, values=self.values.reshape(self.grid.nb, -1, self.space.d).tolist())
        return doc

    @classmethod
    def from_document(cls, doc: dict) -> "EmbeddedField":
        grid = build_grid(doc["n"], doc["L"], doc["h"], doc["T"], doc["J"])
        space = NormedSpace.from_tag(int(doc["d"]), doc["norm_tag"])
        vals = np.asarray(doc["values"], dtype=float).reshape(grid.nb, grid.J, grid.nb, space.d)
        return cls(grid, space, vals)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_document()))
        return path

    def __repr__(self):
        g = self.grid
        return f"EmbeddedField(n={g.n}, nb={g.nb}, J={g.J}, d={self.space.d}, tag={self.space.tag})"


def support_inside(f: GridFunction, alpha: float) -> bool:
    """B(y, alpha t) stays in the box for every support cell of f."""
    from .halfspace import shadow_inside

    return shadow_inside(f, alpha)


def embed_J(f: GridFunction, cutoff, check_support: bool = True, memory_limit: int | None = None) -> EmbeddedField:
    """J f(x; y, t) = cutoff(|x - y| / t) f(y, t) at base centers x."""
    _guard(f.grid, f.space.d, memory_limit)
    alpha = cutoff.alpha
    if check_support and not support_inside(f, alpha):
        raise ValueError("supp cutoff(|. - y| / t) leaves the base box for some support cell")
    P = profile_weights(cutoff, f.grid)  # (J, x, y)
    vals = np.einsum("jxy,jyk->xjyk", P, f.values)
    return EmbeddedField(f.grid, f.space, vals)


def slice_integrals(f: GridFunction, cutoff: SmoothCutoff) -> np.ndarray:
    """(J, nb, d): exact x-integrals f(y, t) int psi(|x - y| / t) dx over the box."""
    W = slice_weights(cutoff, f.grid)
    return W.sum(axis=1)[..., None] * f.values


def slice_constants(cutoff: SmoothCutoff, grid: HalfSpaceGrid):
    """(W, P, c_hat): cell weights, center samples and the discrete c_psi t^n."""
    W = slice_weights(cutoff, grid)
    P = profile_weights(cutoff, grid)
    c_hat = np.einsum("jzy,jzy->jy", W, P)
    return W, P, c_hat


def project_N(F: EmbeddedField, cutoff: SmoothCutoff, constants=None) -> EmbeddedField:
    """N F(x; y, t) = psi(|x - y| / t) c_hat^-1 sum_z w_z F(z; y, t)."""
    W, P, c_hat = constants if constants is not None else slice_constants(cutoff, F.grid)
    if np.any(c_hat <= 0):
        raise ValueError("nonpositive slice normalization")
    a = np.einsum("jzy,zjyk->jyk", W, F.values) / c_hat[..., None]
    return F.with_values(np.einsum("jxy,jyk->xjyk", P, a))


def averaging_operator(cutoff: SmoothCutoff, base: BaseGrid, y, t: float, continuum: bool = False) -> np.ndarray:
    """(nb, nb) matrix of A^psi_{y,t} on cell-center samples:
    u -> psi(|x - y| / t) c^-1 sum_z w_z u(z), with c = c_hat (discrete) or c_psi t^n."""
    y = np.asarray(y, dtype=float).reshape(-1)
    w = cell_integrals(cutoff, _lattice_lower(base), base.h, y, t)
    p = cutoff(np.linalg.norm(base.centers - y, axis=1) / t)
    c = cutoff.c_psi * t**base.n if continuum else float(w @ p)
    return np.outer(p, w) / c


def normalization_report(cutoff: SmoothCutoff, grid: HalfSpaceGrid) -> dict:
    """Discrete c_hat against c_psi t^n on slices whose support is in the box."""
    _, _, c_hat = slice_constants(cutoff, grid)
    y, t = grid.cell_coordinates()
    ok = np.abs(y).max(axis=-1) + cutoff.alpha * t <= grid.L
    ratio = c_hat[ok] / (cutoff.c_psi * t[ok] ** grid.n)
    if ratio.size == 0:
        return {"slices": 0}
    return {"slices": int(ratio.size), "min_ratio": float(ratio.min()), "max_ratio": float(ratio.max())}


# -- kernel -----------------------------------------------------------------


@dataclass
class KernelProbe:
    samples: int
    kernel: float
    gradient: float
    kernel_bound: float
    gradient_bound: float
    violations: int
    far_nonzero: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def kernel_bound_probe(cutoff: SmoothCutoff, samples: int = 200_000, rng=None, grid: HalfSpaceGrid | None = None, pairs: int = 64) -> KernelProbe:
    """Empirical sup of |K(x,z)| |x-z|^n and |grad_x K(x,z)| |x-z|^(n+1).

    K(x,z) multiplies by psi(|x-y|/t) psi(|z-y|/t) / (c_psi t^n).  Both scaled
    quantities are dilation and translation invariant, so (x, z, t) is put in
    the frame x = 0, z = s e_1, t = 1 with s in (0, 2 alpha) and y sampled from
    B(0, alpha), the only region where psi(|x - y|) is nonzero.  With a grid,
    random pairs of base centers are also swept over every grid cell (y, t),
    and pairs farther apart than 2 alpha T must see a zero kernel.
    """
    rng = rng or np.random.default_rng(0)
    n, a, c = cutoff.n, cutoff.alpha, cutoff.c_psi
    kb = a**n / c
    gb = cutoff.max_slope * a ** (n + 1) / c
    s = rng.uniform(0, 2 * a, samples)
    y = rng.normal(size=(samples, n))
    y *= (a * rng.random(samples) ** (1 / n) / np.linalg.norm(y, axis=1))[:, None]
    z = np.zeros((samples, n))
    z[:, 0] = s
    u = np.linalg.norm(y, axis=1)
    v = np.linalg.norm(y - z, axis=1)
    k = np.abs(cutoff(u) * cutoff(v)) * s**n / c
    g = np.abs(cutoff.derivative(u) * cutoff(v)) * s ** (n + 1) / c
    kmax, gmax = float(k.max()), float(g.max())
    viol = int(np.count_nonzero(k > kb * (1 + 1e-12)) + np.count_nonzero(g > gb * (1 + 1e-12)))
    far = 0
    count = samples
    if grid is not None:
        base = grid.base
        yc, tc = grid.cell_coordinates()
        for _ in range(pairs):
            i, j = rng.choice(base.nb, 2, replace=False)
            x0, z0 = base.centers[i], base.centers[j]
            dist = float(np.linalg.norm(x0 - z0))
            du = np.linalg.norm(yc - x0, axis=-1) / tc
            dv = np.linalg.norm(yc - z0, axis=-1) / tc
            kk = np.abs(cutoff(du) * cutoff(dv)) / (c * tc**n)
            gg = np.abs(cutoff.derivative(du) * cutoff(dv)) / (c * tc ** (n + 1))
            ks, gs = float(kk.max()) * dist**n, float(gg.max()) * dist ** (n + 1)
            kmax, gmax = max(kmax, ks), max(gmax, gs)
            viol += int(ks > kb * (1 + 1e-12)) + int(gs > gb * (1 + 1e-12))
            if dist > 2 * a * grid.T:
                far += int(kk.max() > 0)
            count += grid.ncells
    return KernelProbe(count, kmax, gmax, kb, gb, viol, far)


# -- gamma-norms of embedded fields -----------------------------------------


def embedded_gamma_norms(F: EmbeddedField, M: int = DEFAULT_SAMPLES, sampler=None, xs=None) -> tuple:
    """(values, stderr) of the gamma-norm of F(x; .) at base centers x (or xs)."""
    grid = F.grid
    xs = np.arange(grid.nb) if xs is None else np.asarray(xs)
    mu = grid.level_measure[:, None, None]
    if F.space.is_hilbert:
        e = np.einsum("xjyk,xjyk->x", F.values[xs] ** 2, np.broadcast_to(mu, F.values.shape[1:])[None])
        return np.sqrt(e), np.zeros(len(xs))
    sup = np.any(F.values[xs] != 0, axis=(0, 3))
    w = F.values[xs][:, sup] * np.sqrt(grid.cell_measures[sup])[None, :, None]
    G = (sampler or GaussianSampler()).substream("embedded").generator().standard_normal((M, int(sup.sum())))
    vals, errs = np.zeros(len(xs)), np.zeros(len(xs))
    for i in range(len(xs)):
        if not np.any(w[i]):
            continue
        sq = F.space.norm(G @ w[i]) ** 2
        vals[i], errs[i] = grouped_jackknife(lambda m: math.sqrt(m[0]), sq)
    return vals, errs


def embedded_l1_norm(F: EmbeddedField, M: int = DEFAULT_SAMPLES, sampler=None) -> float:
    """sum_x h^n gamma(F(x; .))."""
    vals, _ = embedded_gamma_norms(F, M, sampler)
    return float(F.grid.base.cell_volume * vals.sum())


# -- BMO oscillation ---------------------------------------------------------


@dataclass
class OscillationReport:
    value: float
    ball: dict | None
    stderr: float = 0.0
    path: str = "exact"

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _gram(F: EmbeddedField) -> np.ndarray:
    """G[x, x'] = sum_C mu(C) <F(x; C), F(x'; C)>."""
    grid = F.grid
    w = F.values * np.sqrt(grid.level_measure)[None, :, None, None]
    flat = w.reshape(grid.nb, -1)
    return flat @ flat.T


def oscillation_table(F: EmbeddedField) -> tuple:
    """(radii, (R, nb) squared euclidean mean oscillation of every family ball)."""
    base = F.grid.base
    G = _gram(F)
    e = np.diag(G)
    D = base.center_distances
    radii = base.ball_radii()
    out = np.zeros((len(radii), base.nb))
    for i, r in enumerate(radii):
        ins = (D < r).astype(float)
        cnt = ins.sum(axis=1)
        mean_sq = ins @ e / cnt
        sq_mean = np.einsum("bx,bx->b", ins @ G, ins) / cnt**2
        out[i] = np.maximum(mean_sq - sq_mean, 0.0)
    return radii, out


def bmo_oscillation(F: EmbeddedField, M: int = DEFAULT_SAMPLES, sampler=None, mc_balls: int = 16) -> OscillationReport:
    """max over the candidate ball family of
    (lattice mean over x in B of gamma(F(x) - mean_B F)^2)^(1/2).

    Euclidean values are exact.  Otherwise the euclidean table ranks the
    balls and Monte Carlo evaluates the top mc_balls of them.
    """
    base = F.grid.base
    radii, table = oscillation_table(F)
    if F.space.is_hilbert:
        i, b = np.unravel_index(int(np.argmax(table)), table.shape)
        best = float(table[i, b])
        ball = {"center": base.centers[b].tolist(), "radius": float(radii[i])} if best > 0 else None
        return OscillationReport(math.sqrt(best), ball)
    order = np.argsort(table, axis=None)[::-1][:mc_balls]
    sampler = sampler or GaussianSampler()
    grid = F.grid
    sup = np.any(F.values != 0, axis=(0, 3))
    if not sup.any():
        return OscillationReport(0.0, None, 0.0, "mc")
    w = F.values[:, sup] * np.sqrt(grid.cell_measures[sup])[None, :, None]
    rng = sampler.substream("bmo").generator()
    G = rng.standard_normal((M, int(sup.sum())))
    X = np.einsum("mc,xck->mxk", G, w)  # (M, nb, d)
    best, arg, se = 0.0, None, 0.0
    for flat in order:
        i, b = np.unravel_index(int(flat), table.shape)
        ins = base.center_distances[b] < radii[i]
        Xb = X[:, ins]
        dev = Xb - Xb.mean(axis=1, keepdims=True)
        sq = (F.space.norm(dev) ** 2).mean(axis=1)
        val, err = grouped_jackknife(lambda m: math.sqrt(max(m[0], 0.0)), sq)
        if val > best:
            best, se = val, err
            arg = {"center": base.centers[b].tolist(), "radius": float(radii[i])}
    return OscillationReport(best, arg, se, "mc")


# -- H^1 atom images --------------------------------------------------------


@dataclass
class AtomImageReport:
    support_ok: bool
    outside_cells: int
    max_slice_integral: float
    energy: float
    constant: float
    valid: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def h1_atom_image_check(a: GridFunction, ball: Ball, cutoff: SmoothCutoff, slice_tol: float = 1e-10, M: int = DEFAULT_SAMPLES, sampler=None) -> AtomImageReport:
    """J a is supported in alpha B, has zero x-integral on every slice, and
    C = |B| int_{alpha B} gamma(J a(x))^2 dx is reported."""
    base = a.grid.base
    if a.is_zero():
        return AtomImageReport(True, 0, 0.0, 0.0, 0.0, True)
    F = embed_J(a, cutoff)
    big = ball.scaled(cutoff.alpha).contains(base.centers)
    live = np.any(F.values != 0, axis=(1, 2, 3))
    outside = int(np.count_nonzero(live & ~big))
    ints = slice_integrals(a, cutoff)
    scale = float(np.abs(a.values).max()) * base.cell_volume
    max_int = float(np.abs(ints).max()) / scale if scale > 0 else 0.0
    vals, _ = embedded_gamma_norms(F, M, sampler, np.flatnonzero(big))
    energy = float(base.cell_volume * np.sum(vals**2))
    C = energy * ball.lattice_measure(base)
    ok = outside == 0 and max_int <= slice_tol
    return AtomImageReport(outside == 0, outside, max_int, energy, C, ok)
