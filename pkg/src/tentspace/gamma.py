"""
Gaussian random measure on grid cells, stochastic integrals and gamma-norms.

W(C) = sqrt(mu(C)) g_C with independent standard Gaussians g_C, so for a cell
constant f the integral over a cell set A is sum_{C in A} sqrt(mu(C)) g_C f(C).
For the euclidean norm E|int f dW|^2 = sum mu(C) |f(C)|^2 exactly; any other
norm goes through Monte Carlo with a grouped jackknife standard error.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .halfspace import GridFunction, NormedSpace, region_mask

DEFAULT_SAMPLES = 20_000
JACKKNIFE_GROUPS = 200
_CHUNK = 4096


@dataclass(frozen=True)
class GaussianSampler:
    """Seeded, splittable source of standard Gaussians.

    A given (seed, stream) always yields the same sequence; substreams are
    derived from a hash of their keys so they do not depend on call order.
    """

    seed: int = 0
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, *keys) -> "GaussianSampler":
        digest = hashlib.blake2b(repr((self.stream,) + keys).encode(), digest_size=8).digest()
        return GaussianSampler(self.seed, int.from_bytes(digest, "little"))

    def normals(self, shape) -> np.ndarray:
        return self.generator().standard_normal(shape)

    def cell_draws(self, grid, count: int = 1) -> np.ndarray:
        """(count, J, nb): one Gaussian per cell for each realization."""
        return self.normals((count, grid.J, grid.nb))


def region_key(mask: np.ndarray) -> str:
    return hashlib.blake2b(np.packbits(mask).tobytes(), digest_size=8).hexdigest()


@dataclass(frozen=True)
class GammaNormEstimate:
    value: float
    stderr: float = 0.0
    samples: int = 0
    path: str = "exact"
    seed: int | None = None

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("gamma-norm estimate must be nonnegative")
        if self.path == "exact" and (self.stderr != 0 or self.samples != 0):
            raise ValueError("exact estimates carry no samples or standard error")
        if self.path == "mc" and self.samples < 1:
            raise ValueError("Monte Carlo estimates need samples")

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples, "seed": self.seed, "path": self.path}


# -- stochastic integrals ---------------------------------------------------


def weighted_values(f: GridFunction, region=None) -> np.ndarray:
    """sqrt(mu(C)) f(C) on the region, zero elsewhere: shape (J, nb, d)."""
    mask = region_mask(f.grid, region)
    w = np.sqrt(f.grid.level_measure)[:, None, None] * f.values
    return np.where(mask[..., None], w, 0.0)


def stochastic_integral_sample(f: GridFunction, region=None, sampler: GaussianSampler | None = None, draws=None) -> np.ndarray:
    """One realization of int_A f dW in R^d.

    The Gaussians are one per grid cell (the whole grid), so two regions
    integrated with the same sampler share their draws.
    """
    if draws is None:
        draws = (sampler or GaussianSampler()).cell_draws(f.grid, 1)[0]
    g = np.asarray(draws, dtype=float)
    return np.einsum("jb,jbk->k", g, weighted_values(f, region))


def integral_samples(f: GridFunction, region, M: int, sampler: GaussianSampler) -> np.ndarray:
    """(M, d) independent realizations of int_A f dW.

    Only cells where f is nonzero on A carry weight, so Gaussians are drawn
    for those alone from a substream keyed by the region.
    """
    mask = region_mask(f.grid, region) & f.support
    act = f.values[mask] * np.sqrt(f.grid.cell_measures[mask])[:, None]
    rng = sampler.substream("integral", region_key(mask)).generator()
    out = np.empty((M, f.space.d))
    for s in range(0, M, _CHUNK):
        m = min(_CHUNK, M - s)
        out[s : s + m] = rng.standard_normal((m, len(act))) @ act
    return out


def grouped_jackknife(stat, columns, groups: int = JACKKNIFE_GROUPS) -> tuple:
    """Jackknife estimate and standard error of stat(means of columns).

    columns is (M, q); stat maps a length-q vector of column means to a scalar.
    Samples are split into contiguous groups, left out one group at a time.
    """
    x = np.asarray(columns, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    M = len(x)
    G = max(2, min(groups, M))
    edges = np.linspace(0, M, G + 1).astype(int)
    sums = np.add.reduceat(x, edges[:-1], axis=0)
    counts = np.diff(edges)[:, None]
    total = sums.sum(axis=0)
    full = stat(total / M)
    loo = np.array([stat((total - sums[g]) / (M - counts[g])) for g in range(G)])
    se = math.sqrt((G - 1) / G * float(np.sum((loo - loo.mean()) ** 2)))
    return float(full), se


def gamma_norm(
    f: GridFunction,
    region=None,
    M: int = DEFAULT_SAMPLES,
    path: str = "auto",
    sampler: GaussianSampler | None = None,
) -> GammaNormEstimate:
    """(E |int_A f dW|^2)^(1/2)."""
    if path == "auto":
        path = "exact" if f.space.is_hilbert else "mc"
    if path == "exact":
        if not f.space.is_hilbert:
            raise ValueError("the exact path needs the euclidean norm")
        wv = weighted_values(f, region)
        return GammaNormEstimate(math.sqrt(float(np.sum(wv * wv))))
    if M < 2:
        raise ValueError("Monte Carlo needs at least two samples")
    sampler = sampler or GaussianSampler()
    X = integral_samples(f, region, M, sampler)
    sq = f.space.norm(X) ** 2
    if not np.any(sq):
        return GammaNormEstimate(0.0, 0.0, M, "mc", sampler.seed)
    val, se = grouped_jackknife(lambda m: math.sqrt(m[0]), sq)
    return GammaNormEstimate(val, se, M, "mc", sampler.seed)


def khintchine_kahane_ratio(f: GridFunction, region=None, p: float = 1.0, q: float = 2.0, M: int = DEFAULT_SAMPLES, sampler=None) -> tuple:
    """(E|X|^p)^(1/p) / (E|X|^q)^(1/q) for X = int_A f dW, with jackknife error."""
    if not (1 <= p < math.inf and 1 <= q < math.inf):
        raise ValueError("moments need 1 <= p, q < inf")
    sampler = sampler or GaussianSampler()
    X = integral_samples(f, region, M, sampler.substream("kk", p, q))
    r = f.space.norm(X)
    if not np.any(r):
        raise ValueError("the integral vanishes identically")
    cols = np.stack([r**p, r**q], axis=1)
    return grouped_jackknife(lambda m: m[0] ** (1 / p) / m[1] ** (1 / q), cols)


# -- comparison checks ------------------------------------------------------


def domination_multiplier(g: GridFunction, f: GridFunction, atol: float = 1e-12) -> np.ndarray:
    """Per-cell m with g = m f and |m| <= 1, or ValueError when g is not of that
    form (restrictions are the case m in {0, 1})."""
    if g.grid != f.grid or g.space.d != f.space.d:
        raise ValueError("g and f live on different grids")
    ff = np.einsum("jbk,jbk->jb", f.values, f.values)
    gf = np.einsum("jbk,jbk->jb", g.values, f.values)
    m = np.divide(gf, ff, out=np.zeros_like(ff), where=ff > 0)
    resid = np.abs(g.values - m[..., None] * f.values).max(axis=-1)
    scale = atol * max(1.0, float(np.abs(f.values).max(initial=0)))
    if np.any(resid > scale):
        raise ValueError("g is not a cell-wise multiple of f")
    if np.any(np.abs(m) > 1 + 1e-12):
        raise ValueError("multiplier exceeds 1 in absolute value")
    return m


def covariance_domination_check(g: GridFunction, f: GridFunction, region=None, M: int = DEFAULT_SAMPLES, sampler=None) -> dict:
    """gamma(g) <= gamma(f) for g = m f with |m| <= 1 cell-wise."""
    domination_multiplier(g, f)
    sampler = sampler or GaussianSampler()
    a = gamma_norm(g, region, M, sampler=sampler.substream("g"))
    b = gamma_norm(f, region, M, sampler=sampler.substream("f"))
    band = 4 * math.hypot(a.stderr, b.stderr)
    return {"gamma_g": a.to_dict(), "gamma_f": b.to_dict(), "band": band, "holds": a.value <= b.value + band}


def shrinking_region_norms(f: GridFunction, ks) -> list:
    """Exact-path gamma-norms of 1_{A_k} f with A_k = {t < 1/k}."""
    _, t = f.grid.cell_coordinates()
    return [gamma_norm(f, t < 1.0 / k, path="exact").value for k in ks]


# -- gamma-boundedness probes -----------------------------------------------


def lp_function_norm(p: float, weight: float = 1.0):
    """Norm of (weight-scaled) l^p on the last axis: (sum weight |u|^p)^(1/p)."""

    def norm(u, axis=-1):
        u = np.asarray(u, dtype=float)
        if math.isinf(p):
            return np.abs(u).max(axis=axis)
        return (weight * np.sum(np.abs(u) ** p, axis=axis)) ** (1 / p)

    norm.p = p
    return norm


def _gaussian_sum_moment(vectors: np.ndarray, norm, M: int, rng) -> float:
    """E |sum_k gamma_k v_k|^2 for rows v_k; exact for l^2 norms."""
    if getattr(norm, "p", None) == 2:
        return float(np.sum(norm(vectors) ** 2))
    total = 0.0
    for s in range(0, M, _CHUNK):
        m = min(_CHUNK, M - s)
        total += float(np.sum(norm(rng.standard_normal((m, len(vectors))) @ vectors) ** 2))
    return total / M


def gamma_boundedness_probe(operators, vectors, norm=None, selections: int = 32, M: int = DEFAULT_SAMPLES, sampler=None) -> float:
    """Largest observed E|sum gamma_k T_k xi_k|^2 / E|sum gamma_k xi_k|^2.

    operators: list of (D, D) matrices; vectors: (K, D) test vectors xi_k.
    Each selection assigns a random family member to every k (the first
    selection uses operator k mod len(family)).  With an l^2 norm both moments
    are exact sums.
    """
    ops = [np.asarray(T, dtype=float) for T in operators]
    xi = np.atleast_2d(np.asarray(vectors, dtype=float))
    norm = norm or lp_function_norm(2)
    rng = (sampler or GaussianSampler()).substream("probe").generator()
    denom = _gaussian_sum_moment(xi, norm, M, rng)
    if denom == 0:
        return 0.0
    worst = 0.0
    for s in range(selections):
        pick = np.arange(len(xi)) % len(ops) if s == 0 else rng.integers(len(ops), size=len(xi))
        img = np.stack([ops[i] @ v for i, v in zip(pick, xi)])
        worst = max(worst, _gaussian_sum_moment(img, norm, M, rng) / denom)
    return worst


def averaging_operator_matrix(base, ball) -> np.ndarray:
    """A_B u = 1_B (lattice mean of u over B), as an (nb, nb) matrix."""
    inside = ball.contains(base.centers).astype(float)
    cnt = inside.sum()
    if cnt == 0:
        return np.zeros((base.nb, base.nb))
    return np.outer(inside, inside) / cnt
