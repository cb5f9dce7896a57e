"""
Conical square functions and the tent-space norms T^p (1 <= p < inf) and T^inf.

S_alpha f(x; r)^2 = E |int_{Gamma_alpha(x; r)} f dW|^2 is evaluated at every
base cell center.  A cell belongs to a cone when its center does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gamma import DEFAULT_SAMPLES, GammaNormEstimate, GaussianSampler, gamma_norm, grouped_jackknife
from .geometry import cone_mask
from .halfspace import GridFunction, HalfSpaceGrid


def cone_incidence(grid: HalfSpaceGrid, alpha: float = 1.0, r: float = math.inf) -> np.ndarray:
    """(J, nb_x, nb_y): cell (j, y) lies in Gamma_alpha(x; r)."""
    D = grid.base.center_distances
    t = grid.t_mid
    inc = D[None, :, :] < alpha * t[:, None, None]
    inc &= (t < r)[:, None, None]
    return inc


@dataclass
class SquareField:
    values: np.ndarray
    stderr: np.ndarray
    path: str
    samples: int = 0


def _energies(f: GridFunction) -> np.ndarray:
    """(J, nb) cell energies mu(C) |f(C)|^2 (euclidean)."""
    return f.grid.level_measure[:, None] * np.einsum("jbk,jbk->jb", f.values, f.values)


def square_function_sq_exact(f: GridFunction, alpha: float = 1.0, r: float = math.inf, weights=None) -> np.ndarray:
    """Exact S^2 at every base center, euclidean values.

    weights, if given, is a (J, nb_x, nb_y) array replacing the cone
    indicator, so that cutoff profiles phi(|x - y| / t) enter squared.
    """
    e = _energies(f)
    if weights is None:
        out = np.zeros(f.grid.nb)
        D = f.grid.base.center_distances
        for j, t in enumerate(f.grid.t_mid):
            if t < r and e[j].any():
                out += (D < alpha * t).astype(float) @ e[j]
        return out
    return np.einsum("jxy,jy->x", weights**2, e)


def square_function_field(
    f: GridFunction,
    alpha: float = 1.0,
    r: float = math.inf,
    M: int = DEFAULT_SAMPLES,
    path: str = "auto",
    sampler: GaussianSampler | None = None,
) -> SquareField:
    """S_alpha f(x; r) at every base cell center."""
    if path == "auto":
        path = "exact" if f.space.is_hilbert else "mc"
    nb = f.grid.nb
    if path == "exact":
        if not f.space.is_hilbert:
            raise ValueError("the exact path needs the euclidean norm")
        return SquareField(np.sqrt(square_function_sq_exact(f, alpha, r)), np.zeros(nb), "exact")
    sampler = sampler or GaussianSampler()
    sup = f.support
    jj, bb = np.nonzero(sup)
    w = f.values[sup] * np.sqrt(f.grid.level_measure[jj])[:, None]
    if len(w) == 0:
        return SquareField(np.zeros(nb), np.zeros(nb), "mc", M)
    G = sampler.substream("field").generator().standard_normal((M, len(w)))
    D = f.grid.base.center_distances
    t = f.grid.t_mid[jj]
    inside = (D[:, bb] < alpha * t[None, :]) & (t < r)[None, :]
    vals = np.zeros(nb)
    errs = np.zeros(nb)
    for x in range(nb):
        sel = inside[x]
        if not sel.any():
            continue
        sq = f.space.norm(G[:, sel] @ w[sel]) ** 2
        vals[x], errs[x] = grouped_jackknife(lambda m: math.sqrt(m[0]), sq)
    return SquareField(vals, errs, "mc", M)


def square_function(f: GridFunction, x, alpha: float = 1.0, r: float = math.inf, M: int = DEFAULT_SAMPLES, path: str = "auto", sampler=None) -> GammaNormEstimate:
    """gamma-norm of f on the cone Gamma_alpha(x; r) with vertex at the point x."""
    return gamma_norm(f, cone_mask(f.grid, x, alpha, r), M, path, sampler)


@dataclass
class TentNormReport:
    p: float
    alpha: float
    value: float
    per_x: np.ndarray = field(repr=False)
    stderr: float = 0.0
    ball: dict | None = None

    def to_dict(self, per_x: bool = False) -> dict:
        out = {"p": "inf" if math.isinf(self.p) else self.p, "alpha": self.alpha, "value": self.value, "stderr": self.stderr}
        if self.ball is not None:
            out["ball"] = self.ball
        if per_x:
            out["per_x"] = self.per_x.tolist()
        return out


def tent_norm_p(f: GridFunction, p: float = 1.0, alpha: float = 1.0, M: int = DEFAULT_SAMPLES, path: str = "auto", sampler=None) -> TentNormReport:
    """(sum_x h^n S_alpha f(x)^p)^(1/p) over base cell centers."""
    if not 1 <= p < math.inf:
        raise ValueError("T^p needs 1 <= p < inf")
    sf = square_function_field(f, alpha, math.inf, M, path, sampler)
    hn = f.grid.base.cell_volume
    total = float(np.sum(hn * sf.values**p))
    value = total ** (1 / p)
    se = 0.0
    if sf.path == "mc" and value > 0:
        # delta method, treating the per-x errors as independent
        grad = hn * sf.values ** (p - 1) * total ** (1 / p - 1)
        se = float(np.sqrt(np.sum((grad * sf.stderr) ** 2)))
    return TentNormReport(p, alpha, value, sf.values, se)


def truncated_square_fields(f: GridFunction, alpha: float = 1.0, M: int = DEFAULT_SAMPLES, path: str = "auto", sampler=None) -> np.ndarray:
    """(J + 1, nb): S^2 with the cone cut below the q smallest levels, q = 0..J."""
    grid = f.grid
    out = np.zeros((grid.J + 1, grid.nb))
    asc = np.sort(grid.t_mid)
    for q in range(1, grid.J + 1):
        # t < asc[q] keeps exactly the q smallest heights
        r = asc[q] if q < grid.J else math.inf
        out[q] = square_function_field(f, alpha, r, M, path, sampler).values ** 2
    return out


def tent_norm_infty(g: GridFunction, alpha: float = 1.0, M: int = DEFAULT_SAMPLES, path: str = "auto", sampler=None) -> TentNormReport:
    """max over the shared ball family of (lattice mean over B of S(x; r_B)^2)^(1/2)."""
    grid = g.grid
    base = grid.base
    fields = truncated_square_fields(g, alpha, M, path, sampler)
    radii = base.ball_radii()
    D = base.center_distances
    best, arg = 0.0, None
    for r in radii:
        q = grid.levels_below(r)
        if q == 0 or not fields[q].any():
            continue
        inside = D < r
        avg = (inside.astype(float) @ fields[q]) / inside.sum(axis=1)
        i = int(np.argmax(avg))
        if avg[i] > best:
            best, arg = float(avg[i]), {"center": base.centers[i].tolist(), "radius": float(r)}
    per_x = np.sqrt(fields[grid.J])
    return TentNormReport(math.inf, alpha, math.sqrt(best), per_x, 0.0, arg)


def ball_average(g: GridFunction, center, radius: float, alpha: float = 1.0) -> float:
    """(lattice mean over B of S(x; r_B)^2)^(1/2) for one ball, exact path."""
    base = g.grid.base
    inside = np.linalg.norm(base.centers - np.asarray(center, dtype=float), axis=1) < radius
    if not inside.any():
        return 0.0
    s2 = square_function_sq_exact(g, alpha, radius)
    return math.sqrt(float(s2[inside].mean()))


# -- cutoffs ----------------------------------------------------------------


@dataclass(frozen=True)
class Cutoff:
    """Radial profile phi with 1_[0,1) <= |phi| <= 1_[0,alpha)."""

    profile: Callable = field(repr=False)
    alpha: float
    name: str = "cutoff"

    @classmethod
    def indicator(cls, alpha: float = 1.0) -> "Cutoff":
        return cls(lambda r: (np.asarray(r) < alpha).astype(float), alpha, f"indicator[0,{alpha:g})")

    @classmethod
    def from_table(cls, knots, values, alpha: float, name: str = "table") -> "Cutoff":
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)

        def prof(r):
            r = np.asarray(r, dtype=float)
            return np.where(r < alpha, np.interp(r, knots, values), 0.0)

        return cls(prof, alpha, name)

    def __call__(self, r) -> np.ndarray:
        return np.asarray(self.profile(np.asarray(r, dtype=float)), dtype=float)

    def check(self, samples: int = 4097, tol: float = 1e-12) -> dict:
        r = np.linspace(0, self.alpha * 1.5, samples)
        v = self(r)
        lower = bool(np.all(np.abs(v[r < 1 - tol]) >= 1 - tol))
        upper = bool(np.all(np.abs(v) <= 1 + tol))
        support = bool(np.all(v[r >= self.alpha] == 0))
        return {"lower": lower, "upper": upper, "support": support, "valid": lower and upper and support}


def cutoff_weights(grid: HalfSpaceGrid, cutoff: Cutoff) -> np.ndarray:
    """(J, nb_x, nb_y) values phi(|x - y| / t) at cell centers."""
    D = grid.base.center_distances
    return cutoff(D[None, :, :] / grid.t_mid[:, None, None])


def cutoff_square_function(f: GridFunction, x, cutoff: Cutoff, M: int = DEFAULT_SAMPLES, path: str = "auto", sampler=None) -> GammaNormEstimate:
    """gamma-norm of the cell-wise product phi(|x - y_C| / t_C) f(C)."""
    y, t = f.grid.cell_coordinates()
    d = np.linalg.norm(y - np.asarray(x, dtype=float), axis=-1)
    return gamma_norm(f * cutoff(d / t), None, M, path, sampler)


def cutoff_square_field(f: GridFunction, cutoff: Cutoff) -> np.ndarray:
    """Exact gamma-norm of phi(|x - y| / t) f at every base center."""
    return np.sqrt(square_function_sq_exact(f, weights=cutoff_weights(f.grid, cutoff)))


# -- aperture comparison ----------------------------------------------------


def aperture_equivalence_report(corpus, p: float = 1.0, alpha: float = 2.0, **kw) -> dict:
    """Ratios |f|_{T^p, alpha} / |f|_{T^p, 1} over a corpus of nonzero functions."""
    ratios = []
    for f in corpus:
        base = tent_norm_p(f, p, 1.0, **kw).value
        if base == 0:
            continue
        ratios.append(tent_norm_p(f, p, alpha, **kw).value / base)
    r = np.array(ratios)
    return {
        "p": p,
        "alpha": alpha,
        "count": len(r),
        "min": float(r.min()) if len(r) else math.nan,
        "max": float(r.max()) if len(r) else math.nan,
        "mean": float(r.mean()) if len(r) else math.nan,
        "ratios": r.tolist(),
    }
