"""
The T^1 - T^inf duality pairing

    <f, g> = c_n int <f(y,t), g(y,t)> dy dt / t,   c_n = |unit ball in R^n|,

evaluated exactly on cell-constant data, and the corpus reports that measure
the pairing inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atomic import AtomicDecomposition
from .halfspace import GridFunction, HalfSpaceGrid
from .sets import unit_ball_volume
from .tentnorm import tent_norm_infty, tent_norm_p


def _check_pair(f: GridFunction, g: GridFunction):
    if f.grid != g.grid:
        raise ValueError("f and g live on different grids")
    if f.space.d != g.space.d:
        raise ValueError("f and g have different value dimensions")
    if g.space != f.space.dual() and g.space != f.space:
        raise ValueError(f"cannot pair {f.space.tag} with {g.space.tag}")


def duality_pairing(f: GridFunction, g: GridFunction) -> float:
    """c_n sum_C <f(C), g(C)> mu'(C) with mu'(C) = h^n log(t_hi / t_lo)."""
    _check_pair(f, g)
    dots = np.einsum("jbk,jbk->j", f.values, g.values)
    return unit_ball_volume(f.grid.n) * float(dots @ f.grid.level_measure_dt_over_t)


def weighted_measure_check(grid: HalfSpaceGrid, nodes: int = 32) -> dict:
    """Compare mu'(C) / mu(C) with a Gauss-Legendre t-moment of dt / t^(n+1).

    mu'(C) / mu(C) = int t^n dnu / int dnu over the level, nu = dt / t^(n+1).
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    n = grid.n
    err = 0.0
    for lo, hi, mu, mup in zip(grid.t_lo, grid.t_hi, grid.level_measure, grid.level_measure_dt_over_t):
        t = lo + (hi - lo) * (x + 1) / 2
        wt = w * (hi - lo) / 2
        moment = float(np.sum(wt * t**n * t ** (-n - 1)) / np.sum(wt * t ** (-n - 1)))
        err = max(err, abs(mup / mu - moment) / moment)
    return {"levels": grid.J, "max_relative_error": err}


@dataclass
class PairingReport:
    pairing: float
    t1_norm: float
    tinf_norm: float
    ratio: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def pairing_report(f: GridFunction, g: GridFunction, **kw) -> PairingReport:
    p = duality_pairing(f, g)
    t1 = tent_norm_p(f, 1.0, **kw).value
    ti = tent_norm_infty(g, **kw).value
    ratio = abs(p) / (t1 * ti) if t1 > 0 and ti > 0 else 0.0
    return PairingReport(p, t1, ti, ratio)


def duality_inequality_report(pairs, **kw) -> dict:
    """max |<f,g>| / (|f|_{T^1} |g|_{T^inf}) over (f, g) pairs; zero norms excluded."""
    rows = [pairing_report(f, g, **kw) for f, g in pairs]
    ratios = np.array([r.ratio for r in rows if r.t1_norm > 0 and r.tinf_norm > 0])
    return {
        "count": int(ratios.size),
        "excluded": len(rows) - int(ratios.size),
        "max_ratio": float(ratios.max()) if ratios.size else 0.0,
        "mean_ratio": float(ratios.mean()) if ratios.size else 0.0,
        "rows": [r.as_dict() for r in rows],
    }


def norming_probe(f: GridFunction, family, **kw) -> dict:
    """max over g of |<f,g>| / |g|_{T^inf}, divided by |f|_{T^1}.

    The family is augmented with f itself and its direction field f / |f|.
    """
    t1 = tent_norm_p(f, 1.0, **kw).value
    if t1 == 0:
        return {"ratio": 0.0, "candidates": 0}
    nrm = np.linalg.norm(f.values, axis=-1, keepdims=True)
    unit = f.with_values(np.divide(f.values, nrm, out=np.zeros_like(f.values), where=nrm > 0))
    best, count = 0.0, 0
    for g in [f, unit, *family]:
        ti = tent_norm_infty(g, **kw).value
        if ti == 0:
            continue
        count += 1
        best = max(best, abs(duality_pairing(f, g)) / ti)
    return {"ratio": best / t1, "candidates": count}


def p2_duality_report(pairs, **kw) -> dict:
    """max |<f,g>| / (|f|_{T^2} |g|_{T^2}) over pairs."""
    out = []
    for f, g in pairs:
        a = tent_norm_p(f, 2.0, **kw).value
        b = tent_norm_p(g, 2.0, **kw).value
        if a > 0 and b > 0:
            out.append(abs(duality_pairing(f, g)) / (a * b))
    r = np.array(out)
    return {"count": int(r.size), "max_ratio": float(r.max()) if r.size else 0.0}


def decomposition_compatibility(dec: AtomicDecomposition, g: GridFunction) -> dict:
    """<f, g> against sum_k lambda_k <a_k, g>."""
    direct = duality_pairing(dec.f, g)
    via = math.fsum(t.lam * duality_pairing(t.atom, g) for t in dec.terms)
    scale = max(abs(direct), sum(abs(t.lam * duality_pairing(t.atom, g)) for t in dec.terms), 1e-300)
    return {"direct": direct, "via_atoms": via, "relative_error": abs(direct - via) / scale}
