"""
T^1 atoms and the constructive atomic decomposition.

Pipeline for a function f:
  E_k    = {S f > 2^k} on base cells, k_min <= k <= k_max
  E_k*   = extension of E_k at level c(n)/2
  B_k^j  = greedy disjoint balls in E_k*, tents of 5 B_k^j cover the tent of E_k*
  chi    = first-come indicator partition of those tents
  A_k    = tent(E_k*) minus tent(E_{k+1}*)
  lambda = |5B|^(1/2) (int_{5B} S(1_{A_k} f)^2)^(1/2),  atom = chi 1_{A_k} f / lambda
Ball measures and x-integrals are lattice sums over base cell centers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gamma import DEFAULT_SAMPLES, GaussianSampler
from .geometry import build_direction_net, check_ball_cover, cone_cover_points, greedy_ball_cover, sector_constant
from .halfspace import GridFunction, restrict, save_function, shadow_inside
from .maximal import WEAK_TYPE_CONSTANT, extension
from .sets import Ball, OpenSet, ball_tent_mask
from .tentnorm import square_function, square_function_field

DILATION = 5.0


def l1_constant(n: int, weak_constant: float | None = None) -> float:
    """Constant C with sum |lambda| <= C |f|_{T^1}.

    4 (layer cake: sum_k 2^(k+1) |E_k| <= 4 |S f|_1) x N (direction net size)
    x C_w (weak type of M) x (c(n)/2)^-1 (extension level) x 5^n (dilation).
    """
    cw = WEAK_TYPE_CONSTANT[n] if weak_constant is None else weak_constant
    N = build_direction_net(n).N
    return 4.0 * N * cw * (2.0 / sector_constant(n)) * DILATION**n


def _field(f: GridFunction, M: int, sampler):
    return square_function_field(f, 1.0, math.inf, M, "auto", sampler)


# -- atoms ------------------------------------------------------------------


@dataclass
class AtomReport:
    valid: bool
    support_ok: bool
    leaks: list
    integral: float
    bound: float
    t1_norm: float
    band: float = 0.0

    def as_dict(self) -> dict:
        return {
            "valid": self.valid,
            "support_ok": self.support_ok,
            "leaks": self.leaks[:20],
            "integral": self.integral,
            "bound": self.bound,
            "t1_norm": self.t1_norm,
            "band": self.band,
        }


def validate_atom(a: GridFunction, ball: Ball, tol: float = 1e-9, M: int = DEFAULT_SAMPLES, sampler=None) -> AtomReport:
    """Support inside the tent over B and lattice sum_{x in B} h^n S a(x)^2 <= 1/|B|."""
    grid = a.grid
    base = grid.base
    tent = ball_tent_mask(grid, ball)
    leak = a.support & ~tent
    leaks = [tuple(int(i) for i in c) for c in np.argwhere(leak)]
    sf = _field(a, M, sampler or GaussianSampler())
    inB = ball.contains(base.centers)
    hn = base.cell_volume
    integral = float(np.sum(hn * sf.values[inB] ** 2))
    meas = ball.lattice_measure(base)
    bound = 1.0 / meas if meas > 0 else math.inf
    t1 = float(np.sum(hn * sf.values))
    band = 4.0 * float(np.sqrt(np.sum((2 * hn * sf.values[inB] * sf.stderr[inB]) ** 2)))
    norm_ok = integral <= bound * (1 + tol) + band
    t1_ok = t1 <= 1 + tol + 4.0 * float(np.sqrt(np.sum((hn * sf.stderr) ** 2)))
    return AtomReport(not leaks and norm_ok and t1_ok, not leaks, leaks, integral, bound, t1, band)


# -- level sets -------------------------------------------------------------


def level_range(values: np.ndarray):
    pos = values[values > 0]
    if len(pos) == 0:
        return None
    k_min = math.floor(math.log2(pos.min())) - 1
    k_max = math.ceil(math.log2(pos.max()))
    return k_min, k_max


def level_sets(f: GridFunction, values: np.ndarray | None = None, M: int = DEFAULT_SAMPLES, sampler=None) -> list:
    """[(k, E_k)] with E_k the base cells where S f > 2^k, k_min..k_max."""
    if values is None:
        values = _field(f, M, sampler or GaussianSampler()).values
    rng = level_range(values)
    if rng is None:
        return []
    base = f.grid.base
    return [(k, OpenSet(base, values > 2.0**k)) for k in range(rng[0], rng[1] + 1)]


# -- decomposition ----------------------------------------------------------


@dataclass
class Term:
    lam: float
    atom: GridFunction = field(repr=False)
    k: int
    j: int
    ball: Ball

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "k": self.k, "j": self.j, "ball": self.ball.as_dict()}


@dataclass
class Level:
    k: int
    E: OpenSet
    Estar: OpenSet
    balls: list
    A: np.ndarray = field(repr=False)
    chi: list = field(repr=False)
    tent: np.ndarray = field(repr=False)
    restricted_sq: np.ndarray = field(repr=False)


@dataclass
class AtomicDecomposition:
    f: GridFunction = field(repr=False)
    terms: list
    levels: list = field(repr=False)
    source_norm: float
    square_values: np.ndarray = field(repr=False)

    @property
    def l1(self) -> float:
        return float(sum(abs(t.lam) for t in self.terms))

    def reconstruct(self) -> GridFunction:
        out = np.zeros_like(self.f.values)
        for t in self.terms:
            out += t.lam * t.atom.values
        return self.f.with_values(out)

    def reconstruction_error(self) -> float:
        scale = float(np.abs(self.f.values).max(initial=0))
        if scale == 0:
            return 0.0
        return float(np.abs(self.reconstruct().values - self.f.values).max()) / scale

    def partition_check(self) -> dict:
        """Per level: chi's disjoint, summing to 1 on tent(E_k*); A_k disjoint."""
        bad_sum = bad_overlap = 0
        seen = np.zeros(self.f.grid.shape, dtype=bool)
        a_overlap = 0
        for lv in self.levels:
            total = np.zeros(self.f.grid.shape, dtype=int)
            for c in lv.chi:
                total += c
            bad_overlap += int(np.count_nonzero(total > 1))
            bad_sum += int(np.count_nonzero(lv.tent & (total != 1)))
            a_overlap += int(np.count_nonzero(seen & lv.A))
            seen |= lv.A
        return {"sum_violations": bad_sum, "overlaps": bad_overlap, "A_overlaps": a_overlap}

    def manifest(self, out_dir=None) -> dict:
        doc = {
            "source_norm": self.source_norm,
            "l1": self.l1,
            "grid": self.f.grid.config(),
            "norm_tag": self.f.space.tag,
            "d": self.f.space.d,
            "terms": [],
        }
        for i, t in enumerate(self.terms):
            entry = t.as_dict()
            if out_dir is not None:
                p = save_function(t.atom, Path(out_dir) / f"atom_{i:04d}.json")
                entry["atom_ref"] = p.name
            doc["terms"].append(entry)
        return doc

    def save(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "decomposition.json"
        path.write_text(json.dumps(self.manifest(out_dir), indent=1))
        return path


def decompose(f: GridFunction, M: int = DEFAULT_SAMPLES, sampler=None, lam_level: float | None = None) -> AtomicDecomposition:
    grid = f.grid
    base = grid.base
    if not shadow_inside(f, 1.0):
        raise ValueError("cone shadows of supp f leave the base box")
    sampler = sampler or GaussianSampler()
    sf = _field(f, M, sampler)
    S = sf.values
    hn = base.cell_volume
    source = float(np.sum(hn * S))
    lev = level_sets(f, S)
    if not lev:
        return AtomicDecomposition(f, [], [], 0.0, S)
    lam = sector_constant(base.n) / 2 if lam_level is None else lam_level
    stars = [(k, E, extension(E, lam)) for k, E in lev]
    tents = [Es.tent_mask(grid) for _, _, Es in stars]
    covered = np.zeros(grid.shape, dtype=bool)
    levels, terms = [], []
    for i, (k, E, Es) in enumerate(stars):
        upper = tents[i + 1] if i + 1 < len(tents) else np.zeros(grid.shape, dtype=bool)
        A = tents[i] & ~upper
        covered |= A
        fA = restrict(f, A)
        sq = _field(fA, M, sampler.substream("level", k)).values ** 2
        balls = greedy_ball_cover(Es).balls
        taken = np.zeros(grid.shape, dtype=bool)
        chis = []
        for j, b in enumerate(balls):
            big = b.scaled(DILATION)
            chi = ball_tent_mask(grid, big) & ~taken
            taken |= chi
            chis.append(chi)
            part = restrict(fA, chi)
            if part.is_zero():
                continue
            inside = big.contains(base.centers)
            lam_kj = math.sqrt(big.lattice_measure(base)) * math.sqrt(float(np.sum(hn * sq[inside])))
            terms.append(Term(lam_kj, part / lam_kj, k, j, big))
        levels.append(Level(k, E, Es, balls, A, chis, tents[i], sq))
    missed = f.support & ~covered
    if missed.any():
        raise AssertionError(f"{int(missed.sum())} support cells of f lie in no A_k")
    return AtomicDecomposition(f, terms, levels, source, S)


# -- the cone estimate behind the l1 bound ----------------------------------


@dataclass
class ConeBoundReport:
    checked: int
    inside_checked: int
    violations: int
    worst_ratio: float
    chain_points: int
    chain_violations: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def verify_cone_bound(dec: AtomicDecomposition, tol: float = 1e-9, chain_samples: int = 4, rng=None) -> ConeBoundReport:
    """For every lattice x in a dilated ball 5B_k^j:
    S(1_{A_k} f)(x)^2 <= 4^(k+1) off E_{k+1} and <= N^2 4^(k+1) on E_{k+1}.

    For a few x in E_{k+1} the chain through the cone-cover points x_m of
    E_{k+1} is evaluated too: S(1_{A_k} f)(x) <= sum_m S f(x_m).
    """
    f = dec.f
    base = f.grid.base
    net = build_direction_net(base.n)
    N = net.N
    rng = rng or np.random.default_rng(0)
    checked = inside = viol = 0
    worst = 0.0
    chain_pts = chain_bad = 0
    by_k = {lv.k: lv for lv in dec.levels}
    for lv in dec.levels:
        nxt = by_k.get(lv.k + 1)
        Enext = nxt.E if nxt is not None else OpenSet.empty(base)
        mask = np.zeros(base.nb, dtype=bool)
        for b in lv.balls:
            mask |= b.scaled(DILATION).contains(base.centers)
        xs = np.flatnonzero(mask)
        on = Enext.mask[xs]
        bound = np.where(on, N * N, 1.0) * 4.0 ** (lv.k + 1)
        val = lv.restricted_sq[xs]
        checked += len(xs)
        inside += int(on.sum())
        viol += int(np.count_nonzero(val > bound * (1 + tol)))
        if len(xs):
            worst = max(worst, float((val / bound).max()))
        cand = xs[on]
        fA = restrict(f, lv.A)
        for x in rng.permutation(cand)[:chain_samples]:
            cover = cone_cover_points(Enext, net, base.centers[x])
            tot = sum(square_function(f, p).value for p in cover.points)
            lhs = square_function(fA, base.centers[x]).value
            chain_pts += 1
            chain_bad += int(lhs > tot * (1 + tol))
    return ConeBoundReport(checked, inside, viol, worst, chain_pts, chain_bad)


def ball_cover_report(dec: AtomicDecomposition) -> dict:
    bad = 0
    for lv in dec.levels:
        if not check_ball_cover(lv.Estar, dec.f.grid, lv.balls, DILATION).ok:
            bad += 1
    return {"levels": len(dec.levels), "bad_levels": bad}
