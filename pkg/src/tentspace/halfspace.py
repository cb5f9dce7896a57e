"""
Discretized upper half-space R^n x (0, inf) carrying the measure dy dt / t^(n+1).

The base box [-L, L]^n is split into cubes of side h; the t-axis is split into
J dyadic levels [T / 2^(j+1), T / 2^j), j = 0 (top) ... J-1 (finest).  A grid
function is constant on every product cell, so every integral against the
measure is an exact finite sum.

Values are stored with shape (J, nb, d): level, flattened base cell, component.
Base cells are flattened row-major with the first coordinate varying slowest,
which makes flat order coincide with lexicographic order of the cell centers.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Union

import numpy as np


@dataclass(frozen=True)
class BaseGrid:
    """Uniform cube grid on [-L, L]^n."""

    n: int
    L: float
    h: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"base dimension must be 1 or 2, got {self.n}")
        if not (self.h > 0 and self.L > 0):
            raise ValueError("h and L must be positive")
        m = 2 * self.L / self.h
        if abs(m - round(m)) > 1e-9:
            raise ValueError(f"2L/h must be an integer (got {m})")

    @property
    def m(self) -> int:
        """Cells per axis."""
        return int(round(2 * self.L / self.h))

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.n

    @property
    def nb(self) -> int:
        return self.m**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @cached_property
    def axis_centers(self) -> np.ndarray:
        return -self.L + self.h * (np.arange(self.m) + 0.5)

    @cached_property
    def centers(self) -> np.ndarray:
        """(nb, n) array of cell centers in flat order."""
        ax = self.axis_centers
        mesh = np.meshgrid(*([ax] * self.n), indexing="ij")
        c = np.stack([g.ravel() for g in mesh], axis=1)
        c.setflags(write=False)
        return c

    @cached_property
    def center_distances(self) -> np.ndarray:
        """(nb, nb) pairwise Euclidean distances between cell centers."""
        c = self.centers
        diff = c[:, None, :] - c[None, :, :]
        dist = np.sqrt(np.einsum("abk,abk->ab", diff, diff))
        dist.setflags(write=False)
        return dist

    def locate(self, points) -> np.ndarray:
        """Flat index of the cell containing each point, -1 outside the box."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((p + self.L) / self.h).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < self.m), axis=1)
        idx = np.clip(idx, 0, self.m - 1)
        flat = np.ravel_multi_index(tuple(idx.T), self.shape)
        return np.where(inside, flat, -1)

    def reshape(self, a: np.ndarray) -> np.ndarray:
        """View a flat (nb, ...) array on the n-dimensional cell lattice."""
        return a.reshape(self.shape + a.shape[1:])

    def ball_radii(self) -> np.ndarray:
        """Radii of the shared candidate ball family: multiples of h/2 up to 2L."""
        k = np.arange(1, int(round(4 * self.L / self.h)) + 1)
        return k * (self.h / 2)


@dataclass(frozen=True)
class HalfSpaceGrid:
    """Product grid of base cubes and dyadic t-levels below the top scale T."""

    n: int
    L: float
    h: float
    T: float
    J: int

    def __post_init__(self):
        if not (self.T > 0 and self.h > 0):
            raise ValueError("T and h must be positive")
        if int(self.J) != self.J or self.J < 1:
            raise ValueError("J must be a positive integer")
        if self.L < self.T:
            raise ValueError(f"need L >= T so cones of height T fit the box (L={self.L}, T={self.T})")
        BaseGrid(self.n, self.L, self.h)  # validates n, L, h

    @cached_property
    def base(self) -> BaseGrid:
        return BaseGrid(self.n, self.L, self.h)

    @property
    def nb(self) -> int:
        return self.base.nb

    @property
    def shape(self) -> tuple:
        return (self.J, self.nb)

    @property
    def ncells(self) -> int:
        return self.J * self.nb

    @cached_property
    def t_hi(self) -> np.ndarray:
        return self.T / 2.0 ** np.arange(self.J)

    @cached_property
    def t_lo(self) -> np.ndarray:
        return self.t_hi / 2

    @cached_property
    def t_mid(self) -> np.ndarray:
        """Representative height of each level (interval midpoint)."""
        return (self.t_lo + self.t_hi) / 2

    @cached_property
    def level_measure(self) -> np.ndarray:
        """mu(C) for one cell of each level: h^n (t_lo^-n - t_hi^-n) / n."""
        n = self.n
        return self.h**n * (self.t_lo ** (-n) - self.t_hi ** (-n)) / n

    @cached_property
    def level_measure_dt_over_t(self) -> np.ndarray:
        """Cell mass under dy dt / t: h^n log(t_hi / t_lo)."""
        return self.h**self.n * np.log(self.t_hi / self.t_lo)

    @property
    def cell_measures(self) -> np.ndarray:
        return np.broadcast_to(self.level_measure[:, None], self.shape)

    def cell_coordinates(self):
        """Broadcast (J, nb, n) centers and (J, nb) heights."""
        y = np.broadcast_to(self.base.centers[None], (self.J, self.nb, self.n))
        t = np.broadcast_to(self.t_mid[:, None], self.shape)
        return y, t

    def levels_ascending(self) -> np.ndarray:
        """Level indices ordered from the smallest height to the largest."""
        return np.arange(self.J)[::-1]

    def levels_below(self, r: float) -> int:
        """Number of levels whose representative height is < r."""
        return int(np.count_nonzero(self.t_mid < r))

    def config(self) -> dict:
        return {"n": self.n, "L": self.L, "h": self.h, "T": self.T, "J": self.J}


def build_grid(n: int, L: float, h: float, T: float, J: int) -> HalfSpaceGrid:
    return HalfSpaceGrid(int(n), float(L), float(h), float(T), int(J))


_PNORM = re.compile(r"^(?:pnorm\()?p?([0-9.]+|inf)\)?$")


@dataclass(frozen=True)
class NormedSpace:
    """R^d with an l^p norm; p = 2 is the Hilbert case with exact gamma-norms."""

    d: int
    p: float = 2.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not (self.p >= 1):
            raise ValueError("need 1 <= p <= inf")

    @classmethod
    def from_tag(cls, d: int, tag: str) -> "NormedSpace":
        tag = tag.strip().lower()
        if tag in ("euclidean", "l2"):
            return cls(d, 2.0)
        if tag in ("max", "inf", "linf"):
            return cls(d, math.inf)
        m = _PNORM.match(tag)
        if not m:
            raise ValueError(f"unknown norm tag {tag!r}")
        return cls(d, float(m.group(1)))

    @property
    def tag(self) -> str:
        if self.p == 2:
            return "euclidean"
        if math.isinf(self.p):
            return "max"
        return f"pnorm({self.p:g})"

    @property
    def is_hilbert(self) -> bool:
        return self.p == 2

    def norm(self, v, axis=-1):
        v = np.asarray(v, dtype=float)
        if self.p in (1.0, math.inf):
            return np.linalg.norm(v, ord=self.p, axis=axis)
        # scale by the max entry so tiny or huge vectors neither underflow nor overflow
        m = np.abs(v).max(axis=axis, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        return np.squeeze(safe, axis=axis) * np.linalg.norm(v / safe, ord=self.p, axis=axis)

    def dual(self) -> "NormedSpace":
        p = self.p
        if p == 1:
            q = math.inf
        elif math.isinf(p):
            q = 1.0
        else:
            q = p / (p - 1)
        return NormedSpace(self.d, q)


CellRegion = Union[np.ndarray, Callable, None]


class GridFunction:
    """R^d-valued cell-constant field on a HalfSpaceGrid. Immutable."""

    __slots__ = ("grid", "space", "values")

    def __init__(self, grid: HalfSpaceGrid, space: NormedSpace, values):
        v = np.array(values, dtype=float)
        if v.ndim == 2 and space.d == 1 and v.shape == grid.shape:
            v = v[..., None]
        if v.shape != (grid.J, grid.nb, space.d):
            raise ValueError(f"values shape {v.shape} != {(grid.J, grid.nb, space.d)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "values", v)

    def __setattr__(self, key, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def zeros(cls, grid: HalfSpaceGrid, space: NormedSpace) -> "GridFunction":
        return cls(grid, space, np.zeros((grid.J, grid.nb, space.d)))

    @classmethod
    def impulse(cls, grid, space, level: int, cell: int, vector) -> "GridFunction":
        """The function 1_C (x) vector for a single cell C."""
        v = np.zeros((grid.J, grid.nb, space.d))
        v[level, cell] = vector
        return cls(grid, space, v)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, self.space, values)

    @property
    def support(self) -> np.ndarray:
        """(J, nb) mask of cells where the value is nonzero."""
        return np.any(self.values != 0, axis=-1)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def pointwise_norms(self) -> np.ndarray:
        return self.space.norm(self.values)

    def integral(self) -> np.ndarray:
        """Integral against dy dt / t^(n+1)."""
        return np.einsum("jbk,j->k", self.values, self.grid.level_measure)

    def _check(self, other):
        if other.grid != self.grid or other.space != self.space:
            raise ValueError("grid functions live on different grids or spaces")

    def __add__(self, other):
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        c = np.asarray(c, dtype=float)
        if c.ndim == 2:  # per-cell scalar multiplier
            c = c[..., None]
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        g = self.grid
        return f"GridFunction(n={g.n}, J={g.J}, nb={g.nb}, d={self.space.d}, tag={self.space.tag})"


def region_mask(grid: HalfSpaceGrid, region: CellRegion) -> np.ndarray:
    """Turn a region description into a (J, nb) boolean mask.

    Accepts None (all cells), a boolean mask, or a predicate called with the
    broadcast cell centers (J, nb, n) and heights (J, nb).
    """
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    if callable(region):
        y, t = grid.cell_coordinates()
        mask = np.asarray(region(y, t), dtype=bool)
    else:
        mask = np.asarray(region, dtype=bool)
    if mask.shape != grid.shape:
        raise ValueError(f"region mask shape {mask.shape} != {grid.shape}")
    return mask


def restrict(f: GridFunction, region: CellRegion) -> GridFunction:
    """1_A f: zero the values outside the region."""
    mask = region_mask(f.grid, region)
    return f.with_values(np.where(mask[..., None], f.values, 0.0))


def region_measure(grid: HalfSpaceGrid, region: CellRegion) -> float:
    mask = region_mask(grid, region)
    return float(np.sum(grid.cell_measures[mask]))


def slab_measure(grid: HalfSpaceGrid, level: int) -> float:
    """Closed-form measure of [-L, L]^n x [t_lo, t_hi) for one level."""
    n = grid.n
    return (2 * grid.L) ** n * (grid.t_lo[level] ** (-n) - grid.t_hi[level] ** (-n)) / n


def shadow_inside(f: GridFunction, alpha: float = 1.0) -> bool:
    """True when the aperture-alpha cone shadow of every support cell lies in the box."""
    sup = f.support
    if not sup.any():
        return True
    y, t = f.grid.cell_coordinates()
    reach = np.abs(y[sup]).max(axis=-1) + alpha * t[sup]
    return bool(np.all(reach <= f.grid.L))


# -- serialization ---------------------------------------------------------


def function_to_document(f: GridFunction, sidecar: Path | None = None) -> dict:
    doc = dict(f.grid.config())
    doc["d"] = f.space.d
    doc["norm_tag"] = f.space.tag
    flat = f.values.reshape(-1, f.space.d)
    if sidecar is None:
        doc["values"] = flat.tolist()
    else:
        sidecar = Path(sidecar)
        flat.astype("<f8").tofile(sidecar)
        doc["values_file"] = sidecar.name
    return doc


def function_from_document(doc: dict, root: Path | None = None) -> GridFunction:
    grid = build_grid(doc["n"], doc["L"], doc["h"], doc["T"], doc["J"])
    space = NormedSpace.from_tag(int(doc["d"]), doc["norm_tag"])
    if "values" in doc:
        vals = np.asarray(doc["values"], dtype=float)
    else:
        path = Path(doc["values_file"])
        if root is not None and not path.is_absolute():
            path = Path(root) / path
        vals = np.fromfile(path, dtype="<f8")
    expected = grid.ncells * space.d
    if vals.size != expected:
        raise ValueError(f"expected {expected} values, got {vals.size}")
    return GridFunction(grid, space, vals.reshape(grid.J, grid.nb, space.d))


def save_function(f: GridFunction, path, binary: bool = False) -> Path:
    path = Path(path)
    sidecar = path.with_suffix(".bin") if binary else None
    path.write_text(json.dumps(function_to_document(f, sidecar)))
    return path


def load_function(path) -> GridFunction:
    path = Path(path)
    return function_from_document(json.loads(path.read_text()), root=path.parent)
