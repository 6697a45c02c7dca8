"""Geometry of the upper half-space: points, dyadic Whitney cubes, slabs.

The half-space is H = R^n x (0, inf) with boundary t = 0.  The Whitney
decomposition used throughout is the concrete dyadic one: a cube of level j
has side 2^j, horizontal corner on the lattice (2^j Z)^n and height range
[2^j, 2^(j+1)].  With this construction dist(cube, boundary) equals the side
exactly and diam/dist = sqrt(n+1) for every cube; enlarging a cube 5/4 times
keeps it inside the half-space and the enlargements overlap at most
2^(n+1)-fold.

Whole-space statements are always evaluated on a truncation window
[-R, R]^n x [2^j_min, 2^(j_max+1)].  Decompositions store one lattice per
level instead of explicit cube objects, so building a window with millions
of cubes is cheap; cubes are materialised lazily.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from .errors import DomainError, ParameterError, UnsupportedDimensionError

ENLARGEMENT_FACTOR = 1.25


@dataclass(frozen=True)
class Point:
    """A point z = (x, t) of the upper half-space, t > 0, len(x) = n >= 2."""

    x: tuple[float, ...]
    t: float

    def __post_init__(self):
        if len(self.x) < 2:
            raise UnsupportedDimensionError(
                f"horizontal dimension must be >= 2, got n={len(self.x)}"
            )
        if not self.t > 0:
            raise DomainError(f"height must be positive, got t={self.t}")
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return len(self.x)

    def coords(self) -> np.ndarray:
        """The point as an array (x_1, ..., x_n, t)."""
        return np.array(self.x + (self.t,), dtype=float)

    def reflected(self) -> np.ndarray:
        """The mirror image (x, -t) across the boundary hyperplane."""
        return np.array(self.x + (-self.t,), dtype=float)


@dataclass(frozen=True)
class Cube:
    """Dyadic Whitney cube: side 2^level, x-corner index*2^level, t in [side, 2*side]."""

    level: int
    index: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** self.level

    @property
    def x_corner(self) -> np.ndarray:
        return np.array(self.index, dtype=float) * self.side

    @property
    def t_interval(self) -> tuple[float, float]:
        return (self.side, 2.0 * self.side)

    @property
    def center(self) -> Point:
        s = self.side
        return Point(tuple((k + 0.5) * s for k in self.index), 1.5 * s)

    @property
    def dist_boundary(self) -> float:
        """Distance to the hyperplane t = 0; equals the side exactly."""
        return self.side

    @property
    def diam(self) -> float:
        return self.side * math.sqrt(self.n + 1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) corners of the closed cube, height as the last axis."""
        s = self.side
        lo = np.append(self.x_corner, s)
        hi = lo + s
        return lo, hi

    def contains(self, pt: np.ndarray, strict: bool = False) -> bool:
        lo, hi = self.bounds()
        if strict:
            return bool(np.all(pt > lo) and np.all(pt < hi))
        return bool(np.all(pt >= lo) and np.all(pt <= hi))


@dataclass(frozen=True)
class EnlargedCube:
    """The cube scaled about its center; the default factor is 5/4."""

    base: Cube
    factor: float = ENLARGEMENT_FACTOR

    @property
    def side(self) -> float:
        return self.base.side * self.factor

    @property
    def center(self) -> Point:
        return self.base.center

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.base.center.coords()
        half = 0.5 * self.side
        return c - half, c + half

    def contains(self, pt: np.ndarray) -> bool:
        lo, hi = self.bounds()
        return bool(np.all(pt >= lo) and np.all(pt <= hi))


@dataclass(frozen=True)
class LocalCube:
    """Axis-aligned cube centered at an interior point w = (y, s).

    Kind "Q" has side s, kind "q" has side 4s/5; both stay inside the
    half-space because s - side/2 > 0.
    """

    center: Point
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ParameterError(f"side must be positive, got {self.side}")
        if self.center.t - 0.5 * self.side < 0:
            raise DomainError("local cube leaves the half-space")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.center.coords()
        half = 0.5 * self.side
        return c - half, c + half

    @property
    def volume(self) -> float:
        return self.side ** (self.center.n + 1)


def local_cube(w: Point, kind: Literal["Q", "q"]) -> LocalCube:
    """The cube Q_w (side s) or q_w (side 4s/5) centered at w = (y, s)."""
    if kind == "Q":
        return LocalCube(w, w.t)
    if kind == "q":
        return LocalCube(w, 0.8 * w.t)
    raise ParameterError(f"kind must be 'Q' or 'q', got {kind!r}")


@dataclass(frozen=True)
class Slab:
    """Horizontal slab R^n x [t_lo, t_hi) with t_hi = 2^-k, t_lo = 2^-(k+1)."""

    k: int

    @property
    def t_lo(self) -> float:
        return 2.0 ** (-self.k - 1)

    @property
    def t_hi(self) -> float:
        return 2.0 ** (-self.k)


@dataclass(frozen=True)
class SlabFamily:
    """Consecutive dyadic slabs H_k for k in [k_min, k_max]."""

    k_min: int
    k_max: int
    slabs: tuple[Slab, ...] = field(init=False)

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise ParameterError(
                f"slab range invalid: k_min={self.k_min} > k_max={self.k_max}"
            )
        object.__setattr__(
            self, "slabs", tuple(Slab(k) for k in range(self.k_min, self.k_max + 1))
        )

    @property
    def t_extent(self) -> tuple[float, float]:
        """Union of the slabs is R^n x [lo, hi)."""
        return (2.0 ** (-self.k_max - 1), 2.0 ** (-self.k_min))


def build_slabs(k_range: tuple[int, int]) -> SlabFamily:
    """Slab family for k in [k_min, k_max]; heights decrease as k grows."""
    return SlabFamily(int(k_range[0]), int(k_range[1]))


@dataclass(frozen=True)
class LevelLattice:
    """All level-j cubes meeting the window, as an index range per axis."""

    n: int
    level: int
    k_min: int
    k_max: int

    @property
    def per_axis(self) -> int:
        return self.k_max - self.k_min + 1

    @property
    def count(self) -> int:
        return self.per_axis ** self.n

    @property
    def side(self) -> float:
        return 2.0 ** self.level

    @property
    def eta(self) -> float:
        """Common center height of every cube at this level."""
        return 1.5 * self.side

    def index_grid(self) -> np.ndarray:
        """(count, n) integer indices in lexicographic order."""
        axes = [np.arange(self.k_min, self.k_max + 1)] * self.n
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def centers(self) -> np.ndarray:
        """(count, n+1) cube centers in lexicographic order."""
        return self.centers_slice(0, self.count)

    def flat_to_index(self, flat: np.ndarray) -> np.ndarray:
        """Map lexicographic flat positions to (B, n) lattice indices."""
        out = np.empty((flat.size, self.n), dtype=np.int64)
        rem = np.asarray(flat, dtype=np.int64)
        for axis in range(self.n - 1, -1, -1):
            out[:, axis] = rem % self.per_axis
            rem = rem // self.per_axis
        return out + self.k_min

    def centers_slice(self, start: int, stop: int) -> np.ndarray:
        """Cube centers for flat positions [start, stop), lexicographic."""
        idx = self.flat_to_index(np.arange(start, stop))
        out = np.empty((idx.shape[0], self.n + 1))
        out[:, : self.n] = (idx + 0.5) * self.side
        out[:, self.n] = self.eta
        return out

    def cube_bounds(self, enlarged: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) arrays of shape (count, n+1), lexicographic order."""
        c = self.centers()
        half = 0.5 * self.side * (ENLARGEMENT_FACTOR if enlarged else 1.0)
        return c - half, c + half

    def flat_index(self, index: tuple[int, ...]) -> int:
        flat = 0
        for k in index:
            if not self.k_min <= k <= self.k_max:
                raise DomainError(f"index {index} outside lattice range")
            flat = flat * self.per_axis + (k - self.k_min)
        return flat


@dataclass(frozen=True)
class WhitneyDecomposition:
    """Dyadic Whitney cubes of the truncated upper half-space.

    The window is [-R, R]^n x [2^j_min, 2^(j_max+1)] and the cubes tile it
    exactly.  Enumeration order is lexicographic in (level, index), fixed so
    that sums over cubes are reproducible.
    """

    n: int
    level_range: tuple[int, int]
    x_half_width: float
    lattices: tuple[LevelLattice, ...]

    @property
    def j_min(self) -> int:
        return self.level_range[0]

    @property
    def j_max(self) -> int:
        return self.level_range[1]

    def __len__(self) -> int:
        return sum(lat.count for lat in self.lattices)

    def __iter__(self) -> Iterator[Cube]:
        return self.iter_cubes()

    def iter_cubes(self) -> Iterator[Cube]:
        for lat in self.lattices:
            for idx in lat.index_grid():
                yield Cube(lat.level, tuple(int(k) for k in idx))

    def level(self, j: int) -> LevelLattice:
        if not self.j_min <= j <= self.j_max:
            raise ParameterError(f"level {j} outside range {self.level_range}")
        return self.lattices[j - self.j_min]

    def window_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        R = self.x_half_width
        lo = np.append(np.full(self.n, -R), 2.0 ** self.j_min)
        hi = np.append(np.full(self.n, R), 2.0 ** (self.j_max + 1))
        return lo, hi

    def window_descriptor(self) -> dict:
        return {
            "n": self.n,
            "levels": [self.j_min, self.j_max],
            "x_half_width": self.x_half_width,
        }

    def in_window(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = self.window_bounds()
        pts = np.atleast_2d(pts)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def enlarged_by_boundary_level(self) -> "WhitneyDecomposition":
        """The same window extended one dyadic level toward the boundary."""
        return build_whitney(
            self.n, (self.j_min - 1, self.j_max), self.x_half_width
        )

    def locate(self, pt: np.ndarray, strict: bool = False) -> Cube | None:
        """The cube whose (closed or open) body contains pt, else None.

        Heights on the shared face t = 2^j are assigned to the level below,
        matching the half-open union of the level layers; the top edge
        t = 2^(j_max+1) belongs to the top layer.
        """
        pt = np.asarray(pt, dtype=float)
        t = pt[self.n]
        if not self.in_window(pt)[0]:
            return None
        j = int(math.floor(math.log2(t)))
        while 2.0 ** j > t:
            j -= 1
        while 2.0 ** (j + 1) <= t:
            j += 1
        j = min(j, self.j_max)
        if j < self.j_min:
            return None
        side = 2.0 ** j
        idx = np.floor(pt[: self.n] / side).astype(int)
        lat = self.level(j)
        idx = np.clip(idx, lat.k_min, lat.k_max)
        cube = Cube(j, tuple(int(k) for k in idx))
        if cube.contains(pt, strict=strict):
            return cube
        return None

    def sample_window(self, count: int, seed: int) -> np.ndarray:
        """Seeded uniform sample of points inside the open window."""
        rng = np.random.default_rng(seed)
        lo, hi = self.window_bounds()
        u = rng.random((count, self.n + 1))
        return lo + u * (hi - lo)


def build_whitney(
    n: int, level_range: tuple[int, int], x_half_width: float
) -> WhitneyDecomposition:
    """Build the dyadic Whitney decomposition of the truncation window.

    Parameters
    ----------
    n : horizontal dimension, at least 2.
    level_range : (j_min, j_max) dyadic levels; sides run from 2^j_min
        to 2^j_max and heights cover [2^j_min, 2^(j_max+1)].
    x_half_width : half-width R of the symmetric horizontal box; must be a
        positive integer multiple of 2^j_max so that every level tiles the
        box exactly.
    """
    if int(n) != n or n < 2:
        raise UnsupportedDimensionError(f"dimension n must be an integer >= 2, got {n}")
    n = int(n)
    j_min, j_max = int(level_range[0]), int(level_range[1])
    if j_min > j_max:
        raise ParameterError(f"invalid level range: j_min={j_min} > j_max={j_max}")
    top = 2.0 ** j_max
    ratio = x_half_width / top
    if x_half_width <= 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ParameterError(
            f"x_half_width={x_half_width} must be a positive integer multiple of "
            f"2^j_max = {top}"
        )
    lattices = []
    for j in range(j_min, j_max + 1):
        m = int(round(x_half_width / 2.0 ** j))
        lattices.append(LevelLattice(n=n, level=j, k_min=-m, k_max=m - 1))
    return WhitneyDecomposition(
        n=n,
        level_range=(j_min, j_max),
        x_half_width=float(x_half_width),
        lattices=tuple(lattices),
    )


def overlap_counts(decomp: WhitneyDecomposition, pts: np.ndarray) -> np.ndarray:
    """Number of enlarged cubes containing each point, vectorised.

    Works per level by counting the lattice indices whose enlarged cube
    covers the point on every axis; the total is summed over levels.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if not bool(np.all(decomp.in_window(pts))):
        raise DomainError("point outside the truncation window")
    n = decomp.n
    x = pts[:, :n]
    t = pts[:, n]
    total = np.zeros(pts.shape[0], dtype=np.int64)
    half_ratio = 0.5 * ENLARGEMENT_FACTOR
    for lat in decomp.lattices:
        s = lat.side
        t_ok = np.abs(t - lat.eta) <= half_ratio * s
        u = x / s - 0.5
        k_lo = np.maximum(np.ceil(u - half_ratio), lat.k_min)
        k_hi = np.minimum(np.floor(u + half_ratio), lat.k_max)
        per_axis = np.maximum(k_hi - k_lo + 1.0, 0.0)
        total += np.where(t_ok, per_axis.prod(axis=1), 0.0).astype(np.int64)
    return total


def overlap_count(decomp: WhitneyDecomposition, point: Point | np.ndarray) -> int:
    """Number of enlarged cubes of the decomposition containing the point."""
    pt = point.coords() if isinstance(point, Point) else np.asarray(point, dtype=float)
    return int(overlap_counts(decomp, pt[None, :])[0])


def write_cubes_csv(decomp: WhitneyDecomposition, path) -> None:
    """Export the cube list as CSV: level, index..., center..., side."""
    n = decomp.n
    header = (
        ["level"]
        + [f"k{i + 1}" for i in range(n)]
        + [f"c{i + 1}" for i in range(n)]
        + ["ct", "side"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for lat in decomp.lattices:
            idx = lat.index_grid()
            centers = lat.centers()
            for row_idx, row_c in zip(idx, centers):
                writer.writerow(
                    [lat.level]
                    + [int(k) for k in row_idx]
                    + [repr(float(v)) for v in row_c]
                    + [repr(lat.side)]
                )
