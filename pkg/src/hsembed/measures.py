"""Positive Borel measures on the half-space and Carleson-exponent checks.

Three measure families cover all embedding experiments:

* ``WeightedLebesgue(gamma)``: d(mu) = t^gamma dx dt, with exact closed-form
  mass on boxes.  This is the sufficiency workhorse.
* ``AtomicMeasure``: finitely many point masses, for edge cases and for
  cheap divergence probes.
* ``CubePowerMeasure(e, decomp)``: mass eta^e at every Whitney cube center.
  Because a cube contains exactly its own center (and no other level's),
  this realises a measure whose Carleson ratio is exactly eta^(e - E),
  which is how necessity deficits are manufactured.

``required_exponent`` maps a theorem id and its parameter block to the
exponent E such that the theorem's Carleson condition reads
mu(cube) <= C * eta^E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .geometry import (
    Cube,
    EnlargedCube,
    LocalCube,
    Slab,
    WhitneyDecomposition,
)
from .quadrature import QuadratureConfig, integrate_halfspace

__all__ = [
    "Measure",
    "WeightedLebesgue",
    "AtomicMeasure",
    "CubePowerMeasure",
    "measure_from_config",
    "measure_to_config",
    "region_bounds",
    "required_exponent",
    "CarlesonReport",
    "carleson_sweep",
    "theorem7_sum",
]


def region_bounds(region):
    """(lo, hi) corners of a cube-like region or a plain (lo, hi) pair."""
    if isinstance(region, (Cube, EnlargedCube, LocalCube)):
        return region.bounds()
    lo, hi = region
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


def slab_box(slab: Slab, n: int, x_half_width: float):
    """The box [-R, R]^n x [t_lo, t_hi] realising a slab inside the window."""
    lo = np.append(np.full(n, -x_half_width), slab.t_lo)
    hi = np.append(np.full(n, x_half_width), slab.t_hi)
    return lo, hi


class Measure:
    """Base class: positive measures with box-exact mass evaluation."""

    kind: str

    def mass_box(self, lo: np.ndarray, hi: np.ndarray) -> float:
        raise NotImplementedError

    def mass(
        self,
        region,
        x_half_width: float | None = None,
        n: int | None = None,
    ) -> float:
        """Mass of a closed cube, enlarged cube, local cube, slab or box.

        Slabs are truncated to the horizontal window, so they additionally
        need ``x_half_width`` and the dimension ``n``.
        """
        if isinstance(region, Slab):
            if x_half_width is None or n is None:
                raise ParameterError("slab mass needs x_half_width and n")
            lo, hi = slab_box(region, n, x_half_width)
            return self.mass_box(lo, hi)
        lo, hi = region_bounds(region)
        return self.mass_box(lo, hi)

    def level_cube_masses(self, decomp: WhitneyDecomposition, j: int) -> np.ndarray:
        """Masses of all level-j cubes in lexicographic order."""
        lat = decomp.level(j)
        lo, hi = lat.cube_bounds()
        return self.masses_boxes(lo, hi)

    def masses_boxes(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return np.array([self.mass_box(l, h) for l, h in zip(lo, hi)])

    def integral(
        self,
        g,
        decomp: WhitneyDecomposition,
        cfg: QuadratureConfig,
        flags: list | None = None,
        method: str = "per_cube",
    ) -> float:
        """Integral of g over the window against this measure."""
        raise NotImplementedError


@dataclass(frozen=True)
class WeightedLebesgue(Measure):
    """d(mu) = t^gamma dx dt; gamma > -1 keeps cube masses finite."""

    gamma: float
    kind: str = "m_lambda"

    def __post_init__(self):
        if not self.gamma > -1:
            raise ParameterError(
                f"weighted Lebesgue exponent must satisfy gamma > -1, got {self.gamma}"
            )

    def mass_box(self, lo: np.ndarray, hi: np.ndarray) -> float:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        x_part = float(np.prod(hi[:-1] - lo[:-1]))
        g1 = self.gamma + 1.0
        t_lo = max(lo[-1], 0.0)
        t_part = (hi[-1] ** g1 - t_lo ** g1) / g1
        return x_part * t_part

    def masses_boxes(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        g1 = self.gamma + 1.0
        x_part = np.prod(hi[:, :-1] - lo[:, :-1], axis=1)
        t_part = (hi[:, -1] ** g1 - np.maximum(lo[:, -1], 0.0) ** g1) / g1
        return x_part * t_part

    def integral(self, g, decomp, cfg, flags=None, method="per_cube") -> float:
        gamma = self.gamma

        def weighted(pts: np.ndarray) -> np.ndarray:
            vals = np.asarray(g(pts), dtype=float)
            w = pts[:, -1] ** gamma
            return vals * w if vals.ndim == 1 else vals * w[:, None]

        return integrate_halfspace(weighted, decomp, cfg, flags=flags, method=method)


@dataclass(frozen=True)
class AtomicMeasure(Measure):
    """Finitely many non-negative point masses."""

    points: tuple[tuple[float, ...], ...]
    masses: tuple[float, ...]
    kind: str = "atomic"

    def __post_init__(self):
        if len(self.points) != len(self.masses):
            raise ParameterError("points and masses must have equal length")
        if any(m < 0 for m in self.masses):
            raise ParameterError("atomic masses must be non-negative")

    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.points:
            return np.zeros((0, 2)), np.zeros(0)
        return np.asarray(self.points, dtype=float), np.asarray(self.masses)

    def mass_box(self, lo, hi) -> float:
        pts, m = self._arrays()
        if pts.shape[0] == 0:
            return 0.0
        inside = np.all((pts >= lo) & (pts <= hi), axis=1)
        return math.fsum(float(v) for v in m[inside])

    def integral(self, g, decomp, cfg, flags=None, method="per_cube") -> float:
        pts, m = self._arrays()
        if pts.shape[0] == 0:
            return 0.0
        vals = np.asarray(g(pts), dtype=float)
        return math.fsum(float(v) for v in m * vals)


@dataclass(frozen=True)
class CubePowerMeasure(Measure):
    """Mass eta_k^e at the center of every Whitney cube of a decomposition."""

    e: float
    decomp: WhitneyDecomposition
    kind: str = "cube_power"

    def mass_box(self, lo, hi) -> float:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        total = []
        n = self.decomp.n
        for lat in self.decomp.lattices:
            if not (lo[n] <= lat.eta <= hi[n]):
                continue
            s = lat.side
            k_lo = np.maximum(np.ceil(lo[:n] / s - 0.5), lat.k_min)
            k_hi = np.minimum(np.floor(hi[:n] / s - 0.5), lat.k_max)
            count = float(np.prod(np.maximum(k_hi - k_lo + 1.0, 0.0)))
            total.append(count * lat.eta ** self.e)
        return math.fsum(total)

    def level_cube_masses(self, decomp, j):
        lat = decomp.level(j)
        if decomp is not self.decomp:
            lo, hi = lat.cube_bounds()
            return self.masses_boxes(lo, hi)
        return np.full(lat.count, lat.eta ** self.e)

    def integral(self, g, decomp, cfg, flags=None, method="per_cube") -> float:
        totals = []
        batch = 1 << 18
        for lat in self.decomp.lattices:
            centers = lat.centers()
            w = lat.eta ** self.e
            for start in range(0, centers.shape[0], batch):
                vals = np.asarray(g(centers[start : start + batch]), dtype=float)
                totals.append(w * math.fsum(float(v) for v in vals))
        return math.fsum(totals)


def measure_from_config(cfg: dict, decomp: WhitneyDecomposition) -> Measure:
    kind = cfg.get("kind")
    if kind == "m_lambda":
        return WeightedLebesgue(float(cfg["gamma"]))
    if kind == "atomic":
        pts = [tuple(p["point"]) for p in cfg["points"]]
        masses = [float(p["mass"]) for p in cfg["points"]]
        return AtomicMeasure(tuple(pts), tuple(masses))
    if kind == "cube_power":
        return CubePowerMeasure(float(cfg["e"]), decomp)
    raise ParameterError(f"unknown measure kind {kind!r}")


def measure_to_config(mu: Measure) -> dict:
    if isinstance(mu, WeightedLebesgue):
        return {"kind": "m_lambda", "gamma": mu.gamma}
    if isinstance(mu, AtomicMeasure):
        return {
            "kind": "atomic",
            "points": [
                {"point": list(p), "mass": m} for p, m in zip(mu.points, mu.masses)
            ],
        }
    if isinstance(mu, CubePowerMeasure):
        return {"kind": "cube_power", "e": mu.e}
    raise ParameterError(f"cannot serialise measure {type(mu).__name__}")


def _vec(params: dict, key: str, m: int) -> list[float]:
    v = params[key]
    seq = [float(x) for x in (v if isinstance(v, (list, tuple)) else [v] * m)]
    if len(seq) != m:
        raise ParameterError(f"{key} must have length m={m}, got {len(seq)}")
    return seq


def _require(cond: bool, constraint: str):
    if not cond:
        raise ParameterError(f"parameter constraint violated: {constraint}")


def required_exponent(theorem_id: str, n: int, params: dict) -> float:
    """Exponent E with the theorem's Carleson condition mu(cube) <= C eta^E."""
    tid = theorem_id.upper()
    if tid == "T1":
        m = int(params["m"])
        alpha = float(params["alpha"])
        q = _vec(params, "q", m)
        _require(m >= 1, "m >= 1")
        _require(alpha > -1, "alpha > -1")
        _require(all(v > 0 for v in _vec(params, "p", m)), "p_i > 0")
        _require(
            abs(sum(1.0 / v for v in q) - 1.0) < 1e-9,
            "sum of reciprocals of q must equal 1",
        )
        return m * (n + 1 + alpha)
    if tid in ("T2", "T3"):
        m = int(params["m"])
        p, q, s = float(params["p"]), float(params["q"]), float(params["s"])
        beta = _vec(params, "beta", m)
        _require(p > 0 and q > 0, "p, q > 0")
        _require(0 < s <= q, "0 < s <= q")
        _require(all(b > -1 for b in beta), "beta_i > -1")
        if tid == "T3":
            t_vec = _vec(params, "t", m)
            _require(all(0 < t <= s for t in t_vec), "0 < t_i <= s")
        return sum(p * (n + 1 + b) / s for b in beta)
    if tid == "T4":
        m = int(params["m"])
        p, q = float(params["p"]), float(params["q"])
        sigma = _vec(params, "sigma", m)
        alpha = _vec(params, "alpha", m)
        _require(p > 0 and q > 0, "p, q > 0")
        _require(all(0 < s <= q for s in sigma), "0 < sigma_i <= q")
        _require(all(a > -1 for a in alpha), "alpha_i > -1")
        return m * (n + 1) * p / q + sum(
            p * (n + 1 + a) / s for a, s in zip(alpha, sigma)
        )
    if tid == "T5":
        m = int(params["m"])
        p = _vec(params, "p", m)
        sigma = _vec(params, "sigma", m)
        alpha = _vec(params, "alpha", m)
        _require(all(v > 0 for v in p), "p_i > 0")
        _require(all(v > 0 for v in sigma), "sigma_i > 0")
        _require(all(a > -1 for a in alpha), "alpha_i > -1")
        return m * (n + 1) + sum(
            pi * (n + 1 + a) / s for pi, a, s in zip(p, alpha, sigma)
        )
    if tid == "T8":
        p, q, alpha = float(params["p"]), float(params["q"]), float(params["alpha"])
        _require(0 < p <= q, "0 < p <= q")
        _require(alpha > -1, "alpha > -1")
        return n + 1 + alpha
    raise ParameterError(f"unknown theorem id {theorem_id!r}")


@dataclass(frozen=True)
class CarlesonReport:
    """Per-cube Carleson ratios mu(cube)/eta^E summarised per level.

    trend[i] compares the max ratio at the finer level (j_min + i) with the
    next coarser level; sustained values above one mean the measure
    overshoots the exponent toward the boundary.
    """

    exponent: float
    sup_ratio: float
    argmax: dict
    levels: list[int]
    level_max: list[float]
    level_mean: list[float]
    trend: list[float]
    per_cube: dict | None = None

    def max_trend(self) -> float:
        return max(self.trend) if self.trend else 1.0

    def to_dict(self) -> dict:
        d = {
            "exponent": self.exponent,
            "sup_ratio": self.sup_ratio,
            "argmax": self.argmax,
            "levels": self.levels,
            "level_max": self.level_max,
            "level_mean": self.level_mean,
            "trend": self.trend,
        }
        if self.per_cube is not None:
            d["per_cube"] = self.per_cube
        return d


def carleson_sweep(
    mu: Measure,
    decomp: WhitneyDecomposition,
    exponent: float,
    keep_per_cube: int = 100_000,
) -> CarlesonReport:
    """Ratios mu(cube)/eta^E for every cube, with per-level trend.

    Individual ratios are embedded in the report only when the cube count
    stays under ``keep_per_cube``; summaries are always present.
    """
    if not math.isfinite(exponent):
        raise ParameterError(f"exponent must be finite, got {exponent}")
    levels, lmax, lmean = [], [], []
    sup = 0.0
    argmax: dict = {}
    per_cube: dict | None = (
        {} if len(decomp) <= keep_per_cube else None
    )
    for lat in decomp.lattices:
        masses = mu.level_cube_masses(decomp, lat.level)
        ratios = masses / lat.eta ** exponent
        levels.append(lat.level)
        lmax.append(float(ratios.max()) if ratios.size else 0.0)
        lmean.append(float(ratios.mean()) if ratios.size else 0.0)
        if ratios.size:
            i = int(np.argmax(ratios))
            if ratios[i] >= sup:
                sup = float(ratios[i])
                idx = lat.index_grid()[i]
                argmax = {"level": lat.level, "index": [int(k) for k in idx]}
        if per_cube is not None:
            per_cube[str(lat.level)] = [float(r) for r in ratios]
    trend = [
        lmax[i] / lmax[i + 1] if lmax[i + 1] > 0 else math.inf
        for i in range(len(lmax) - 1)
    ]
    return CarlesonReport(
        exponent=float(exponent),
        sup_ratio=sup,
        argmax=argmax,
        levels=levels,
        level_max=lmax,
        level_mean=lmean,
        trend=trend,
        per_cube=per_cube,
    )


def theorem7_sum(
    mu: Measure,
    decomp: WhitneyDecomposition,
    p: float,
    q: float,
    alpha: float,
) -> float:
    """Truncated sum sum_k eta_k^(-(alpha q n + n) p/(q-p)) mu(cube_k)^(q/(q-p))."""
    if not 0 < p < q:
        raise ParameterError(f"parameter constraint violated: 0 < p < q, got p={p}, q={q}")
    if not alpha > 0:
        raise ParameterError(f"parameter constraint violated: alpha > 0, got {alpha}")
    n = decomp.n
    w_exp = -(alpha * q * n + n) * p / (q - p)
    m_exp = q / (q - p)
    totals = []
    for lat in decomp.lattices:
        masses = mu.level_cube_masses(decomp, lat.level)
        totals.append(lat.eta ** w_exp * math.fsum(float(v) for v in masses ** m_exp))
    return math.fsum(totals)
