"""Evaluable harmonic functions on the upper half-space.

Three families are provided:

* reflected-kernel derivatives: the l-th height derivative of
  |z - conj(w)|^(1-n), where conj(w) mirrors w across the boundary.  These
  are kept in exact closed form as a sum of terms c * u^a * rho^(-b) with
  u = t + s and rho = |z - conj(w)|, so no numerical differentiation is ever
  involved and the homogeneity degree -(n-1+l) is exact.
* translated Poisson kernels, normalised to unit boundary mass.
* seeded linear combinations of the above.

Every function is immutable and evaluates in bulk over arrays of points,
which is what the quadrature engine feeds it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, EvaluationError, ParameterError
from .geometry import Point, local_cube

__all__ = [
    "TermSum",
    "derive_terms",
    "HarmonicFunction",
    "KernelDerivative",
    "PoissonKernel",
    "Combo",
    "kernel_derivative",
    "poisson_kernel",
    "seeded_combo",
    "zoo_family",
    "laplacian_residual",
    "TwEstimate",
    "tw_fraction",
    "calibrate_c_lower",
    "function_to_config",
    "function_from_config",
]


@dataclass(frozen=True)
class TermSum:
    """Sum of terms c * u^a * rho^(-b) with u = t + s, rho = |z - conj(w)|.

    Generated from the seed term (1, 0, n-1) by repeated height
    differentiation; every term satisfies b - a = n - 1 + l and
    b <= n - 1 + 2l.
    """

    terms: tuple[tuple[float, int, int], ...]

    def evaluate(self, u: np.ndarray, rho2: np.ndarray) -> np.ndarray:
        inv2 = 1.0 / rho2
        inv = np.sqrt(inv2)
        out = None
        for c, a, b in self.terms:
            term = _int_power(inv2, b // 2)
            if b % 2:
                term = term * inv
            if a:
                term = term * _int_power(u, a)
            term = term * c
            out = term if out is None else out + term
        return out


def _int_power(base: np.ndarray, k: int) -> np.ndarray:
    """base**k for small non-negative integer k by repeated squaring."""
    if k == 0:
        return np.ones_like(base)
    result = None
    square = base
    while k:
        if k & 1:
            result = square if result is None else result * square
        k >>= 1
        if k:
            square = square * square
    return result


@lru_cache(maxsize=None)
def derive_terms(n: int, l: int) -> TermSum:
    """Closed form of the l-th height derivative of rho^(1-n).

    Applies l times the rewrite
        d/dt (u^a rho^-b) = a u^(a-1) rho^-b - b u^(a+1) rho^-(b+2),
    which follows from d(rho)/dt = u / rho, and merges like terms.  The
    merged term count is floor(l/2) + 1.
    """
    if n < 2:
        raise ParameterError(f"dimension n must be >= 2, got {n}")
    if l < 0:
        raise ParameterError(f"derivative order must be >= 0, got {l}")
    terms: dict[tuple[int, int], int] = {(0, n - 1): 1}
    for _ in range(l):
        nxt: dict[tuple[int, int], int] = {}
        for (a, b), c in terms.items():
            if a:
                key = (a - 1, b)
                nxt[key] = nxt.get(key, 0) + c * a
            key = (a + 1, b + 2)
            nxt[key] = nxt.get(key, 0) - c * b
        terms = {k: v for k, v in nxt.items() if v != 0}
    ordered = tuple(
        (float(c), a, b) for (a, b), c in sorted(terms.items(), key=lambda kv: kv[0])
    )
    return TermSum(ordered)


class HarmonicFunction:
    """Base class; subclasses provide vectorised evaluation and a decay order.

    ``decay`` is the power-law order at infinity: |f(z)| = O(|z|^-decay).
    It drives all convergence preconditions in the norm layer.
    """

    decay: float

    def values(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def at_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[1] - 1
        return self.values(pts[:, :n], pts[:, n])

    def __call__(self, z: Point) -> float:
        return float(self.values(np.array([z.x]), np.array([z.t]))[0])


@dataclass(frozen=True)
class KernelDerivative(HarmonicFunction):
    """The l-th height derivative of the reflected kernel, centred at w."""

    w: Point
    l: int

    @property
    def terms(self) -> TermSum:
        return derive_terms(self.w.n, self.l)

    @property
    def decay(self) -> float:
        return self.w.n - 1 + self.l

    def values(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        wx = np.asarray(self.w.x)
        u = t + self.w.t
        diff = x - wx
        rho2 = np.einsum("...i,...i->...", diff, diff) + u * u
        return self.terms.evaluate(u, rho2)


@dataclass(frozen=True)
class PoissonKernel(HarmonicFunction):
    """Poisson kernel with pole at the boundary point x0, shifted down by t0.

    The normalisation c_n = Gamma((n+1)/2) / pi^((n+1)/2) makes the boundary
    mass at fixed height equal to one.
    """

    x0: tuple[float, ...]
    t0: float = 0.0

    def __post_init__(self):
        if self.t0 < 0:
            raise ParameterError(f"height shift must be >= 0, got t0={self.t0}")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))

    @property
    def n(self) -> int:
        return len(self.x0)

    @property
    def decay(self) -> float:
        return float(self.n)

    @property
    def normalisation(self) -> float:
        n = self.n
        return math.gamma((n + 1) / 2.0) / math.pi ** ((n + 1) / 2.0)

    def values(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        n = self.n
        u = t + self.t0
        r2 = np.sum((x - np.asarray(self.x0)) ** 2, axis=-1) + u ** 2
        return self.normalisation * u * r2 ** (-(n + 1) / 2.0)


@dataclass(frozen=True)
class Combo(HarmonicFunction):
    """Finite linear combination of harmonic functions; empty means zero."""

    components: tuple[tuple[float, HarmonicFunction], ...]
    seed: int | None = None

    @property
    def decay(self) -> float:
        if not self.components:
            return math.inf
        return min(f.decay for _, f in self.components)

    def values(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(t), dtype=float)
        for c, f in self.components:
            out += c * f.values(x, t)
        return out


def kernel_derivative(w: Point, l: int) -> KernelDerivative:
    derive_terms(w.n, l)  # validates l and primes the cache
    return KernelDerivative(w, int(l))


def poisson_kernel(x0, t0: float = 0.0) -> PoissonKernel:
    return PoissonKernel(tuple(x0), float(t0))


def seeded_combo(
    n: int,
    seed,
    size: int = 3,
    center: Point | None = None,
    scale: float = 1.0,
    l_choices: tuple[int, ...] = (1, 2),
    include_poisson: bool = False,
) -> Combo:
    """Deterministic random combination near ``center`` at spatial ``scale``.

    The seed may be an int or a sequence of ints; identical seeds reproduce
    the function bit for bit.
    """
    rng = np.random.default_rng(seed)
    base_x = np.zeros(n) if center is None else np.asarray(center.x)
    base_t = scale if center is None else center.t
    components = []
    for _ in range(max(1, int(size))):
        x = base_x + rng.uniform(-0.75, 0.75, size=n) * scale
        s = base_t * rng.uniform(0.6, 1.7)
        weight = rng.uniform(0.4, 1.6) * rng.choice([-1.0, 1.0])
        if include_poisson and rng.random() < 0.25:
            components.append((weight, PoissonKernel(tuple(x), s)))
        else:
            l = int(rng.choice(l_choices))
            components.append((weight, KernelDerivative(Point(tuple(x), s), l)))
    if isinstance(seed, (int, np.integer)):
        seed_tag = int(seed)
    else:
        seed_tag = int(np.random.SeedSequence(seed).generate_state(1)[0])
    return Combo(tuple(components), seed=seed_tag)


def zoo_family(n: int, count: int = 10, seed: int = 20240501) -> list[HarmonicFunction]:
    """A fixed varied family used by the lemma sweeps: kernels of several
    orders, a Poisson kernel and seeded combinations."""
    fam: list[HarmonicFunction] = [
        KernelDerivative(Point((0.0,) * n, 1.0), 0),
        KernelDerivative(Point((0.5,) + (0.0,) * (n - 1), 1.5), 1),
        KernelDerivative(Point((-0.25,) * n, 0.75), 2),
        KernelDerivative(Point((1.0,) + (0.5,) * (n - 1), 2.0), 3),
        PoissonKernel((0.0,) * n, 1.0),
    ]
    k = 0
    while len(fam) < count:
        fam.append(seeded_combo(n, [seed, k], size=3, scale=1.0, l_choices=(1, 2, 3)))
        k += 1
    return fam[:count]


def laplacian_residual(f: HarmonicFunction, z: Point, h: float) -> float:
    """Centered second-difference estimate of the Laplacian at z.

    The stencil must stay inside the half-space: requires z.t > h * (n + 1).
    """
    n = z.n
    if z.t <= h * (n + 1):
        raise DomainError(
            f"stencil of step {h} leaves the half-space at height {z.t}"
        )
    pts = [z.coords()]
    for axis in range(n + 1):
        for sign in (+1.0, -1.0):
            p = z.coords()
            p[axis] += sign * h
            pts.append(p)
    vals = f.at_points(np.array(pts))
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("function produced non-finite values on the stencil")
    center = vals[0]
    residual = 0.0
    for axis in range(n + 1):
        plus = vals[1 + 2 * axis]
        minus = vals[2 + 2 * axis]
        residual += (plus - 2.0 * center + minus) / h ** 2
    return float(residual)


@dataclass(frozen=True)
class TwEstimate:
    """Measured fraction of Q_w where the kernel derivative stays large."""

    w: Point
    l: int
    fraction: float
    c_lower: float


_CALIBRATION: dict[tuple[int, int], float] = {}


def _scaled_magnitude(f: KernelDerivative, pts: np.ndarray) -> np.ndarray:
    """|f(z)| * |z - conj(w)|^(n-1+l), the scale-free lower-bound statistic."""
    n = f.w.n
    x, t = pts[:, :n], pts[:, n]
    refl = f.w.reflected()
    rho = np.sqrt(np.sum((pts - refl) ** 2, axis=1))
    return np.abs(f.values(x, t)) * rho ** (n - 1 + f.l)


def calibrate_c_lower(n: int, l: int, samples: int = 4000, seed: int = 99) -> float:
    """Largest threshold in {0.9, ..., 0.1} keeping at least a quarter of Q_w.

    Calibrated once per (n, l) at the reference center (0, 1); the statistic
    is scale invariant, so the value transfers to any center.
    """
    key = (n, l)
    if key in _CALIBRATION:
        return _CALIBRATION[key]
    w = Point((0.0,) * n, 1.0)
    f = KernelDerivative(w, l)
    rng = np.random.default_rng(seed)
    lo, hi = local_cube(w, "Q").bounds()
    pts = lo + rng.random((samples, n + 1)) * (hi - lo)
    mag = _scaled_magnitude(f, pts)
    for c in np.arange(0.9, 0.05, -0.1):
        if float(np.mean(mag > c)) >= 0.25:
            _CALIBRATION[key] = float(round(c, 10))
            return _CALIBRATION[key]
    raise EvaluationError(f"calibration failed for (n={n}, l={l})")


def tw_fraction(
    w: Point,
    l: int,
    samples: int = 2000,
    c_lower: float | None = None,
    seed: int = 7,
) -> TwEstimate:
    """Monte-Carlo fraction of Q_w on which |f| exceeds c * rho^-(n-1+l)."""
    if samples < 1000:
        raise ParameterError(f"samples must be >= 1000, got {samples}")
    n = w.n
    if c_lower is None:
        c_lower = calibrate_c_lower(n, l)
    f = KernelDerivative(w, l)
    rng = np.random.default_rng(seed)
    lo, hi = local_cube(w, "Q").bounds()
    pts = lo + rng.random((samples, n + 1)) * (hi - lo)
    frac = float(np.mean(_scaled_magnitude(f, pts) > c_lower))
    if frac == 0.0:
        raise EvaluationError(
            f"threshold c_lower={c_lower} too large: empty level set on Q_w"
        )
    return TwEstimate(w=w, l=l, fraction=frac, c_lower=float(c_lower))


def function_to_config(f: HarmonicFunction) -> dict:
    """Serialisable description of a zoo function (inverse of from_config)."""
    if isinstance(f, KernelDerivative):
        return {"kind": "test", "w": list(f.w.x) + [f.w.t], "l": f.l}
    if isinstance(f, PoissonKernel):
        return {"kind": "poisson", "x0": list(f.x0), "t0": f.t0}
    if isinstance(f, Combo):
        if f.seed is None:
            raise ParameterError("only seeded combinations are serialisable")
        return {"kind": "combo", "seed": f.seed, "size": len(f.components)}
    raise ParameterError(f"cannot serialise function of type {type(f).__name__}")


def function_from_config(cfg: dict, n: int) -> HarmonicFunction:
    kind = cfg.get("kind")
    if kind == "test":
        coords = cfg["w"]
        return KernelDerivative(Point(tuple(coords[:-1]), coords[-1]), int(cfg["l"]))
    if kind == "poisson":
        return PoissonKernel(tuple(cfg["x0"]), float(cfg.get("t0", 0.0)))
    if kind == "combo":
        return seeded_combo(n, int(cfg["seed"]), size=int(cfg.get("size", 3)))
    raise ParameterError(f"unknown function kind {kind!r}")
