"""Norm functionals over the truncation window.

Families: weighted Bergman A(p, lambda), mixed-norm B(p, q, alpha),
Triebel-Lizorkin F(p, q, alpha), Herz K(p, q, mu), a Hardy-style sup of
slice norms, the m-tuple product integral, the cube-sum functional behind
the A(p, q, m, mu) quasinorm, the enlarged-cube right-hand side of the
product embedding, and the local-mean functional built on cubes Q_w.

Every functional checks a decay-based convergence precondition before any
quadrature runs: window values are always finite, but a configuration whose
full-space integral diverges would produce window-dependent garbage, so it
is rejected with the failing constraint named.

Mixed-order details: B integrates horizontal slices first and heights
second, F the other way round.  F and the local-mean functional use a
fixed-order Gauss rule for their inner integral (the integrand is smooth on
a dyadic level or a cube Q_w); outer integrals are adaptive.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationRejectedError, ParameterError
from .geometry import SlabFamily, WhitneyDecomposition, build_slabs
from .measures import (
    AtomicMeasure,
    CubePowerMeasure,
    Measure,
    WeightedLebesgue,
)
from .quadrature import (
    QuadratureConfig,
    box_integrals,
    cube_integrals,
    integrate_halfspace,
)
from .zoo import HarmonicFunction

__all__ = [
    "norm_A",
    "norm_B",
    "norm_F",
    "norm_K",
    "norm_hardy",
    "product_integral",
    "apqm_norm",
    "t1_rhs",
    "local_mean_functional",
    "slabs_for_window",
    "cube_sups",
    "product_power_integrand",
]


def _reject(constraint: str):
    raise ConfigurationRejectedError(f"configuration rejected: requires {constraint}")


def _check(cond: bool, constraint: str):
    if not cond:
        _reject(constraint)


def _pow(a: np.ndarray, p: float) -> np.ndarray:
    if p == 1.0:
        return a
    if p == 2.0:
        return a * a
    return a ** p


def product_power_integrand(fs, p_vec, t_exponent: float | None = None):
    """Vectorised integrand prod_i |f_i|^(p_i) times an optional t power."""
    fs = list(fs)
    p_vec = [float(p) for p in p_vec]

    def g(pts: np.ndarray) -> np.ndarray:
        n = pts.shape[1] - 1
        x, t = pts[:, :n], pts[:, n]
        out = _pow(np.abs(fs[0].values(x, t)), p_vec[0])
        for f, p in zip(fs[1:], p_vec[1:]):
            out = out * _pow(np.abs(f.values(x, t)), p)
        if t_exponent is not None and t_exponent != 0.0:
            out = out * t ** t_exponent
        return out

    return g


def norm_A(
    f: HarmonicFunction,
    p: float,
    lam: float,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
    method: str = "per_cube",
) -> float:
    """Weighted Bergman norm (integral of |f|^p t^lam over the window)^(1/p)."""
    _check(p > 0, "p > 0")
    _check(lam > -1, "lambda > -1")
    _check(
        p * f.decay > decomp.n + 1 + lam,
        f"p * decay > n + 1 + lambda (got {p * f.decay} <= {decomp.n + 1 + lam})",
    )
    g = product_power_integrand([f], [p], t_exponent=lam)
    val = integrate_halfspace(g, decomp, cfg, flags=flags, method=method)
    return val ** (1.0 / p)


def _slice_powers(f, p, taus, decomp, cfg, flags=None) -> np.ndarray:
    """Integrals of |f(., tau)|^p over the horizontal window, one per height.

    All heights share one adaptive refinement: the integrand is a vector
    over the tau batch, so refinement is driven by the roughest slice.
    """
    n = decomp.n
    R = decomp.x_half_width
    taus = np.asarray(taus, dtype=float)

    def g(xpts: np.ndarray) -> np.ndarray:
        N = xpts.shape[0]
        out = np.empty((N, taus.size))
        for j, tau in enumerate(taus):
            out[:, j] = _pow(np.abs(f.values(xpts, np.full(N, tau))), p)
        return out

    corners = np.stack(
        [m.ravel() for m in np.meshgrid(*([np.array([-R, 0.0])] * n), indexing="ij")],
        axis=1,
    )
    vals = box_integrals(g, corners, corners + R, cfg, flags)
    vals = np.atleast_2d(vals)
    return np.array([math.fsum(float(v) for v in vals[:, j]) for j in range(taus.size)])


def norm_B(
    f: HarmonicFunction,
    p: float,
    q: float,
    alpha: float,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
) -> float:
    """Mixed norm: q-integral over heights of the p-th slice norms."""
    n = decomp.n
    _check(p > 0 and q > 0, "p, q > 0")
    _check(math.isfinite(q), "finite q (the q = infinity convention is not implemented)")
    _check(p * f.decay > n, "p * decay > n (horizontal slice convergence)")
    _check(alpha > 0, "alpha > 0 (height integrability at the bottom)")
    _check(
        alpha < f.decay - n / p,
        f"alpha < decay - n/p (got alpha={alpha}, bound={f.decay - n / p})",
    )
    qp = q / p
    aq1 = alpha * q - 1.0

    def outer(tpts: np.ndarray) -> np.ndarray:
        taus = tpts[:, 0]
        slice_vals = _slice_powers(f, p, taus, decomp, cfg, flags)
        return _pow(slice_vals, qp) * taus ** aq1

    totals = []
    for lat in decomp.lattices:
        v = box_integrals(
            outer, np.array([[lat.side]]), np.array([[2.0 * lat.side]]), cfg, flags
        )
        totals.append(float(np.atleast_1d(v)[0]))
    return math.fsum(totals) ** (1.0 / q)


def norm_F(
    f: HarmonicFunction,
    p: float,
    q: float,
    alpha: float,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
) -> float:
    """Triebel-Lizorkin norm: heights are integrated first, then the slices.

    The inner height integral uses a fixed Gauss rule per dyadic level,
    which is accurate because t^(alpha q - 1) and |f|^q are smooth across a
    level; the outer horizontal integral is adaptive.
    """
    n = decomp.n
    _check(p > 0 and q > 0, "p, q > 0")
    _check(math.isfinite(q), "finite q (the q = infinity convention is not implemented)")
    _check(p * f.decay > n, "p * decay > n (horizontal convergence)")
    _check(alpha > 0, "alpha > 0 (height integrability at the bottom)")
    _check(alpha < f.decay - n / p, "alpha < decay - n/p (height integrability at the top)")
    aq1 = alpha * q - 1.0
    pq = p / q
    m_in = cfg.nodes_per_axis + 2
    gl_x, gl_w = np.polynomial.legendre.leggauss(m_in)
    gl_x = 0.5 * (gl_x + 1.0)
    gl_w = 0.5 * gl_w
    levels = [(lat.side, lat.side) for lat in decomp.lattices]

    def inner_heights(xpts: np.ndarray) -> np.ndarray:
        acc = np.zeros(xpts.shape[0])
        for t_lo, width in levels:
            taus = t_lo + gl_x * width
            for tau, w in zip(taus, gl_w):
                vals = _pow(np.abs(f.values(xpts, np.full(xpts.shape[0], tau))), q)
                acc += w * width * vals * tau ** aq1
        return _pow(acc, pq)

    R = decomp.x_half_width
    corners = np.stack(
        [m.ravel() for m in np.meshgrid(*([np.array([-R, 0.0])] * n), indexing="ij")],
        axis=1,
    )
    vals = box_integrals(inner_heights, corners, corners + R, cfg, flags)
    total = math.fsum(float(v) for v in np.atleast_1d(vals))
    return total ** (1.0 / p)


def slabs_for_window(decomp: WhitneyDecomposition) -> SlabFamily:
    """The dyadic slab family whose union matches the window heights."""
    return build_slabs((-decomp.j_max - 1, -decomp.j_min - 1))


def _slab_mass_of_power(f, p, mu, slab, decomp, cfg, flags) -> float:
    """Integral of |f|^p d(mu) over the slab truncated to the window."""
    n = decomp.n
    R = decomp.x_half_width
    if isinstance(mu, WeightedLebesgue):
        g = product_power_integrand([f], [p], t_exponent=mu.gamma)
        corners = np.stack(
            [
                m.ravel()
                for m in np.meshgrid(*([np.array([-R, 0.0])] * n), indexing="ij")
            ],
            axis=1,
        )
        lo = np.concatenate([corners, np.full((corners.shape[0], 1), slab.t_lo)], axis=1)
        hi = np.concatenate(
            [corners + R, np.full((corners.shape[0], 1), slab.t_hi)], axis=1
        )
        vals = box_integrals(g, lo, hi, cfg, flags)
        return math.fsum(float(v) for v in np.atleast_1d(vals))
    if isinstance(mu, AtomicMeasure):
        total = []
        for pt, m in zip(mu.points, mu.masses):
            x, t = np.array([pt[:-1]]), np.array([pt[-1]])
            if slab.t_lo <= pt[-1] < slab.t_hi and np.all(np.abs(x) <= R):
                total.append(m * float(_pow(np.abs(f.values(x, t)), p)[0]))
        return math.fsum(total)
    if isinstance(mu, CubePowerMeasure):
        total = []
        for lat in mu.decomp.lattices:
            if not (slab.t_lo <= lat.eta < slab.t_hi):
                continue
            centers = lat.centers()
            vals = _pow(np.abs(f.at_points(centers)), p)
            total.append(lat.eta ** mu.e * math.fsum(float(v) for v in vals))
        return math.fsum(total)
    raise ParameterError(f"unsupported measure {type(mu).__name__}")


def norm_K(
    f: HarmonicFunction,
    p: float,
    q: float,
    mu: Measure,
    slabs: SlabFamily,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
) -> float:
    """Herz norm: the l^(q/p) aggregation of per-slab masses of |f|^p d(mu)."""
    _check(p > 0 and q > 0, "p, q > 0")
    _check(p * f.decay > decomp.n, "p * decay > n (slab convergence)")
    lo, hi = slabs.t_extent
    wlo, whi = 2.0 ** decomp.j_min, 2.0 ** (decomp.j_max + 1)
    _check(lo <= wlo and hi >= whi, "slab family covers the window heights")
    masses = [
        _slab_mass_of_power(f, p, mu, slab, decomp, cfg, flags) for slab in slabs.slabs
    ]
    qp = q / p
    return math.fsum(float(a) ** qp for a in masses) ** (1.0 / q)


def norm_hardy(
    f: HarmonicFunction,
    p: float,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
    points_per_level: int = 2,
) -> float:
    """Sup over a geometric height grid of the p-th slice norms."""
    _check(p > 0, "p > 0")
    _check(p * f.decay > decomp.n, "p * decay > n (bounded slice norms)")
    heights = []
    for lat in decomp.lattices:
        for i in range(points_per_level):
            heights.append(lat.side * (1.0 + i / points_per_level))
    heights.append(2.0 ** (decomp.j_max + 1))
    vals = _slice_powers(f, p, np.array(sorted(heights)), decomp, cfg, flags)
    return float(np.max(vals) ** (1.0 / p))


def product_integral(
    fs,
    p_vec,
    s: float,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
    method: str = "per_cube",
) -> float:
    """Integral over the window of prod |f_i|^(p_i) t^s."""
    fs, p_vec = list(fs), [float(p) for p in p_vec]
    if len(fs) != len(p_vec):
        raise ParameterError("need one exponent per function")
    total_decay = sum(p * f.decay for f, p in zip(fs, p_vec))
    _check(
        total_decay > decomp.n + 1 + s,
        f"sum p_i * decay_i > n + 1 + s (got {total_decay} <= {decomp.n + 1 + s})",
    )
    g = product_power_integrand(fs, p_vec, t_exponent=s)
    return integrate_halfspace(g, decomp, cfg, flags=flags, method=method)


def apqm_norm(
    fs,
    p: float,
    q: float,
    mu: Measure,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
) -> float:
    """Cube-sum functional sum_k (integral over cube_k of prod |f_i|^p d mu)^(q/p).

    This is the q-th power of the A(p, q, m, mu) quasinorm; returning the
    raw sum keeps the algebra of the embedding inequalities explicit.
    """
    fs = list(fs)
    _check(p > 0 and q > 0, "p, q > 0")
    min_decay = min(f.decay for f in fs)
    m = len(fs)
    if isinstance(mu, WeightedLebesgue):
        _check(
            (q / p) * (decomp.n + 1 + mu.gamma) > decomp.n,
            "(q/p)(n + 1 + gamma) > n (boundary convergence of the cube sums)",
        )
        _check(
            m * q * min_decay > decomp.n,
            "m * q * decay > n (horizontal convergence of the cube sums)",
        )
        g = product_power_integrand(fs, [p] * m, t_exponent=mu.gamma)
        parts = cube_integrals(g, decomp, cfg, flags=flags)
        qp = q / p
        return math.fsum(float(v) ** qp for arr in parts for v in arr)
    if isinstance(mu, CubePowerMeasure) and mu.decomp is decomp:
        qp = q / p
        g = product_power_integrand(fs, [p] * m)
        totals = []
        for lat in decomp.lattices:
            vals = g(lat.centers())
            totals.append(
                math.fsum((lat.eta ** mu.e * float(v)) ** qp for v in vals)
            )
        return math.fsum(totals)
    if isinstance(mu, AtomicMeasure):
        per_cube: dict = {}
        g = product_power_integrand(fs, [p] * m)
        for pt, mass in zip(mu.points, mu.masses):
            cube = decomp.locate(np.asarray(pt))
            if cube is None:
                continue
            val = mass * float(g(np.asarray(pt)[None, :])[0])
            key = (cube.level, cube.index)
            per_cube[key] = per_cube.get(key, 0.0) + val
        qp = q / p
        return math.fsum(v ** qp for _, v in sorted(per_cube.items()))
    raise ParameterError(f"unsupported measure {type(mu).__name__}")


def t1_rhs(
    fs,
    p_vec,
    q_vec,
    alpha: float,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
) -> float:
    """Product over i of the l^(q_i) sums of enlarged-cube integrals.

    Each factor is [sum_k (integral over enlarged cube_k of |f_i|^(p_i) t^alpha)^(q_i)]^(1/q_i);
    the reciprocals of the q_i must sum to one.
    """
    fs = list(fs)
    p_vec = [float(p) for p in p_vec]
    q_vec = [float(q) for q in q_vec]
    if not (len(fs) == len(p_vec) == len(q_vec)):
        raise ParameterError("need one (p, q) pair per function")
    if abs(sum(1.0 / q for q in q_vec) - 1.0) > 1e-9:
        raise ParameterError(
            "parameter constraint violated: sum of reciprocals of q must equal 1"
        )
    _check(alpha > -1, "alpha > -1")
    for f, p, q in zip(fs, p_vec, q_vec):
        _check(
            p * q * f.decay > decomp.n,
            "p_i * q_i * decay_i > n (convergence of the enlarged-cube sums)",
        )

    def g(pts: np.ndarray) -> np.ndarray:
        n = pts.shape[1] - 1
        x, t = pts[:, :n], pts[:, n]
        w = t ** alpha if alpha != 0.0 else None
        cols = []
        for f, p in zip(fs, p_vec):
            col = _pow(np.abs(f.values(x, t)), p)
            cols.append(col * w if w is not None else col)
        return np.stack(cols, axis=1)

    parts = cube_integrals(g, decomp, cfg, enlarged=True, flags=flags)
    parts = [arr if arr.ndim == 2 else arr[:, None] for arr in parts]
    result = 1.0
    for i, q in enumerate(q_vec):
        total = math.fsum(float(v) ** q for arr in parts for v in arr[:, i])
        result *= total ** (1.0 / q)
    return result


def local_mean_functional(
    f: HarmonicFunction,
    sigma: float,
    alpha: float,
    e: float,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    flags: list | None = None,
) -> float:
    """Integral over w of (integral over Q_w of |f|^sigma t^alpha)^e.

    The inner integral over the cube Q_w (side equal to the height of w)
    uses a fixed Gauss rule; the outer integral is adaptive over the window
    layers.
    """
    n = decomp.n
    _check(sigma > 0 and e > 0, "sigma, e > 0")
    _check(alpha > -1, "alpha > -1")
    _check(
        e * sigma * f.decay > e * (n + 1 + alpha) + n + 1,
        "e * sigma * decay > e(n + 1 + alpha) + n + 1 (outer convergence)",
    )
    m_in = cfg.nodes_per_axis + 1
    ref, wts = _local_grid(m_in, n + 1)

    def outer(wpts: np.ndarray) -> np.ndarray:
        s = wpts[:, n]
        lo = wpts - 0.5 * s[:, None]
        nodes = lo[:, None, :] + s[:, None, None] * ref[None, :, :]
        flat = nodes.reshape(-1, n + 1)
        vals = _pow(np.abs(f.values(flat[:, :n], flat[:, n])), sigma)
        if alpha != 0.0:
            vals = vals * flat[:, n] ** alpha
        vals = vals.reshape(wpts.shape[0], -1)
        inner = np.sum(vals * wts[None, :], axis=1) * s ** (n + 1)
        return _pow(inner, e)

    return integrate_halfspace(outer, decomp, cfg, flags=flags, method="level_boxes")


def _local_grid(m: int, d: int):
    x, w = np.polynomial.legendre.leggauss(m)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    mesh = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([mm.ravel() for mm in mesh], axis=1)
    wts = np.ones(1)
    for _ in range(d):
        wts = np.multiply.outer(wts, w).ravel()
    return pts, wts


def cube_sups(
    f: HarmonicFunction,
    decomp: WhitneyDecomposition,
    cfg: QuadratureConfig,
    enlarged: bool = False,
) -> list[np.ndarray]:
    """Per-cube maxima of |f| over quadrature nodes plus corners.

    A lower bound for the true sup; adequate for two-sided comparability
    checks where only ratio brackets matter.
    """
    n = decomp.n
    m = cfg.nodes_per_axis + 1
    ref, _ = _local_grid(m, n + 1)
    corners = np.stack(
        [mm.ravel() for mm in np.meshgrid(*([np.array([0.0, 1.0])] * (n + 1)), indexing="ij")],
        axis=1,
    )
    probe = np.concatenate([ref, corners], axis=0)
    out = []
    batch = 1 << 16
    for lat in decomp.lattices:
        lo, hi = lat.cube_bounds(enlarged=enlarged)
        sups = np.empty(lo.shape[0])
        for start in range(0, lo.shape[0], batch):
            stop = min(lo.shape[0], start + batch)
            span = hi[start:stop] - lo[start:stop]
            nodes = lo[start:stop, None, :] + span[:, None, :] * probe[None, :, :]
            flat = nodes.reshape(-1, n + 1)
            vals = np.abs(f.values(flat[:, :n], flat[:, n])).reshape(stop - start, -1)
            sups[start:stop] = vals.max(axis=1)
        out.append(sups)
    return out
