import math

import numpy as np
import pytest

from hsembed.errors import ConfigurationRejectedError, ParameterError
from hsembed.geometry import Point, build_whitney
from hsembed.measures import CubePowerMeasure, WeightedLebesgue
from hsembed.norms import (
    apqm_norm,
    cube_sups,
    local_mean_functional,
    norm_A,
    norm_B,
    norm_F,
    norm_hardy,
    norm_K,
    product_integral,
    slabs_for_window,
    t1_rhs,
)
from hsembed.quadrature import QuadratureConfig, fit_power_law
from hsembed.zoo import Combo, KernelDerivative, PoissonKernel, seeded_combo

from oracles import midpoint_integral

CFG = QuadratureConfig(nodes_per_axis=3, refinement_depth=30, rel_tol=1e-5)


@pytest.fixture(scope="module")
def decomp():
    return build_whitney(2, (-3, 3), 8.0)


class TestNormA:
    def test_zero_function(self, decomp):
        assert norm_A(Combo(()), 2.0, 0.0, decomp, CFG) == 0.0

    def test_against_midpoint_oracle(self, decomp):
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)

        def g(p):
            v = f.values(p[:, :2], p[:, 2])
            return v * v

        # oracle: midpoint rule over the window layers (coarse but unbiased)
        total = 0.0
        for lat in decomp.lattices:
            lo = np.array([-8.0, -8.0, lat.side])
            hi = np.array([8.0, 8.0, 2.0 * lat.side])
            total += midpoint_integral(g, lo, hi, nodes=60)
        val = norm_A(f, 2.0, 0.0, decomp, CFG)
        assert val ** 2 == pytest.approx(total, rel=1e-2)

    def test_scaling_slope(self):
        # norm of f_(w,l) in A(s, beta) scales like
        # sigma^(-(n-1+l) + (n+beta+1)/s) with the height of w; the window
        # must dwarf the sweep scales for the fit to see the pure power
        s, beta, l, n = 2.0, 1.0, 2, 2
        deep = build_whitney(2, (-6, 3), 8.0)
        samples = []
        for sigma in (0.5, 1.0, 2.0):
            f = KernelDerivative(Point((0.0, 0.0), sigma), l)
            samples.append(
                (sigma, norm_A(f, s, beta, deep, CFG, method="level_boxes"))
            )
        fit = fit_power_law(samples)
        expected = -(n - 1 + l) + (n + beta + 1) / s
        assert fit.slope == pytest.approx(expected, abs=0.05)

    def test_divergent_configuration_rejected(self, decomp):
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 0)  # decay 1
        with pytest.raises(ConfigurationRejectedError, match="decay"):
            norm_A(f, 2.0, 0.0, decomp, CFG)


class TestNormBF:
    def test_bpp_equals_a_norm(self, decomp):
        # B with p = q and alpha = (beta+1)/p matches the Bergman norm
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)
        p, beta = 2.0, 0.0
        a = norm_A(f, p, beta, decomp, CFG)
        b = norm_B(f, p, p, (beta + 1) / p, decomp, CFG)
        assert b == pytest.approx(a, rel=5e-3)

    def test_zero(self, decomp):
        assert norm_B(Combo(()), 2.0, 2.0, 0.5, decomp, CFG) == 0.0
        assert norm_F(Combo(()), 2.0, 2.0, 0.5, decomp, CFG) == 0.0

    def test_f_norm_scaling_slope(self, decomp):
        # the F-norm of f_(w,l) scales like sigma^(n/s - (n-1+l-(beta+1)/s))
        s, t_idx, beta, l, n = 2.0, 2.0, 0.0, 1, 2
        alpha = (beta + 1) / s
        samples = []
        for sigma in (0.5, 1.0, 2.0):
            f = KernelDerivative(Point((0.0, 0.0), sigma), l)
            samples.append((sigma, norm_F(f, s, t_idx, alpha, decomp, CFG)))
        fit = fit_power_law(samples)
        expected = n / s - (n - 1 + l - (beta + 1) / s)
        assert fit.slope == pytest.approx(expected, rel=0.05)

    def test_f_close_to_b_when_orders_match(self, decomp):
        # with p = q the two integration orders commute (Tonelli)
        f = KernelDerivative(Point((0.3, -0.1), 1.2), 2)
        b = norm_B(f, 2.0, 2.0, 0.5, decomp, CFG)
        fv = norm_F(f, 2.0, 2.0, 0.5, decomp, CFG)
        assert fv == pytest.approx(b, rel=5e-3)


class TestNormK:
    def test_kpp_equals_a_norm_power(self, decomp):
        # K with p = q against d(m_s) recovers the Bergman integral
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)
        p, s = 2.0, 1.0
        slabs = slabs_for_window(decomp)
        k = norm_K(f, p, p, WeightedLebesgue(s), slabs, decomp, CFG)
        a = norm_A(f, p, s, decomp, CFG)
        assert k ** p == pytest.approx(a ** p, rel=1e-3)

    def test_monotone_in_q(self, decomp):
        slabs = slabs_for_window(decomp)
        mu = WeightedLebesgue(0.5)
        for seed in range(5):
            f = seeded_combo(2, seed, size=3, l_choices=(2, 3))
            v1 = norm_K(f, 2.0, 1.5, mu, slabs, decomp, CFG)
            v2 = norm_K(f, 2.0, 3.0, mu, slabs, decomp, CFG)
            assert v2 <= v1

    def test_zero(self, decomp):
        slabs = slabs_for_window(decomp)
        assert norm_K(Combo(()), 2.0, 2.0, WeightedLebesgue(0.0), slabs, decomp, CFG) == 0.0

    def test_slab_coverage_required(self, decomp):
        from hsembed.geometry import build_slabs

        narrow = build_slabs((0, 1))
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)
        with pytest.raises(ConfigurationRejectedError, match="covers"):
            norm_K(f, 2.0, 2.0, WeightedLebesgue(0.0), narrow, decomp, CFG)


class TestHardy:
    def test_poisson_sup_at_smallest_height(self, decomp):
        # slice norms of the shifted Poisson kernel decrease in t, so the
        # grid sup is attained at the lowest grid height
        f = PoissonKernel((0.0, 0.0), 0.5)
        from hsembed.norms import _slice_powers

        heights = np.array([2.0 ** decomp.j_min, 0.5, 1.0, 4.0])
        vals = _slice_powers(f, 2.0, heights, decomp, CFG)
        assert np.argmax(vals) == 0
        sup = norm_hardy(f, 2.0, decomp, CFG)
        assert sup ** 2 == pytest.approx(float(vals[0]), rel=1e-6)

    def test_zero(self, decomp):
        assert norm_hardy(Combo(()), 2.0, decomp, CFG) == 0.0

    def test_scaling(self, decomp):
        # the squared slice norm of the shifted kernel is C/(t + t0)^2, so
        # the grid sup sits at the lowest height h0 and the two-scale ratio
        # is (h0 + t0_1)/(h0 + t0_2); as h0 -> 0 this becomes pure scaling
        f1 = PoissonKernel((0.0, 0.0), 0.5)
        f2 = PoissonKernel((0.0, 0.0), 1.0)
        v1 = norm_hardy(f1, 2.0, decomp, CFG)
        v2 = norm_hardy(f2, 2.0, decomp, CFG)
        h0 = 2.0 ** decomp.j_min
        assert v2 / v1 == pytest.approx((h0 + 0.5) / (h0 + 1.0), rel=0.02)


class TestProductIntegral:
    def test_single_factor_reduces_to_norm_power(self, decomp):
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)
        v = product_integral([f], [2.0], 0.0, decomp, CFG)
        a = norm_A(f, 2.0, 0.0, decomp, CFG)
        assert v == pytest.approx(a ** 2, rel=1e-10)

    def test_equal_factors_identity(self, decomp):
        f = KernelDerivative(Point((0.1, 0.2), 0.9), 2)
        v2 = product_integral([f, f], [1.0, 1.0], 0.5, decomp, CFG)
        v1 = product_integral([f], [2.0], 0.5, decomp, CFG)
        assert v2 == pytest.approx(v1, rel=1e-10)

    def test_trace_weight_bounded_over_tuples(self, decomp):
        # ratio of the product integral at the trace weight to the product
        # of Bergman norms stays bounded over a sweep of tuples
        n, m = 2, 2
        p_vec = [2.0, 2.0]
        s_vec = [0.5, 1.0]
        lam = (m - 1) * (n + 1) + sum(s_vec)
        ratios = []
        for seed in range(10):
            f1 = seeded_combo(2, [seed, 1], size=2, l_choices=(2, 3))
            f2 = seeded_combo(2, [seed, 2], size=2, l_choices=(2, 3))
            lhs = product_integral([f1, f2], p_vec, lam, decomp, CFG)
            rhs = norm_A(f1, p_vec[0], s_vec[0], decomp, CFG) ** p_vec[0]
            rhs *= norm_A(f2, p_vec[1], s_vec[1], decomp, CFG) ** p_vec[1]
            ratios.append(lhs / rhs)
        assert max(ratios) / min(ratios) <= 50.0
        assert max(ratios) < 10.0


class TestApqm:
    def test_single_cube_measure(self, decomp):
        mu = CubePowerMeasure(2.0, decomp)
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)
        val = apqm_norm([f], 2.0, 2.0, mu, decomp, CFG)
        # oracle: explicit sum over cube centers
        want = []
        for lat in decomp.lattices:
            centers = lat.centers()
            fv = np.abs(f.values(centers[:, :2], centers[:, 2])) ** 2
            want.append(float(np.sum(lat.eta ** 2.0 * fv)))
        assert val == pytest.approx(math.fsum(want), rel=1e-12)

    def test_partition_additivity(self, decomp):
        # q = p turns the cube sum into the plain Bergman integral
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)
        mu = WeightedLebesgue(0.5)
        val = apqm_norm([f], 2.0, 2.0, mu, decomp, CFG)
        a = norm_A(f, 2.0, 0.5, decomp, CFG)
        assert val == pytest.approx(a ** 2, rel=1e-3)

    def test_zero_tuple(self, decomp):
        assert apqm_norm([Combo(())], 2.0, 2.0, WeightedLebesgue(0.0), decomp, CFG) == 0.0

    def test_atomic_single_term(self, decomp):
        mu_atoms = __import__("hsembed.measures", fromlist=["AtomicMeasure"]).AtomicMeasure(
            ((0.25, 0.25, 1.5),), (3.0,)
        )
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 1)
        val = apqm_norm([f], 1.0, 2.0, mu_atoms, decomp, CFG)
        fv = abs(f(Point((0.25, 0.25), 1.5)))
        assert val == pytest.approx((3.0 * fv) ** 2, rel=1e-12)


class TestT1Rhs:
    def test_exponent_sum_validated(self, decomp):
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)
        with pytest.raises(ParameterError, match="reciprocals"):
            t1_rhs([f, f], [1.0, 1.0], [2.0, 3.0], 0.0, decomp, CFG)

    def test_single_factor_between_bounds(self, decomp):
        # m = 1 forces q = 1: the sum over enlarged cubes brackets the
        # Bergman integral between 1x and the overlap constant
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 2)
        val = t1_rhs([f], [2.0], [1.0], 0.0, decomp, CFG)
        plain = norm_A(f, 2.0, 0.0, decomp, CFG) ** 2
        assert plain * 0.99 <= val <= 8.0 * plain * 1.01

    def test_four_cube_hand_oracle(self):
        # tiny window: 4 cubes at one level, hand-sum the factor for m = 2
        d = build_whitney(2, (0, 0), 1.0)
        assert len(d) == 4
        f1 = KernelDerivative(Point((0.0, 0.0), 1.0), 1)
        f2 = KernelDerivative(Point((0.5, 0.5), 2.0), 1)
        cfg = QuadratureConfig(nodes_per_axis=4, refinement_depth=20, rel_tol=1e-9)
        val = t1_rhs([f1, f2], [1.0, 1.0], [2.0, 2.0], 0.0, d, cfg)
        from hsembed.geometry import EnlargedCube
        from hsembed.quadrature import integrate_cube

        hand = 1.0
        for f in (f1, f2):
            terms = []
            for cube in d.iter_cubes():
                v = integrate_cube(
                    lambda p, f=f: np.abs(f.values(p[:, :2], p[:, 2])),
                    EnlargedCube(cube),
                    cfg,
                )
                terms.append(v ** 2)
            hand *= math.fsum(terms) ** 0.5
        assert val == pytest.approx(hand, rel=1e-8)

    def test_zero_tuple(self, decomp):
        z = Combo(())
        assert t1_rhs([z, z], [1.0, 1.0], [2.0, 2.0], 0.0, decomp, CFG) == 0.0


class TestLocalMean:
    def test_zero(self, decomp):
        assert local_mean_functional(Combo(()), 2.0, 0.0, 1.0, decomp, CFG) == 0.0

    def test_constant_inner_closed_form(self):
        # for f = 1 the inner integral is s^(n+1) * mean of t^alpha over Q_w
        w = Point((0.0, 0.0), 2.0)
        alpha = 1.0
        s = w.t
        inner_exact = s ** 2 * ((1.5 * s) ** (alpha + 1) - (0.5 * s) ** (alpha + 1)) / (
            alpha + 1
        )

        class One:
            decay = math.inf

            def values(self, x, t):
                return np.ones(np.shape(t))

        from hsembed.norms import _local_grid

        ref, wts = _local_grid(5, 3)
        lo = w.coords() - 0.5 * s
        nodes = lo[None, :] + s * ref
        vals = nodes[:, 2] ** alpha
        inner = float(np.sum(vals * wts) * s ** 3)
        assert inner == pytest.approx(inner_exact, rel=1e-10)

    def test_height_scaling_slope(self):
        # exponent: (q/sigma)(n+1+alpha) - q(n-1+l) + n + 1
        sigma, alpha, q, l, n = 2.0, 0.0, 2.0, 3, 2
        e = q / sigma
        deep = build_whitney(2, (-5, 4), 16.0)
        samples = []
        for h in (0.5, 1.0, 2.0):
            f = KernelDerivative(Point((0.0, 0.0), h), l)
            samples.append((h, local_mean_functional(f, sigma, alpha, e, deep, CFG)))
        fit = fit_power_law(samples)
        expected = (q / sigma) * (n + 1 + alpha) - q * (n - 1 + l) + n + 1
        assert fit.slope == pytest.approx(expected, rel=0.05)

    def test_outer_divergence_rejected(self, decomp):
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 1)
        with pytest.raises(ConfigurationRejectedError, match="outer"):
            local_mean_functional(f, 2.0, 0.0, 1.0, decomp, CFG)


class TestCubeSups:
    def test_lower_bound_of_true_sup(self, decomp):
        f = KernelDerivative(Point((0.0, 0.0), 1.0), 1)
        sups = cube_sups(f, decomp, CFG)
        rng = np.random.default_rng(8)
        for lat, level_sups in zip(decomp.lattices, sups):
            for flat in rng.integers(0, lat.count, size=8):
                c = lat.centers_slice(int(flat), int(flat) + 1)[0]
                pts = c + rng.uniform(-0.5, 0.5, size=(64, 3)) * lat.side
                vals = np.abs(f.values(pts[:, :2], pts[:, 2]))
                # node max should not be far below random probes
                assert level_sups[flat] >= vals.max() * 0.8
