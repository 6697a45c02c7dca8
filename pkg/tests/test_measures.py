import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsembed.errors import ParameterError
from hsembed.geometry import Cube, EnlargedCube, Point, build_whitney
from hsembed.measures import (
    AtomicMeasure,
    CubePowerMeasure,
    WeightedLebesgue,
    carleson_sweep,
    measure_from_config,
    measure_to_config,
    required_exponent,
    theorem7_sum,
)

from oracles import midpoint_integral


def exact_mlam_cube_ratio(n, lam):
    """Oracle: closed-form m_lam(cube)/eta^(n+1+lam) from the antiderivative.

    mass = side^n * (2^(lam+1) - 1) side^(lam+1) / (lam+1), eta = 1.5 side.
    """
    return (2.0 ** (lam + 1) - 1.0) / ((lam + 1.0) * 1.5 ** (n + 1 + lam))


class TestWeightedLebesgue:
    def test_unweighted_cube_mass(self):
        mu = WeightedLebesgue(0.0)
        for j in (-2, 0, 3):
            c = Cube(j, (1, -2))
            h = c.side
            assert mu.mass(c) == pytest.approx(h ** 3, rel=1e-14)

    @pytest.mark.parametrize("lam", [0.0, 1.0, 2.5])
    def test_cube_mass_ratio_constant(self, small_decomp, lam):
        mu = WeightedLebesgue(lam)
        want = exact_mlam_cube_ratio(2, lam)
        for lat in small_decomp.lattices:
            masses = mu.level_cube_masses(small_decomp, lat.level)
            ratios = masses / lat.eta ** (3 + lam)
            assert np.allclose(ratios, want, rtol=1e-12)

    def test_mass_against_midpoint(self):
        mu = WeightedLebesgue(1.7)
        lo, hi = np.array([0.2, -1.0, 0.5]), np.array([1.1, 0.3, 2.5])
        oracle = midpoint_integral(lambda p: p[:, 2] ** 1.7, lo, hi, nodes=120)
        assert mu.mass((lo, hi)) == pytest.approx(oracle, rel=1e-3)

    def test_enlarged_over_base_ratio_fixed(self, small_decomp):
        mu = WeightedLebesgue(0.8)
        got = set()
        for cube in list(small_decomp.iter_cubes())[::29]:
            r = mu.mass(EnlargedCube(cube)) / mu.mass(cube)
            got.add(round(r, 10))
        assert len(got) == 1

    def test_additivity_over_children(self, small_decomp):
        mu = WeightedLebesgue(1.3)
        cube = Cube(0, (1, 1))
        lo, hi = cube.bounds()
        total = []
        for ix in range(2):
            for iy in range(2):
                for it in range(2):
                    clo = lo + 0.5 * np.array([ix, iy, it]) * cube.side
                    chi = clo + 0.5 * cube.side
                    total.append(mu.mass((clo, chi)))
        assert math.fsum(total) == pytest.approx(mu.mass(cube), rel=1e-14)

    def test_gamma_bound(self):
        with pytest.raises(ParameterError):
            WeightedLebesgue(-1.0)


class TestAtomic:
    def test_point_in_cube(self, small_decomp):
        mu = AtomicMeasure(((0.0, 0.0, 1.5),), (2.0,))
        cube = Cube(0, (0, 0))
        assert mu.mass(cube) == 2.0
        assert mu.mass(Cube(0, (1, 0))) == 0.0

    def test_zero_measure(self, small_decomp):
        mu = AtomicMeasure((), ())
        rep = carleson_sweep(mu, small_decomp, 3.0)
        assert rep.sup_ratio == 0.0

    def test_negative_mass_rejected(self):
        with pytest.raises(ParameterError):
            AtomicMeasure(((0.0, 0.0, 1.0),), (-1.0,))


class TestCubePower:
    def test_exactly_one_atom_per_cube(self, small_decomp):
        mu = CubePowerMeasure(2.0, small_decomp)
        for cube in list(small_decomp.iter_cubes())[::17]:
            eta = 1.5 * cube.side
            assert mu.mass(cube) == pytest.approx(eta ** 2.0, rel=1e-14)
            assert mu.mass(EnlargedCube(cube)) == pytest.approx(eta ** 2.0, rel=1e-14)

    def test_deficit_trend(self, small_decomp):
        # exponent e = E - 0.5 makes per-level max grow by 2^0.5 downward
        E = 3.0
        mu = CubePowerMeasure(E - 0.5, small_decomp)
        rep = carleson_sweep(mu, small_decomp, E)
        assert np.allclose(rep.trend, 2.0 ** 0.5, rtol=1e-12)


class TestRequiredExponent:
    def test_t1(self):
        E = required_exponent("T1", 2, {"m": 2, "p": [1, 1], "q": [2, 2], "alpha": 0.0})
        assert E == 6.0

    def test_t2(self):
        E = required_exponent("T2", 2, {"m": 1, "p": 2, "q": 2, "s": 2, "beta": [0.0]})
        assert E == 3.0

    def test_t8(self):
        assert required_exponent("T8", 2, {"p": 2, "q": 2, "alpha": 1.0}) == 4.0

    def test_t4_t5(self):
        E4 = required_exponent(
            "T4", 2, {"m": 2, "p": 1, "q": 2, "sigma": [2, 2], "alpha": [0, 0]}
        )
        assert E4 == pytest.approx(2 * 3 * 0.5 + 2 * (3 / 2))
        E5 = required_exponent(
            "T5", 2, {"m": 2, "p": [1, 1], "sigma": [2, 2], "alpha": [0, 0]}
        )
        assert E5 == pytest.approx(6 + 3.0)

    def test_constraint_violations_named(self):
        with pytest.raises(ParameterError, match="reciprocals"):
            required_exponent("T1", 2, {"m": 2, "p": [1, 1], "q": [2, 3], "alpha": 0.0})
        with pytest.raises(ParameterError, match="0 < s <= q"):
            required_exponent("T2", 2, {"m": 1, "p": 1, "q": 1, "s": 2, "beta": [0.0]})
        with pytest.raises(ParameterError, match="0 < p <= q"):
            required_exponent("T8", 2, {"p": 3, "q": 2, "alpha": 0.0})


class TestCarlesonSweep:
    def test_weighted_ratios_flat(self, small_decomp):
        lam = 1.0
        mu = WeightedLebesgue(lam)
        rep = carleson_sweep(mu, small_decomp, 3 + lam)
        assert np.allclose(rep.level_max, rep.level_max[0], rtol=1e-12)
        assert np.allclose(rep.trend, 1.0, rtol=1e-12)

    def test_per_cube_included_when_small(self, small_decomp):
        rep = carleson_sweep(WeightedLebesgue(0.0), small_decomp, 3.0)
        assert rep.per_cube is not None
        assert sum(len(v) for v in rep.per_cube.values()) == len(small_decomp)

    def test_argmax_points_to_max(self, small_decomp):
        mu = AtomicMeasure(((0.25, 0.25, 0.75),), (5.0,))
        rep = carleson_sweep(mu, small_decomp, 2.0)
        assert rep.argmax["level"] == -1
        assert rep.sup_ratio == pytest.approx(5.0 / 0.75 ** 2.0)


class TestTheorem7Sum:
    def test_zero_measure(self, small_decomp):
        assert theorem7_sum(AtomicMeasure((), ()), small_decomp, 1, 2, 0.5) == 0.0

    def test_parameter_guard(self, small_decomp):
        with pytest.raises(ParameterError, match="0 < p < q"):
            theorem7_sum(WeightedLebesgue(0.0), small_decomp, 2, 2, 0.5)
        with pytest.raises(ParameterError, match="alpha > 0"):
            theorem7_sum(WeightedLebesgue(0.0), small_decomp, 1, 2, -0.5)

    def test_level_constant_summand_grows_linearly(self):
        # oracle: per-level closed form; choose e so the level sums are equal
        p, q, alpha, n = 1.0, 2.0, 0.5, 2
        d1 = build_whitney(2, (-2, 2), 4.0)
        d2 = build_whitney(2, (-3, 2), 4.0)
        # summand per cube: eta^(w + e*q/(q-p)); per-level count scales like
        # (2R/side)^n, so level sums are constant when
        # w + e*m_exp + n = 0 with eta = 1.5 side
        w_exp = -(alpha * q * n + n) * p / (q - p)
        m_exp = q / (q - p)
        # solve w_exp + e*m_exp - n = 0  =>  e = (n - w_exp)/m_exp
        e = (n - w_exp) / m_exp
        s1 = theorem7_sum(CubePowerMeasure(e, d1), d1, p, q, alpha)
        s2 = theorem7_sum(CubePowerMeasure(e, d2), d2, p, q, alpha)
        levels1, levels2 = 5, 6
        assert s2 / s1 == pytest.approx(levels2 / levels1, rel=1e-9)

    def test_convergent_tail(self):
        # large e: level sums decay geometrically toward the boundary, so
        # successive windows differ by less than 1%
        p, q, alpha = 1.0, 2.0, 0.5
        d1 = build_whitney(2, (-4, 2), 4.0)
        d2 = build_whitney(2, (-5, 2), 4.0)
        e = 8.0
        mu1 = CubePowerMeasure(e, d1)
        mu2 = CubePowerMeasure(e, d2)
        s1 = theorem7_sum(mu1, d1, p, q, alpha)
        s2 = theorem7_sum(mu2, d2, p, q, alpha)
        assert abs(s2 - s1) / s2 < 0.01


class TestSerialisation:
    def test_roundtrip(self, small_decomp):
        for mu in (
            WeightedLebesgue(1.5),
            AtomicMeasure(((0.0, 0.0, 1.0),), (2.0,)),
            CubePowerMeasure(2.5, small_decomp),
        ):
            cfg = measure_to_config(mu)
            back = measure_from_config(cfg, small_decomp)
            assert type(back) is type(mu)
            assert measure_to_config(back) == cfg
