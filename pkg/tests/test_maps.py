import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from livsic.errors import EnumerationOverflow
from livsic.maps import (
    AnalyticCircleMap,
    BetaTransformation,
    TsujiiSkewProduct,
    circle_distance,
    evaluate,
    inverse_branches,
    map_from_spec,
    map_to_spec,
    periodic_points,
)

GOLDEN = (1 + math.sqrt(5)) / 2


class TestEvaluate:
    def test_doubling(self):
        assert evaluate(AnalyticCircleMap(2, 0.0), 0.3) == pytest.approx(0.6, abs=1e-15)

    def test_beta(self):
        assert evaluate(BetaTransformation(2.5), 0.9) == pytest.approx(0.25, abs=1e-15)

    def test_beta_endpoint_convention(self):
        assert evaluate(BetaTransformation(2.5), 1.0) == pytest.approx(0.5)
        assert evaluate(BetaTransformation(2.0), 1.0) == 0.0

    def test_tsujii(self):
        out = evaluate(TsujiiSkewProduct(3), [0.25, 0.1])
        assert_allclose(out, [0.75, 0.1], atol=1e-14)

    def test_rejects_non_expanding(self):
        with pytest.raises(ValueError):
            AnalyticCircleMap(2, 0.2)
        with pytest.raises(ValueError):
            BetaTransformation(1.0)
        with pytest.raises(ValueError):
            TsujiiSkewProduct(1)


class TestInverseBranches:
    def test_doubling(self):
        assert inverse_branches(AnalyticCircleMap(2, 0.0), 0.5) == [(0.25, 2.0), (0.75, 2.0)]

    def test_beta_range_check(self):
        br = inverse_branches(BetaTransformation(2.5), 0.9)
        assert len(br) == 2
        assert_allclose([b[0] for b in br], [0.36, 0.76], atol=1e-15)
        assert all(b[1] == 2.5 for b in br)

    def test_newton_residual(self):
        T = AnalyticCircleMap(2, 0.05)
        br = inverse_branches(T, 0.4)
        assert len(br) == 2
        for y, d in br:
            assert circle_distance(T(y), 0.4) <= 1e-13
            assert d == pytest.approx(abs(T.derivative(y)))

    @pytest.mark.parametrize("tmap", [AnalyticCircleMap(2, 0.05), AnalyticCircleMap(3, 0.3), BetaTransformation(GOLDEN)])
    def test_completeness(self, tmap):
        rng = np.random.default_rng(0)
        for x in rng.random(200):
            for y, _ in inverse_branches(tmap, x):
                assert circle_distance(tmap(y), x) <= 1e-12

    def test_circle_branch_count(self):
        T = AnalyticCircleMap(3, 0.2)
        assert len(inverse_branches(T, 0.123)) == 3

    def test_tsujii_branches(self):
        T = TsujiiSkewProduct(3)
        p = np.array([0.3, 0.7])
        br = inverse_branches(T, p)
        assert len(br) == 3
        for y, D in br:
            assert_allclose(circle_distance(T(y), p), 0, atol=1e-12)
            assert np.linalg.det(D) == pytest.approx(3.0)
        xs = [b[0][0] for b in br]
        assert xs == sorted(xs)

    def test_beta_branch_measure(self):
        T = BetaTransformation(GOLDEN)
        x = (np.arange(100000) + 0.5) / 100000
        ys, dT, valid = T.preimages(x)
        mass = np.mean(np.sum(valid / dT, axis=-1) * 1.0)
        # integral of L1 is the total measure pulled back through all branches
        assert mass == pytest.approx(1.0, abs=1e-4)
        assert np.sum(valid) / x.size == pytest.approx(1 + 1 / GOLDEN, abs=1e-4)


class TestDerivative:
    @pytest.mark.parametrize("tmap", [AnalyticCircleMap(2, 0.05), AnalyticCircleMap(3, -0.2)])
    def test_finite_difference(self, tmap):
        rng = np.random.default_rng(1)
        x = rng.random(100)
        h = 1e-6
        fd = (tmap.lift(x + h) - tmap.lift(x - h)) / (2 * h)
        assert_allclose(fd, tmap.derivative(x), atol=1e-6)

    def test_tsujii_matrix(self):
        T = TsujiiSkewProduct(4)
        D = T.derivative([0.1, 0.2])
        assert_allclose(D, [[4, 0], [-2 * np.pi * 4 * np.sin(2 * np.pi * 0.1), 1]])
        assert T.jacobian([0.1, 0.2]) == 4.0


class TestPeriodicPoints:
    def test_doubling_period_two(self):
        orbits = periodic_points(AnalyticCircleMap(2, 0.0), 2)
        assert [o.period for o in orbits] == [1, 2]
        assert orbits[0].points == (0.0,)
        assert_allclose(orbits[1].points, [1 / 3, 2 / 3], atol=1e-15)

    def test_tripling_fixed_points(self):
        orbits = periodic_points(AnalyticCircleMap(3, 0.0), 1)
        assert_allclose([o.points[0] for o in orbits], [0.0, 0.5])

    def test_perturbed_continuation(self):
        T = AnalyticCircleMap(2, 0.05)
        orbits = periodic_points(T, 3)
        pts = [p for o in orbits for p in o.points]
        assert len(pts) == 7
        for p in pts:
            y = p
            for _ in range(3):
                y = T(y)
            assert circle_distance(y, p) <= 1e-12

    @pytest.mark.parametrize("k,n", [(2, 5), (3, 4), (2, 8)])
    def test_point_count(self, k, n):
        orbits = periodic_points(AnalyticCircleMap(k, 0.0), n)
        assert sum(len(o.points) for o in orbits) == k**n - 1
        for o in orbits:
            assert n % o.period == 0
            assert len(set(o.points)) == o.period

    def test_minimal_period_and_closure(self):
        T = AnalyticCircleMap(3, 0.1)
        for o in periodic_points(T, 4):
            assert o.closure_residual <= 1e-12
            assert o.points[0] == min(o.points)

    def test_golden_beta(self):
        orbits = periodic_points(BetaTransformation(GOLDEN), 3)
        three = [o for o in orbits if o.period == 3]
        assert three
        T = BetaTransformation(GOLDEN)
        for o in three:
            for a, b in zip(o.points, o.points[1:] + o.points[:1]):
                assert abs(T(a) - b) <= 1e-12

    def test_overflow(self):
        with pytest.raises(EnumerationOverflow):
            periodic_points(AnalyticCircleMap(2, 0.0), 21)

    def test_2d_rejected(self):
        with pytest.raises(ValueError):
            periodic_points(TsujiiSkewProduct(2), 1)


def test_spec_round_trip():
    for tmap in (AnalyticCircleMap(3, 0.1), BetaTransformation(2.5), TsujiiSkewProduct(5)):
        assert map_from_spec(map_to_spec(tmap)) == tmap
    assert map_from_spec({"type": "beta", "beta": "golden"}).beta == pytest.approx(GOLDEN)
    with pytest.raises(ValueError):
        map_from_spec({"type": "tent"})
