import numpy as np
import pytest
from numpy.testing import assert_allclose

from livsic.errors import BranchExplosion, NoneCertified
from livsic.maps import AnalyticCircleMap, BetaTransformation, TsujiiSkewProduct
from livsic.vexp import (
    Certificate,
    CriterionQuery,
    _skew_shear,
    _skew_values,
    branch_derivatives,
    certificates_csv,
    certify,
    criterion_value,
    min_expanding_m,
    orbit_derivative,
)


class TestConformal:
    def test_doubling_value(self):
        value, (_, angle) = criterion_value(CriterionQuery(AnalyticCircleMap(2, 0.0), 2.0, 1))
        assert value == pytest.approx(0.25, abs=1e-15)
        assert angle == 0.0

    @pytest.mark.parametrize("variant", ["reciprocal", "printed"])
    @pytest.mark.parametrize("k,n,s", [(2, 1, 1.0), (3, 2, 2.0), (2, 3, 0.5), (5, 1, 1.5)])
    def test_closed_form(self, k, n, s, variant):
        q = CriterionQuery(AnalyticCircleMap(k, 0.0), s, n, variant=variant)
        assert criterion_value(q)[0] == pytest.approx(k ** (-n * s), rel=1e-12)

    def test_certify_doubling(self):
        cert = certify(AnalyticCircleMap(2, 0.0), 1.0, 1)
        assert cert.certified
        assert cert.n == 1
        assert cert.margin == pytest.approx(0.5, abs=1e-15)

    def test_circle_scan(self):
        m, cert = min_expanding_m(1.0, 1, range(2, 6), family="circle")
        assert m == 2
        assert cert.certified


class TestSkewProduct:
    def test_horizontal_covector(self):
        # v = (1, 0): each of the 2 branches contributes (1/2) * |(2, 0)|^-2
        c = _skew_shear(2, 1, np.array([0.3]))
        value = _skew_values(2.0, c, np.array([0.0]), 2.0, "reciprocal")[0, 0]
        assert value == pytest.approx(0.25, abs=1e-15)
        assert criterion_value(CriterionQuery(TsujiiSkewProduct(2), 2.0, 1))[0] > 0.25

    def test_vertical_covector_printed(self):
        # (A^T)^{-1} (0, 1) = (-c / M, 1), so each branch weighs at least 1 / M there
        for m in (2, 5, 12):
            c = _skew_shear(m, 1, np.array([0.1]))
            value = _skew_values(float(m), c, np.array([np.pi / 2]), 2.0, "printed")[0, 0]
            assert value == pytest.approx(1.0 + np.mean(c**2) / m**2, rel=1e-12)
            assert value >= 1.0

    def test_small_m_negative(self):
        cert = certify(TsujiiSkewProduct(2), 2.0, 1)
        assert not cert.certified
        assert cert.value >= 1.0

    def test_printed_fails(self):
        cert = certify(TsujiiSkewProduct(12), 2.0, 2, variant="printed")
        assert not cert.certified
        assert cert.value >= 1.0

    def test_min_expanding(self):
        m, cert = min_expanding_m(2.0, 2, range(11, 13))
        assert m == 12
        assert cert.margin > 0.2
        assert cert.variant == "reciprocal"

    def test_alias(self):
        assert CriterionQuery(TsujiiSkewProduct(3), 2.0, variant="reciprocal-pullback").variant == "reciprocal"

    def test_empty_range(self):
        with pytest.raises(NoneCertified):
            min_expanding_m(2.0, 1, range(0))

    def test_refinement_stable(self):
        T = TsujiiSkewProduct(4)
        coarse = criterion_value(CriterionQuery(T, 2.0, 1, 64, 64))[0]
        fine = criterion_value(CriterionQuery(T, 2.0, 1, 256, 256))[0]
        assert fine >= coarse - 1e-3
        assert abs(fine - coarse) <= 1e-3

    def test_branch_explosion(self):
        with pytest.raises(BranchExplosion):
            criterion_value(CriterionQuery(TsujiiSkewProduct(12), 2.0, 6))
        with pytest.raises(BranchExplosion):
            branch_derivatives(AnalyticCircleMap(2, 0.0), 0.1, 21)


class TestDerivatives:
    def test_jacobian_law(self):
        T = TsujiiSkewProduct(3)
        _, D = branch_derivatives(T, [0.2, 0.7], 3)
        assert D.shape == (27, 2, 2)
        assert_allclose(np.linalg.det(D), 27.0, rtol=1e-12)

    def test_closed_form_shear(self):
        T = TsujiiSkewProduct(3)
        x = 0.37
        _, D = branch_derivatives(T, [x, 0.5], 2)
        c = _skew_shear(3, 2, np.array([x]))[0]
        assert_allclose(np.sort(D[:, 1, 0]), np.sort(c), atol=1e-10)
        assert_allclose(D[:, 0, 0], 9.0)
        assert_allclose(D[:, 1, 1], 1.0)

    def test_chain_rule(self):
        T = TsujiiSkewProduct(3)
        pts, D = branch_derivatives(T, [0.41, 0.13], 2)
        assert_allclose(orbit_derivative(T, pts, 2), D, atol=1e-10)

    def test_finite_difference(self):
        T = TsujiiSkewProduct(3)
        n, h = 2, 1e-6
        rng = np.random.default_rng(0)

        def lift(p):
            # T^n without reduction mod 1
            x, y = p
            for _ in range(n):
                x, y = 3 * x, y + 3 * np.cos(2 * np.pi * x)
            return np.array([x, y])

        for p in rng.random((20, 2)):
            fd = np.column_stack([(lift(p + h * e) - lift(p - h * e)) / (2 * h) for e in np.eye(2)])
            assert_allclose(orbit_derivative(T, p, n), fd, atol=1e-5)


class TestQuery:
    def test_validation(self):
        T = TsujiiSkewProduct(3)
        with pytest.raises(ValueError):
            CriterionQuery(T, 0.0)
        with pytest.raises(ValueError):
            CriterionQuery(T, 2.0, 0)
        with pytest.raises(ValueError):
            CriterionQuery(T, 2.0, 1, 32, 256)
        with pytest.raises(ValueError):
            CriterionQuery(T, 2.0, variant="other")
        with pytest.raises(TypeError):
            CriterionQuery(BetaTransformation(2.5), 2.0)

    def test_branch_count(self):
        assert CriterionQuery(TsujiiSkewProduct(5), 1.0, 3).branch_count == 125


def test_certificates_csv():
    certs = [Certificate(12, 2.0, 2, "reciprocal", 0.73, 0.1, 0.2)]
    lines = certificates_csv(certs).splitlines()
    assert lines[0] == "m,s,n,variant,value,margin,x_star,angle_star"
    fields = lines[1].split(",")
    assert fields[0] == "12"
    assert float(fields[5]) == pytest.approx(0.27)
