import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from livsic.basis import FourierBasis, UlamBasis, project
from livsic.errors import DegenerateLeadingEigenvalue, WrongEnclosedCount
from livsic.maps import AnalyticCircleMap, BetaTransformation
from livsic.spectral import (
    ContourSpec,
    TwistedFamily,
    eigen_derivatives_at_zero,
    lambda_curve_csv,
    leading_eigen,
    perturbed_eigendata,
    riesz_projection,
)
from livsic.transfer import OperatorMatrix, assemble, assemble_twisted

GOLDEN = (1 + math.sqrt(5)) / 2
TWO_PI = 2 * np.pi
DOUBLING = AnalyticCircleMap(2, 0.0)
# two-level Parry density of the golden beta map, from its series
PARRY_HIGH = 1.1708203932499369
PARRY_LOW = 0.7236067977499789


def cos(k):
    return lambda x: np.cos(TWO_PI * k * np.asarray(x))


class TestLeadingEigen:
    def test_doubling(self):
        eig = leading_eigen(assemble(DOUBLING, FourierBasis(32)))
        assert abs(eig.eigenvalue - 1) <= 1e-12
        x = np.arange(256) / 256
        assert np.abs(eig.density(x) - 1).max() <= 1e-12
        assert eig.residual <= 1e-10
        assert eig.gap > 0

    def test_perturbed_circle(self):
        eig = leading_eigen(assemble(AnalyticCircleMap(2, 0.05), FourierBasis(64)))
        assert abs(eig.eigenvalue - 1) <= 1e-11
        assert eig.density(np.arange(256) / 256).min() > 0
        assert eig.density.integrate() == pytest.approx(1.0, abs=1e-14)
        assert eig.density.real

    def test_golden_parry(self):
        N = 4096
        eig = leading_eigen(assemble(BetaTransformation(GOLDEN), UlamBasis(N)))
        mid = (np.arange(N) + 0.5) / N
        parry = np.where(mid < 1 / GOLDEN, PARRY_HIGH, PARRY_LOW)
        assert np.mean(np.abs(eig.density.vector.real - parry)) <= 0.01
        assert eig.residual <= 1e-10
        assert abs(eig.eigenvalue - 1) <= 1e-10
        assert 0 < eig.gap < 1

    def test_rejects_twisted(self):
        B = FourierBasis(8)
        with pytest.raises(ValueError):
            leading_eigen(assemble_twisted(DOUBLING, B, project(cos(1), B), 0.1))

    def test_degenerate(self):
        B = FourierBasis(1)
        op = OperatorMatrix(B, np.diag([1.0, 1.0, 0.5]).astype(complex))
        with pytest.raises(DegenerateLeadingEigenvalue):
            leading_eigen(op)


class TestRiesz:
    def test_identity_at_zero(self):
        B = FourierBasis(32)
        op = assemble(AnalyticCircleMap(2, 0.05), B)
        eig = leading_eigen(op)
        P = riesz_projection(op, ContourSpec(0.25))
        assert_allclose(P.matrix @ eig.density.vector, eig.density.vector, atol=1e-10)
        assert abs(P.trace - 1) <= 1e-8

    def test_health(self):
        B = FourierBasis(32)
        op = assemble_twisted(DOUBLING, B, project(cos(1), B), 0.4)
        P = riesz_projection(op, ContourSpec(0.25))
        assert P.defect <= 1e-8
        assert P.rank_witness <= 1e-8
        assert_allclose(P.matrix @ P.matrix, P.matrix, atol=1e-8)

    def test_quadrature_convergence(self):
        B = FourierBasis(32)
        op = assemble_twisted(DOUBLING, B, project(cos(1), B), 0.1)
        P32 = riesz_projection(op, ContourSpec(0.25, 32)).matrix
        P64 = riesz_projection(op, ContourSpec(0.25, 64)).matrix
        assert np.abs(P32 - P64).max() <= 1e-10

    def test_contour_independence(self):
        B = FourierBasis(32)
        op = assemble_twisted(AnalyticCircleMap(2, 0.05), B, project(cos(1), B), 0.2)
        Pa = riesz_projection(op, ContourSpec(0.2)).matrix
        Pb = riesz_projection(op, ContourSpec(0.3)).matrix
        assert np.abs(Pa - Pb).max() <= 1e-9

    def test_wrong_count(self):
        B = FourierBasis(8)
        op = assemble_twisted(DOUBLING, B, B.constant(1.0), 1.0)
        with pytest.raises(WrongEnclosedCount):
            riesz_projection(op, ContourSpec(0.25))

    def test_node_floor(self):
        with pytest.raises(ValueError):
            ContourSpec(0.25, 8)

    def test_sparse_sketch(self):
        B = UlamBasis(1024)
        T = BetaTransformation(GOLDEN)
        f = project(cos(1), B)
        fam = TwistedFamily(T, B, f)
        d = fam.eigendata(0.3)
        assert d.projection_defect <= 1e-8
        assert d.rank_witness <= 1e-8
        assert abs(d.trace - 1) <= 1e-6
        assert d.residual <= 1e-8


class TestPerturbed:
    def test_zero_observable(self):
        B = FourierBasis(16)
        d = perturbed_eigendata(DOUBLING, B.zeros(), 0.4)
        assert abs(d.eigenvalue - 1) <= 1e-12
        assert_allclose(d.chi_t.vector, B.constant(1.0).vector, atol=1e-12)

    def test_constant_observable(self):
        B = FourierBasis(16)
        d = perturbed_eigendata(AnalyticCircleMap(2, 0.05), B.constant(0.8), 0.1)
        assert abs(d.eigenvalue - np.exp(0.08j)) <= 1e-10

    def test_eigenvalue_near_contour_rejected(self):
        # exp(0.24i) sits 0.239 from the centre, too close to r = 0.25 for the quadrature
        B = FourierBasis(16)
        with pytest.raises(WrongEnclosedCount):
            perturbed_eigendata(AnalyticCircleMap(2, 0.05), B.constant(0.8), 0.3)

    def test_coboundary(self):
        B = FourierBasis(64)
        f = project(lambda x: cos(2)(x) - cos(1)(x), B)
        d = perturbed_eigendata(DOUBLING, f, 0.3)
        assert abs(d.eigenvalue - 1) <= 1e-8
        assert d.residual <= 1e-8

    def test_chi_at_zero(self):
        B = FourierBasis(32)
        fam = TwistedFamily(AnalyticCircleMap(2, 0.05), B, project(cos(1), B))
        assert_allclose(fam.eigendata(0.0).chi_t.vector, fam.chi.vector, atol=1e-10)

    def test_conjugation_symmetry(self):
        B = FourierBasis(32)
        fam = TwistedFamily(AnalyticCircleMap(2, 0.05), B, project(cos(1), B))
        for t in (0.1, 0.3):
            assert abs(fam.eigendata(-t).eigenvalue - np.conj(fam.eigendata(t).eigenvalue)) <= 1e-10

    def test_resolution_stability(self):
        T = AnalyticCircleMap(2, 0.05)
        lams = []
        for N in (32, 64):
            B = FourierBasis(N)
            lams.append(perturbed_eigendata(T, project(cos(1), B), 0.3).eigenvalue)
        assert abs(lams[0] - lams[1]) <= 1e-9

    def test_gauge_similarity(self):
        T = AnalyticCircleMap(2, 0.05)
        B = FourierBasis(64)
        g = lambda x: 0.3 * np.sin(TWO_PI * x) - 0.2 * cos(3)(x)
        f = project(cos(1), B)
        fg = project(lambda x: cos(1)(x) + g(T(x)) - g(x), B)
        for t in (-0.3, 0.15, 0.3):
            a = perturbed_eigendata(T, f, t).eigenvalue
            b = perturbed_eigendata(T, fg, t).eigenvalue
            assert abs(a - b) <= 1e-8

    def test_working_range(self):
        B = FourierBasis(16)
        fam = TwistedFamily(DOUBLING, B, B.constant(1.0))
        t = fam.working_range()
        assert 0 < t < 2
        fam.eigendata(t)


class TestDerivatives:
    def test_zero(self):
        d = eigen_derivatives_at_zero(DOUBLING, FourierBasis(16).zeros())
        assert abs(d.dlambda) <= 1e-12
        assert abs(d.d2lambda) <= 1e-10
        assert np.abs(d.dchi.vector).max() <= 1e-10

    def test_constant(self):
        c = 0.6
        d = eigen_derivatives_at_zero(AnalyticCircleMap(2, 0.05), FourierBasis(16).constant(c))
        assert abs(d.dlambda - 1j * c) <= 1e-10
        assert abs(d.d2lambda + c**2) <= 1e-8

    def test_green_kubo(self):
        B = FourierBasis(64)
        d = eigen_derivatives_at_zero(DOUBLING, project(cos(1), B))
        assert abs(d.dlambda) <= 1e-9
        assert abs(d.d2lambda + 0.5) <= 1e-6

    def test_finite_difference_cross_check(self):
        B = FourierBasis(32)
        h = cos(1)
        T = AnalyticCircleMap(2, 0.05)
        d = eigen_derivatives_at_zero(T, project(lambda x: h(T(x)) - h(x), B))
        # central difference error is O(rho^2)
        assert d.fd_deviation <= 1e-3

    def test_odd_nodes_rejected(self):
        B = FourierBasis(8)
        fam = TwistedFamily(DOUBLING, B, B.zeros())
        with pytest.raises(ValueError):
            fam.derivatives_at_zero(nodes=15)


def test_lambda_curve_csv():
    B = FourierBasis(16)
    fam = TwistedFamily(DOUBLING, B, project(cos(1), B))
    text = lambda_curve_csv(fam.lambda_curve([-0.1, 0.0, 0.1], workers=2))
    lines = text.splitlines()
    assert lines[0] == "t,re_lambda,im_lambda,abs_lambda,eigen_residual,proj_defect"
    assert len(lines) == 4
    assert text == lambda_curve_csv(fam.lambda_curve([-0.1, 0.0, 0.1]))
