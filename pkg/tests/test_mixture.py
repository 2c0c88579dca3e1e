"""Tests for the finite-dimensional mixture distribution.

Student scale laws make the mixture an exact multivariate t, giving
closed-form or one-dimensional-quadrature oracles for every operation.
The Rayleigh scale law gives exact Laplace margins. Both families are
used to pin the quadrature and lattice paths independently.
"""

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import multivariate_t, t as student_t

from scalemix.mixture import MixtureModel
from scalemix.quadrature import QuadratureConfig
from scalemix.correlation import CorrelationModel, SiteSet
from scalemix.radial import (
    Dirac,
    ExtWeibull,
    GpdScale,
    Rayleigh,
    ScaledRadial,
    StudentRadial,
)


def t_cdf_2d(x1, x2, rho, df):
    """Bivariate t CDF by exact conditioning on the first coordinate."""

    def f(s):
        scale = np.sqrt((df + 1.0) / (df + s * s))
        if rho != 0.0:
            scale /= np.sqrt(1.0 - rho * rho)
        return student_t.pdf(s, df) * student_t.cdf((x2 - rho * s) * scale, df + 1.0)

    return integrate.quad(f, -np.inf, x1, epsabs=1e-13, epsrel=1e-13, limit=400)[0]


def t_cdf_3d_equi(x, rho, df):
    """Equicorrelated trivariate t CDF by recursive conditioning."""
    schur = np.array([[1 - rho**2, rho - rho**2], [rho - rho**2, 1 - rho**2]])
    sd = np.sqrt(schur[0, 0])
    rc = schur[0, 1] / schur[0, 0]

    def f(s):
        sc = np.sqrt((df + s * s) / (df + 1.0)) * sd
        return student_t.pdf(s, df) * t_cdf_2d(
            (x[1] - rho * s) / sc, (x[2] - rho * s) / sc, rc, df + 1.0)

    return integrate.quad(f, -np.inf, x[0], epsabs=1e-12, epsrel=1e-12,
                          limit=200)[0]


def equi_corr(d, rho):
    s = np.full((d, d), float(rho))
    np.fill_diagonal(s, 1.0)
    return s


class TestDiracExact:
    def test_joint_cdf_is_gaussian(self):
        m = MixtureModel(Dirac(1.0), np.eye(2))
        assert m.joint_cdf([0.0, 0.0]) == pytest.approx(0.25, abs=1e-15)

    def test_joint_pdf_scales(self):
        m = MixtureModel(Dirac(2.0), np.eye(2))
        # N(0, 4 I) density at the origin
        assert m.joint_pdf([0.0, 0.0]) == pytest.approx(
            1.0 / (2.0 * np.pi * 4.0), rel=1e-14)

    def test_margins(self):
        m = MixtureModel(Dirac(1.5), np.eye(1))
        x = np.array([-0.7, 0.0, 2.1])
        from scipy.stats import norm
        np.testing.assert_allclose(m.marginal_cdf(x), norm.cdf(x / 1.5), rtol=1e-14)
        np.testing.assert_allclose(m.marginal_pdf(x), norm.pdf(x / 1.5) / 1.5,
                                   rtol=1e-14)
        np.testing.assert_allclose(m.marginal_quantile([0.1, 0.5, 0.99]),
                                   1.5 * norm.ppf([0.1, 0.5, 0.99]), rtol=1e-12)

    def test_partial_cdf(self):
        rho = 0.4
        m = MixtureModel(Dirac(1.0), equi_corr(2, rho))
        x = np.array([0.6, -0.3])
        from scipy.stats import norm
        oracle = norm.pdf(x[0]) * norm.cdf(
            (x[1] - rho * x[0]) / np.sqrt(1 - rho**2))
        assert m.partial_cdf(x, [0]) == pytest.approx(oracle, rel=1e-13)


class TestStudentOracle:
    """The mixture with a Student scale law is exactly multivariate t."""

    @pytest.mark.parametrize("df", [1.0, 3.0])
    @pytest.mark.parametrize("rho", [0.0, 0.5])
    def test_bivariate_cdf(self, df, rho):
        m = MixtureModel(StudentRadial(df), equi_corr(2, rho))
        x = np.array([0.9, -0.2])
        assert m.joint_cdf(x) == pytest.approx(
            t_cdf_2d(x[0], x[1], rho, df), abs=1e-10)

    def test_trivariate_cdf_lattice(self):
        df, rho = 2.5, 0.5
        m = MixtureModel(StudentRadial(df), equi_corr(3, rho))
        x = np.array([0.9, -0.2, 0.4])
        assert m.joint_cdf(x) == pytest.approx(
            t_cdf_3d_equi(x, rho, df), abs=1e-5)

    def test_trivariate_cdf_deterministic(self):
        m = MixtureModel(StudentRadial(2.5), equi_corr(3, 0.5), seed=7)
        x = [0.9, -0.2, 0.4]
        assert m.joint_cdf(x) == m.joint_cdf(x)

    @pytest.mark.parametrize("df,rho,d", [(1.0, 0.0, 2), (3.0, 0.5, 2),
                                          (10.0, 0.5, 3), (2.0, -0.3, 2)])
    def test_joint_pdf(self, df, rho, d):
        m = MixtureModel(StudentRadial(df), equi_corr(d, rho))
        x = np.array([0.9, -0.2, 0.4])[:d]
        oracle = multivariate_t(shape=equi_corr(d, rho), df=df).pdf(x)
        assert m.joint_pdf(x) == pytest.approx(oracle, rel=1e-12)

    def test_cauchy_margin(self):
        m = MixtureModel(StudentRadial(1.0), np.eye(1))
        assert m.marginal_cdf(1.0) == pytest.approx(0.75, abs=1e-12)
        assert m.marginal_pdf(1.0) == pytest.approx(1.0 / (2.0 * np.pi), rel=1e-12)
        assert m.joint_pdf([1.0]) == pytest.approx(1.0 / (2.0 * np.pi), rel=1e-12)

    def test_margin_quantiles(self):
        m = MixtureModel(StudentRadial(3.0), np.eye(1))
        p = np.array([0.001, 0.3, 0.5, 0.9, 0.9999])
        np.testing.assert_allclose(m.marginal_quantile(p),
                                   student_t.ppf(p, 3.0), rtol=1e-9, atol=1e-12)

    def test_partial_is_conditional_t(self):
        # d/dx1 of the bivariate t CDF has a closed form via the
        # conditional t distribution
        df, rho = 2.5, 0.5
        m = MixtureModel(StudentRadial(df), equi_corr(2, rho))
        x = np.array([0.7, -0.1])
        scale = np.sqrt((df + x[0] ** 2) / (df + 1.0) * (1.0 - rho**2))
        oracle = student_t.pdf(x[0], df) * student_t.cdf(
            (x[1] - rho * x[0]) / scale, df + 1.0)
        assert m.partial_cdf(x, [0]) == pytest.approx(oracle, rel=1e-10)

    def test_partial_trivariate(self):
        df, rho = 2.5, 0.5
        m = MixtureModel(StudentRadial(df), equi_corr(3, rho))
        x = np.array([0.9, -0.2, 0.4])
        schur = np.array([[1 - rho**2, rho - rho**2],
                          [rho - rho**2, 1 - rho**2]])
        sd = np.sqrt(schur[0, 0])
        rc = schur[0, 1] / schur[0, 0]
        sc = np.sqrt((df + x[0] ** 2) / (df + 1.0)) * sd
        oracle = student_t.pdf(x[0], df) * t_cdf_2d(
            (x[1] - rho * x[0]) / sc, (x[2] - rho * x[0]) / sc, rc, df + 1.0)
        assert m.partial_cdf(x, [0]) == pytest.approx(oracle, rel=1e-9)


class TestLaplaceMargins:
    """Rayleigh scale law gives exact Laplace(1) margins."""

    def test_margin_closed_form(self):
        m = MixtureModel(Rayleigh(), np.eye(1))
        x = np.array([0.3, 1.0, 3.0, 8.0])
        np.testing.assert_allclose(m.marginal_pdf(x), 0.5 * np.exp(-x), rtol=1e-12)
        np.testing.assert_allclose(m.marginal_cdf(x), 1.0 - 0.5 * np.exp(-x),
                                   rtol=1e-12)
        np.testing.assert_allclose(m.marginal_cdf(-x), 0.5 * np.exp(-x), rtol=1e-12)

    def test_quantile_closed_form(self):
        m = MixtureModel(Rayleigh(), np.eye(1))
        p = np.array([1e-6, 0.2, 0.5, 0.8, 1 - 1e-6])
        oracle = np.where(p < 0.5, np.log(2 * p), -np.log(2 * (1 - p)))
        np.testing.assert_allclose(m.marginal_quantile(p), oracle,
                                   rtol=1e-9, atol=1e-11)


class TestInternalConsistency:
    def test_cdf_hessian_matches_pdf(self):
        # mixed second difference of the joint CDF reproduces the density
        m = MixtureModel(Rayleigh(), equi_corr(2, 0.3))
        x = np.array([0.8, -0.5])
        h = 2e-4
        vals = {}
        for a in (-1, 1):
            for b in (-1, 1):
                vals[a, b] = m.joint_cdf(x + h * np.array([a, b]))
        fd = (vals[1, 1] - vals[1, -1] - vals[-1, 1] + vals[-1, -1]) / (4 * h * h)
        assert fd == pytest.approx(m.joint_pdf(x), rel=1e-5)

    def test_partial_matches_fd(self):
        m = MixtureModel(ExtWeibull(1.0, 1.0), equi_corr(2, 0.3))
        x = np.array([1.1, 0.4])
        h = 1e-6
        fd = (m.joint_cdf(x + [h, 0]) - m.joint_cdf(x - [h, 0])) / (2 * h)
        assert m.partial_cdf(x, [0]) == pytest.approx(fd, rel=1e-6)

    def test_full_partial_is_pdf(self):
        m = MixtureModel(Rayleigh(), equi_corr(2, 0.3))
        x = np.array([0.8, -0.5])
        assert m.partial_cdf(x, [0, 1]) == pytest.approx(m.joint_pdf(x), rel=1e-12)

    def test_two_increasing(self):
        m = MixtureModel(ExtWeibull(1.0, 1.0), equi_corr(2, 0.6))
        for (a1, a2, b1, b2) in [(-1, -1, 1, 1), (0, -2, 0.5, 0.1),
                                 (-3, 0.2, -2.5, 2.0)]:
            mass = (m.joint_cdf([b1, b2]) - m.joint_cdf([a1, b2])
                    - m.joint_cdf([b1, a2]) + m.joint_cdf([a1, a2]))
            assert mass >= -1e-12

    def test_infinite_arguments(self):
        m = MixtureModel(StudentRadial(3.0), equi_corr(2, 0.5))
        assert m.joint_cdf([np.inf, -np.inf]) == 0.0
        assert m.joint_cdf([np.inf, np.inf]) == 1.0
        assert m.joint_cdf([np.inf, 0.4]) == pytest.approx(
            m.marginal_cdf(0.4), rel=1e-10)

    def test_marginal_sf_deep_tail_relative(self):
        # survival route stays accurate in relative terms far out
        df = 2.0
        m = MixtureModel(StudentRadial(df), np.eye(1))
        x = student_t.ppf(1 - 1e-9, df)
        assert 1.0 - m.marginal_cdf(x) == pytest.approx(1e-9, rel=1e-6)

    def test_quantile_roundtrip(self):
        m = MixtureModel(ExtWeibull(1.5, 0.8), np.eye(1))
        for p in [1e-8, 0.01, 0.4, 0.97, 1 - 1e-8]:
            assert m.marginal_cdf(m.marginal_quantile(p)) == pytest.approx(
                p, rel=1e-8)


class TestCopula:
    def test_copula_cdf_t(self):
        df, rho = 3.0, 0.5
        m = MixtureModel(StudentRadial(df), equi_corr(2, rho))
        u = np.array([0.3, 0.7])
        oracle = t_cdf_2d(*student_t.ppf(u, df), rho, df)
        assert m.copula_cdf(u) == pytest.approx(oracle, abs=1e-9)

    def test_copula_pdf_t(self):
        df, rho = 3.0, 0.5
        m = MixtureModel(StudentRadial(df), equi_corr(2, rho))
        u = np.array([0.3, 0.7])
        x = student_t.ppf(u, df)
        oracle = multivariate_t(shape=equi_corr(2, rho), df=df).pdf(x) / np.prod(
            student_t.pdf(x, df))
        assert m.copula_pdf(u) == pytest.approx(oracle, rel=1e-9)

    def test_copula_partial_t(self):
        # closed-form h-function of the t copula
        df, rho = 4.0, 0.6
        m = MixtureModel(StudentRadial(df), equi_corr(2, rho))
        u = np.array([0.35, 0.8])
        x = student_t.ppf(u, df)
        scale = np.sqrt((df + x[0] ** 2) / (df + 1.0) * (1.0 - rho**2))
        oracle = student_t.cdf((x[1] - rho * x[0]) / scale, df + 1.0)
        assert m.copula_partial(u, [0]) == pytest.approx(oracle, rel=1e-9)

    def test_margin_consistency(self):
        m = MixtureModel(StudentRadial(3.0), equi_corr(2, 0.5))
        assert m.copula_cdf([0.3, 1.0]) == pytest.approx(0.3, rel=1e-9)
        assert m.copula_cdf([1.0, 1.0]) == 1.0
        assert m.copula_cdf([0.0, 0.7]) == 0.0

    def test_scale_invariance(self):
        # the copula ignores a deterministic rescaling of the radial law
        base = ExtWeibull(1.0, 1.0)
        m1 = MixtureModel(base, equi_corr(2, 0.4))
        m2 = MixtureModel(ScaledRadial(base, 3.7), equi_corr(2, 0.4))
        u = np.array([0.25, 0.65])
        assert m1.copula_cdf(u) == pytest.approx(m2.copula_cdf(u), rel=1e-8)
        assert m1.copula_pdf(u) == pytest.approx(m2.copula_pdf(u), rel=1e-8)

    def test_rejects_out_of_range(self):
        m = MixtureModel(StudentRadial(3.0), equi_corr(2, 0.5))
        with pytest.raises(ValueError):
            m.copula_cdf([0.3, 1.2])
        with pytest.raises(ValueError):
            m.copula_pdf([0.0, 0.5])
        with pytest.raises(ValueError):
            m.copula_partial([0.3, 1.0], [0])


class TestHigherDimPartial:
    def test_partial_with_lattice_inner(self):
        # D=5, one differentiated coordinate: the inner 4-dim Gaussian CDF
        # goes through the batched lattice path; oracle via conditional t
        df, rho = 3.0, 0.4
        d = 5
        m = MixtureModel(StudentRadial(df), equi_corr(d, rho))
        x = np.array([0.9, -0.2, 0.4, 0.1, -0.6])
        sig = equi_corr(d, rho)
        a = sig[1:, 0]
        schur = sig[1:, 1:] - np.outer(a, a)
        scale_fac = (df + x[0] ** 2) / (df + 1.0)
        cond_cov = scale_fac * schur
        sd = np.sqrt(np.diag(cond_cov))
        corr = cond_cov / np.outer(sd, sd)
        z = (x[1:] - a * x[0]) / sd
        inner = multivariate_t(shape=corr, df=df + 1.0).cdf(
            z, random_state=np.random.default_rng(0), maxpts=2_000_000)
        oracle = student_t.pdf(x[0], df) * inner
        assert m.partial_cdf(x, [0]) == pytest.approx(oracle, rel=2e-4)


class TestPlumbing:
    def test_from_rho_and_restrict(self):
        m = MixtureModel(StudentRadial(3.0), equi_corr(3, 0.5))
        sub = m.restrict([0, 2])
        pair = m.pair(0, 2)
        x = np.array([0.5, -0.1])
        assert sub.joint_cdf(x) == pytest.approx(pair.joint_cdf(x), rel=1e-12)
        direct = MixtureModel.from_rho(StudentRadial(3.0), 0.5)
        assert sub.joint_cdf(x) == pytest.approx(direct.joint_cdf(x), rel=1e-10)

    def test_from_sites(self):
        sites = SiteSet([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        model = CorrelationModel(lam=1.5, nu=1.0)
        m = MixtureModel.from_sites(Rayleigh(), sites, model)
        assert m.dim == 3
        assert m.sigma[0, 1] == pytest.approx(np.exp(-1.0 / 1.5))
        sub = m.restrict([0, 1])
        assert sub.sites is not None
        assert sub.sites.coords.shape == (2, 2)

    def test_validation(self):
        with pytest.raises(ValueError):
            MixtureModel(Rayleigh(), np.array([[1.0, 0.2], [0.2, 0.9]]))
        with pytest.raises(ValueError):
            MixtureModel.from_rho(Rayleigh(), 1.0)
        with pytest.raises(TypeError):
            MixtureModel("rayleigh", np.eye(2))
        m = MixtureModel(Rayleigh(), equi_corr(2, 0.3))
        with pytest.raises(ValueError):
            m.joint_pdf([0.1, 0.2, 0.3])
        with pytest.raises(ValueError):
            m.partial_cdf([0.1, 0.2], [])
        with pytest.raises(ValueError):
            m.marginal_quantile(0.0)
        with pytest.raises(ValueError):
            m.marginal_cdf(0.1, site=5)

    def test_nonconvergence_warns(self):
        # tolerance beyond machine precision with a starved panel budget
        cfg = QuadratureConfig(rtol=1e-15, atol=0.0, max_panels=4)
        m = MixtureModel(StudentRadial(2.0), np.eye(1), config=cfg)
        with pytest.warns(RuntimeWarning):
            m.marginal_cdf(1e6)

    def test_bounded_support_law(self):
        # negative shape: scale support is [0, 2]
        m = MixtureModel(GpdScale(-0.5), np.eye(1))
        p = np.array([0.05, 0.5, 0.95])
        q = m.marginal_quantile(p)
        np.testing.assert_allclose(m.marginal_cdf(q), p, rtol=1e-9)

    def test_free_function_wrappers(self):
        from scalemix import mixture as mx
        m = MixtureModel(Rayleigh(), equi_corr(2, 0.3))
        x = np.array([0.4, 0.9])
        assert mx.joint_cdf(m, x) == m.joint_cdf(x)
        assert mx.joint_pdf(m, x) == m.joint_pdf(x)
        assert mx.marginal_cdf(m, 0, 0.4) == m.marginal_cdf(0.4)
        assert mx.marginal_pdf(m, 1, 0.4) == m.marginal_pdf(0.4)
        assert mx.marginal_quantile(m, 0, 0.3) == m.marginal_quantile(0.3)
        assert mx.partial_cdf(m, x, [0]) == m.partial_cdf(x, [0])
        u = np.array([0.4, 0.6])
        assert mx.copula_cdf(m, u) == m.copula_cdf(u)
        assert mx.copula_pdf(m, u) == m.copula_pdf(u)
        assert mx.copula_partial(m, u, [1]) == m.copula_partial(u, [1])
