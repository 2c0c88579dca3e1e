"""Tests for tail-dependence coefficients, limits, and tail expansions."""

import math

import numpy as np
import pytest
from scipy import integrate

from scalemix import taildep as td
from scalemix.mixture import MixtureModel
from scalemix.quadrature import QuadratureConfig
from scalemix.radial import (
    Dirac,
    ExtWeibull,
    GpdScale,
    Rayleigh,
    StudentRadial,
    tail_classify,
)


def pair_model(law, rho, **kw):
    sig = np.array([[1.0, rho], [rho, 1.0]])
    return MixtureModel(law, sig, **kw)


class TestLimitFormulas:
    def test_chi_regvar_pinned(self):
        # t CDF with 2 df has the closed form 1/2 + x / (2 sqrt(2 + x^2)),
        # giving an independent route to the gamma=1, rho=0 value
        x = math.sqrt(2.0)
        oracle = 2.0 * (1.0 - (0.5 + x / (2.0 * math.sqrt(2.0 + x * x))))
        assert td.chi_limit_regvar(1.0, 0.0) == pytest.approx(oracle, abs=1e-14)
        assert td.chi_limit_regvar(1.0, 0.0) == pytest.approx(0.2929, abs=1e-4)

    def test_chi_regvar_limits(self):
        assert td.chi_limit_regvar(1.0, 1 - 1e-12) == pytest.approx(1.0, abs=1e-5)
        assert td.chi_limit_regvar(400.0, 0.5) < 1e-6

    def test_chi_regvar_monotone_in_rho(self):
        vals = [td.chi_limit_regvar(1.0, r) for r in [-0.5, 0.0, 0.5, 0.9]]
        assert np.all(np.diff(vals) > 0)

    def test_chibar_weibull_pinned(self):
        assert td.chibar_limit_weibull(1.0, 0.0) == pytest.approx(
            2.0 * 0.5 ** (1.0 / 3.0) - 1.0, abs=1e-14)
        assert td.chibar_limit_weibull(1.0, 0.0) == pytest.approx(0.5874, abs=1e-4)
        assert td.chibar_limit_weibull(2.0, 0.6) == pytest.approx(
            2.0 * 0.8**0.5 - 1.0, abs=1e-14)

    def test_chibar_bounded_limit(self):
        assert td.chibar_limit_weibull(np.inf, 0.4) == 0.4
        # large beta approaches the bounded value continuously
        assert td.chibar_limit_weibull(1e6, 0.4) == pytest.approx(0.4, abs=1e-4)

    def test_validation(self):
        with pytest.raises(ValueError):
            td.chi_limit_regvar(0.0, 0.5)
        with pytest.raises(ValueError):
            td.chi_limit_regvar(1.0, 1.0)
        with pytest.raises(ValueError):
            td.chibar_limit_weibull(-1.0, 0.0)


class TestWeibullAsymptote:
    def test_eta_rayleigh(self):
        ta = td.weibull_tail_asymptote(tail_classify(Rayleigh()), 0.0)
        assert ta.eta == pytest.approx(math.sqrt(0.5), abs=1e-14)
        assert 1.0 / ta.eta == pytest.approx(1.414, abs=1e-3)
        assert ta.regime == "weibull-type"
        assert ta.chi == 0.0

    def test_chibar_consistency(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            beta = float(rng.uniform(0.2, 4.0))
            rho = float(rng.uniform(-0.9, 0.9))
            ta = td.weibull_tail_asymptote(
                tail_classify(ExtWeibull(beta, 1.1)), rho)
            assert ta.chibar == pytest.approx(
                td.chibar_limit_weibull(beta, rho), abs=1e-12)

    def test_eta_closed_form(self):
        # eta from the starred composition equals {(1+rho)/2}^{beta/(beta+2)}
        for beta, rho in [(0.5, 0.3), (2.0, -0.2), (3.5, 0.8)]:
            ta = td.weibull_tail_asymptote(tail_classify(ExtWeibull(beta, 0.7)), rho)
            assert ta.eta == pytest.approx(
                ((1 + rho) / 2) ** (beta / (beta + 2)), rel=1e-13)

    def test_product_tail_against_quadrature(self):
        # the starred prefactor, exponent, and rate must match a direct
        # numerical integration of P(R * R_W > r) deep in the tail
        law = ExtWeibull(1.0, 1.0)
        wt = tail_classify(law)
        a1, b1, g1, d1 = wt.alpha, wt.beta, wt.gamma, wt.delta
        frac = b1 / (b1 + 2.0)
        amp = (b1 * d1) ** (1.0 / (b1 + 2.0))
        alpha_s = math.sqrt(2 * math.pi) * math.sqrt(1.0 / (b1 + 2)) * a1 * amp ** (1 - g1)
        beta_s = 2 * b1 / (b1 + 2)
        gamma_s = (2 * g1 + b1) / (b1 + 2)
        delta_s = (d1 ** (1 - frac) * 0.5 ** frac
                   * ((2 / b1) ** frac + (b1 / 2) ** (1 - frac)))

        def log_sf_product(r):
            f = lambda s: np.exp(law.logsf(r / s)) * s * np.exp(-s * s / 2)
            v = integrate.quad(f, 0, np.inf, epsabs=1e-300, epsrel=1e-11,
                               limit=400)[0]
            return math.log(v)

        errs = []
        for r in [50.0, 200.0, 800.0]:
            exact = log_sf_product(r)
            asym = math.log(alpha_s) + gamma_s * math.log(r) - delta_s * r ** beta_s
            errs.append(abs(exact - asym) / abs(exact))
        assert errs[-1] < 2e-4
        assert errs[0] < 2e-3
        assert errs == sorted(errs, reverse=True)

    def test_k1_k2_rayleigh(self):
        # beta=2, gamma=0, delta=1/2, alpha=1 scale: starred values are
        # beta*=1, gamma*=1/2, so K2 = (1-1/eta)/2 + 1/(2 eta) - 1 = -1/2
        ta = td.weibull_tail_asymptote(tail_classify(Rayleigh()), 0.0)
        assert ta.k2 == pytest.approx(-0.5, abs=1e-14)
        assert ta.constant > 0.0

    def test_dispatcher(self):
        ta = td.tail_asymptote(StudentRadial(1.0), 0.0)
        assert ta.regime == "regularly-varying"
        assert ta.chi == pytest.approx(td.chi_limit_regvar(1.0, 0.0), abs=1e-14)
        assert ta.chibar == 1.0 and ta.eta == 1.0
        ta = td.tail_asymptote(Dirac(2.0), 0.5)
        assert ta.regime == "bounded"
        assert ta.eta == 0.75 and ta.chibar == 0.5 and ta.chi == 0.0
        ta = td.tail_asymptote(GpdScale(0.5), 0.0)
        assert ta.regime == "regularly-varying"
        assert ta.chi == pytest.approx(td.chi_limit_regvar(2.0, 0.0), abs=1e-14)
        ta = td.tail_asymptote(ExtWeibull(1.0, 1.0), 0.3)
        assert ta.regime == "weibull-type"

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            td.TailAsymptote(eta=1.0, chi=0.0, chibar=1.0, k2=None,
                             constant=None, regime="regularly-varying")
        with pytest.raises(ValueError):
            td.TailAsymptote(eta=0.8, chi=0.1, chibar=0.6, k2=None,
                             constant=None, regime="weibull-type")
        with pytest.raises(ValueError):
            td.TailAsymptote(eta=1.5, chi=0.0, chibar=1.0, k2=None,
                             constant=None, regime="bounded")


class TestParametricLevels:
    def test_true_independence(self):
        m = pair_model(Dirac(1.0), 0.0)
        for u in [0.5, 0.9, 0.99]:
            assert td.chi_u(m, u) == pytest.approx(0.0, abs=1e-12)
            assert td.chibar_u(m, u) == pytest.approx(0.0, abs=1e-12)
            assert td.cond_exceed_prob(m, u) == pytest.approx(1 - u, rel=1e-10)

    def test_survival_identity_consistency(self):
        # chi from the direct copula value and from the reflected survival
        # route must agree; tight quadrature makes both routes exact
        cfg = QuadratureConfig(rtol=1e-13, atol=0.0, max_panels=4096)
        for law in [StudentRadial(3.0), ExtWeibull(1.0, 1.0)]:
            m = pair_model(law, 0.5, config=cfg)
            u = 0.95
            chi_direct = 2.0 - math.log(m.copula_cdf([u, u])) / math.log(u)
            assert td.chi_u(m, u) == pytest.approx(chi_direct, abs=1e-10)

    def test_regvar_chi_converges_to_limit(self):
        u = 1 - 1e-6
        for law, gamma in [(StudentRadial(1.0), 1.0), (GpdScale(1.0), 1.0),
                           (ExtWeibull(0.0, 1.0), 1.0), (StudentRadial(3.0), 3.0)]:
            for rho in [0.0, 0.5]:
                m = pair_model(law, rho)
                assert td.chi_u(m, u) == pytest.approx(
                    td.chi_limit_regvar(gamma, rho), abs=0.02), (law, rho)

    def test_weibull_loglog_slope(self):
        for beta in [0.5, 1.0, 2.0]:
            for rho in [0.0, 0.5]:
                eta = ((1 + rho) / 2) ** (beta / (beta + 2))
                m = pair_model(ExtWeibull(beta, 1.0), rho)
                xs = np.geomspace(1e3, 1e6, 8)
                log_cbar = [math.log(td.survival_diag(m, 1 - 1 / x)) for x in xs]
                slope = np.polyfit(np.log(xs), log_cbar, 1)[0]
                assert abs(slope + 1 / eta) * eta < 0.05, (beta, rho)

    def test_gaussian_case(self):
        # chi vanishes; chibar climbs toward rho but converges at a log
        # rate, sitting near 0.43 at u = 1e-5 from the rho = 0.5 limit
        u = 1 - 1e-5
        m = pair_model(Dirac(1.0), 0.5)
        assert abs(td.chi_u(m, u)) < 0.05
        grid = np.array([0.9, 0.99, 0.999, 0.9999, u])
        cb = td.chibar_u(m, grid)
        assert np.all(np.diff(cb) > 0)
        assert cb[-1] < 0.5
        assert cb[-1] == pytest.approx(0.43, abs=0.01)

    def test_model2_curve_shapes(self):
        rho = math.exp(-0.5)
        m = pair_model(ExtWeibull(1.0, 1.0), rho)
        grid = np.array([0.9, 0.99, 0.9999])
        chi = td.chi_u(m, grid)
        assert np.all(np.diff(chi) < 0)
        cb = td.chibar_u(m, grid)
        lim = td.chibar_limit_weibull(1.0, rho)
        assert np.all(np.diff(cb) > 0)
        assert np.all(cb < lim)

    def test_deep_level_stays_finite(self):
        m = pair_model(ExtWeibull(1.0, 1.0), 0.3)
        val = td.chibar_u(m, 1 - 1e-8)
        assert np.isfinite(val)
        m2 = pair_model(StudentRadial(2.0), 0.3)
        assert np.isfinite(td.chibar_u(m2, 1 - 1e-8))

    def test_underflow_flagged(self):
        with pytest.warns(RuntimeWarning):
            bad = td._flag_underflow(np.array([0.0, 1e-10]), np.array([0.99, 0.9]))
        assert bad.tolist() == [True, False]

    def test_requires_pair(self):
        m = MixtureModel(Rayleigh(), np.eye(3))
        with pytest.raises(ValueError):
            td.chi_u(m, 0.9)

    def test_level_validation(self):
        m = pair_model(Rayleigh(), 0.3)
        with pytest.raises(ValueError):
            td.chi_u(m, 1.0)
        with pytest.raises(ValueError):
            td.chibar_u(m, [0.5, 0.0])

    def test_curve_builder(self):
        m = pair_model(Rayleigh(), 0.3)
        grid = np.array([0.9, 0.95, 0.99])
        curve = td.parametric_tail_curve(m, grid, which="chi")
        assert curve.estimator == "parametric"
        np.testing.assert_allclose(curve.values, td.chi_u(m, grid), rtol=1e-12)
        with pytest.raises(ValueError):
            td.parametric_tail_curve(m, grid, which="nope")


class TestEmpirical:
    def test_hand_counted_chibar(self):
        data = np.array([[0.2, 0.3], [0.96, 0.97], [0.5, 0.99], [0.98, 0.6]])
        with pytest.warns(RuntimeWarning):
            curve = td.empirical_chibar_u(data, 0.95)
        oracle = 2.0 * math.log(0.05) / math.log(0.25) - 1.0
        assert curve.values[0] == pytest.approx(oracle, abs=1e-12)
        assert curve.values[0] == pytest.approx(3.322, abs=1e-3)
        assert curve.flags[0]

    def test_independent_uniforms(self):
        rng = np.random.default_rng(11)
        data = rng.random((100_000, 2))
        chi = td.empirical_chi_u(data, 0.95)
        assert abs(chi.values[0]) < 0.03
        assert chi.lower[0] <= chi.values[0] <= chi.upper[0]

    def test_diagonal_data(self):
        u_all = np.random.default_rng(5).random(50_000)
        data = np.column_stack([u_all, u_all])
        chi = td.empirical_chi_u(data, 0.9)
        assert chi.values[0] == pytest.approx(1.0, abs=0.02)

    def test_missing_rows_dropped(self):
        data = np.array([[0.2, 0.3], [np.nan, 0.9], [0.96, 0.97],
                         [0.5, np.nan], [0.98, 0.99]])
        chi = td.empirical_chi_u(data, 0.5)
        # three complete rows, one joint non-exceedance
        assert chi.values[0] == pytest.approx(
            2.0 - math.log(1.0 / 3.0) / math.log(0.5), abs=1e-12)

    def test_zero_counts_flagged(self):
        data = np.full((10, 2), 0.99)
        with pytest.warns(RuntimeWarning):
            chi = td.empirical_chi_u(data, 0.5)
        assert np.isnan(chi.values[0]) and chi.flags[0]
        with pytest.warns(RuntimeWarning):
            cb = td.empirical_chibar_u(1 - data, 0.5)
        assert np.isnan(cb.values[0]) and cb.flags[0]

    def test_band_width_shrinks(self):
        rng = np.random.default_rng(2)
        small = rng.random((500, 2))
        big = rng.random((50_000, 2))
        c_small = td.empirical_chi_u(small, 0.9)
        c_big = td.empirical_chi_u(big, 0.9)
        w_small = (c_small.upper - c_small.lower)[0]
        w_big = (c_big.upper - c_big.lower)[0]
        assert w_big < w_small

    def test_grid_input(self):
        rng = np.random.default_rng(7)
        data = rng.random((20_000, 2))
        grid = np.array([0.9, 0.95, 0.99])
        curve = td.empirical_chi_u(data, grid)
        assert curve.values.shape == (3,)
        assert curve.estimator == "empirical"


class TestTailCurve:
    def test_invariants(self):
        with pytest.raises(ValueError):
            td.TailCurve([0.9, 0.9], [0.1, 0.2])
        with pytest.raises(ValueError):
            td.TailCurve([0.9, 1.0], [0.1, 0.2])
        with pytest.raises(ValueError):
            td.TailCurve([0.9, 0.95], [0.5, 0.5], lower=[0.6, 0.4],
                         upper=[0.7, 0.6])
        with pytest.raises(ValueError):
            td.TailCurve([0.9], [0.5], estimator="bayesian")
        with pytest.raises(ValueError):
            td.TailCurve([0.9], [0.5], lower=[0.4], upper=None)

    def test_csv_roundtrip(self, tmp_path):
        curve = td.TailCurve([0.9, 0.95, 0.99], [0.3, 0.25, 0.2],
                             lower=[0.2, 0.15, 0.1], upper=[0.4, 0.35, 0.3],
                             estimator="empirical")
        path = tmp_path / "curve.csv"
        curve.to_csv(path)
        back = td.TailCurve.from_csv(path)
        np.testing.assert_allclose(back.levels, curve.levels)
        np.testing.assert_allclose(back.values, curve.values)
        np.testing.assert_allclose(back.lower, curve.lower)
        np.testing.assert_allclose(back.upper, curve.upper)
        assert back.estimator == "empirical"

    def test_csv_no_band(self, tmp_path):
        curve = td.TailCurve([0.9, 0.95], [0.3, 0.25])
        path = tmp_path / "c.csv"
        curve.to_csv(path)
        back = td.TailCurve.from_csv(path)
        assert back.lower is None and back.upper is None
        assert back.estimator == "parametric"

    def test_csv_schema_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            td.TailCurve.from_csv(path)
