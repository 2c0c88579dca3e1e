"""Finite-dimensional law of the scale-mixture field X = R * W.

A `MixtureModel` couples a positive scale law R with a correlation matrix
for the Gaussian vector W and evaluates every distributional quantity by
one-dimensional quadrature over the latent scale:

* joint CDF        G(x)  = integral of Phi_D(x/r; Sigma) dF(r)
* joint density    g(x)  = integral of phi_D(x/r; Sigma) r^-D dF(r)
* partial CDF      G_I(x), the mixed derivative of G in the coordinates I
* exchangeable margins G_k, g_k and their quantiles
* the induced copula C, its density, and its partial derivatives

The integrals are computed after the substitution r = Q(t) with Q the scale
quantile function, which maps every support onto the open unit interval and
cancels the scale density from the integrand. A point-mass scale law skips
quadrature entirely and reduces to exact Gaussian formulas.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .correlation import CorrelationModel, SiteSet, build_correlation
from .gaussian import (
    _lattice,
    _reorder_cholesky,
    bvn_cdf,
    chol_lower,
    conditional_gaussian,
    genz_rowwise,
    mvn_cdf,
    mvn_cdf_batch,
    stable_seed,
)
from .quadrature import QuadratureConfig, integrate_unit
from .radial import Dirac, RadialLaw, RegularlyVarying, tail_classify
from .validation import as_float_array, check_indices

__all__ = ["MixtureModel", "joint_cdf", "joint_pdf", "marginal_cdf",
           "marginal_pdf", "marginal_quantile", "partial_cdf",
           "copula_cdf", "copula_pdf", "copula_partial"]

_LOG_2PI = math.log(2.0 * math.pi)
_CLIP = 38.0


def _default_config() -> QuadratureConfig:
    # pure relative control: tail quantities live on scales far below any
    # sensible absolute floor
    return QuadratureConfig(rtol=1e-8, atol=0.0, max_panels=2048)


class MixtureModel:
    """Distribution of (R*W_1, ..., R*W_D) for one scale law and correlation.

    Parameters
    ----------
    radial : RadialLaw
        Law of the positive scale R.
    sigma : array_like, shape (D, D)
        Correlation matrix of the Gaussian vector W.
    config : QuadratureConfig, optional
        Adaptive quadrature settings for the latent-scale integrals.
    seed : int
        Base seed mixed into every internal quasi Monte Carlo call; all
        evaluations are deterministic functions of (inputs, seed).
    sites, correlation : optional
        Provenance of ``sigma`` when built from a spatial configuration.
    """

    def __init__(self, radial: RadialLaw, sigma, *, config: QuadratureConfig | None = None,
                 seed: int = 0, sites: SiteSet | None = None,
                 correlation: CorrelationModel | None = None):
        if not isinstance(radial, RadialLaw):
            raise TypeError("radial must be a RadialLaw instance")
        sigma = as_float_array(sigma, "sigma", ndim=2)
        if sigma.shape[0] != sigma.shape[1]:
            raise ValueError("sigma must be square")
        if not np.allclose(np.diag(sigma), 1.0, atol=1e-12):
            raise ValueError("sigma must be a correlation matrix (unit diagonal)")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        self.radial = radial
        self.sigma = 0.5 * (sigma + sigma.T)
        self.dim = sigma.shape[0]
        self.config = config or _default_config()
        self.seed = int(seed)
        self.sites = sites
        self.correlation = correlation
        self._chol = chol_lower(self.sigma) if self.dim > 1 else np.ones((1, 1))
        self._logdet = 2.0 * float(np.sum(np.log(np.diag(self._chol))))
        tail = tail_classify(radial)
        # sampling warp exponent for lattice integration: heavier scale
        # tails need nodes pushed harder toward t = 1
        self._kappa = 5.0 if isinstance(tail, RegularlyVarying) else 2.0

    # ------------------------------------------------------------ builders

    @classmethod
    def from_sites(cls, radial: RadialLaw, sites: SiteSet, correlation: CorrelationModel,
                   *, config: QuadratureConfig | None = None, seed: int = 0) -> "MixtureModel":
        """Model over a site set with correlation from the distance model."""
        sigma = build_correlation(sites, correlation)
        return cls(radial, sigma, config=config, seed=seed,
                   sites=sites, correlation=correlation)

    @classmethod
    def from_rho(cls, radial: RadialLaw, rho: float, *,
                 config: QuadratureConfig | None = None, seed: int = 0) -> "MixtureModel":
        """Bivariate model at a single correlation value."""
        rho = float(rho)
        if not -1.0 < rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        return cls(radial, np.array([[1.0, rho], [rho, 1.0]]), config=config, seed=seed)

    def restrict(self, indices) -> "MixtureModel":
        """Marginal model on a subset of coordinates (same scale law)."""
        idx = check_indices(indices, "indices", self.dim)
        sub_sites = self.sites.subset(idx) if self.sites is not None else None
        return MixtureModel(self.radial, self.sigma[np.ix_(idx, idx)],
                            config=self.config, seed=self.seed,
                            sites=sub_sites, correlation=self.correlation)

    def pair(self, i: int, j: int) -> "MixtureModel":
        return self.restrict([i, j])

    def __repr__(self):
        return f"MixtureModel({self.radial!r}, D={self.dim})"

    # ------------------------------------------------------------ internals

    def _point(self, x, name: str = "x") -> np.ndarray:
        x = as_float_array(x, name, ndim=1, allow_nan=False)
        if x.size != self.dim:
            raise ValueError(f"{name} must have length {self.dim}")
        return x

    def _quadform(self, x: np.ndarray, chol: np.ndarray | None = None) -> float:
        z = solve_triangular(self._chol if chol is None else chol, x, lower=True)
        return float(z @ z)

    def _scale_of_t(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(self.radial.quantile(t))

    def _density_hint(self, q0: float, d: int) -> list | None:
        """Location of the integrand peak of the density-type integrals."""
        if q0 <= 0.0:
            return None
        t = float(self.radial.cdf(math.sqrt(q0 / d)))
        if 1e-12 < t < 1.0 - 1e-12:
            return [t]
        return None

    def _integrate(self, f, hints=None):
        res = integrate_unit(f, self.config, warn=False, hints=hints)
        if not res.converged:
            warnings.warn(
                f"latent-scale quadrature did not converge; achieved error "
                f"{np.max(res.error):.3e}", RuntimeWarning, stacklevel=3)
        return res.value

    # ------------------------------------------------------------ joint CDF

    def joint_cdf(self, x) -> float:
        """P(X_1 <= x_1, ..., X_D <= x_D).

        Infinite components are allowed: -inf gives 0, +inf marginalizes
        the coordinate out.
        """
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size != self.dim:
            raise ValueError(f"x must be a vector of length {self.dim}")
        if np.isnan(x).any():
            raise ValueError("x contains NaN")
        if np.isneginf(x).any():
            return 0.0
        finite = ~np.isposinf(x)
        if not finite.any():
            return 1.0
        if not finite.all():
            return self.restrict(np.flatnonzero(finite)).joint_cdf(x[finite])

        if self.radial.is_dirac:
            return self._gaussian_cdf(x / self.radial.r0)
        if self.dim == 1:
            return float(self.marginal_cdf(x[0]))
        if self.dim == 2:
            rho = self.sigma[0, 1]

            def f(t):
                r = self._scale_of_t(t)
                return np.asarray(bvn_cdf(x[0] / r, x[1] / r, rho))

            return float(np.clip(self._integrate(f), 0.0, 1.0))
        return self._qmc_joint_cdf(x)

    def _gaussian_cdf(self, z: np.ndarray) -> float:
        if self.dim == 1:
            return float(ndtr(z[0]))
        if self.dim == 2:
            return float(bvn_cdf(z[0], z[1], self.sigma[0, 1]))
        est = mvn_cdf(z, self.sigma, abseps=1e-8, releps=1e-8,
                      seed=stable_seed("dirac-cdf", z, self.sigma, self.seed))
        return est.value

    def _qmc_joint_cdf(self, x: np.ndarray, abseps: float = 1.5e-6,
                       releps: float = 0.0) -> float:
        """Joint lattice integral over (scale, sequential-conditioning block)."""
        b_med = np.clip(x / float(self.radial.quantile(0.5)), -_CLIP, _CLIP)
        lower, perm = _reorder_cholesky(self.sigma, b_med)
        xp = x[perm]
        rng = np.random.default_rng(
            stable_seed("jointcdf", x, self.sigma, self.seed))
        shifts = rng.random((10, self.dim))
        n = 2**13
        while True:
            ests = np.empty(shifts.shape[0])
            for k in range(shifts.shape[0]):
                pts = _lattice(n, self.dim, shifts[k])
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = self._scale_of_t(pts[:, 0])
                    b = np.clip(xp[None, :] / r[:, None], -_CLIP, _CLIP)
                b[~np.isfinite(b)] = 0.0  # r = inf nodes contribute Phi(0,...)
                ests[k] = genz_rowwise(lower, b, pts[:, 1:]).mean()
            value = float(ests.mean())
            se = float(ests.std(ddof=1) / math.sqrt(len(ests)))
            if se <= max(abseps, releps * abs(value)) or n >= 2**19:
                break
            n *= 2
        if se > max(abseps, releps * abs(value)):
            warnings.warn(f"joint CDF lattice integral reached n={n} with "
                          f"standard error {se:.2e}", RuntimeWarning, stacklevel=3)
        return float(np.clip(value, 0.0, 1.0))

    # ---------------------------------------------------------- joint density

    def joint_pdf(self, x) -> float:
        """Density of X at ``x``; strictly positive for non-degenerate laws."""
        x = self._point(x)
        if self.radial.is_dirac:
            r0 = self.radial.r0
            return math.exp(self._log_gauss_pdf(x / r0) - self.dim * math.log(r0))
        q0 = self._quadform(x)
        lognorm = -0.5 * (self.dim * _LOG_2PI + self._logdet)
        d = self.dim

        def f(t):
            r = self._scale_of_t(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                le = lognorm - q0 / (2.0 * r * r) - d * np.log(r)
            return np.exp(np.where(np.isnan(le), -np.inf, le))

        return float(self._integrate(f, hints=self._density_hint(q0, d)))

    def _log_gauss_pdf(self, z: np.ndarray) -> float:
        return -0.5 * (self.dim * _LOG_2PI + self._logdet + self._quadform(z))

    # ------------------------------------------------------------- margins

    def _marginal_sf_pos(self, y: np.ndarray) -> np.ndarray:
        """P(X_k > y) for y >= 0, accurate in relative terms far in the tail."""
        y = np.atleast_1d(np.asarray(y, dtype=float))

        def f(t):
            r = self._scale_of_t(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                z = -y[None, :] / r[:, None]
            z[~np.isfinite(z)] = 0.0
            return ndtr(z)

        out = np.asarray(self._integrate(f))
        return np.atleast_1d(out)

    def marginal_cdf(self, x, site: int = 0):
        """Marginal distribution function (identical across sites)."""
        self._site_ok(site)
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xa = np.atleast_1d(x)
        if self.radial.is_dirac:
            out = ndtr(xa / self.radial.r0)
        else:
            out = np.empty_like(xa)
            neg, pos = xa < 0.0, xa > 0.0
            out[xa == 0.0] = 0.5
            if neg.any():
                out[neg] = self._marginal_sf_pos(-xa[neg])
            if pos.any():
                out[pos] = 1.0 - self._marginal_sf_pos(xa[pos])
        return float(out[0]) if scalar else out

    def marginal_pdf(self, x, site: int = 0):
        """Marginal density (identical across sites)."""
        self._site_ok(site)
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xa = np.atleast_1d(x)
        if self.radial.is_dirac:
            r0 = self.radial.r0
            out = np.exp(-0.5 * (xa / r0) ** 2) / (r0 * math.sqrt(2.0 * math.pi))
            return float(out[0]) if scalar else out
        hints = sorted({float(self.radial.cdf(abs(v))) for v in xa if abs(v) > 0.0})
        hints = [h for h in hints if 1e-12 < h < 1.0 - 1e-12] or None

        def f(t):
            r = self._scale_of_t(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                le = -0.5 * (xa[None, :] / r[:, None]) ** 2 - np.log(r[:, None])
            return np.exp(np.where(np.isnan(le), -np.inf, le)) / math.sqrt(2.0 * math.pi)

        out = np.atleast_1d(np.asarray(self._integrate(f, hints=hints)))
        return float(out[0]) if scalar else out

    def marginal_quantile(self, p, site: int = 0):
        """Inverse marginal CDF by bracketed root search (tail-accurate)."""
        self._site_ok(site)
        p = np.asarray(p, dtype=float)
        if ((p <= 0.0) | (p >= 1.0)).any():
            raise ValueError("probabilities must lie strictly inside (0, 1)")
        scalar = p.ndim == 0
        pa = np.atleast_1d(p)
        if self.radial.is_dirac:
            out = self.radial.r0 * ndtri(pa)
            return float(out[0]) if scalar else out
        out = np.empty_like(pa)
        for i, pi in enumerate(pa):
            if pi == 0.5:
                out[i] = 0.0
            elif pi > 0.5:
                out[i] = self._sf_inverse(1.0 - pi)
            else:
                out[i] = -self._sf_inverse(pi)
        return float(out[0]) if scalar else out

    def _sf_inverse(self, s: float) -> float:
        """Positive y with P(X_k > y) = s, for s in (0, 0.5)."""
        log_s = math.log(s)

        def h(y):
            return math.log(float(self._marginal_sf_pos(y)[0])) - log_s

        # Bracket expansion overshoots past the root, where the survival
        # integral can lose relative precision that is irrelevant there
        # (only the sign of h matters).  Search quietly, then re-evaluate
        # at the root with warnings live so a real accuracy problem at
        # the answer still surfaces.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            lo, hi = 0.0, float(self.radial.quantile(0.75))
            for _ in range(200):
                if h(hi) < 0.0:
                    break
                lo, hi = hi, hi * 2.0
            else:  # pragma: no cover - survival always reaches s eventually
                raise RuntimeError("marginal quantile bracket expansion failed")
            root = brentq(h, lo, hi, xtol=1e-12, rtol=4.0 * np.finfo(float).eps)
        self._marginal_sf_pos(root)
        return root

    def _site_ok(self, site: int) -> None:
        if not 0 <= int(site) < self.dim:
            raise ValueError(f"site index {site} outside 0..{self.dim - 1}")

    # ----------------------------------------------------------- partial CDF

    def partial_cdf(self, x, indices) -> float:
        """Mixed derivative of the joint CDF in the coordinates ``indices``.

        Equals the joint density when every coordinate is differentiated,
        and the marginal density in dimension one.
        """
        x = self._point(x)
        idx = check_indices(indices, "indices", self.dim)
        if idx.size == self.dim:
            return self.joint_pdf(x)
        rest = np.setdiff1d(np.arange(self.dim), idx)
        cond = conditional_gaussian(self.sigma, idx, x[idx])
        m = x[rest] - cond.mean
        cov_c = cond.cov
        d1 = idx.size
        chol_ii = chol_lower(self.sigma[np.ix_(idx, idx)]) if d1 > 1 else \
            np.ones((1, 1))
        z = solve_triangular(chol_ii, x[idx], lower=True)
        q0 = float(z @ z)
        lognorm = -0.5 * (d1 * _LOG_2PI) - float(np.sum(np.log(np.diag(chol_ii))))
        dc = rest.size
        sc = np.sqrt(np.diag(cov_c))
        if dc == 2:
            rho_c = cov_c[0, 1] / (sc[0] * sc[1])
        if dc >= 3:
            corr_c = cov_c / np.outer(sc, sc)
            inner_seed = stable_seed("partial", x, idx, self.sigma, self.seed)

        if self.radial.is_dirac:
            r0 = self.radial.r0
            dens = math.exp(lognorm - q0 / (2.0 * r0 * r0) - d1 * math.log(r0))
            if dc == 0:
                return dens
            args0 = m / (r0 * sc)
            if dc == 1:
                return dens * float(ndtr(args0[0]))
            if dc == 2:
                return dens * float(bvn_cdf(args0[0], args0[1], rho_c))
            est = mvn_cdf(args0, corr_c, abseps=1e-9, releps=1e-9,
                          seed=inner_seed)
            return dens * est.value

        def f(t):
            r = self._scale_of_t(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                le = lognorm - q0 / (2.0 * r * r) - d1 * np.log(r)
                dens = np.exp(np.where(np.isnan(le), -np.inf, le))
                if dc == 0:
                    return dens
                args = m[None, :] / (r[:, None] * sc[None, :])
            args = np.clip(np.nan_to_num(args, nan=0.0,
                                         posinf=_CLIP, neginf=-_CLIP),
                           -_CLIP, _CLIP)
            if dc == 1:
                return dens * ndtr(args[:, 0])
            if dc == 2:
                return dens * np.asarray(bvn_cdf(args[:, 0], args[:, 1], rho_c))
            vals = mvn_cdf_batch(args, corr_c, n_points=2048, n_shifts=2,
                                 seed=inner_seed)
            return dens * vals

        return float(self._integrate(f, hints=self._density_hint(q0, d1)))

    # --------------------------------------------------------------- copula

    def _copula_point(self, u) -> np.ndarray:
        u = as_float_array(np.asarray(u, dtype=float), "u", ndim=1)
        if u.size != self.dim:
            raise ValueError(f"u must have length {self.dim}")
        return u

    def copula_cdf(self, u) -> float:
        """Copula C(u) = G(G_1^{-1}(u_1), ..., G_D^{-1}(u_D))."""
        u = self._copula_point(u)
        if ((u < 0.0) | (u > 1.0)).any():
            raise ValueError("u must lie in [0, 1]")
        if (u == 0.0).any():
            return 0.0
        interior = u < 1.0
        if not interior.any():
            return 1.0
        if not interior.all():
            return self.restrict(np.flatnonzero(interior)).copula_cdf(u[interior])
        x = self.marginal_quantile(u)
        return self.joint_cdf(x)

    def copula_pdf(self, u) -> float:
        """Copula density c(u) = g(x) / prod g_k(x_k) at x = G^{-1}(u)."""
        u = self._copula_point(u)
        if ((u <= 0.0) | (u >= 1.0)).any():
            raise ValueError("u must lie strictly inside (0, 1)")
        x = np.atleast_1d(self.marginal_quantile(u))
        g = self.joint_pdf(x)
        gk = np.atleast_1d(self.marginal_pdf(x))
        return float(g / np.prod(gk))

    def copula_partial(self, u, indices) -> float:
        """Partial derivative of C in the coordinates ``indices``.

        Computed as G_I(x) / prod_{k in I} g_k(x_k) at x = G^{-1}(u), the
        partially censored likelihood contribution shape.
        """
        u = self._copula_point(u)
        idx = check_indices(indices, "indices", self.dim)
        if ((u <= 0.0) | (u >= 1.0)).any():
            raise ValueError("u must lie strictly inside (0, 1)")
        x = np.atleast_1d(self.marginal_quantile(u))
        gi = self.partial_cdf(x, idx)
        gk = np.atleast_1d(self.marginal_pdf(x[idx]))
        return float(gi / np.prod(gk))


# ------------------------------------------------------------ free functions

def joint_cdf(model: MixtureModel, x) -> float:
    """Joint distribution function of the mixture at ``x``."""
    return model.joint_cdf(x)


def joint_pdf(model: MixtureModel, x) -> float:
    """Joint density of the mixture at ``x``."""
    return model.joint_pdf(x)


def marginal_cdf(model: MixtureModel, k: int, x):
    return model.marginal_cdf(x, site=k)


def marginal_pdf(model: MixtureModel, k: int, x):
    return model.marginal_pdf(x, site=k)


def marginal_quantile(model: MixtureModel, k: int, p):
    return model.marginal_quantile(p, site=k)


def partial_cdf(model: MixtureModel, x, indices) -> float:
    return model.partial_cdf(x, indices)


def copula_cdf(model: MixtureModel, u) -> float:
    return model.copula_cdf(u)


def copula_pdf(model: MixtureModel, u) -> float:
    return model.copula_pdf(u)


def copula_partial(model: MixtureModel, u, indices) -> float:
    return model.copula_partial(u, indices)
