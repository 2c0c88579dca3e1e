"""Censored pseudo-likelihood for scale-mixture copulas.

Each replicate contributes through one of three cases, determined by
comparing its pseudo-uniform values u (missing components dropped)
against the censoring thresholds v:

1. every component at or below its threshold: log C(v), the copula
   mass of the censoring box;
2. every component above: log c(u), the full copula density;
3. some above (index set I): the I-partial derivative of C at
   u* = max(u, v) componentwise.

Replicates are grouped by (missingness pattern, exceedance set), so
each distinct multivariate integral is evaluated once per parameter
vector, with lattice shifts and variable orderings frozen at the
first evaluation. That keeps the log-likelihood a deterministic and
effectively smooth function of the parameters, which derivative-free
optimizers require.

Marginal quantiles are obtained by inverting a survival grid (one
vectorized latent-scale integral, monotone cubic interpolation, one
Newton correction) and are cached per radial law, since the margins
do not depend on the correlation parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_triangular
from scipy.special import ndtr, ndtri

from .correlation import SiteSet, build_correlation
from .data import PseudoUniformData
from .gaussian import (
    _lattice,
    _reorder_cholesky,
    chol_lower,
    conditional_gaussian,
    genz_rowwise,
    stable_seed,
)
from .mixture import MixtureModel
from .params import ModelFamily, ParamVector, correlation_from, family
from .quadrature import QuadratureConfig, integrate_unit
from .validation import as_float_array

__all__ = [
    "CensorConfig",
    "CensoredLikelihood",
    "LikelihoodConfig",
    "LikelihoodError",
    "censored_loglik",
]

_LOG_2PI = math.log(2.0 * math.pi)
_CLIP = 38.0


@dataclass(frozen=True)
class CensorConfig:
    """Censoring thresholds on the uniform scale.

    Parameters
    ----------
    threshold : float or array_like, default 0.95
        Common threshold, or one value per site.
    """

    threshold: object = 0.95

    def resolve(self, dim: int) -> np.ndarray:
        """Per-site threshold vector of length ``dim``."""
        v = np.asarray(self.threshold, dtype=float)
        if v.ndim == 0:
            v = np.full(dim, float(v))
        if v.shape != (dim,):
            raise ValueError(
                f"threshold must be scalar or length {dim}, got shape {v.shape}")
        if np.isnan(v).any() or ((v <= 0.0) | (v >= 1.0)).any():
            raise ValueError("thresholds must lie strictly inside (0, 1)")
        return v


@dataclass(frozen=True)
class LikelihoodConfig:
    """Numerical settings for likelihood evaluation.

    Attributes
    ----------
    rtol : float
        Relative tolerance of the univariate latent-scale integrals
        (marginal survival grid, marginal and joint densities).
    n_full : int
        Lattice points for each fully censored pattern integral.
    n_censored : int
        Lattice points for each partially censored group integral.
    kappa : float
        Warp strength pushing latent-scale lattice nodes of the
        partially censored integrals toward t = 1, where the scale
        quantile grows and exceedance mass concentrates.
    quantile_grid : int
        Node count of the survival grid used to invert the margins.
    seed : int
        Base seed for the frozen lattice shifts.
    """

    rtol: float = 1e-6
    n_full: int = 8192
    n_censored: int = 512
    kappa: float = 2.0
    quantile_grid: int = 96
    seed: int = 0

    def __post_init__(self):
        if self.n_full < 16 or self.n_censored < 16:
            raise ValueError("lattice sizes must be at least 16")
        if self.quantile_grid < 8:
            raise ValueError("quantile_grid must be at least 8")


class LikelihoodError(ValueError):
    """Non-finite likelihood contribution, tagged with its origin.

    Attributes
    ----------
    replicate : int
        Row index of the offending replicate.
    case : str
        Contribution case ("fully-censored", "density", "partial").
    """

    def __init__(self, message, replicate: int, case: str):
        super().__init__(message)
        self.replicate = int(replicate)
        self.case = case


def _key(mask: np.ndarray) -> bytes:
    return np.packbits(mask).tobytes()


def _clean_limits(b: np.ndarray) -> np.ndarray:
    """Clip Gaussian upper limits, keeping signs of infinite ratios."""
    b = np.clip(b, -_CLIP, _CLIP)
    if b.ndim == 0:
        return np.where(np.isnan(b), 0.0, b)
    b[np.isnan(b)] = 0.0
    return b


class CensoredLikelihood:
    """Evaluator of the censored pseudo-likelihood on fixed data.

    Parameters
    ----------
    data : PseudoUniformData or array_like, shape (n, d)
        Pseudo-uniform observations; NaN marks missing cells.
    sites : SiteSet
        Site collection matching the data columns.
    model_family : str or ModelFamily
        Radial-law family evaluated at each parameter vector.
    censor : CensorConfig, optional
    config : LikelihoodConfig, optional

    Notes
    -----
    Construction classifies every replicate once; repeated calls to
    :meth:`loglik` reuse the grouping, the frozen lattice shifts, the
    per-pattern variable orderings, and the per-radial-law marginal
    tables. ``nonconverged`` counts univariate quadratures that hit
    their panel budget since construction.
    """

    def __init__(self, data, sites: SiteSet, model_family,
                 censor: CensorConfig | None = None,
                 config: LikelihoodConfig | None = None):
        if isinstance(data, PseudoUniformData):
            u = data.values
        else:
            u = PseudoUniformData(
                as_float_array(data, "data", ndim=2, allow_nan=True)).values
        if not isinstance(sites, SiteSet):
            raise TypeError("sites must be a SiteSet")
        if u.shape[1] != len(sites):
            raise ValueError(
                f"data has {u.shape[1]} columns for {len(sites)} sites")
        self.u = u
        self.sites = sites
        self.family = (model_family if isinstance(model_family, ModelFamily)
                       else family(model_family))
        self.censor = censor if censor is not None else CensorConfig()
        self.config = config if config is not None else LikelihoodConfig()
        self.v = self.censor.resolve(u.shape[1])
        self._quad = QuadratureConfig(rtol=self.config.rtol, atol=0.0,
                                      max_panels=512)
        self._rnames = tuple(p.name for p in self.family.radial_params)
        self.nonconverged = 0
        self._perm_cache: dict = {}
        self._radial_cache: dict = {}
        self._classify()

    # ------------------------------------------------------- construction

    def _classify(self) -> None:
        u, v = self.u, self.v
        obs = ~np.isnan(u)
        exceed = obs & np.where(obs, u > v[None, :], False)
        self.case1: dict = {}   # key(o) -> [o, count, first row]
        self.case2: dict = {}   # key(o) -> [o, rows]
        self.case3: dict = {}   # (key(o), key(e)) -> [o, e, rows]
        self.n_skipped = 0
        for i in range(u.shape[0]):
            o, e = obs[i], exceed[i]
            if not o.any():
                self.n_skipped += 1
                continue
            if not e.any():
                rec = self.case1.setdefault(_key(o), [o, 0, i])
                rec[1] += 1
            elif e.sum() == o.sum():
                self.case2.setdefault(_key(o), [o, []])[1].append(i)
            else:
                self.case3.setdefault((_key(o), _key(e)), [o, e, []])[2].append(i)

        # every uniform level whose marginal quantile or density will be
        # needed, collected once so each radial law costs a fixed number
        # of vectorized latent-scale integrals
        levels: set = set()
        for o, _count, _row in self.case1.values():
            levels.update(v[o].tolist())
        for o, rows in self.case2.values():
            levels.update(u[np.ix_(rows, np.flatnonzero(o))].ravel().tolist())
        for o, e, rows in self.case3.values():
            levels.update(v[o & ~e].tolist())
            levels.update(u[np.ix_(rows, np.flatnonzero(e))].ravel().tolist())
        self._levels = np.array(sorted(levels))

    # ------------------------------------------------------------ margins

    def _marginal_tables(self, model: MixtureModel, rkey: tuple):
        """Quantiles and marginal log densities at every needed level."""
        hit = self._radial_cache.get(rkey)
        if hit is not None:
            return hit
        tables = self._build_tables(model)
        if len(self._radial_cache) > 64:
            self._radial_cache.clear()
        self._radial_cache[rkey] = tables
        return tables

    def _build_tables(self, model: MixtureModel):
        levels = self._levels
        if levels.size == 0:
            return np.zeros(0), np.zeros(0)
        if model.radial.is_dirac:
            r0 = model.radial.r0
            x = r0 * ndtri(levels)
            logpdf = -0.5 * (x / r0) ** 2 - math.log(r0) - 0.5 * _LOG_2PI
            return x, logpdf

        s = np.minimum(levels, 1.0 - levels)      # survival targets
        s_min = max(float(s.min()), 1e-300)
        # grid cap that provably covers the deepest target: splitting the
        # radial mass at r_p bounds the survival function by the Gaussian
        # tail below r_p plus the radial tail above it
        p_tail = 0.5 * min(s_min, 0.5)
        r_p = float(model.radial.quantile(1.0 - p_tail))
        y_cap = r_p * float(ndtri(1.0 - p_tail))
        r_med = float(model.radial.quantile(0.5))
        y_lo = min(1e-3 * r_med, 1e-2 * y_cap)
        y = np.geomspace(y_lo, y_cap, self.config.quantile_grid)

        def sf_at(y_pos):
            def f(t):
                r = np.asarray(model.radial.quantile(t))
                with np.errstate(divide="ignore", invalid="ignore"):
                    z = -y_pos[None, :] / r[:, None]
                z[~np.isfinite(z)] = 0.0
                return ndtr(z)

            res = integrate_unit(f, self._quad, warn=False)
            self.nonconverged += 0 if res.converged else 1
            return np.atleast_1d(np.asarray(res.value))

        w = -np.log(sf_at(y))
        # w is increasing in y up to quadrature noise; keep a strictly
        # increasing finite subsequence for the interpolant, which maps
        # w to log y (close to linear for power tails, smooth otherwise)
        keep = np.isfinite(w)
        w_f, y_f = w[keep], y[keep]
        run = np.maximum.accumulate(w_f)
        inc = np.concatenate([[True], w_f[1:] > run[:-1]])
        w_f, y_f = w_f[inc], y_f[inc]
        inverse = PchipInterpolator(w_f, np.log(y_f), extrapolate=True)

        log2 = math.log(2.0)
        wt = -np.log(s)
        x_pos = np.exp(np.asarray(inverse(wt)))
        # targets shallower than the first grid node sit in a sliver where
        # the survival function is still linear: interpolate through (0, 0.5)
        low = wt <= w_f[0]
        if low.any():
            x_pos[low] = y_f[0] * (wt[low] - log2) / max(w_f[0] - log2,
                                                         1e-300)
        # Newton corrections against the true survival integral, so
        # interpolation error cannot leak into the likelihood
        pos = s < 0.5
        for _ in range(2):
            if not pos.any():
                break
            xp = x_pos[pos]
            resid = sf_at(xp) - s[pos]
            if np.max(np.abs(resid) / s[pos]) < 1e-9:
                break
            dens = np.exp(self._log_marginal_pdf(model, xp))
            step = np.where(dens > 0.0, resid / dens, 0.0)
            x_pos = x_pos.copy()
            x_pos[pos] = np.maximum(
                xp + np.clip(step, -0.5 * xp, 0.5 * xp), 0.0)
        x = np.where(levels == 0.5, 0.0, np.sign(levels - 0.5) * x_pos)
        logpdf = self._log_marginal_pdf(model, x)
        return x, logpdf

    def _log_marginal_pdf(self, model: MixtureModel, x: np.ndarray):
        ax = np.abs(np.asarray(x, dtype=float))
        ts = np.asarray(model.radial.cdf(ax[ax > 0.0]))
        hints = None
        if ts.size:
            qs = np.quantile(ts, [0.0, 0.5, 1.0])
            hints = [float(t) for t in qs if 1e-12 < t < 1.0 - 1e-12] or None

        def f(t):
            r = np.asarray(model.radial.quantile(t))
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                le = -0.5 * (ax[None, :] / r[:, None]) ** 2 - np.log(r[:, None])
            return np.exp(np.where(np.isnan(le), -np.inf, le))

        res = integrate_unit(f, self._quad, warn=False, hints=hints)
        self.nonconverged += 0 if res.converged else 1
        with np.errstate(divide="ignore"):
            return np.log(np.atleast_1d(np.asarray(res.value))) - 0.5 * _LOG_2PI

    def _x_of(self, u_vals, table: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._levels, np.asarray(u_vals).ravel())
        return table[idx].reshape(np.shape(u_vals))

    # -------------------------------------------------------- case kernels

    def _shift(self, tag: str, dim: int, *parts) -> np.ndarray:
        rng = np.random.default_rng(
            stable_seed(tag, self.config.seed, *parts))
        return rng.random(dim)

    @staticmethod
    def _latent_t(raw: np.ndarray) -> np.ndarray:
        # lattice coordinates can land exactly on 0 or 1, where some
        # quantile functions are undefined; nudging into the open
        # interval changes the integral below float precision
        return np.clip(raw, 1e-18, 1.0 - 1e-16)

    def _case1_value(self, model: MixtureModel, o, x_v) -> float:
        """log C(v) restricted to the observed pattern ``o``."""
        d = int(o.sum())
        if d == 1:
            return math.log(float(self.v[o][0]))
        okey = _key(o)
        oi = np.flatnonzero(o)
        sig = model.sigma[np.ix_(oi, oi)]
        pts = _lattice(self.config.n_full, d,
                       self._shift("cens-box", d, np.frombuffer(okey, np.uint8)))
        r = np.asarray(model.radial.quantile(self._latent_t(pts[:, 0])))
        perm = self._perm_cache.get(("c1", okey))
        if perm is None:
            b_med = _clean_limits(x_v / float(model.radial.quantile(0.5)))
            _, perm = _reorder_cholesky(sig, b_med)
            self._perm_cache[("c1", okey)] = perm
        lower = chol_lower(sig[np.ix_(perm, perm)])
        with np.errstate(divide="ignore", invalid="ignore"):
            b = x_v[perm][None, :] / r[:, None]
        vals = genz_rowwise(lower, _clean_limits(b), pts[:, 1:])
        return math.log(float(vals.mean()))

    def _case2_values(self, model: MixtureModel, o, x_rows) -> np.ndarray:
        """Joint log density for rows fully above threshold on ``o``."""
        d = int(o.sum())
        oi = np.flatnonzero(o)
        sig = model.sigma[np.ix_(oi, oi)]
        lo = chol_lower(sig)
        q0 = (solve_triangular(lo, x_rows.T, lower=True) ** 2).sum(axis=0)
        lognorm = -0.5 * d * _LOG_2PI - float(np.sum(np.log(np.diag(lo))))
        if model.radial.is_dirac:
            r0 = model.radial.r0
            return lognorm - 0.5 * q0 / r0**2 - d * math.log(r0)
        ts = np.asarray(model.radial.cdf(np.sqrt(q0 / d)))
        qs = np.quantile(ts, [0.0, 0.5, 1.0])
        hints = [float(t) for t in qs if 1e-12 < t < 1.0 - 1e-12] or None

        def f(t):
            r = np.asarray(model.radial.quantile(t))
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                le = (-0.5 * q0[None, :] / r[:, None] ** 2
                      - d * np.log(r[:, None]))
            return np.exp(np.where(np.isnan(le), -np.inf, le))

        res = integrate_unit(f, self._quad, warn=False, hints=hints)
        self.nonconverged += 0 if res.converged else 1
        with np.errstate(divide="ignore"):
            return lognorm + np.log(np.atleast_1d(np.asarray(res.value)))

    def _case3_values(self, model: MixtureModel, o, e, x_rows) -> np.ndarray:
        """Log numerator of the partial-derivative contributions.

        ``x_rows`` holds the quantile-scale points of one group in
        observed-coordinate order: exceedance coordinates vary by row
        while censored coordinates sit at their common thresholds.
        """
        o_idx = np.flatnonzero(o)
        iI = np.searchsorted(o_idx, np.flatnonzero(e))
        iC = np.setdiff1d(np.arange(o_idx.size), iI)
        sig = model.sigma[np.ix_(o_idx, o_idx)]
        dI, dC = iI.size, iC.size
        x_I = x_rows[:, iI]
        x_C = x_rows[0, iC]  # shared: u* equals the threshold there

        chol_ii = chol_lower(sig[np.ix_(iI, iI)])
        q0 = (solve_triangular(chol_ii, x_I.T, lower=True) ** 2).sum(axis=0)
        lognorm = (-0.5 * dI * _LOG_2PI
                   - float(np.sum(np.log(np.diag(chol_ii)))))
        cond = conditional_gaussian(sig, iI, np.zeros(dI))
        mean_rows = x_I @ cond.coef.T                     # (rows, dC)
        sc = np.sqrt(np.diag(cond.cov))
        corr = cond.cov / np.outer(sc, sc)

        key = (_key(o), _key(e))
        pts = _lattice(self.config.n_censored, dC,
                       self._shift("cens-part", dC,
                                   np.frombuffer(key[0], np.uint8),
                                   np.frombuffer(key[1], np.uint8)))
        n_pts = pts.shape[0]
        if model.radial.is_dirac:
            r = np.full(n_pts, model.radial.r0)
            jac = np.ones(n_pts)
        else:
            kappa = float(self.config.kappa)
            szero = pts[:, 0]
            jac = kappa * (1.0 - szero) ** (kappa - 1.0)
            r = np.asarray(model.radial.quantile(
                self._latent_t(1.0 - (1.0 - szero) ** kappa)))

        # log weight of the exceedance block at each (row, node)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lw = (lognorm - 0.5 * q0[:, None] / r[None, :] ** 2
                  - dI * np.log(r[None, :]))
        lw = np.where(np.isnan(lw), -np.inf, lw)

        perm = self._perm_cache.get(("c3", key))
        if perm is None:
            b_ref = (x_C - np.median(mean_rows, axis=0)) / (
                sc * float(model.radial.quantile(0.5)))
            _, perm = _reorder_cholesky(corr, _clean_limits(b_ref))
            self._perm_cache[("c3", key)] = perm
        lower = chol_lower(corr[np.ix_(perm, perm)])

        rows = x_rows.shape[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            b = (x_C[None, None, :] - mean_rows[:, None, :]) / (
                r[None, :, None] * sc[None, None, :])
        b = _clean_limits(b)[:, :, perm].reshape(rows * n_pts, dC)
        uu = np.broadcast_to(pts[None, :, 1:], (rows, n_pts, dC - 1))
        uu = uu.reshape(rows * n_pts, dC - 1)
        cdf_part = genz_rowwise(lower, b, uu).reshape(rows, n_pts)

        vals = (np.exp(lw) * jac[None, :] * cdf_part).mean(axis=1)
        with np.errstate(divide="ignore"):
            return np.log(vals)

    # ----------------------------------------------------------- evaluation

    def loglik(self, params: ParamVector) -> float:
        """Censored pseudo log-likelihood at a parameter vector.

        Raises
        ------
        LikelihoodError
            If any replicate contribution is non-finite; the error
            names the replicate and its case.
        """
        values = params.values()
        radial = self.family.radial(values)
        corr = correlation_from(params)
        sigma = build_correlation(self.sites, corr)
        model = MixtureModel(radial, sigma, config=self._quad,
                             seed=self.config.seed,
                             sites=self.sites, correlation=corr)
        rkey = tuple(values[name] for name in self._rnames)
        x_tab, logpdf_tab = self._marginal_tables(model, rkey)

        total = 0.0
        for o, count, row in self.case1.values():
            val = self._case1_value(model, o, self._x_of(self.v[o], x_tab))
            if not np.isfinite(val):
                raise LikelihoodError(
                    f"non-finite fully-censored contribution at replicate "
                    f"{row}", row, "fully-censored")
            total += count * val

        for o, rows in self.case2.values():
            if o.sum() == 1:
                continue  # a univariate copula density is identically 1
            u_rows = self.u[np.ix_(rows, np.flatnonzero(o))]
            contrib = (self._case2_values(model, o, self._x_of(u_rows, x_tab))
                       - self._x_of(u_rows, logpdf_tab).sum(axis=1))
            bad = np.flatnonzero(~np.isfinite(contrib))
            if bad.size:
                raise LikelihoodError(
                    f"non-finite density contribution at replicate "
                    f"{rows[bad[0]]}", rows[bad[0]], "density")
            total += float(contrib.sum())

        for o, e, rows in self.case3.values():
            oi = np.flatnonzero(o)
            u_star = np.maximum(self.u[np.ix_(rows, oi)], self.v[oi][None, :])
            num = self._case3_values(model, o, e, self._x_of(u_star, x_tab))
            u_exc = self.u[np.ix_(rows, np.flatnonzero(e))]
            contrib = num - self._x_of(u_exc, logpdf_tab).sum(axis=1)
            bad = np.flatnonzero(~np.isfinite(contrib))
            if bad.size:
                raise LikelihoodError(
                    f"non-finite partially-censored contribution at "
                    f"replicate {rows[bad[0]]}", rows[bad[0]], "partial")
            total += float(contrib.sum())

        return total

    def __call__(self, params: ParamVector) -> float:
        return self.loglik(params)


def censored_loglik(params: ParamVector, data, sites: SiteSet, model_family,
                    censor: CensorConfig | None = None,
                    config: LikelihoodConfig | None = None) -> float:
    """One-shot censored pseudo log-likelihood evaluation.

    Builds a :class:`CensoredLikelihood` and evaluates it once; code
    evaluating many parameter vectors on the same data should hold on
    to the evaluator instead, to reuse its cached structure.
    """
    return CensoredLikelihood(data, sites, model_family, censor=censor,
                              config=config).loglik(params)
