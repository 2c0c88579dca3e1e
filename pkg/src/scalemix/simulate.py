"""Sampling for scale-mixture processes, unconditional and conditional.

Unconditional draws apply the defining construction directly: a scale
draw times a correlated Gaussian vector. Conditional simulation given
observed components splits in two latent steps. The scale given the
observations has an explicit unnormalized density, sampled here with a
multiplicative random-walk chain, and the remaining Gaussian components
given the scale reduce to an ordinary Gaussian conditional.

The conditional law also has a closed elliptic form whose density
generator is the full mixture's, evaluated through the density of the
product of the scale and a chi-distributed Gaussian radius. That route
shares no code with the latent sampler, so it serves as the oracle for
the sampler, for conditional densities, and for quantile maps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .correlation import CorrelationModel, SiteSet
from .gaussian import chol_lower, conditional_gaussian
from .mixture import MixtureModel
from .quadrature import QuadratureConfig, integrate_unit
from .validation import as_float_array, check_indices

__all__ = [
    "ConditionalScaleLaw",
    "EllipticalConditional",
    "McmcConfig",
    "conditional_density",
    "conditional_quantile_map",
    "conditional_scale_sample",
    "simulate",
    "simulate_conditional",
    "surface_area",
]

_LOG_2PI = math.log(2.0 * math.pi)


def surface_area(dim: int) -> float:
    """Surface area of the unit sphere in ``dim`` dimensions.

    The general formula 2 pi^{d/2} / Gamma(d/2) holds down to d = 1,
    where it gives 2, the counting measure of {-1, +1}.
    """
    dim = int(dim)
    if dim < 1:
        raise ValueError("dim must be at least 1")
    return float(2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _chi_log_pdf(r, dim: int):
    """Log density of the chi distribution with ``dim`` degrees."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return ((1.0 - dim / 2.0) * math.log(2.0) - gammaln(dim / 2.0)
                + (dim - 1.0) * np.log(r) - 0.5 * r**2)


def simulate(model: MixtureModel, n: int, seed=0) -> np.ndarray:
    """Independent draws of the mixture vector on the model's sites.

    Parameters
    ----------
    model : MixtureModel
    n : int
        Number of replicates.
    seed : int or numpy.random.Generator

    Returns
    -------
    ndarray, shape (n, D)
        Rows are scale draws times correlated Gaussian vectors. The
        generator is consumed scale-first, so output is reproducible
        bit for bit per seed.
    """
    n = int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = _as_rng(seed)
    r = np.asarray(model.radial.sample(n, rng), dtype=float)
    lower = chol_lower(model.sigma)
    z = rng.standard_normal((n, model.dim))
    return r[:, None] * (z @ lower.T)


@dataclass(frozen=True)
class McmcConfig:
    """Random-walk settings for the latent-scale sampler.

    Attributes
    ----------
    proposal_sd : float
        Standard deviation of the Gaussian step on the log scale.
    burn_in : int
        Leading iterations discarded from every chain.
    thin : int
        Keep one state per ``thin`` iterations after burn-in.
    chains : int
        Independent chains advanced in lockstep; the requested draws
        are interleaved across chains, which vectorizes the target
        evaluations without changing the stationary law.
    """

    proposal_sd: float = 0.5
    burn_in: int = 1000
    thin: int = 10
    chains: int = 64

    def __post_init__(self):
        if self.proposal_sd <= 0.0:
            raise ValueError("proposal_sd must be positive")
        if self.burn_in < 1 or self.thin < 1 or self.chains < 1:
            raise ValueError("burn_in, thin, and chains must be positive")


class ConditionalScaleLaw:
    """Latent scale given observed components of the mixture vector.

    The density is proportional to r^{-d} f(r) phi_d(x/r; Sigma_11)
    with d conditioning components; the normalizing constant is the
    joint density of the conditioning block and is only computed when
    a normalized density is requested, never for sampling.

    Parameters
    ----------
    model : MixtureModel
    cond_idx : array_like of int
        Indices of the conditioning components.
    x_cond : array_like
        Observed values at those components.
    """

    def __init__(self, model: MixtureModel, cond_idx, x_cond):
        self.model = model
        self.cond_idx = check_indices(cond_idx, "cond_idx", model.dim)
        x = as_float_array(x_cond, "x_cond", ndim=1)
        if x.shape != (self.cond_idx.size,):
            raise ValueError(
                f"x_cond has shape {x.shape} for {self.cond_idx.size} "
                f"conditioning components")
        self.x_cond = x
        sig = model.sigma[np.ix_(self.cond_idx, self.cond_idx)]
        lower = chol_lower(sig)
        z = solve_triangular(lower, x, lower=True)
        self._q = float(z @ z)
        self._dim = int(self.cond_idx.size)
        self._lognorm = (-0.5 * self._dim * _LOG_2PI
                         - float(np.sum(np.log(np.diag(lower)))))
        self._norm = None

    def logpdf_unnorm(self, r):
        """Log unnormalized density; -inf outside the support.

        Not defined for a point-mass scale law, whose conditional is
        again the same point mass.
        """
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = (np.asarray(self.model.radial.logpdf(r))
                   - self._dim * np.log(r) - 0.5 * self._q / r**2
                   + self._lognorm)
        return np.where(r > 0.0, out, -np.inf)

    def norm_const(self) -> float:
        """Joint density of the conditioning block at ``x_cond``."""
        if self._norm is None:
            sub = (self.model if self._dim == self.model.dim
                   else self.model.restrict(self.cond_idx))
            self._norm = float(sub.joint_pdf(self.x_cond))
        return self._norm

    def pdf(self, r):
        return np.exp(self.logpdf_unnorm(r) - math.log(self.norm_const()))

    def _log_target(self, y):
        # chain state is log r, so the target carries the Jacobian r;
        # a wildly large proposal overflows exp and lands at -inf, which
        # is the correct fate for it
        with np.errstate(over="ignore"):
            return self.logpdf_unnorm(np.exp(y)) + y

    def sample(self, n: int, config: McmcConfig | None = None,
               seed=0) -> np.ndarray:
        """Post-burn-in draws from a multiplicative random-walk chain.

        A point-mass scale short-circuits to a constant stream. The
        pooled post-burn-in acceptance rate outside [0.05, 0.8] raises
        a warning naming the knob to adjust.
        """
        n = int(n)
        if n < 0:
            raise ValueError("n must be nonnegative")
        radial = self.model.radial
        if radial.is_dirac:
            return np.full(n, radial.r0)
        if n == 0:
            return np.zeros(0)
        cfg = config if config is not None else McmcConfig()
        rng = _as_rng(seed)
        m = min(cfg.chains, n)
        per = -(-n // m)

        # start the chains strictly inside the support, spread around
        # the Gaussian pull toward sqrt(q/d)
        t0 = float(np.clip(radial.cdf(math.sqrt(self._q / self._dim)),
                           0.05, 0.95))
        spread = (np.arange(m) + 0.5) / m - 0.5
        t_start = np.clip(t0 + 0.3 * spread, 0.02, 0.98)
        y = np.log(np.asarray(radial.quantile(t_start), dtype=float))
        lt = self._log_target(y)

        out = np.empty((per, m))
        accepted = 0
        kept = 0
        for i in range(cfg.burn_in + per * cfg.thin):
            y_new = y + cfg.proposal_sd * rng.standard_normal(m)
            lt_new = self._log_target(y_new)
            with np.errstate(invalid="ignore"):
                acc = np.log(rng.random(m)) < lt_new - lt
            y = np.where(acc, y_new, y)
            lt = np.where(acc, lt_new, lt)
            if i >= cfg.burn_in:
                accepted += int(acc.sum())
                if (i - cfg.burn_in) % cfg.thin == cfg.thin - 1:
                    out[kept] = np.exp(y)
                    kept += 1
        rate = accepted / (per * cfg.thin * m)
        if not 0.05 <= rate <= 0.8:
            warnings.warn(
                f"scale-chain acceptance rate {rate:.3f} outside "
                f"[0.05, 0.80]; adjust proposal_sd ({cfg.proposal_sd:g}): "
                f"smaller steps raise acceptance", RuntimeWarning,
                stacklevel=2)
        return out.ravel()[:n]


def conditional_scale_sample(model: MixtureModel, cond_idx, x_cond, n: int,
                             config: McmcConfig | None = None,
                             seed=0) -> np.ndarray:
    """Draws of the latent scale given observed components."""
    return ConditionalScaleLaw(model, cond_idx, x_cond).sample(
        n, config=config, seed=seed)


def simulate_conditional(model: MixtureModel, cond_idx, x_cond, n: int,
                         config: McmcConfig | None = None,
                         seed=0) -> np.ndarray:
    """Draws of the remaining components given observed ones.

    Two latent steps per replicate: a scale draw from the conditional
    scale chain, then a Gaussian conditional draw at that scale. The
    conditional mean does not depend on the scale draw because the
    scale cancels between the conditioning value and the back
    multiplication.

    Returns
    -------
    ndarray, shape (n, D - len(cond_idx))
        Columns follow the remaining site indices in increasing order.
    """
    rng = _as_rng(seed)
    law = ConditionalScaleLaw(model, cond_idx, x_cond)
    if law.cond_idx.size >= model.dim:
        raise ValueError("conditioning must leave at least one component")
    r = law.sample(n, config=config, seed=rng)
    cg = conditional_gaussian(model.sigma, law.cond_idx, law.x_cond)
    lower = chol_lower(cg.cov)
    z = rng.standard_normal((int(n), cg.rest_idx.size))
    return cg.mean[None, :] + r[:, None] * (z @ lower.T)


class EllipticalConditional:
    """Closed elliptic form of the conditional law of the rest.

    The conditional is elliptic around the Gaussian conditional mean
    with the Schur-complement scatter and the full model's density
    generator shifted by the conditioning Mahalanobis norm. The
    generator is evaluated through the density of the product of the
    scale and a chi-distributed radius, written as an integral against
    the scale distribution function; that form stays valid when the
    scale law has atoms.

    Attributes
    ----------
    mu : ndarray, shape (D2,)
        Conditional mean.
    cov : ndarray, shape (D2, D2)
        Conditional scatter matrix.
    c1 : float
        Mahalanobis norm of the conditioning values.
    c0 : float
        Normalizing constant (computed on first use).
    converged : bool
        False if any quadrature hit its panel budget.
    """

    def __init__(self, model: MixtureModel, cond_idx, x_cond,
                 config: QuadratureConfig | None = None):
        self.model = model
        self.cond_idx = check_indices(cond_idx, "cond_idx", model.dim)
        x = as_float_array(x_cond, "x_cond", ndim=1)
        if x.shape != (self.cond_idx.size,):
            raise ValueError(
                f"x_cond has shape {x.shape} for {self.cond_idx.size} "
                f"conditioning components")
        if self.cond_idx.size >= model.dim:
            raise ValueError("conditioning must leave at least one component")
        self.x_cond = x
        self.config = config if config is not None else QuadratureConfig()
        self.dim_total = int(model.dim)
        self.dim_target = int(model.dim - self.cond_idx.size)

        sig11 = model.sigma[np.ix_(self.cond_idx, self.cond_idx)]
        lo11 = chol_lower(sig11)
        z = solve_triangular(lo11, x, lower=True)
        self.c1 = float(z @ z)
        cg = conditional_gaussian(model.sigma, self.cond_idx, x)
        self.mu = cg.mean
        self.cov = cg.cov
        self.rest_idx = cg.rest_idx
        self._lower2 = chol_lower(self.cov)
        self._logdet2 = 2.0 * float(np.sum(np.log(np.diag(self._lower2))))
        self.converged = True
        self._c0 = None
        radial = model.radial
        if radial.is_dirac:
            self._r_lo = self._r_hi = radial.r0
        else:
            with np.errstate(divide="ignore"):
                self._r_lo = float(radial.quantile(0.0))
                self._r_hi = float(radial.quantile(1.0))

    # ------------------------------------------------------------ kernels

    def product_radius_pdf(self, r):
        """Density of (scale times chi_D radius) at ``r``, vectorized."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        radial = self.model.radial
        if radial.is_dirac:
            r0 = radial.r0
            return np.exp(_chi_log_pdf(r / r0, self.dim_total)) / r0
        # chunk the evaluation points in sorted order: the integrand has
        # one corner per point wherever the scale law's support ends, and
        # hinting the corners of a narrow block of points resolves every
        # corner in between, which hinting global extremes would not
        order = np.argsort(r)
        out = np.empty_like(r)
        for start in range(0, r.size, 128):
            idx = order[start:start + 128]
            out[idx] = self._product_radius_chunk(r[idx])
        return out

    def _product_radius_chunk(self, r):
        d = self.dim_total
        scale = math.sqrt(d) / r  # per-point substitution s = scale u/(1-u)
        s_med = 1.0 / float(self.model.radial.quantile(0.5))
        hint_set = {
            # chi bump, shared across points since r s depends on u only
            float(v / (math.sqrt(d) + v))
            for v in (0.5, math.sqrt(max(d - 1.0, 0.3)),
                      math.sqrt(max(d - 1.0, 0.3)) + 3.0)
        } | {
            # scale-distribution transition, per extreme point
            float(s_med / (sc + s_med)) for sc in (scale.min(), scale.max())
        }
        for edge in (self._r_lo, self._r_hi):
            if 0.0 < edge < np.inf:
                v = np.array([r.min(), r.max()])
                hint_set |= set((v / (v + math.sqrt(d) * edge)).tolist())
        hints = sorted(h for h in hint_set if 1e-9 < h < 1.0 - 1e-9) or None

        def f(t):
            u = t[:, None]
            rs = math.sqrt(d) * (u / (1.0 - u))[:, 0]
            chi_fac = np.exp(_chi_log_pdf(rs, d)) * (d - rs**2)
            s = scale[None, :] * (u / (1.0 - u))
            jac = scale[None, :] / (1.0 - u) ** 2
            with np.errstate(divide="ignore", over="ignore"):
                inv = np.where(s > 0.0, 1.0 / s, np.inf)
            cdf = np.asarray(self.model.radial.cdf(inv.ravel()))
            return chi_fac[:, None] * cdf.reshape(s.shape) * jac

        res = integrate_unit(f, self.config, warn=False, hints=hints)
        self.converged = self.converged and bool(res.converged)
        return np.asarray(res.value)

    def h(self, t):
        """Density generator of the full mixture, vectorized over t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        root = np.sqrt(t)
        return (self.product_radius_pdf(root)
                * root ** (1.0 - self.dim_total)
                / surface_area(self.dim_total))

    @property
    def c0(self) -> float:
        if self._c0 is None:
            d2 = self.dim_target
            radial = self.model.radial
            rtyp = (radial.r0 if radial.is_dirac
                    else float(radial.quantile(0.5)))
            span = math.sqrt(d2) * rtyp + math.sqrt(self.c1)

            def f(t):
                r = span * t / (1.0 - t)
                jac = span / (1.0 - t) ** 2
                vals = self.h(r**2 + self.c1) * r ** (d2 - 1.0) * jac
                return vals[:, None]

            res = integrate_unit(f, self.config, warn=False,
                                 hints=[0.23, 0.5, 0.75])
            self.converged = self.converged and bool(res.converged)
            self._c0 = surface_area(d2) * float(res.value)
        return self._c0

    # ------------------------------------------------------------ surface

    def pdf(self, x2):
        """Conditional density at rows ``x2``; scalar for a 1-d input."""
        x2 = as_float_array(x2, "x2", allow_nan=False)
        single = x2.ndim == 1
        rows = np.atleast_2d(x2)
        if rows.shape[1] != self.dim_target:
            raise ValueError(
                f"x2 has {rows.shape[1]} columns for {self.dim_target} "
                f"target components")
        dev = rows - self.mu[None, :]
        z = solve_triangular(self._lower2, dev.T, lower=True)
        q = (z**2).sum(axis=0)
        vals = self.h(q + self.c1) / self.c0 * math.exp(-0.5 * self._logdet2)
        return float(vals[0]) if single else vals

    def radius_pdf(self, r):
        """Density of the conditional pseudo-polar radius at ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return (surface_area(self.dim_target) / self.c0
                * r ** (self.dim_target - 1.0) * self.h(r**2 + self.c1))


def conditional_density(model: MixtureModel, cond_idx, x_cond, x2,
                        method: str = "elliptic",
                        config: QuadratureConfig | None = None):
    """Conditional density of the remaining components at ``x2``.

    ``method="elliptic"`` evaluates the closed elliptic form through
    the product-radius generator; ``method="ratio"`` divides the joint
    density by the conditioning block's density. The two routes share
    no quadrature code, so their agreement is a meaningful check.
    """
    if method not in ("elliptic", "ratio"):
        raise ValueError("method must be 'elliptic' or 'ratio'")
    if method == "elliptic":
        return EllipticalConditional(model, cond_idx, x_cond,
                                     config=config).pdf(x2)
    idx = check_indices(cond_idx, "cond_idx", model.dim)
    x1 = as_float_array(x_cond, "x_cond", ndim=1)
    x2 = as_float_array(x2, "x2")
    single = x2.ndim == 1
    rows = np.atleast_2d(x2)
    rest = np.setdiff1d(np.arange(model.dim), idx)
    if rows.shape[1] != rest.size:
        raise ValueError(
            f"x2 has {rows.shape[1]} columns for {rest.size} targets")
    denom = float(model.restrict(idx).joint_pdf(x1)) if idx.size < model.dim \
        else float(model.joint_pdf(x1))
    full = np.empty(model.dim)
    full[idx] = x1
    out = np.empty(rows.shape[0])
    for i, row in enumerate(rows):
        full[rest] = row
        out[i] = model.joint_pdf(full) / denom
    return float(out[0]) if single else out


def conditional_quantile_map(radial, correlation: CorrelationModel,
                             cond_sites: SiteSet, x_cond, grid: SiteSet,
                             probs=(0.25, 0.75), n: int = 500,
                             mcmc: McmcConfig | None = None, seed=0,
                             scale: str = "raw") -> np.ndarray:
    """Empirical conditional quantiles over a site grid.

    Runs the two-step conditional sampler on the grid sites jointly
    and returns one quantile row per probability. A grid site whose
    coordinates coincide with a conditioning site is degenerate there:
    both quantiles equal the conditioning value.

    Parameters
    ----------
    radial : RadialLaw
    correlation : CorrelationModel
    cond_sites : SiteSet
        Sites with observed values.
    x_cond : array_like
        Observed values, one per conditioning site.
    grid : SiteSet
        Target sites.
    probs : sequence of float in (0, 1)
    n : int
        Conditional replicates behind the empirical quantiles.
    scale : {"raw", "uniform"}
        Output scale; "uniform" pushes values through the common
        marginal distribution function.

    Returns
    -------
    ndarray, shape (len(probs), len(grid))
    """
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0 or ((probs <= 0.0)
                                              | (probs >= 1.0)).any():
        raise ValueError("probs must be probabilities strictly inside (0, 1)")
    if int(n) < 2:
        raise ValueError("n must be at least 2")
    if scale not in ("raw", "uniform"):
        raise ValueError("scale must be 'raw' or 'uniform'")
    x1 = as_float_array(x_cond, "x_cond", ndim=1)
    if x1.shape != (len(cond_sites),):
        raise ValueError(
            f"x_cond has shape {x1.shape} for {len(cond_sites)} sites")

    # grid sites that sit exactly on a conditioning site are pinned to
    # the observed value; the rest go through the joint sampler
    snap = np.full(len(grid), -1)
    for j, pt in enumerate(grid.coords):
        hit = np.flatnonzero((cond_sites.coords == pt[None, :]).all(axis=1))
        if hit.size:
            snap[j] = hit[0]
    fresh = np.flatnonzero(snap < 0)

    d1 = len(cond_sites)
    out = np.empty((probs.size, len(grid)))
    combined = SiteSet(np.vstack([cond_sites.coords,
                                  grid.coords[fresh]]))
    model = MixtureModel.from_sites(radial, combined, correlation)
    if fresh.size:
        draws = simulate_conditional(model, np.arange(d1), x1, int(n),
                                     config=mcmc, seed=seed)
        out[:, fresh] = np.quantile(draws, probs, axis=0)
    pinned = np.flatnonzero(snap >= 0)
    out[:, pinned] = x1[snap[pinned]][None, :]
    if scale == "uniform":
        out = np.asarray(model.marginal_cdf(out.ravel())).reshape(out.shape)
    return out
