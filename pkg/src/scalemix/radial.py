"""Positive scale laws for the mixture and their tail classification.

Each law is a frozen distribution object with vectorized ``cdf``, ``pdf``,
``quantile`` and ``sample``. The tail behaviour decides the extremal
dependence class of the resulting mixture field:

* Weibull-type tails ``1 - F(r) ~ alpha r^gamma exp(-delta r^beta)`` give
  asymptotic independence with strength controlled by ``beta``;
* regularly varying tails ``1 - F(r) ~ L(r) r^-gamma`` give asymptotic
  dependence;
* bounded scales reproduce Gaussian-type dependence exactly.

`tail_classify` maps each law to one of these three records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import chi2

from .validation import check_positive

__all__ = [
    "RadialLaw", "Dirac", "StudentRadial", "Rayleigh", "ParetoSlash",
    "GpdScale", "ExtWeibull", "BoxCoxScale", "ScaledRadial",
    "WeibullType", "RegularlyVarying", "Bounded",
    "tail_classify", "model3_support_constant",
    "radial_cdf", "radial_pdf", "radial_quantile", "radial_sample",
]


# --------------------------------------------------------------------------
# tail classification records

@dataclass(frozen=True)
class WeibullType:
    """Tail ``1 - F(r) ~ alpha * r**gamma * exp(-delta * r**beta)``."""

    alpha: float
    beta: float
    gamma: float
    delta: float


@dataclass(frozen=True)
class RegularlyVarying:
    """Tail ``1 - F(r) ~ L(r) * r**-gamma`` with slowly varying L."""

    gamma: float


@dataclass(frozen=True)
class Bounded:
    """Scale bounded by ``r_star`` (upper endpoint of the support)."""

    r_star: float


# --------------------------------------------------------------------------
# law family

class RadialLaw:
    """Base interface for positive scale laws."""

    #: (lower, upper) support endpoints
    support: tuple[float, float] = (0.0, math.inf)
    is_dirac: bool = False

    def cdf(self, r):
        raise NotImplementedError

    def pdf(self, r):
        raise NotImplementedError

    def logpdf(self, r):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(r))

    def logsf(self, r):
        """Log survival function, finite far beyond double-precision CDF range."""
        with np.errstate(divide="ignore"):
            return np.log1p(-self.cdf(r))

    def quantile(self, p):
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-transform draws, deterministic given the generator state."""
        return self.quantile(rng.uniform(size=int(n)))

    def tail(self):
        raise NotImplementedError

    # shared validation
    @staticmethod
    def _p(p):
        p = np.asarray(p, dtype=float)
        if ((p < 0) | (p > 1)).any() or np.isnan(p).any():
            raise ValueError("probabilities must lie in [0, 1]")
        return p

    @staticmethod
    def _r(r):
        r = np.asarray(r, dtype=float)
        if (r < 0).any() or np.isnan(r).any():
            raise ValueError("scale values must be nonnegative")
        return r

    @staticmethod
    def _scalar_like(x, out):
        return float(out) if np.ndim(x) == 0 else out


class Dirac(RadialLaw):
    """Point mass at ``r0``: the mixture degenerates to a Gaussian field."""

    is_dirac = True

    def __init__(self, r0: float = 1.0):
        self.r0 = check_positive(r0, "r0")
        self.support = (self.r0, self.r0)

    def __repr__(self):
        return f"Dirac(r0={self.r0:g})"

    def cdf(self, r):
        r = self._r(r)
        return self._scalar_like(r, (np.asarray(r) >= self.r0).astype(float))

    def pdf(self, r):
        raise ValueError("a point-mass scale law has no density")

    def logpdf(self, r):
        raise ValueError("a point-mass scale law has no density")

    def logsf(self, r):
        r = self._r(r)
        with np.errstate(divide="ignore"):
            out = np.where(np.asarray(r) >= self.r0, -np.inf, 0.0)
        return self._scalar_like(r, out)

    def quantile(self, p):
        p = self._p(p)
        return self._scalar_like(p, np.full_like(np.asarray(p, dtype=float), self.r0))

    def sample(self, n, rng):
        return np.full(int(n), self.r0)

    def tail(self):
        return Bounded(self.r0)


class StudentRadial(RadialLaw):
    """``R = sqrt(df / V)`` with ``V ~ chi-square(df)``.

    Mixing a standard Gaussian vector with this scale yields exactly the
    multivariate Student-t with ``df`` degrees of freedom, which provides
    closed-form oracles for the mixture machinery.
    """

    def __init__(self, df: float):
        self.df = check_positive(df, "df")

    def __repr__(self):
        return f"StudentRadial(df={self.df:g})"

    def cdf(self, r):
        r = self._r(r)
        with np.errstate(divide="ignore"):
            out = chi2.sf(self.df / np.square(r), self.df)
        return self._scalar_like(r, out)

    def logsf(self, r):
        r = self._r(r)
        with np.errstate(divide="ignore"):
            out = chi2.logcdf(self.df / np.square(r), self.df)
        return self._scalar_like(r, out)

    def pdf(self, r):
        r = self._r(r)
        with np.errstate(divide="ignore"):
            out = chi2.pdf(self.df / np.square(r), self.df) * 2.0 * self.df / r**3
        return self._scalar_like(r, np.where(np.asarray(r) > 0, out, 0.0))

    def quantile(self, p):
        p = self._p(p)
        with np.errstate(divide="ignore"):
            out = np.sqrt(self.df / chi2.isf(p, self.df))
        return self._scalar_like(p, out)

    def sample(self, n, rng):
        return np.sqrt(self.df / rng.chisquare(self.df, size=int(n)))

    def tail(self):
        return RegularlyVarying(self.df)


class Rayleigh(RadialLaw):
    """``F(r) = 1 - exp(-r**2 / 2)``; the mixture has Laplace-type margins."""

    def __repr__(self):
        return "Rayleigh()"

    def cdf(self, r):
        r = self._r(r)
        return self._scalar_like(r, -np.expm1(-0.5 * np.square(r)))

    def logsf(self, r):
        r = self._r(r)
        return self._scalar_like(r, -0.5 * np.square(r))

    def pdf(self, r):
        r = self._r(r)
        return self._scalar_like(r, r * np.exp(-0.5 * np.square(r)))

    def quantile(self, p):
        p = self._p(p)
        return self._scalar_like(p, np.sqrt(-2.0 * np.log1p(-p)))

    def tail(self):
        return WeibullType(alpha=1.0, beta=2.0, gamma=0.0, delta=0.5)


class ParetoSlash(RadialLaw):
    """``F(r) = 1 - r**-gamma`` on [1, inf); the mixture has slash densities."""

    support = (1.0, math.inf)

    def __init__(self, gamma: float):
        self.gamma = check_positive(gamma, "gamma")

    def __repr__(self):
        return f"ParetoSlash(gamma={self.gamma:g})"

    def cdf(self, r):
        r = self._r(r)
        out = np.where(np.asarray(r) >= 1.0, -np.expm1(-self.gamma * np.log(np.maximum(r, 1.0))), 0.0)
        return self._scalar_like(r, out)

    def logsf(self, r):
        r = self._r(r)
        return self._scalar_like(r, -self.gamma * np.log(np.maximum(np.asarray(r, dtype=float), 1.0)))

    def pdf(self, r):
        r = self._r(r)
        out = np.where(np.asarray(r) >= 1.0, self.gamma * np.maximum(r, 1.0) ** (-self.gamma - 1.0), 0.0)
        return self._scalar_like(r, out)

    def quantile(self, p):
        p = self._p(p)
        return self._scalar_like(p, (1.0 - p) ** (-1.0 / self.gamma))

    def tail(self):
        return RegularlyVarying(self.gamma)


class GpdScale(RadialLaw):
    """Generalized-Pareto scale on [0, r*): ``1 - F(r) = (1 + xi r)^(-1/xi)``.

    ``xi`` moves the mixture continuously through the dependence classes:
    negative (bounded scale, Gaussian-type), zero (exponential scale), and
    positive (regularly varying scale, asymptotic dependence).
    """

    def __init__(self, xi: float):
        self.xi = float(xi)
        if not np.isfinite(self.xi):
            raise ValueError("xi must be finite")
        self.support = (0.0, -1.0 / self.xi if self.xi < 0 else math.inf)

    def __repr__(self):
        return f"GpdScale(xi={self.xi:g})"

    def _logsf(self, r):
        r = np.asarray(r, dtype=float)
        if self.xi == 0.0:
            return -r
        hi = self.support[1]
        rr = np.minimum(r, hi) if self.xi < 0 else r
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -np.log1p(self.xi * rr) / self.xi
        if self.xi < 0:
            out = np.where(r >= hi, -np.inf, out)
        return out

    def cdf(self, r):
        r = self._r(r)
        return self._scalar_like(r, -np.expm1(self._logsf(r)))

    def logsf(self, r):
        r = self._r(r)
        return self._scalar_like(r, self._logsf(r))

    def pdf(self, r):
        r = self._r(r)
        rr = np.asarray(r, dtype=float)
        if self.xi == 0.0:
            out = np.exp(-rr)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(1.0 + self.xi * rr > 0.0,
                               np.exp((-1.0 / self.xi - 1.0) * np.log1p(self.xi * np.minimum(rr, self.support[1] if self.xi < 0 else np.inf))),
                               0.0)
        return self._scalar_like(r, out)

    def quantile(self, p):
        p = self._p(p)
        if self.xi == 0.0:
            out = -np.log1p(-p)
        else:
            out = np.expm1(-self.xi * np.log1p(-p)) / self.xi
        return self._scalar_like(p, out)

    def tail(self):
        if self.xi > 0:
            return RegularlyVarying(1.0 / self.xi)
        if self.xi == 0:
            return WeibullType(alpha=1.0, beta=1.0, gamma=0.0, delta=1.0)
        return Bounded(-1.0 / self.xi)


class ExtWeibull(RadialLaw):
    """Extended Weibull scale on [1, inf).

    ``F(r) = 1 - exp{-gamma (r**beta - 1)/beta}`` for ``beta > 0`` and the
    Pareto limit ``1 - r**-gamma`` at ``beta = 0`` (continuous in beta).
    Interpolates asymptotic independence (beta > 0) and dependence (beta = 0).
    """

    support = (1.0, math.inf)

    def __init__(self, beta: float, gamma: float):
        self.beta = check_positive(beta, "beta", allow_zero=True)
        self.gamma = check_positive(gamma, "gamma")

    def __repr__(self):
        return f"ExtWeibull(beta={self.beta:g}, gamma={self.gamma:g})"

    def _neglogsf(self, r):
        # gamma (r^beta - 1)/beta, continuous limit gamma*log(r) at beta=0
        logr = np.log(np.maximum(r, 1.0))
        if self.beta == 0.0:
            return self.gamma * logr
        return self.gamma * np.expm1(self.beta * logr) / self.beta

    def cdf(self, r):
        r = self._r(r)
        out = np.where(np.asarray(r) >= 1.0, -np.expm1(-self._neglogsf(r)), 0.0)
        return self._scalar_like(r, out)

    def logsf(self, r):
        r = self._r(r)
        return self._scalar_like(r, -self._neglogsf(np.asarray(r, dtype=float)))

    def pdf(self, r):
        r = self._r(r)
        rr = np.maximum(np.asarray(r, dtype=float), 1.0)
        dens = self.gamma * rr ** (self.beta - 1.0) * np.exp(-self._neglogsf(rr))
        out = np.where(np.asarray(r) >= 1.0, dens, 0.0)
        return self._scalar_like(r, out)

    def quantile(self, p):
        p = self._p(p)
        if self.beta == 0.0:
            out = (1.0 - p) ** (-1.0 / self.gamma)
        else:
            out = (1.0 - (self.beta / self.gamma) * np.log1p(-p)) ** (1.0 / self.beta)
        return self._scalar_like(p, out)

    def tail(self):
        if self.beta == 0.0:
            return RegularlyVarying(self.gamma)
        return WeibullType(alpha=math.exp(self.gamma / self.beta), beta=self.beta,
                           gamma=0.0, delta=self.gamma / self.beta)


def model3_support_constant(beta: float, tol: float = 1e-12) -> float:
    """Normalizing constant ``c`` in the one-parameter bridging scale law.

    ``c`` is the largest root of ``s**beta * exp(-(s**beta - 1)/beta) = 1``,
    which rescales the law's support to start exactly at 1. Lies in [1, 2):
    equal to 1 for ``beta <= 1`` and increasing past 1.87 near ``beta = 2``.
    """
    beta = float(beta)
    if beta == 0.0 or not np.isfinite(beta):
        raise ValueError("beta must be a nonzero finite number")
    if beta <= 1.0:
        return 1.0

    def g(logs):
        # log of psi(exp(logs)): beta*logs - (s^beta - 1)/beta
        return beta * logs - math.expm1(beta * logs) / beta

    lo = math.log(beta) / beta  # log of the interior maximum location
    hi = math.log(2.0)
    # psi exceeds 1 at the peak and drops below 1 before s=2
    if g(hi) >= 0.0:  # pragma: no cover - defensive, never hit for beta > 1
        hi = math.log(4.0)
    # solve in log space; |dr| <= 2 |d log s|, so halve the tolerance
    root = brentq(g, lo, hi, xtol=0.25 * tol, rtol=4 * np.finfo(float).eps)
    return float(math.exp(root))


class BoxCoxScale(RadialLaw):
    """One-parameter bridging scale on [1, inf).

    ``1 - F(r) = (c r)**beta * exp[-{(c r)**beta - 1}/beta]`` with the
    support constant ``c = model3_support_constant(beta)``. ``beta > 0``
    gives Weibull-type tails (asymptotic independence), ``beta = 0`` is the
    unit-index Pareto boundary, and ``beta < 0`` gives regularly varying
    tails with index ``-beta`` (asymptotic dependence).
    """

    support = (1.0, math.inf)

    def __init__(self, beta: float):
        self.beta = float(beta)
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")
        self.c = 1.0 if self.beta == 0.0 else model3_support_constant(self.beta)

    def __repr__(self):
        return f"BoxCoxScale(beta={self.beta:g})"

    def _log_sf(self, r):
        rr = np.maximum(np.asarray(r, dtype=float), 1.0)
        logs = np.log(self.c * rr)
        if self.beta == 0.0:
            return -logs
        return self.beta * logs - np.expm1(self.beta * logs) / self.beta

    def cdf(self, r):
        r = self._r(r)
        out = np.where(np.asarray(r) >= 1.0, -np.expm1(self._log_sf(r)), 0.0)
        return self._scalar_like(r, out)

    def logsf(self, r):
        r = self._r(r)
        return self._scalar_like(r, self._log_sf(r))

    def pdf(self, r):
        r = self._r(r)
        rr = np.maximum(np.asarray(r, dtype=float), 1.0)
        if self.beta == 0.0:
            dens = rr**-2.0
        else:
            q = (self.c * rr) ** self.beta
            dens = (q / rr) * (q - self.beta) * np.exp(-(q - 1.0) / self.beta)
        out = np.where(np.asarray(r) >= 1.0, dens, 0.0)
        return self._scalar_like(r, out)

    def quantile(self, p):
        p = self._p(p)
        parr = np.atleast_1d(np.asarray(p, dtype=float))
        if self.beta == 0.0:
            out = 1.0 / (1.0 - parr)
            out = np.where(parr == 1.0, np.inf, out)
            return self._scalar_like(p, out if np.ndim(p) else out[0])
        target = np.log1p(-parr)  # log survival
        out = np.full(parr.shape, np.inf)
        finite = np.isfinite(target)
        if finite.any():
            out[finite] = self._quantile_root(target[finite])
        return self._scalar_like(p, out if np.ndim(p) else out[0])

    def _quantile_root(self, target: np.ndarray) -> np.ndarray:
        """Solve log_sf(r) = target for r >= 1, vectorized and monotone.

        Works in w = log(c r); ell(w) = beta w - (e^{beta w} - 1)/beta is
        strictly decreasing on the support for either sign of beta.
        """
        beta, c = self.beta, self.c
        lo = np.full(target.shape, math.log(c))  # r = 1, ell = 0 >= target
        hi = lo + 1.0
        for _ in range(200):
            val = beta * hi - np.expm1(beta * hi) / beta
            todo = val > target
            if not todo.any():
                break
            hi = np.where(todo, lo + 2.0 * (hi - lo), hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            val = beta * mid - np.expm1(beta * mid) / beta
            above = val > target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        w = 0.5 * (lo + hi)
        return np.exp(w) / c

    def tail(self):
        if self.beta > 0:
            cb = self.c**self.beta
            return WeibullType(alpha=cb * math.exp(1.0 / self.beta), beta=self.beta,
                               gamma=self.beta, delta=cb / self.beta)
        if self.beta == 0:
            return RegularlyVarying(1.0)
        return RegularlyVarying(-self.beta)


class ScaledRadial(RadialLaw):
    """Law of ``c * R`` for a base law of ``R``; copulas are invariant to it."""

    def __init__(self, base: RadialLaw, c: float):
        self.base = base
        self.c = check_positive(c, "c")
        lo, hi = base.support
        self.support = (lo * self.c, hi * self.c)
        self.is_dirac = base.is_dirac

    def __repr__(self):
        return f"ScaledRadial({self.base!r}, c={self.c:g})"

    def cdf(self, r):
        return self.base.cdf(np.asarray(r, dtype=float) / self.c)

    def logsf(self, r):
        return self.base.logsf(np.asarray(r, dtype=float) / self.c)

    def pdf(self, r):
        return self.base.pdf(np.asarray(r, dtype=float) / self.c) / self.c

    def quantile(self, p):
        return self.base.quantile(p) * self.c

    def sample(self, n, rng):
        return self.base.sample(n, rng) * self.c

    def tail(self):
        t = self.base.tail()
        if isinstance(t, Bounded):
            return Bounded(t.r_star * self.c)
        if isinstance(t, RegularlyVarying):
            return RegularlyVarying(t.gamma)
        return WeibullType(alpha=t.alpha * self.c**-t.gamma, beta=t.beta,
                           gamma=t.gamma, delta=t.delta * self.c**-t.beta)


# --------------------------------------------------------------------------
# functional wrappers

def radial_cdf(law: RadialLaw, r):
    """Distribution function of the scale law at ``r``."""
    return law.cdf(r)


def radial_pdf(law: RadialLaw, r):
    """Density of the scale law at ``r`` (error for point masses)."""
    return law.pdf(r)


def radial_quantile(law: RadialLaw, p):
    """Quantile of the scale law at probability ``p``."""
    return law.quantile(p)


def radial_sample(law: RadialLaw, n: int, rng: np.random.Generator | int) -> np.ndarray:
    """Draw ``n`` scales, deterministic given the generator or seed."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return law.sample(n, rng)


def tail_classify(law: RadialLaw):
    """Tail class of a scale law (drives the extremal dependence class)."""
    return law.tail()
