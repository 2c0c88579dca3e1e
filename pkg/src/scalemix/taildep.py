"""Tail-dependence diagnostics for bivariate scale mixtures.

Finite-level coefficients

    chi(u)    = 2 - log C(u,u) / log(u)
    chibar(u) = 2 log(1-u) / log Cbar(u,u) - 1

are evaluated either from a fitted pair model (parametric) or from
pseudo-uniform data (empirical, with binomial-style bands). Their limits
follow from the tail class of the scale law: a regularly varying scale
gives asymptotic dependence with a closed-form chi, a Weibull-type or
bounded scale gives asymptotic independence with a closed-form chibar and
coefficient of tail dependence eta obtained by composing the product-tail
and elliptical joint-tail expansions.

The survival probability Cbar(u,u) is computed by central symmetry as the
joint CDF at the reflected quantile point, which keeps relative accuracy
far into the tail instead of cancelling 1 - 2u + C(u,u) in floating point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import ndtri
from scipy.stats import t as student_t

from .mixture import MixtureModel
from .radial import Bounded, RadialLaw, RegularlyVarying, WeibullType, tail_classify
from .validation import check_in_interval, check_positive

__all__ = [
    "TailCurve",
    "TailAsymptote",
    "chi_u",
    "chibar_u",
    "cond_exceed_prob",
    "survival_diag",
    "parametric_tail_curve",
    "empirical_chi_u",
    "empirical_chibar_u",
    "chi_limit_regvar",
    "chibar_limit_weibull",
    "weibull_tail_asymptote",
    "tail_asymptote",
]

# chi-squared radius of a bivariate standard Gaussian: survival exp(-r^2/2),
# i.e. Weibull-type constants (alpha, beta, gamma, delta) below
_GAUSS_RADIUS = (1.0, 2.0, 0.0, 0.5)


@dataclass(frozen=True)
class TailAsymptote:
    """Limiting tail-dependence summary of a bivariate mixture."""

    eta: float
    chi: float
    chibar: float
    k2: float | None
    constant: float | None
    regime: str

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.regime not in ("weibull-type", "regularly-varying", "bounded"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "regularly-varying":
            if not (self.chibar == 1.0 and 0.0 < self.chi <= 1.0):
                raise ValueError("regular variation requires chibar=1, chi in (0,1]")
        else:
            if self.chi != 0.0:
                raise ValueError("asymptotic independence requires chi = 0")
            if abs(self.chibar - (2.0 * self.eta - 1.0)) > 1e-12:
                raise ValueError("chibar must equal 2*eta - 1")


@dataclass
class TailCurve:
    """Tail coefficient evaluated on a grid of levels.

    ``flags`` marks points whose value is a finite-sample artifact
    (out-of-range coefficient or zero exceedance count).
    """

    levels: np.ndarray
    values: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    estimator: str = "parametric"
    flags: np.ndarray = field(default=None)

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.levels.ndim != 1 or self.levels.shape != self.values.shape:
            raise ValueError("levels and values must be 1-d with equal length")
        if (np.diff(self.levels) <= 0).any():
            raise ValueError("levels must be strictly increasing")
        if ((self.levels < 0.0) | (self.levels >= 1.0)).any():
            raise ValueError("levels must lie in [0, 1)")
        if self.estimator not in ("empirical", "parametric"):
            raise ValueError(f"unknown estimator tag {self.estimator!r}")
        if (self.lower is None) != (self.upper is None):
            raise ValueError("provide both band edges or neither")
        if self.flags is None:
            self.flags = np.zeros(self.levels.shape, dtype=bool)
        else:
            self.flags = np.asarray(self.flags, dtype=bool)
        if self.lower is not None:
            self.lower = np.asarray(self.lower, dtype=float)
            self.upper = np.asarray(self.upper, dtype=float)
            ok = ~(np.isnan(self.values) | self.flags)
            if ((self.lower[ok] > self.values[ok] + 1e-12)
                    | (self.values[ok] > self.upper[ok] + 1e-12)).any():
                raise ValueError("band must bracket the point values")

    def to_csv(self, path) -> None:
        """Write columns u, value, lo, hi, estimator."""
        lo = self.lower if self.lower is not None else np.full_like(self.values, np.nan)
        hi = self.upper if self.upper is not None else np.full_like(self.values, np.nan)
        pd.DataFrame({
            "u": self.levels,
            "value": self.values,
            "lo": lo,
            "hi": hi,
            "estimator": self.estimator,
        }).to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path) -> "TailCurve":
        df = pd.read_csv(path)
        required = {"u", "value", "lo", "hi", "estimator"}
        if not required.issubset(df.columns):
            raise ValueError(f"tail curve CSV needs columns {sorted(required)}")
        lower = df["lo"].to_numpy()
        upper = df["hi"].to_numpy()
        if np.isnan(lower).all():
            lower = upper = None
        tags = df["estimator"].unique()
        if len(tags) != 1:
            raise ValueError("tail curve CSV must carry a single estimator tag")
        return cls(df["u"].to_numpy(), df["value"].to_numpy(),
                   lower=lower, upper=upper, estimator=str(tags[0]))


# --------------------------------------------------------- parametric levels

def _check_pair(model: MixtureModel) -> None:
    if model.dim != 2:
        raise ValueError("tail coefficients require a model restricted to a pair")


def _check_levels(u) -> tuple[np.ndarray, bool]:
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    ua = np.atleast_1d(u)
    if ((ua <= 0.0) | (ua >= 1.0)).any():
        raise ValueError("levels must lie strictly inside (0, 1)")
    return ua, scalar


def survival_diag(model: MixtureModel, u):
    """Diagonal survival copula Cbar(u,u) = P(U1 > u, U2 > u).

    By central symmetry of the mixture this equals the joint CDF at the
    reflected quantile point, so the value keeps full relative accuracy
    even when it is many orders of magnitude below one.
    """
    _check_pair(model)
    ua, scalar = _check_levels(u)
    out = np.empty_like(ua)
    for i, ui in enumerate(ua):
        q = model.marginal_quantile(ui)
        out[i] = model.joint_cdf([-q, -q])
    return float(out[0]) if scalar else out


def _flag_underflow(cbar: np.ndarray, u: np.ndarray) -> np.ndarray:
    bad = cbar <= 0.0
    if bad.any():
        warnings.warn(
            "joint survival underflowed to zero at levels "
            f"{u[bad]}; tail coefficient undefined there", RuntimeWarning,
            stacklevel=3)
    return bad


def chi_u(model: MixtureModel, u):
    """Finite-level coefficient chi(u) = 2 - log C(u,u)/log u."""
    _check_pair(model)
    ua, scalar = _check_levels(u)
    cbar = np.atleast_1d(survival_diag(model, ua))
    # survival identity: C(u,u) = 2u - 1 + Cbar(u,u); log1p keeps accuracy
    # as both C and u approach one
    out = 2.0 - np.log1p(2.0 * (ua - 1.0) + cbar) / np.log1p(ua - 1.0)
    return float(out[0]) if scalar else out


def chibar_u(model: MixtureModel, u):
    """Finite-level coefficient chibar(u) = 2 log(1-u)/log Cbar(u,u) - 1."""
    _check_pair(model)
    ua, scalar = _check_levels(u)
    cbar = np.atleast_1d(survival_diag(model, ua))
    bad = _flag_underflow(cbar, ua)
    out = np.full_like(ua, np.nan)
    ok = ~bad
    out[ok] = 2.0 * np.log1p(-ua[ok]) / np.log(cbar[ok]) - 1.0
    return float(out[0]) if scalar else out


def cond_exceed_prob(model: MixtureModel, u):
    """P(U1 > u | U2 > u) = Cbar(u,u) / (1 - u)."""
    _check_pair(model)
    ua, scalar = _check_levels(u)
    cbar = np.atleast_1d(survival_diag(model, ua))
    out = cbar / (1.0 - ua)
    return float(out[0]) if scalar else out


def parametric_tail_curve(model: MixtureModel, levels, which: str = "chi") -> TailCurve:
    """Evaluate a tail coefficient on a level grid as a TailCurve."""
    fn = {"chi": chi_u, "chibar": chibar_u, "cond": cond_exceed_prob}.get(which)
    if fn is None:
        raise ValueError("which must be one of 'chi', 'chibar', 'cond'")
    ua, _ = _check_levels(levels)
    values = np.atleast_1d(fn(model, ua))
    return TailCurve(ua, values, estimator="parametric",
                     flags=np.isnan(values))


# ----------------------------------------------------------- empirical levels

def _empirical_counts(data, u: float) -> tuple[int, int, int]:
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("pair data must be an (n, 2) array")
    keep = ~np.isnan(data).any(axis=1)
    data = data[keep]
    n = data.shape[0]
    if n < 1:
        raise ValueError("no complete pairs in data")
    both_below = int(((data[:, 0] <= u) & (data[:, 1] <= u)).sum())
    both_above = int(((data[:, 0] > u) & (data[:, 1] > u)).sum())
    return n, both_below, both_above


def empirical_chi_u(data, u, level: float = 0.95) -> TailCurve:
    """Plug-in chi(u) from pseudo-uniform pairs with a binomial band.

    Parameters
    ----------
    data : array_like, shape (n, 2)
        Pseudo-uniform pair observations; rows with NaN are dropped.
    u : float or array_like
        Evaluation level(s) in (0, 1).
    level : float
        Confidence level of the pointwise band.
    """
    ua, _ = _check_levels(u)
    z = float(ndtri(0.5 + level / 2.0))
    vals = np.empty_like(ua)
    los = np.empty_like(ua)
    his = np.empty_like(ua)
    flags = np.zeros(ua.shape, dtype=bool)
    for i, ui in enumerate(ua):
        n, below, _ = _empirical_counts(data, ui)
        c_hat = below / n
        if c_hat <= 0.0:
            warnings.warn(f"no joint non-exceedances at level {ui}; chi "
                          "undefined", RuntimeWarning, stacklevel=2)
            vals[i], los[i], his[i] = np.nan, np.nan, np.nan
            flags[i] = True
            continue
        vals[i] = 2.0 - math.log(c_hat) / math.log(ui)
        sd_c = math.sqrt(c_hat * (1.0 - c_hat) / n)
        sd = sd_c / (abs(math.log(ui)) * c_hat)
        los[i], his[i] = vals[i] - z * sd, vals[i] + z * sd
        if not 0.0 <= vals[i] <= 1.0:
            flags[i] = True
    return TailCurve(ua, vals, lower=los, upper=his, estimator="empirical",
                     flags=flags)


def empirical_chibar_u(data, u, level: float = 0.95) -> TailCurve:
    """Plug-in chibar(u) from pseudo-uniform pairs with a binomial band.

    Zero joint-exceedance counts and out-of-range values are flagged, not
    silently clipped.
    """
    ua, _ = _check_levels(u)
    z = float(ndtri(0.5 + level / 2.0))
    vals = np.empty_like(ua)
    los = np.empty_like(ua)
    his = np.empty_like(ua)
    flags = np.zeros(ua.shape, dtype=bool)
    for i, ui in enumerate(ua):
        n, _, above = _empirical_counts(data, ui)
        cbar_hat = above / n
        if cbar_hat <= 0.0:
            warnings.warn(f"no joint exceedances at level {ui}; chibar "
                          "undefined", RuntimeWarning, stacklevel=2)
            vals[i], los[i], his[i] = np.nan, np.nan, np.nan
            flags[i] = True
            continue
        log_cbar = math.log(cbar_hat)
        vals[i] = 2.0 * math.log(1.0 - ui) / log_cbar - 1.0
        sd_c = math.sqrt(cbar_hat * (1.0 - cbar_hat) / n)
        sd = 2.0 * abs(math.log(1.0 - ui)) * sd_c / (cbar_hat * log_cbar ** 2)
        los[i], his[i] = vals[i] - z * sd, vals[i] + z * sd
        if not -1.0 <= vals[i] <= 1.0:
            flags[i] = True
            warnings.warn(
                f"chibar({ui}) = {vals[i]:.4f} outside [-1, 1]: finite-sample "
                "artifact of a small exceedance count", RuntimeWarning,
                stacklevel=2)
    return TailCurve(ua, vals, lower=los, upper=his, estimator="empirical",
                     flags=flags)


# ------------------------------------------------------------ limit formulas

def chi_limit_regvar(gamma: float, rho: float) -> float:
    """Limiting chi for a regularly varying scale with index gamma.

    Closed form through the univariate Student CDF with gamma + 1 degrees
    of freedom.
    """
    gamma = check_positive(gamma, "gamma")
    rho = check_in_interval(rho, "rho", -1.0, 1.0, low_open=True, high_open=True)
    arg = math.sqrt((1.0 + gamma) * (1.0 - rho) / (1.0 + rho))
    return float(2.0 * student_t.sf(arg, gamma + 1.0))


def chibar_limit_weibull(beta: float, rho: float) -> float:
    """Limiting chibar for a Weibull-type scale with tail exponent beta.

    ``beta = inf`` is accepted and returns the bounded-scale value rho,
    the continuous limit of the formula.
    """
    rho = check_in_interval(rho, "rho", -1.0, 1.0, low_open=True, high_open=True)
    if math.isinf(beta):
        return rho
    beta = check_positive(beta, "beta")
    return 2.0 * ((1.0 + rho) / 2.0) ** (beta / (beta + 2.0)) - 1.0


def weibull_tail_asymptote(tail: WeibullType, rho: float) -> TailAsymptote:
    """Joint-tail expansion constants for a Weibull-type scale.

    Composes the product tail of the scale with the bivariate Gaussian
    radius (a chi variable with two degrees of freedom), then reads eta,
    K1 and K2 off the elliptical joint-tail expansion
    Cbar(1-1/x, 1-1/x) ~ K1 (log x)^{K2} x^{-1/eta}.
    """
    if not isinstance(tail, WeibullType):
        raise TypeError("tail must be a WeibullType classification")
    rho = check_in_interval(rho, "rho", -1.0, 1.0, low_open=True, high_open=True)
    a1, b1, g1, d1 = tail.alpha, tail.beta, tail.gamma, tail.delta
    a2, b2, g2, d2 = _GAUSS_RADIUS
    # product-tail constants for R * R_W
    frac = b1 / (b1 + b2)
    amp = (b1 * d1 / (b2 * d2)) ** (1.0 / (b1 + b2))
    alpha_star = (math.sqrt(2.0 * math.pi) * math.sqrt(b2 * d2 / (b1 + b2))
                  * a1 * a2 * amp ** (0.5 * b2 + g2 - g1))
    beta_star = b1 * b2 / (b1 + b2)
    gamma_star = (2.0 * b2 * g1 + 2.0 * b1 * g2 + b1 * b2) / (2.0 * (b1 + b2))
    delta_star = (d1 ** (1.0 - frac) * d2 ** frac
                  * ((b2 / b1) ** frac + (b1 / b2) ** (1.0 - frac)))
    eta = ((1.0 + rho) / 2.0) ** (beta_star / 2.0)
    k2 = (1.0 - 1.0 / eta) * gamma_star / beta_star + 1.0 / (2.0 * eta) - 1.0
    k1 = (alpha_star ** -1.0 * (1.0 - rho) ** -2.0
          * (2.0 / (1.0 + rho)) ** (gamma_star / 2.0 - beta_star / 2.0 + 1.0)
          * (1.0 - rho * rho) ** 1.5
          * delta_star ** ((1.0 / eta - 1.0) * gamma_star / beta_star)
          * (alpha_star ** 2 / (2.0 * math.pi * beta_star)) ** (1.0 - 1.0 / (2.0 * eta)))
    return TailAsymptote(eta=eta, chi=0.0, chibar=2.0 * eta - 1.0,
                         k2=k2, constant=k1, regime="weibull-type")


def tail_asymptote(radial: RadialLaw, rho: float) -> TailAsymptote:
    """Limiting dependence summary for a pair with the given scale law."""
    rho = check_in_interval(rho, "rho", -1.0, 1.0, low_open=True, high_open=True)
    tail = tail_classify(radial)
    if isinstance(tail, RegularlyVarying):
        return TailAsymptote(eta=1.0, chi=chi_limit_regvar(tail.gamma, rho),
                             chibar=1.0, k2=None, constant=None,
                             regime="regularly-varying")
    if isinstance(tail, Bounded):
        eta = (1.0 + rho) / 2.0
        return TailAsymptote(eta=eta, chi=0.0, chibar=rho, k2=None,
                             constant=None, regime="bounded")
    return weibull_tail_asymptote(tail, rho)
