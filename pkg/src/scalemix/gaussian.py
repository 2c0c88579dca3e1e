"""Multivariate Gaussian building blocks: density, CDF, conditioning.

The CDF estimator follows the sequential-conditioning construction: after a
variance-reducing variable reordering and Cholesky factorization, the
orthant probability becomes an integral over the unit cube of a product of
conditional univariate probabilities, which is averaged over a randomly
shifted square-root-prime lattice. Repeating with independent shifts gives an
unbiased estimate with an empirical standard error; the point budget doubles
until the requested accuracy is met or the sample cap is reached.

Dimensions one and two bypass the lattice entirely: the univariate case is
the normal CDF and the bivariate case has a closed form in terms of Owen's T
function, accurate to near machine precision.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr, ndtri, owens_t

from .validation import as_float_array, check_correlation_matrix, check_indices

CONDITION_LIMIT = 1e12

_PRIMES = np.array([
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
    71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149,
    151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229,
    233, 239, 241, 251, 257, 263, 269, 271, 277, 281,
], dtype=float)

def stable_seed(*parts) -> int:
    """Deterministic 63-bit seed from hashable numeric structure.

    Floats contribute their exact IEEE bytes, so identical inputs always map
    to the same seed across processes (unlike built-in ``hash``).
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        arr = np.asarray(part)
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return int.from_bytes(h.digest(), "little") >> 1


def condition_check(sigma: np.ndarray, name: str = "sigma") -> None:
    """Raise if the matrix condition number exceeds the hard limit."""
    cond = np.linalg.cond(sigma)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise ValueError(
            f"{name} is near-singular (condition estimate {cond:.3e} > "
            f"{CONDITION_LIMIT:.0e}); refusing to regularize silently"
        )


def chol_lower(sigma: np.ndarray, name: str = "sigma") -> np.ndarray:
    """Lower Cholesky factor with an explicit conditioning error."""
    sigma = as_float_array(sigma, name, ndim=2)
    condition_check(sigma, name)
    return np.linalg.cholesky(sigma)


def mvn_logpdf(x, sigma) -> np.ndarray | float:
    """Zero-mean Gaussian log-density.

    Parameters
    ----------
    x : array_like, shape (d,) or (n, d)
    sigma : array_like, shape (d, d)
        Positive definite covariance.

    Returns
    -------
    float or ndarray of shape (n,)
    """
    x = as_float_array(x, "x")
    sigma = as_float_array(sigma, "sigma", ndim=2)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d = sigma.shape[0]
    if pts.shape[1] != d:
        raise ValueError(f"x has {pts.shape[1]} columns, sigma is {d}x{d}")
    lower = chol_lower(sigma)
    sol = solve_triangular(lower, pts.T, lower=True).T
    quad = np.sum(sol**2, axis=1)
    logdet = 2.0 * np.sum(np.log(np.diag(lower)))
    out = -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)
    return float(out[0]) if single else out


def mvn_pdf(x, sigma):
    """Zero-mean Gaussian density (see :func:`mvn_logpdf`)."""
    out = mvn_logpdf(x, sigma)
    return np.exp(out)


def bvn_cdf(h, k, rho: float):
    """Exact zero-mean bivariate normal CDF ``P(Z1 <= h, Z2 <= k)``.

    Uses the Owen's-T representation, which keeps relative accuracy even for
    deep joint tails. ``h`` and ``k`` broadcast; ``rho`` is scalar.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    rho = float(rho)
    h, k = np.broadcast_arrays(h, k)
    if abs(rho) > 1.0:
        raise ValueError(f"rho must lie in [-1, 1], got {rho}")
    if rho == 0.0:
        out = ndtr(h) * ndtr(k)
        return out if out.ndim else float(out)
    if rho == 1.0:
        out = ndtr(np.minimum(h, k))
        return out if out.ndim else float(out)
    if rho == -1.0:
        out = np.maximum(ndtr(h) + ndtr(k) - 1.0, 0.0)
        return out if out.ndim else float(out)

    s = math.sqrt(1.0 - rho * rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = (k - rho * h) / (h * s)
        ak = (h - rho * k) / (k * s)
        term_h = np.where(h == 0.0, 0.0, owens_t(h, np.nan_to_num(ah, nan=0.0, posinf=0.0, neginf=0.0)))
        term_k = np.where(k == 0.0, 0.0, owens_t(k, np.nan_to_num(ak, nan=0.0, posinf=0.0, neginf=0.0)))
        # owens_t handles infinite second arguments poorly after nan_to_num,
        # so recompute the finite-slope cases explicitly where needed
        mask_h = (h != 0.0) & np.isfinite(ah)
        mask_k = (k != 0.0) & np.isfinite(ak)
        term_h = np.where(mask_h, owens_t(h, np.where(mask_h, ah, 0.0)), term_h)
        term_k = np.where(mask_k, owens_t(k, np.where(mask_k, ak, 0.0)), term_k)

    both_zero = (h == 0.0) & (k == 0.0)
    delta = np.where((h * k < 0.0) | ((h * k == 0.0) & (h + k < 0.0)), 0.5, 0.0)
    p = 0.5 * (ndtr(h) + ndtr(k)) - term_h - term_k - delta
    # one limit at zero: P = Phi(other)/2 - T(other, -rho/sqrt(1-rho^2))
    only_h0 = (h == 0.0) & ~both_zero
    only_k0 = (k == 0.0) & ~both_zero
    if only_h0.any():
        p = np.where(only_h0, 0.5 * ndtr(k) - owens_t(k, -rho / s), p)
    if only_k0.any():
        p = np.where(only_k0, 0.5 * ndtr(h) - owens_t(h, -rho / s), p)
    if both_zero.any():
        p = np.where(both_zero, 0.25 + math.asin(rho) / (2.0 * math.pi), p)

    # infinite limits: -inf kills the probability, +inf drops the constraint
    p = np.where(np.isneginf(h) | np.isneginf(k), 0.0, p)
    p = np.where(np.isposinf(h), ndtr(k), p)
    p = np.where(np.isposinf(k) & np.isfinite(h), ndtr(h), p)
    p = np.where(np.isposinf(h) & np.isposinf(k), 1.0, p)
    p = np.clip(p, 0.0, 1.0)
    return p if p.ndim else float(p)


def _reorder_cholesky(sigma: np.ndarray, b: np.ndarray):
    """Variable reordering plus Cholesky for sequential conditioning.

    At each stage the remaining variable with the smallest conditional
    probability (evaluated at the truncated-normal means of the earlier
    stages) is processed next, which concentrates the integrand variation in
    the leading lattice coordinates.
    """
    d = sigma.shape[0]
    sig = sigma.copy()
    bb = b.astype(float).copy()
    perm = np.arange(d)
    lower = np.zeros((d, d))
    yhat = np.zeros(d)
    sqrt2pi = math.sqrt(2.0 * math.pi)
    for i in range(d):
        best_j, best_e = i, np.inf
        for j in range(i, d):
            s2 = sig[j, j] - lower[j, :i] @ lower[j, :i]
            if s2 < 1e-14:
                continue
            mu = lower[j, :i] @ yhat[:i]
            e = ndtr((bb[j] - mu) / math.sqrt(s2))
            if e < best_e:
                best_e, best_j = e, j
        if best_j != i:
            for arr in (sig,):
                arr[[i, best_j], :] = arr[[best_j, i], :]
                arr[:, [i, best_j]] = arr[:, [best_j, i]]
            bb[[i, best_j]] = bb[[best_j, i]]
            perm[[i, best_j]] = perm[[best_j, i]]
            lower[[i, best_j], :i] = lower[[best_j, i], :i]
        s2 = sig[i, i] - lower[i, :i] @ lower[i, :i]
        if s2 <= 1e-14:
            raise ValueError("covariance is numerically singular in sequential factorization")
        lower[i, i] = math.sqrt(s2)
        mu = lower[i, :i] @ yhat[:i]
        z = (bb[i] - mu) / lower[i, i]
        den = ndtr(z)
        if den > 1e-300:
            yhat[i] = -math.exp(-0.5 * z * z) / sqrt2pi / den
        else:
            yhat[i] = z - 1.0 / z
        for j in range(i + 1, d):
            lower[j, i] = (sig[j, i] - lower[i, :i] @ lower[j, :i]) / lower[i, i]
    return lower, perm


def _lattice(n_points: int, dim: int, shift: np.ndarray) -> np.ndarray:
    """Shifted square-root-prime lattice, folded by the tent map."""
    j = np.arange(1, n_points + 1, dtype=float)[:, None]
    q = np.sqrt(_PRIMES[:dim])[None, :]
    x = j * q + shift[None, :]
    x -= np.floor(x)
    return np.abs(2.0 * x - 1.0)


def _genz_batch(lower: np.ndarray, b: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Sequential-conditioning product averaged over shared lattice points.

    ``b`` holds one upper-limit row per batch entry; every row is integrated
    with the same points ``pts`` of shape (npts, d-1).
    """
    rows, d = b.shape
    npts = pts.shape[0]
    out = np.empty(rows)
    chunk = max(1, int(2.5e6 / max(npts * d, 1)))
    for lo in range(0, rows, chunk):
        hi = min(lo + chunk, rows)
        bb = b[lo:hi]
        e_prev = np.repeat(ndtr(bb[:, [0]] / lower[0, 0]), npts, axis=1)
        prod = e_prev.copy()
        ys = np.zeros((hi - lo, npts, max(d - 1, 1)))
        for i in range(1, d):
            u = np.clip(pts[None, :, i - 1] * e_prev, 1e-320, 1.0 - 1e-16)
            ys[:, :, i - 1] = ndtri(u)
            mu = ys[:, :, :i] @ lower[i, :i]
            e_prev = ndtr((bb[:, [i]] - mu) / lower[i, i])
            prod *= e_prev
        out[lo:hi] = prod.mean(axis=1)
    return out


def genz_rowwise(lower: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Sequential-conditioning product with one lattice point per row.

    The workhorse for joint integrals over (latent scale, censored block):
    each row pairs its own upper limits ``b[r]`` with its own uniforms
    ``u[r]``, and the caller averages groups of rows itself.

    Parameters
    ----------
    lower : (d, d) reordered Cholesky factor.
    b : (rows, d) upper limits, reordered to match ``lower``.
    u : (rows, d-1) uniforms in (0, 1).

    Returns
    -------
    (rows,) conditional-probability products (not yet averaged).
    """
    rows, d = b.shape
    e_prev = ndtr(b[:, 0] / lower[0, 0])
    prod = e_prev.copy()
    if d == 1:
        return prod
    ys = np.empty((rows, d - 1))
    for i in range(1, d):
        q = np.clip(u[:, i - 1] * e_prev, 1e-320, 1.0 - 1e-16)
        ys[:, i - 1] = ndtri(q)
        mu = ys[:, :i] @ lower[i, :i]
        e_prev = ndtr((b[:, i] - mu) / lower[i, i])
        prod *= e_prev
    return prod


@dataclass
class MvnCdfEstimate:
    """Gaussian CDF value with its Monte Carlo error diagnostics."""

    value: float
    se: float
    n_points: int
    seed: int
    converged: bool


def mvn_cdf(
    upper,
    sigma,
    abseps: float = 1e-4,
    releps: float = 0.0,
    seed: int = 0,
    n_shifts: int = 10,
    n_start: int = 128,
    max_points: int = 2**21,
) -> MvnCdfEstimate:
    """Zero-mean Gaussian orthant probability ``P(Z <= upper)``.

    Parameters
    ----------
    upper : array_like, shape (d,)
        Upper limits; entries may be infinite.
    sigma : array_like, shape (d, d)
        Correlation (or covariance) matrix, symmetric positive definite.
    abseps : float
        Target standard error. The estimator doubles its lattice size until
        ``se <= max(abseps, releps * value)`` or the point cap is reached.
    releps : float
        Optional relative target, useful for small tail probabilities.
    seed : int
        Randomized-shift seed; results are deterministic given the seed.
    n_shifts : int
        Independent lattice shifts used for the standard-error estimate.
    n_start, max_points : int
        Initial lattice size and total point budget.

    Returns
    -------
    MvnCdfEstimate
        ``converged`` is False when the budget was exhausted first.
    """
    upper = as_float_array(np.where(np.isnan(upper), np.nan, upper), "upper")
    if np.isnan(upper).any():
        raise ValueError("upper contains NaN")
    sigma = as_float_array(sigma, "sigma", ndim=2)
    d = sigma.shape[0]
    if upper.shape != (d,):
        raise ValueError(f"upper must have shape ({d},), got {upper.shape}")

    if d == 1:
        val = float(ndtr(upper[0] / math.sqrt(sigma[0, 0])))
        return MvnCdfEstimate(val, 1e-16, 1, seed, True)
    if d == 2:
        r = sigma[0, 1] / math.sqrt(sigma[0, 0] * sigma[1, 1])
        val = float(bvn_cdf(upper[0] / math.sqrt(sigma[0, 0]), upper[1] / math.sqrt(sigma[1, 1]), r))
        return MvnCdfEstimate(val, 1e-14, 1, seed, True)

    if np.isneginf(upper).any():
        return MvnCdfEstimate(0.0, 0.0, 0, seed, True)
    condition_check(sigma, "sigma")
    b = np.clip(upper, -38.0, 38.0)
    lower, perm = _reorder_cholesky(sigma, b)
    b2 = b[perm][None, :]

    ss = np.random.SeedSequence(seed)
    n = n_start
    total = 0
    value, se = 0.0, np.inf
    while True:
        rng = np.random.default_rng(ss.spawn(1)[0])
        shifts = rng.random((n_shifts, d - 1))
        ests = np.empty(n_shifts)
        for s in range(n_shifts):
            ests[s] = _genz_batch(lower, b2, _lattice(n, d - 1, shifts[s]))[0]
        total += n * n_shifts
        value = float(np.mean(ests))
        se = float(np.std(ests, ddof=1) / math.sqrt(n_shifts))
        target = max(abseps, releps * abs(value))
        if se <= target:
            return MvnCdfEstimate(min(max(value, 0.0), 1.0), se, total, seed, True)
        if total >= max_points:
            return MvnCdfEstimate(min(max(value, 0.0), 1.0), se, total, seed, False)
        n *= 2


def mvn_cdf_batch(
    uppers: np.ndarray,
    sigma: np.ndarray,
    n_points: int = 128,
    n_shifts: int = 1,
    seed: int = 0,
) -> np.ndarray:
    """Fixed-budget CDF values for many upper-limit rows, one covariance.

    The deterministic fast path used inside likelihood quadrature: a single
    reordering chosen from the componentwise median row, shared lattice
    shifts from ``seed``, no error estimate. Dimensions one and two use the
    exact closed forms.
    """
    uppers = np.atleast_2d(np.asarray(uppers, dtype=float))
    d = sigma.shape[0]
    if d == 1:
        return ndtr(uppers[:, 0] / math.sqrt(sigma[0, 0]))
    if d == 2:
        r = sigma[0, 1] / math.sqrt(sigma[0, 0] * sigma[1, 1])
        return np.asarray(bvn_cdf(uppers[:, 0] / math.sqrt(sigma[0, 0]),
                                  uppers[:, 1] / math.sqrt(sigma[1, 1]), r))
    b = np.clip(uppers, -38.0, 38.0)
    rep = np.median(b, axis=0)
    lower, perm = _reorder_cholesky(np.asarray(sigma, dtype=float), rep)
    b2 = np.ascontiguousarray(b[:, perm])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    out = np.zeros(b2.shape[0])
    for _ in range(n_shifts):
        shift = rng.random(d - 1)
        out += _genz_batch(lower, b2, _lattice(n_points, d - 1, shift))
    return np.clip(out / n_shifts, 0.0, 1.0)


@dataclass
class ConditionalGaussian:
    """Gaussian conditional law ``Z_rest | Z_cond = x`` for zero-mean Z.

    Attributes
    ----------
    mean : (r,) conditional mean.
    cov : (r, r) conditional covariance (independent of ``x``).
    coef : (r, c) regression coefficients mapping ``x`` to the mean.
    cond_idx, rest_idx : the conditioning and remaining index sets.
    """

    mean: np.ndarray
    cov: np.ndarray
    coef: np.ndarray
    cond_idx: np.ndarray
    rest_idx: np.ndarray


def conditional_gaussian(sigma, cond_idx, x_cond) -> ConditionalGaussian:
    """Condition a zero-mean Gaussian vector on a coordinate subset.

    Parameters
    ----------
    sigma : array_like, shape (d, d)
    cond_idx : array_like of int
        Nonempty set of conditioned coordinates.
    x_cond : array_like
        Observed values at ``cond_idx``.

    Returns
    -------
    ConditionalGaussian
        With empty ``mean``/``cov`` when ``cond_idx`` covers everything.
    """
    sigma = as_float_array(sigma, "sigma", ndim=2)
    d = sigma.shape[0]
    cond = check_indices(cond_idx, "cond_idx", d)
    x_cond = as_float_array(x_cond, "x_cond", ndim=1)
    if x_cond.shape[0] != cond.size:
        raise ValueError(f"x_cond must have length {cond.size}, got {x_cond.shape[0]}")
    rest = np.setdiff1d(np.arange(d), cond)
    s_cc = sigma[np.ix_(cond, cond)]
    condition_check(s_cc, "sigma[cond, cond]")
    if rest.size == 0:
        empty = np.zeros((0, 0))
        return ConditionalGaussian(np.zeros(0), empty, np.zeros((0, cond.size)), cond, rest)
    s_rc = sigma[np.ix_(rest, cond)]
    coef = np.linalg.solve(s_cc, s_rc.T).T
    mean = coef @ x_cond
    cov = sigma[np.ix_(rest, rest)] - coef @ s_rc.T
    cov = 0.5 * (cov + cov.T)
    return ConditionalGaussian(mean, cov, coef, cond, rest)
