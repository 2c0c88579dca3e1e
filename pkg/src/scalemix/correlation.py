"""Site geometry and the spatial correlation family.

Correlation between two sites is ``exp{-(h/lam)**nu}`` where ``h`` is either
the Euclidean separation or, in the geometrically anisotropic case, the
Mahalanobis distance induced by a rotated and stretched metric: with rotation
angle ``angle`` and axis-length ratio ``ratio >= 1``,

    h**2 = d' R(angle) diag(1, ratio**2) R(angle)' d,    d = s2 - s1.

Separations along the rotated first axis keep their Euclidean length (major
axis, strongest correlation); separations along the perpendicular axis are
stretched by ``ratio`` (minor axis, fastest decay).
"""

from __future__ import annotations

import numpy as np

from .validation import as_float_array, check_in_interval, check_positive

#: correlation matrices with condition number above this raise instead of
#: being silently regularized
CONDITION_LIMIT = 1e12


class SiteSet:
    """Labeled planar measurement locations.

    Parameters
    ----------
    coords : array_like, shape (d, 2)
        Site coordinates (same length unit as the correlation range).
    labels : sequence of str, optional
        Unique site labels; defaults to ``s0, s1, ...``.
    """

    def __init__(self, coords, labels=None):
        self.coords = as_float_array(coords, "coords", ndim=2)
        if self.coords.shape[1] != 2:
            raise ValueError(f"coords must have shape (d, 2), got {self.coords.shape}")
        d = self.coords.shape[0]
        if labels is None:
            labels = [f"s{i}" for i in range(d)]
        labels = [str(lab) for lab in labels]
        if len(labels) != d:
            raise ValueError(f"expected {d} labels, got {len(labels)}")
        if len(set(labels)) != d:
            raise ValueError("site labels must be unique")
        self.labels = labels

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __repr__(self) -> str:
        return f"SiteSet({len(self)} sites)"

    def subset(self, indices) -> "SiteSet":
        """Return the sub-collection at the given positional indices."""
        indices = np.asarray(indices, dtype=int)
        return SiteSet(self.coords[indices], [self.labels[i] for i in indices])


def _anisotropy_inverse_metric(ratio: float, angle: float) -> np.ndarray:
    """Inverse metric M with h**2 = d' M d for the stretched rotated plane."""
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([1.0, ratio**2]) @ rot.T


def mahalanobis_distance(s1, s2, ratio: float = 1.0, angle: float = 0.0):
    """Anisotropic separation distance between two sites (or site arrays).

    Parameters
    ----------
    s1, s2 : array_like, shape (2,) or (n, 2)
        Planar coordinates.
    ratio : float, default 1.0
        Axis-length ratio (>= 1). ``ratio=1`` reduces to Euclidean distance
        for every angle.
    angle : float
        Major-axis direction in radians, measured from the first coordinate
        axis. Only defined modulo pi.

    Returns
    -------
    float or ndarray
        Nonnegative distance(s); zero only for coincident sites.
    """
    s1 = as_float_array(s1, "s1")
    s2 = as_float_array(s2, "s2")
    ratio = check_positive(ratio, "ratio")
    if ratio < 1.0:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    d = np.atleast_2d(s2 - s1).astype(float)
    if d.shape[-1] != 2:
        raise ValueError("sites must be planar (last axis of length 2)")
    m = _anisotropy_inverse_metric(ratio, float(angle))
    h2 = np.einsum("...i,ij,...j->...", d, m, d)
    h = np.sqrt(np.maximum(h2, 0.0))
    if np.ndim(s1) == 1 and np.ndim(s2) == 1:
        return float(h[0])
    return h


class CorrelationModel:
    """Powered-exponential correlation with optional geometric anisotropy.

    Parameters
    ----------
    lam : float
        Range parameter (> 0).
    nu : float
        Smoothness exponent in (0, 2].
    ratio : float, default 1.0
        Anisotropy axis-length ratio (>= 1).
    angle : float, default 0.0
        Major-axis direction in radians.
    """

    def __init__(self, lam: float, nu: float, ratio: float = 1.0, angle: float = 0.0):
        self.lam = check_positive(lam, "lam")
        self.nu = check_in_interval(nu, "nu", 0.0, 2.0, low_open=True)
        self.ratio = check_positive(ratio, "ratio")
        if self.ratio < 1.0:
            raise ValueError(f"ratio must be >= 1, got {self.ratio}")
        self.angle = float(angle)

    def __repr__(self) -> str:
        return (
            f"CorrelationModel(lam={self.lam:g}, nu={self.nu:g}, "
            f"ratio={self.ratio:g}, angle={self.angle:g})"
        )

    @property
    def isotropic(self) -> bool:
        return self.ratio == 1.0

    def distance(self, s1, s2):
        """Separation distance under this model's metric."""
        return mahalanobis_distance(s1, s2, self.ratio, self.angle)

    def correlation_of_distance(self, h):
        """Correlation at separation distance ``h``."""
        h = np.asarray(h, dtype=float)
        rho = np.exp(-((h / self.lam) ** self.nu))
        return rho if rho.ndim else float(rho)

    def correlation(self, s1, s2):
        """Correlation between two sites."""
        return self.correlation_of_distance(self.distance(s1, s2))


def build_correlation(sites: SiteSet, model: CorrelationModel) -> np.ndarray:
    """Correlation matrix of a site collection under a correlation model.

    Parameters
    ----------
    sites : SiteSet
    model : CorrelationModel

    Returns
    -------
    ndarray, shape (d, d)
        Symmetric positive definite matrix with unit diagonal.

    Raises
    ------
    ValueError
        If the matrix condition number exceeds ``CONDITION_LIMIT`` (for
        example when two sites coincide). The matrix is never regularized
        silently.
    """
    coords = sites.coords if isinstance(sites, SiteSet) else SiteSet(coords=sites).coords
    m = _anisotropy_inverse_metric(model.ratio, model.angle)
    diff = coords[:, None, :] - coords[None, :, :]
    h2 = np.einsum("abi,ij,abj->ab", diff, m, diff)
    h = np.sqrt(np.maximum(h2, 0.0))
    sigma = np.exp(-((h / model.lam) ** model.nu))
    np.fill_diagonal(sigma, 1.0)
    cond = np.linalg.cond(sigma)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise ValueError(
            f"correlation matrix is near-singular (condition estimate {cond:.3e} "
            f"> {CONDITION_LIMIT:.0e}); check for duplicate or near-duplicate sites"
        )
    return sigma
