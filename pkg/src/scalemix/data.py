"""Datasets, rank-based pseudo-uniform transforms, and file formats.

Observations live in an n-by-d matrix with NaN marking missing cells.
All downstream inference consumes the pseudo-uniform scale produced by
:func:`rank_transform`, which ranks each column over its observed
entries only.

File formats are plain CSV: a sites table with columns ``label,x,y``
and an observations table whose header is ``time`` followed by the
site labels, with empty cells for missing values. Primary outputs can
carry a JSON metadata sidecar (parameters, seed, software version)
written next to the data file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from ._version import __version__
from .correlation import SiteSet
from .validation import as_float_array, check_positive

__all__ = [
    "Dataset",
    "PseudoUniformData",
    "block_resample",
    "rank_transform",
    "read_meta",
    "read_observations",
    "read_sites",
    "write_matrix",
    "write_meta",
    "write_observations",
    "write_sites",
]


def _check_time(time, n: int) -> np.ndarray:
    """Validate a strictly increasing vector of n time stamps."""
    if time is None:
        return np.arange(n)
    arr = np.asarray(time)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValueError(f"time index must have shape ({n},), got {arr.shape}")
    if np.issubdtype(arr.dtype, np.number):
        if not np.isfinite(arr).all():
            raise ValueError("time stamps must be finite")
        ok = bool(np.all(arr[1:] > arr[:-1]))
    else:
        arr = arr.astype(str)
        ok = all(a < b for a, b in zip(arr[:-1], arr[1:]))
    if not ok:
        raise ValueError("time stamps must be strictly increasing")
    return arr


@dataclass
class Dataset:
    """Replicated spatial observations on a fixed site collection.

    Parameters
    ----------
    observations : array_like, shape (n, d)
        One replicate per row, one site per column. NaN marks a
        missing cell.
    sites : SiteSet
        The d measurement locations, in column order.
    time : array_like, shape (n,), optional
        Strictly increasing stamps (integers or sortable strings) used
        to define temporal blocks. Defaults to ``0 .. n-1``.

    Notes
    -----
    Every column must retain at least two observed values; the missing
    mask is derived from the NaN sentinel, so the two can never
    disagree.
    """

    observations: np.ndarray
    sites: SiteSet
    time: np.ndarray | None = None
    missing: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        obs = as_float_array(self.observations, "observations", ndim=2,
                             allow_nan=True)
        if not isinstance(self.sites, SiteSet):
            raise TypeError("sites must be a SiteSet")
        if obs.shape[1] != len(self.sites):
            raise ValueError(
                f"observations have {obs.shape[1]} columns but the site "
                f"collection has {len(self.sites)} sites")
        self.observations = obs
        self.missing = np.isnan(obs)
        counts = (~self.missing).sum(axis=0)
        short = np.nonzero(counts < 2)[0]
        if short.size:
            labels = ", ".join(self.sites.labels[k] for k in short)
            raise ValueError(
                f"each column needs at least 2 observed values; too few at: "
                f"{labels}")
        self.time = _check_time(self.time, obs.shape[0])

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def dim(self) -> int:
        return self.observations.shape[1]

    def observed_counts(self) -> np.ndarray:
        """Number of observed values per column."""
        return (~self.missing).sum(axis=0)


@dataclass
class PseudoUniformData:
    """Rank-transformed observations on the pseudo-uniform scale.

    Observed cells lie strictly inside (0, 1); missing cells stay NaN.
    Instances produced by :func:`rank_transform` additionally satisfy
    the rank-lattice property: per column, the observed values are
    exactly the average ranks divided by (observed count + 1).
    """

    values: np.ndarray
    missing: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vals = as_float_array(self.values, "values", ndim=2, allow_nan=True)
        obs = ~np.isnan(vals)
        inside = (vals > 0.0) & (vals < 1.0)
        if not inside[obs].all():
            raise ValueError(
                "pseudo-uniform values must lie strictly inside (0, 1)")
        self.values = vals
        self.missing = ~obs

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def rank_transform(data) -> PseudoUniformData:
    """Columnwise rank transform to the pseudo-uniform scale.

    Each column is ranked over its observed entries (average ranks for
    ties) and divided by the observed count plus one, so values fall
    strictly inside (0, 1). Missing cells stay missing. The result is
    invariant under strictly increasing transformations of the raw
    data, and idempotent: transforming the output reproduces it.

    Parameters
    ----------
    data : Dataset or array_like, shape (n, d)
        Raw observations; NaN marks missing cells.

    Returns
    -------
    PseudoUniformData

    Raises
    ------
    ValueError
        If some column is constant over its observed entries (its
        ranks would carry no information).
    """
    obs = data.observations if isinstance(data, Dataset) else \
        as_float_array(data, "data", ndim=2, allow_nan=True)
    out = np.full(obs.shape, np.nan)
    for k in range(obs.shape[1]):
        col = obs[:, k]
        seen = ~np.isnan(col)
        m = int(seen.sum())
        if m < 2:
            raise ValueError(f"column {k} has fewer than 2 observed values")
        vals = col[seen]
        if np.all(vals == vals[0]):
            raise ValueError(f"column {k} is constant; ranks are undefined")
        out[seen, k] = rankdata(vals, method="average") / (m + 1.0)
    return PseudoUniformData(out)


def block_resample(data: Dataset, block_length: int, rng) -> Dataset:
    """Resample whole temporal blocks with replacement, keeping length n.

    Rows are partitioned into consecutive blocks of ``block_length``
    (the last block may be shorter). Blocks are drawn uniformly with
    replacement and concatenated until n rows are reached, truncating
    the final block if needed. Each row keeps its missing pattern. The
    resample gets a fresh ``0 .. n-1`` time index, since the original
    stamps would repeat.

    With ``block_length >= n`` there is a single block and the
    resample equals the original data.
    """
    block_length = int(block_length)
    check_positive(block_length, "block_length")
    n = data.n
    starts = np.arange(0, n, block_length)
    rows = np.empty(0, dtype=int)
    while rows.size < n:
        s = int(starts[rng.integers(0, starts.size)])
        rows = np.concatenate([rows, np.arange(s, min(s + block_length, n))])
    return Dataset(data.observations[rows[:n]], data.sites)


# --------------------------------------------------------------------- files


def write_sites(path, sites: SiteSet) -> None:
    """Write a site collection as CSV with columns label, x, y."""
    frame = pd.DataFrame({
        "label": sites.labels,
        "x": sites.coords[:, 0],
        "y": sites.coords[:, 1],
    })
    frame.to_csv(path, index=False)


def read_sites(path) -> SiteSet:
    """Read a site collection written by :func:`write_sites`."""
    frame = pd.read_csv(path, dtype={"label": str})
    needed = ["label", "x", "y"]
    if list(frame.columns) != needed:
        raise ValueError(
            f"sites file {path} must have columns {needed}, "
            f"got {list(frame.columns)}")
    coords = frame[["x", "y"]].to_numpy(dtype=float)
    return SiteSet(coords, list(frame["label"]))


def write_matrix(path, values, labels, time=None) -> None:
    """Write a raw observation table; ``values`` may have zero rows.

    Lower-level sibling of :func:`write_observations` for outputs that
    do not satisfy Dataset invariants (an empty simulation, say).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(labels):
        raise ValueError(
            f"values must have shape (n, {len(labels)}), got {values.shape}")
    frame = pd.DataFrame(values, columns=list(labels))
    frame.insert(0, "time", np.arange(len(frame)) if time is None else time)
    frame.to_csv(path, index=False, na_rep="")


def write_observations(path, data: Dataset) -> None:
    """Write observations as CSV: time column, one column per site.

    Missing cells are written empty.
    """
    write_matrix(path, data.observations, data.sites.labels, time=data.time)


def read_observations(path, sites: SiteSet) -> Dataset:
    """Read an observations CSV against a known site collection.

    The header must be ``time`` followed by the site labels in order;
    empty cells become missing values.
    """
    frame = pd.read_csv(path)
    expected = ["time"] + list(sites.labels)
    if list(frame.columns) != expected:
        raise ValueError(
            f"observations file {path} must have columns {expected}, "
            f"got {list(frame.columns)}")
    cols = []
    for lab in sites.labels:
        try:
            cols.append(pd.to_numeric(frame[lab], errors="raise"))
        except (ValueError, TypeError) as exc:
            raise ValueError(
                f"non-numeric value in column {lab!r} of {path}: {exc}"
            ) from None
    obs = np.column_stack([c.to_numpy(dtype=float) for c in cols])
    time = frame["time"].to_numpy()
    return Dataset(obs, sites, time=time)


def _sidecar_path(path) -> str:
    return f"{path}.meta.json"


def write_meta(path, payload: dict) -> str:
    """Write a JSON metadata sidecar next to ``path``.

    The software version is recorded automatically. Returns the
    sidecar path.
    """
    body = dict(payload)
    body.setdefault("version", __version__)
    target = _sidecar_path(path)
    with open(target, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return target


def read_meta(path) -> dict:
    """Read the metadata sidecar written next to ``path``."""
    with open(_sidecar_path(path)) as fh:
        return json.load(fh)
