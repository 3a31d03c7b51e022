"""Time-delay embedding and Hankel-style snapshot matrices.

Snapshot convention is column-major: each column of X, Xp is one time
sample, rows index observables.  For scalar input series, hankel_pair
builds the delay rows directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class SnapshotPair:
    """Matrices X, Xp of observable values at consecutive times.

    Columns are time samples; Xp is X advanced one step.  dt = 0 marks a
    discrete map time base.
    """

    X: np.ndarray
    Xp: np.ndarray
    dt: float = 0.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X))
        Xp = np.atleast_2d(np.asarray(self.Xp))
        if X.shape != Xp.shape:
            raise UsageError(f"snapshot shapes differ: {X.shape} vs {Xp.shape}")
        if X.shape[1] < 1:
            raise UsageError("snapshot pair needs at least one column")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Xp", Xp)

    @property
    def n_observables(self) -> int:
        return self.X.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    def to_csv(self, x_path, xp_path) -> None:
        np.savetxt(x_path, self.X, delimiter=",")
        np.savetxt(xp_path, self.Xp, delimiter=",")

    @classmethod
    def from_series(cls, series, dt: float = 0.0) -> "SnapshotPair":
        """Pair consecutive samples of a (m, n) series: X = rows 0..m-2."""
        arr = np.asarray(series)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape[0] < 2:
            raise UsageError("need at least two samples to form a snapshot pair")
        return cls(X=arr[:-1].T, Xp=arr[1:].T, dt=dt)


def delay_embed(series, N: int, stride: int = 1) -> np.ndarray:
    """Stack each sample with its N forward delays.

    Element k of the result is the concatenation
    (series[k], series[k+stride], ..., series[k+N*stride]); scalars give
    rows of length N+1, vector samples of width w give rows of (N+1)*w.
    """
    if N < 0:
        raise UsageError("number of delays must be >= 0")
    if stride < 1:
        raise UsageError("stride must be >= 1")
    arr = np.asarray(series)
    scalar_input = arr.ndim == 1
    if scalar_input:
        arr = arr[:, None]
    m = arr.shape[0]
    out_len = m - N * stride
    if out_len <= 0:
        raise UsageError(
            f"series of length {m} too short for {N} delays at stride {stride}"
        )
    blocks = [arr[j * stride : j * stride + out_len] for j in range(N + 1)]
    out = np.concatenate(blocks, axis=1)
    return out


def hankel_pair(series, rows: int, dt: float = 0.0) -> SnapshotPair:
    """Delay-vector snapshot matrices from a scalar or vector series.

    X columns are delay vectors of height `rows` starting at times
    0..m-1, Xp the same shifted one step.
    """
    if rows < 1:
        raise UsageError("rows must be >= 1")
    arr = np.asarray(series)
    length = arr.shape[0]
    if length < rows + 1:
        raise UsageError(f"series of length {length} too short for rows={rows}")
    emb = delay_embed(arr, N=rows - 1, stride=1)
    return SnapshotPair(X=emb[:-1].T, Xp=emb[1:].T, dt=dt)
