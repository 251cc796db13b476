"""Discretely observed paths, partitions and path transforms.

Paths are stored at their vertices only; linear interpolation between
vertices is implicit since every signature quantity downstream depends on
the vertex sequence alone.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass(frozen=True)
class Partition:
    """Strictly increasing grid t_0 < ... < t_M."""

    times: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("partition needs at least one time point")
        if not np.all(np.isfinite(times)):
            raise ValueError("partition times must be finite")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("partition times must be strictly increasing")

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def mesh(self) -> float:
        if self.n_steps == 0:
            return 0.0
        return float(np.max(np.diff(self.times)))

    def step_widths(self) -> np.ndarray:
        return np.diff(self.times)


def dyadic_partition(T: float, n: int) -> Partition:
    """Uniform partition of [0, T] with 2^n steps of width 2^-n T."""
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if n < 0:
        raise ValueError(f"dyadic level must be >= 0, got {n}")
    m = 2**n
    return Partition(np.linspace(0.0, T, m + 1))


def uniform_partition(T: float, n_steps: int) -> Partition:
    if n_steps < 1:
        raise ValueError("need at least one step")
    return Partition(np.linspace(0.0, float(T), n_steps + 1))


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """Vertex samples of a d-dimensional piecewise-linear path."""

    partition: Partition
    samples: np.ndarray  # (M+1, d)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        object.__setattr__(self, "samples", samples)
        if samples.shape[0] != self.partition.times.size:
            raise ValueError(
                f"{samples.shape[0]} samples for {self.partition.times.size} time points"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("path samples must be finite")

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @property
    def n_steps(self) -> int:
        return self.partition.n_steps

    def increments(self) -> np.ndarray:
        return np.diff(self.samples, axis=0)

    def reversed(self) -> "PiecewiseLinearPath":
        times = self.partition.times
        rev_times = times[-1] - times[::-1] + times[0]
        return PiecewiseLinearPath(Partition(rev_times), self.samples[::-1].copy())

    def retimed(self, times: np.ndarray) -> "PiecewiseLinearPath":
        """Same vertex sequence on a different strictly increasing clock."""
        return PiecewiseLinearPath(Partition(np.asarray(times, dtype=float)), self.samples.copy())

def add_time(p: PiecewiseLinearPath) -> PiecewiseLinearPath:
    """Prepend the running time as an extra first coordinate."""
    cols = np.column_stack([p.partition.times, p.samples])
    return PiecewiseLinearPath(p.partition, cols)


def lead_lag(p: PiecewiseLinearPath) -> PiecewiseLinearPath:
    """Interleaved 2d-dimensional embedding with 2M+1 vertices.

    Vertex sequence (X_0,X_0), (X_1,X_0), (X_1,X_1), ..., (X_M,X_M): the
    leading block (first d coordinates) moves first on every odd step and
    the lagging block catches up on the following even step.  Timestamps are
    the uniform refinement t_m, (t_m + t_{m+1})/2; signatures are invariant
    under any other increasing choice.
    """
    m = p.n_steps
    if m < 1:
        raise ValueError("lead-lag needs at least one increment")
    times = p.partition.times
    samples = p.samples
    out = np.empty((2 * m + 1, 2 * p.d))
    out[0::2, : p.d] = samples
    out[1::2, : p.d] = samples[1:]
    out[0::2, p.d :] = samples
    out[1::2, p.d :] = samples[:-1]
    mid = 0.5 * (times[:-1] + times[1:])
    new_times = np.empty(2 * m + 1)
    new_times[0::2] = times
    new_times[1::2] = mid
    return PiecewiseLinearPath(Partition(new_times), out)


def qv_augment(p: PiecewiseLinearPath) -> PiecewiseLinearPath:
    """Append the d^2 running step-product coordinates.

    Coordinate (i, j) accumulates X^(i)_{u,v} X^(j)_{u,v} over the steps up
    to each vertex; it maps to the extra letter d + (i-1)*d + j.
    """
    dx = p.increments()
    prods = dx[:, :, None] * dx[:, None, :]
    qv = np.zeros((p.samples.shape[0], p.d * p.d))
    qv[1:] = np.cumsum(prods.reshape(dx.shape[0], -1), axis=0)
    return PiecewiseLinearPath(p.partition, np.column_stack([p.samples, qv]))


def qv_letter(d: int, i: int, j: int) -> int:
    """Augmented-alphabet letter of the (i, j) quadratic-covariation slot."""
    if not (1 <= i <= d and 1 <= j <= d):
        raise ValueError(f"component pair ({i}, {j}) outside [1, {d}]^2")
    return d + (i - 1) * d + j


def chop(long: PiecewiseLinearPath, T: float, N: int) -> List[PiecewiseLinearPath]:
    """Cut a long observation into N segments of horizon T.

    Each segment is re-based to start at time 0 and value 0 (the increment
    process), so (chop) segments feed the same estimators as (ind) samples.
    Segment boundaries must lie on the observation grid.
    """
    if N < 1:
        raise ValueError("need at least one segment")
    if T <= 0:
        raise ValueError("segment length must be positive")
    times = long.partition.times
    total = times[-1] - times[0]
    if total + 1e-12 < N * T:
        raise ValueError(f"horizon {total} shorter than {N} segments of length {T}")
    segments = []
    tol = 1e-9 * max(T, 1.0)
    for k in range(N):
        lo, hi = times[0] + k * T, times[0] + (k + 1) * T
        i0 = int(np.searchsorted(times, lo - tol))
        i1 = int(np.searchsorted(times, hi - tol))
        if abs(times[i0] - lo) > tol or i1 >= times.size or abs(times[i1] - hi) > tol:
            raise ValueError(f"segment boundary {lo} or {hi} not on the observation grid")
        seg_times = times[i0 : i1 + 1] - times[i0]
        seg_samples = long.samples[i0 : i1 + 1] - long.samples[i0]
        segments.append(PiecewiseLinearPath(Partition(seg_times), seg_samples))
    return segments


def insert_midpoint(p: PiecewiseLinearPath, step: int) -> PiecewiseLinearPath:
    """Insert the collinear midpoint of one step (refinement, same path)."""
    times = p.partition.times
    if not 0 <= step < p.n_steps:
        raise ValueError(f"step {step} out of range")
    t_mid = 0.5 * (times[step] + times[step + 1])
    x_mid = 0.5 * (p.samples[step] + p.samples[step + 1])
    new_times = np.insert(times, step + 1, t_mid)
    new_samples = np.insert(p.samples, step + 1, x_mid, axis=0)
    return PiecewiseLinearPath(Partition(new_times), new_samples)


def to_csv(p: PiecewiseLinearPath) -> str:
    """Serialize with header "t,x1,...,xd"."""
    header = "t," + ",".join(f"x{i}" for i in range(1, p.d + 1))
    buf = io.StringIO()
    buf.write(header + "\n")
    for t, row in zip(p.partition.times, p.samples):
        buf.write(",".join(repr(float(v)) for v in (t, *row)) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> PiecewiseLinearPath:
    """Parse the "t,x1,...,xd" format; validates strict monotonicity of t."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty path file")
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "t" or len(header) < 2:
        raise ValueError(f"expected header 't,x1,...,xd', got {lines[0]!r}")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] != len(header):
        raise ValueError("row width does not match header")
    return PiecewiseLinearPath(Partition(arr[:, 0]), arr[:, 1:])
