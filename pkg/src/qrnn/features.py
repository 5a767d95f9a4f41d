"""Frame-level acoustic features packed into quaternion channels.

Given a (frames, bands) matrix of filter-bank energies, each band becomes
one quaternion per frame: real part the energy, imaginary parts the first
three temporal derivatives estimated by the usual regression formula

    d[t] = sum_{n=1..N} n * (e[t+n] - e[t-n]) / (2 * sum_{n=1..N} n^2)

with edges handled by replicating the first/last frame.  Higher orders
iterate the same formula on the previous order's output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quaternions import QuaternionVector, pack_split

__all__ = [
    "EnergyMatrix",
    "compute_delta",
    "delta_stack",
    "pack_features",
    "frame_vector",
]


@dataclass
class EnergyMatrix:
    """A (frames, bands) array of non-quaternion frame energies."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"expected a 2-D (frames, bands) matrix, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("energy matrix contains non-finite values")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_csv(cls, path) -> "EnergyMatrix":
        rows = []
        width = None
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                fields = line.split(",")
                if width is None:
                    width = len(fields)
                elif len(fields) != width:
                    raise ValueError(
                        f"ragged csv: line {lineno} has {len(fields)} fields, expected {width}")
                try:
                    rows.append([float(f) for f in fields])
                except ValueError as exc:
                    raise ValueError(f"non-numeric field on line {lineno}") from exc
        if not rows:
            raise ValueError("empty csv")
        return cls(np.asarray(rows, dtype=np.float64))


def compute_delta(values: np.ndarray, window: int = 2) -> np.ndarray:
    """Regression delta along axis 0 with edge frames replicated."""
    values = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    if values.shape[0] == 0:
        return values.copy()
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    padded = np.concatenate([
        np.repeat(values[:1], window, axis=0),
        values,
        np.repeat(values[-1:], window, axis=0),
    ], axis=0)
    t = values.shape[0]
    out = np.zeros_like(values)
    for n in range(1, window + 1):
        out += n * (padded[window + n:window + n + t]
                    - padded[window - n:window - n + t])
    out /= denom
    return out


def delta_stack(values: np.ndarray, orders: int = 3, window: int = 2) -> list[np.ndarray]:
    """[energy, delta, delta-delta, ...] up to `orders` derivative orders."""
    values = np.asarray(values, dtype=np.float64)
    stack = [values]
    for _ in range(orders):
        stack.append(compute_delta(stack[-1], window=window))
    return stack


def pack_features(energies: EnergyMatrix, window: int = 2) -> np.ndarray:
    """(frames, 4 * bands) feature matrix in split component order.

    Row t holds all band energies, then all first, second, and third
    deltas, so each band's quaternion occupies columns (b, F+b, 2F+b, 3F+b)
    for F bands.
    """
    e, d1, d2, d3 = delta_stack(energies.values, orders=3, window=window)
    return np.concatenate([e, d1, d2, d3], axis=1)


def frame_vector(features: np.ndarray, t: int) -> QuaternionVector:
    """One frame of a packed feature matrix as a quaternion vector."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] % 4 != 0:
        raise ValueError("expected a (frames, 4*bands) packed feature matrix")
    return QuaternionVector(features[t].copy())
