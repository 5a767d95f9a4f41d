"""Quaternion arithmetic and the split-layout vector representation.

A quaternion ``q = r + x*i + y*j + z*k`` is held as four float64 components
in (r, x, y, z) order.  Vectors of N quaternions use the *split* layout: one
contiguous array of length 4N storing all N r-parts first, then the x-, y-
and z-parts.  Every layer in this package shares that convention, both in
memory and on disk, so it is the single canonical ordering.

All operations here are pure functions over immutable values and are safe to
call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Quaternion",
    "QuaternionVector",
    "MalformedVectorError",
    "hamilton_product",
    "conjugate",
    "norm",
    "left_mul_matrix",
    "pack_split",
    "unpack_split",
]


class MalformedVectorError(ValueError):
    """Component array cannot be read as split-layout quaternions."""


@dataclass(frozen=True)
class Quaternion:
    """A single quaternion with components in (r, x, y, z) order."""

    r: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        for c in (self.r, self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError(f"quaternion components must be finite, got {c!r}")

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.r + other.r, self.x + other.x,
                          self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.r - other.r, self.x - other.x,
                          self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.r, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return hamilton_product(self, other)
        return Quaternion(self.r * other, self.x * other,
                          self.y * other, self.z * other)

    def __rmul__(self, scalar):
        return self.__mul__(scalar)

    def conjugate(self) -> "Quaternion":
        return conjugate(self)

    def norm(self) -> float:
        return norm(self)

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        r, x, y, z = np.asarray(arr, dtype=np.float64)
        return cls(float(r), float(x), float(y), float(z))


def hamilton_product(q1: Quaternion, q2: Quaternion) -> Quaternion:
    """Non-commutative quaternion product (i*j = k, j*i = -k)."""
    return Quaternion(
        q1.r * q2.r - q1.x * q2.x - q1.y * q2.y - q1.z * q2.z,
        q1.r * q2.x + q1.x * q2.r + q1.y * q2.z - q1.z * q2.y,
        q1.r * q2.y - q1.x * q2.z + q1.y * q2.r + q1.z * q2.x,
        q1.r * q2.z + q1.x * q2.y - q1.y * q2.x + q1.z * q2.r,
    )


def conjugate(q: Quaternion) -> Quaternion:
    """Flip the sign of the imaginary parts: (r, -x, -y, -z)."""
    return Quaternion(q.r, -q.x, -q.y, -q.z)


def norm(q: Quaternion) -> float:
    """Euclidean norm of the component 4-vector."""
    return math.sqrt(q.r * q.r + q.x * q.x + q.y * q.y + q.z * q.z)


def left_mul_matrix(q: Quaternion) -> np.ndarray:
    """4x4 real matrix M with M @ [r2,x2,y2,z2] == q * q2, rows in (r,x,y,z) order."""
    r, x, y, z = q.r, q.x, q.y, q.z
    return np.array(
        [
            [r, -x, -y, -z],
            [x, r, -z, y],
            [y, z, r, -x],
            [z, -y, x, r],
        ],
        dtype=np.float64,
    )


class QuaternionVector:
    """N quaternions stored as one length-4N float64 array in split layout."""

    __slots__ = ("components", "n_quats")

    def __init__(self, components):
        arr = np.ascontiguousarray(components, dtype=np.float64)
        if arr.ndim != 1:
            raise MalformedVectorError(f"expected a 1-D component array, got shape {arr.shape}")
        if arr.size == 0 or arr.size % 4 != 0:
            raise MalformedVectorError(
                f"component length must be a positive multiple of 4, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise MalformedVectorError("components contain non-finite values")
        self.components = arr
        self.n_quats = arr.size // 4

    def __len__(self) -> int:
        return self.n_quats

    def __repr__(self) -> str:
        return f"QuaternionVector(n_quats={self.n_quats})"

    def quaternion(self, n: int) -> Quaternion:
        """Quaternion n, gathered from the four split sections."""
        if not 0 <= n < self.n_quats:
            raise IndexError(n)
        c, stride = self.components, self.n_quats
        return Quaternion(float(c[n]), float(c[stride + n]),
                          float(c[2 * stride + n]), float(c[3 * stride + n]))

    def to_quaternions(self) -> list[Quaternion]:
        return [self.quaternion(n) for n in range(self.n_quats)]

    def part(self, component) -> np.ndarray:
        """One of the four component sections, by index (0-3) or letter (r/x/y/z)."""
        if isinstance(component, str):
            try:
                component = "rxyz".index(component)
            except ValueError:
                raise KeyError(f"unknown component {component!r}; expected r, x, y, or z")
        if not 0 <= component < 4:
            raise IndexError(component)
        stride = self.n_quats
        return self.components[component * stride:(component + 1) * stride]


def pack_split(quats: list[Quaternion]) -> QuaternionVector:
    """Lay out a list of quaternions in split order: all r-parts, then x, y, z."""
    if not quats:
        raise MalformedVectorError("cannot pack an empty quaternion list")
    rows = np.array([(q.r, q.x, q.y, q.z) for q in quats], dtype=np.float64)
    return QuaternionVector(rows.T.reshape(-1))


def unpack_split(v) -> list[Quaternion]:
    """Inverse of pack_split; accepts a QuaternionVector or a raw component array."""
    if not isinstance(v, QuaternionVector):
        v = QuaternionVector(v)
    return v.to_quaternions()
