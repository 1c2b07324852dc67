"""Points in H, stacks in H^(m-1), and the weighted product-space geometry.

A ``Point`` is either a dense real vector or a dense symmetric matrix.
A ``Stack`` is a tuple of identically shaped points, one block per
operator except the last. ``Weights`` carries the positive block weights
that define the weighted inner product used everywhere in the solver.
All three are immutable values; every operation returns a fresh object.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Point",
    "Stack",
    "Weights",
    "ShapeMismatchError",
    "lambda_inner",
    "lambda_norm",
    "embed",
    "weighted_average",
    "point_to_json",
    "point_from_json",
]

WEIGHT_SUM_TOL = 1e-12


class ShapeMismatchError(ValueError):
    """Raised when points or stacks of incompatible shapes are combined."""


@dataclass(frozen=True)
class Point:
    """A dense vector in R^n or a symmetric matrix in S^p.

    Matrix payloads are symmetrized on construction, so
    ``entry(i, j) == entry(j, i)`` holds exactly afterwards.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim == 1:
            pass
        elif arr.ndim == 2:
            if arr.shape[0] != arr.shape[1]:
                raise ShapeMismatchError(
                    f"matrix points must be square, got {arr.shape}"
                )
            arr = (arr + arr.T) / 2.0
        else:
            raise ShapeMismatchError(
                f"points are vectors or square matrices, got ndim={arr.ndim}"
            )
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @staticmethod
    def vector(values) -> "Point":
        arr = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
        return Point(arr)

    @staticmethod
    def symmetric(values) -> "Point":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2:
            raise ShapeMismatchError("symmetric points need a 2-d array")
        return Point(arr)

    @staticmethod
    def zeros_like(other: "Point") -> "Point":
        return Point(np.zeros_like(other.data))

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def is_matrix(self) -> bool:
        return self.data.ndim == 2

    @property
    def entry_count(self) -> int:
        return self.data.size

    def _check_same_shape(self, other: "Point") -> None:
        if self.shape != other.shape:
            raise ShapeMismatchError(
                f"shape mismatch: {self.shape} vs {other.shape}"
            )

    def __add__(self, other: "Point") -> "Point":
        self._check_same_shape(other)
        return Point(self.data + other.data)

    def __sub__(self, other: "Point") -> "Point":
        self._check_same_shape(other)
        return Point(self.data - other.data)

    def __neg__(self) -> "Point":
        return Point(-self.data)

    def __mul__(self, alpha: float) -> "Point":
        return Point(self.data * float(alpha))

    __rmul__ = __mul__

    def inner(self, other: "Point") -> float:
        self._check_same_shape(other)
        return float(np.vdot(self.data, other.data))

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def mean_square(self) -> float:
        """Entry-averaged squared norm: (1/p^2) sum of squares for a p x p
        matrix, (1/n) for a length-n vector."""
        return float(np.vdot(self.data, self.data)) / self.entry_count

    def allclose(self, other: "Point", tol: float = 1e-12) -> bool:
        self._check_same_shape(other)
        return bool(np.allclose(self.data, other.data, rtol=0.0, atol=tol))


@dataclass(frozen=True)
class Stack:
    """An element of H^(m-1): a tuple of m-1 identically shaped points."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("a stack needs at least one block")
        shape = blocks[0].shape
        for b in blocks[1:]:
            if b.shape != shape:
                raise ShapeMismatchError(
                    f"all blocks must share one shape: {shape} vs {b.shape}"
                )
        object.__setattr__(self, "blocks", blocks)

    @staticmethod
    def of(points: Iterable[Point]) -> "Stack":
        return Stack(tuple(points))

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    @property
    def block_shape(self) -> tuple:
        return self.blocks[0].shape

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, i: int) -> Point:
        return self.blocks[i]

    def _check_compatible(self, other: "Stack") -> None:
        if self.block_count != other.block_count:
            raise ShapeMismatchError(
                f"block count mismatch: {self.block_count} vs {other.block_count}"
            )
        if self.block_shape != other.block_shape:
            raise ShapeMismatchError(
                f"block shape mismatch: {self.block_shape} vs {other.block_shape}"
            )

    def __add__(self, other: "Stack") -> "Stack":
        self._check_compatible(other)
        return Stack(tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "Stack") -> "Stack":
        self._check_compatible(other)
        return Stack(tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __mul__(self, alpha: float) -> "Stack":
        return Stack(tuple(b * alpha for b in self.blocks))

    __rmul__ = __mul__

    def allclose(self, other: "Stack", tol: float = 1e-12) -> bool:
        self._check_compatible(other)
        return all(a.allclose(b, tol) for a, b in zip(self.blocks, other.blocks))


@dataclass(frozen=True)
class Weights:
    """Positive block weights summing to one."""

    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        if not lam:
            raise ValueError("weights must be nonempty")
        if any(v <= 0.0 for v in lam):
            raise ValueError(f"weights must be strictly positive, got {lam}")
        total = sum(lam)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}")
        object.__setattr__(self, "lambdas", lam)

    @staticmethod
    def of(values: Sequence[float]) -> "Weights":
        return Weights(tuple(values))

    @staticmethod
    def equal(count: int) -> "Weights":
        if count < 1:
            raise ValueError("count must be >= 1")
        return Weights(tuple(1.0 / count for _ in range(count)))

    @property
    def count(self) -> int:
        return len(self.lambdas)

    @property
    def lam_min(self) -> float:
        return min(self.lambdas)

    @property
    def lam_max(self) -> float:
        return max(self.lambdas)

    def __iter__(self):
        return iter(self.lambdas)

    def __getitem__(self, i: int) -> float:
        return self.lambdas[i]


def _check_weights_match(x: Stack, w: Weights) -> None:
    if x.block_count != w.count:
        raise ShapeMismatchError(
            f"stack has {x.block_count} blocks but weights have {w.count}"
        )


def lambda_inner(x: Stack, y: Stack, w: Weights) -> float:
    """Weighted inner product: sum_i lambda_i <x_i, y_i>."""
    x._check_compatible(y)
    _check_weights_match(x, w)
    return sum(li * xi.inner(yi) for li, xi, yi in zip(w, x, y))


def lambda_norm(x: Stack, w: Weights) -> float:
    return np.sqrt(lambda_inner(x, x, w))


def embed(x: Point, count: int) -> Stack:
    """Diagonal embedding x -> (x, ..., x) with `count` blocks."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return Stack(tuple(x for _ in range(count)))


def weighted_average(x: Stack, w: Weights) -> Point:
    """sum_i lambda_i x_i (the weights are normalized, so no division)."""
    _check_weights_match(x, w)
    acc = np.zeros(x.block_shape)
    for li, xi in zip(w, x):
        acc = acc + li * xi.data
    return Point(acc)


def point_to_json(p: Point) -> dict:
    """Plain numeric form: vectors as flat arrays, matrices as row-major
    nested arrays, both with an explicit shape field."""
    return {"shape": list(p.shape), "values": p.data.tolist()}


def point_from_json(obj: dict) -> Point:
    shape = tuple(obj["shape"])
    arr = np.asarray(obj["values"], dtype=float)
    if arr.shape != shape:
        raise ShapeMismatchError(
            f"declared shape {shape} does not match values of shape {arr.shape}"
        )
    if len(shape) == 1:
        return Point.vector(arr)
    if len(shape) == 2:
        if not np.allclose(arr, arr.T, rtol=0.0, atol=0.0):
            # tolerate serialization round-off but not genuinely asymmetric input
            if not np.allclose(arr, arr.T, rtol=1e-12, atol=1e-12):
                raise ShapeMismatchError("matrix payload is not symmetric")
        return Point.symmetric(arr)
    raise ShapeMismatchError(f"unsupported shape {shape}")
