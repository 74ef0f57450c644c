"""Dense hyperspectral cubes and the linear-mixture arithmetic built on them.

A cube is an I x J x K raster (I rows, J columns, K spectral bands) stored
band-major: the backing array has shape (K, I, J), so ``data[k]`` is the
row-major I x J slab of band k. That layout matches per-band noise
simulation, per-band metrics, and the on-disk format.

The mode-3 unfolding maps a cube to a K x (I*J) matrix whose column index
is ``j*I + i``, i.e. each band slab is flattened column-first. This is the
vec() convention that makes ``unfold(sum_r map_r (x) sig_r) == C @ A.T``
with A holding the vectorised maps; keeping the index convention in one
place prevents silent transposes.

Cubes are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Cube:
    """Immutable I x J x K raster, band-major storage.

    Parameters
    ----------
    data : ndarray, shape (K, I, J)
        Band-major payload. Copied to float64 and frozen.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"cube data must be 3-D (K,I,J), got shape {arr.shape}")
        if arr.size == 0:
            raise ShapeMismatchError("cube must have positive dimensions")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cube entries must all be finite")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def dims(self) -> tuple[int, int, int]:
        """(I, J, K)."""
        k, i, j = self.data.shape
        return (i, j, k)

    @property
    def num_bands(self) -> int:
        return self.data.shape[0]

    def band(self, k: int) -> np.ndarray:
        """Row-major I x J slab of band k (read-only view)."""
        if not 0 <= k < self.data.shape[0]:
            raise IndexError(f"band {k} out of range [0, {self.data.shape[0]})")
        return self.data[k]

    def value(self, i: int, j: int, k: int) -> float:
        return float(self.data[k, i, j])

    def spectrum(self, i: int, j: int) -> np.ndarray:
        """K-vector at pixel (i, j)."""
        return np.array(self.data[:, i, j])

    @classmethod
    def zeros(cls, i: int, j: int, k: int) -> "Cube":
        return cls(np.zeros((k, i, j)))

    @classmethod
    def from_bands(cls, bands: np.ndarray) -> "Cube":
        """Construct from a (K, I, J) band-major array."""
        return cls(bands)

    def __add__(self, other: "Cube") -> "Cube":
        _check_same_dims(self, other)
        return Cube(self.data + other.data)

    def __sub__(self, other: "Cube") -> "Cube":
        _check_same_dims(self, other)
        return Cube(self.data - other.data)

    def scale(self, t: float) -> "Cube":
        return Cube(self.data * float(t))

    def allclose(self, other: "Cube", rtol=1e-12, atol=0.0) -> bool:
        return self.data.shape == other.data.shape and bool(
            np.allclose(self.data, other.data, rtol=rtol, atol=atol)
        )


def _check_same_dims(a: Cube, b: Cube):
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(f"cube dims differ: {a.dims} vs {b.dims}")


@dataclass(frozen=True)
class AbundanceMap:
    """Nonnegative I x J mixing-weight map of one endmember."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"abundance map must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("abundance map entries must be finite")
        if np.any(arr < 0):
            raise ValueError("abundance map entries must be nonnegative")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class Signature:
    """Nonnegative K-band spectrum of one endmember."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 1:
            raise ShapeMismatchError(f"signature must be 1-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signature entries must be finite")
        if np.any(arr < 0):
            raise ValueError("signature entries must be nonnegative")
        object.__setattr__(self, "data", _freeze(arr))

    def __len__(self) -> int:
        return self.data.shape[0]


def _map_array(m) -> np.ndarray:
    return m.data if isinstance(m, AbundanceMap) else np.asarray(m, dtype=np.float64)


def _sig_array(s) -> np.ndarray:
    return s.data if isinstance(s, Signature) else np.asarray(s, dtype=np.float64)


def outer_accumulate(maps, sigs) -> Cube:
    """Assemble ``sum_r map_r (x) sig_r`` into a cube.

    Entry (i, j, k) of the result is ``sum_r maps[r][i, j] * sigs[r][k]``.
    Empty factor lists are allowed only with explicit dims via
    :func:`outer_accumulate_empty`; here the first factor fixes the shape.
    """
    maps = [_map_array(m) for m in maps]
    sigs = [_sig_array(s) for s in sigs]
    if len(maps) != len(sigs):
        raise ShapeMismatchError(f"{len(maps)} maps vs {len(sigs)} signatures")
    if not maps:
        raise ShapeMismatchError("empty factor lists need explicit dims; use outer_accumulate_empty")
    ij = maps[0].shape
    k = sigs[0].shape[0]
    for m in maps:
        if m.shape != ij:
            raise ShapeMismatchError(f"abundance map dims differ: {m.shape} vs {ij}")
    for s in sigs:
        if s.shape != (k,):
            raise ShapeMismatchError(f"signature lengths differ: {s.shape[0]} vs {k}")
    stacked_m = np.stack(maps).reshape(len(maps), -1)  # (R, I*J)
    stacked_c = np.stack(sigs)  # (R, K)
    recon = (stacked_c.T @ stacked_m).reshape(k, ij[0], ij[1])
    return Cube(recon)


def outer_accumulate_empty(i: int, j: int, k: int) -> Cube:
    """The empty-sum cube (all zeros) for zero factors."""
    return Cube.zeros(i, j, k)


def mode3_unfold(c: Cube) -> np.ndarray:
    """K x (I*J) matrix; row k, column j*I + i holds c[i, j, k]."""
    i, j, k = c.dims
    return c.data.transpose(0, 2, 1).reshape(k, i * j)


def mode3_fold(mat: np.ndarray, dims: tuple[int, int, int]) -> Cube:
    """Inverse of :func:`mode3_unfold` for the given (I, J, K) dims."""
    i, j, k = dims
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape != (k, i * j):
        raise ShapeMismatchError(f"expected matrix of shape {(k, i * j)}, got {mat.shape}")
    return Cube(mat.reshape(k, j, i).transpose(0, 2, 1))


def frobenius_norm(c: Cube) -> float:
    return float(np.linalg.norm(c.data.ravel()))


def l1_norm(c: Cube) -> float:
    return float(np.abs(c.data).sum())
