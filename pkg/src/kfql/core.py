"""Shared value types: sparse basis vectors, weight beliefs, and the small
dense linear-algebra helpers every learner uses.

All arithmetic is float64; covariance updates are round-off sensitive.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Quadratic forms this far below zero are treated as round-off and clamped;
# anything more negative signals a corrupted covariance.
NEGATIVE_VARIANCE_TOLERANCE = 1e-9


class DimensionMismatchError(ValueError):
    pass


class NumericalCorruptionError(ArithmeticError):
    """A covariance produced a variance too negative to be round-off."""


@dataclass
class BasisVector:
    """Sparse feature vector: parallel index/value arrays over n features.

    Zero-valued entries may be omitted. Indices are 0-based, distinct,
    and < n.
    """

    indices: np.ndarray
    values: np.ndarray
    n: int

    @classmethod
    def from_entries(cls, entries, n: int) -> "BasisVector":
        idx = np.asarray([i for i, _ in entries], dtype=np.int64)
        val = np.asarray([v for _, v in entries], dtype=np.float64)
        vec = cls(idx, val, int(n))
        vec.validate()
        return vec

    @classmethod
    def dense(cls, values) -> "BasisVector":
        val = np.asarray(values, dtype=np.float64)
        return cls(np.arange(val.size, dtype=np.int64), val, val.size)

    @property
    def entries(self):
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.indices] = self.values
        return out

    def validate(self) -> None:
        if self.indices.size != self.values.size:
            raise DimensionMismatchError("index/value arrays differ in length")
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.n:
                raise DimensionMismatchError(
                    f"feature index out of range for n={self.n}"
                )
            if np.unique(self.indices).size != self.indices.size:
                raise ValueError("duplicate feature indices")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite feature value")


@dataclass
class FullCovariance:
    matrix: np.ndarray

    def copy(self) -> "FullCovariance":
        return FullCovariance(self.matrix.copy())


@dataclass
class DiagonalCovariance:
    variances: np.ndarray

    def copy(self) -> "DiagonalCovariance":
        return DiagonalCovariance(self.variances.copy())


Covariance = FullCovariance | DiagonalCovariance


@dataclass
class WeightBelief:
    """Multivariate-normal belief over the basis-function weights."""

    mean: np.ndarray
    covariance: Covariance

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.mean.size

    def copy(self) -> "WeightBelief":
        return WeightBelief(self.mean.copy(), self.covariance.copy())

    def validate(self, rtol: float = 1e-9) -> None:
        cov = self.covariance
        if isinstance(cov, FullCovariance):
            m = cov.matrix
            if m.shape != (self.n, self.n):
                raise DimensionMismatchError("covariance shape mismatch")
            scale = max(1.0, float(np.abs(m).max()))
            if np.abs(m - m.T).max() > rtol * scale:
                raise ValueError("covariance not symmetric")
            if np.any(np.diag(m) < 0):
                raise ValueError("negative diagonal variance")
        else:
            if cov.variances.shape != (self.n,):
                raise DimensionMismatchError("variance vector shape mismatch")
            if np.any(cov.variances < 0):
                raise ValueError("negative variance")


@dataclass
class Observation:
    """One sample-update target with its sensor noise (a variance)."""

    phi: BasisVector
    value: float
    noise: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("non-finite observation value")
        if not (np.isfinite(self.noise) and self.noise >= 0):
            raise ValueError("sensor noise must be finite and >= 0")


@dataclass
class QEstimate:
    mean: float
    variance: float


def dot(phi: BasisVector, v: np.ndarray) -> float:
    """Sparse dot product phi . v."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (phi.n,):
        raise DimensionMismatchError(
            f"vector length {v.shape} incompatible with n={phi.n}"
        )
    if phi.indices.size == 0:
        return 0.0
    return float(phi.values @ v[phi.indices])


def _clamp_variance(q: float) -> float:
    if q < 0.0:
        if q < -NEGATIVE_VARIANCE_TOLERANCE:
            raise NumericalCorruptionError(
                f"quadratic form {q} is negative beyond round-off"
            )
        return 0.0
    return q


def quadratic_form(phi: BasisVector, sigma: Covariance) -> float:
    """phi' Sigma phi, clamped at zero against round-off."""
    if phi.indices.size == 0:
        return 0.0
    if isinstance(sigma, FullCovariance):
        m = sigma.matrix
        if m.shape != (phi.n, phi.n):
            raise DimensionMismatchError("covariance shape mismatch")
        sub = m[np.ix_(phi.indices, phi.indices)]
        q = float(phi.values @ sub @ phi.values)
    else:
        d = sigma.variances
        if d.shape != (phi.n,):
            raise DimensionMismatchError("variance vector shape mismatch")
        q = float((phi.values * phi.values) @ d[phi.indices])
    return _clamp_variance(q)


def symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) * 0.5
