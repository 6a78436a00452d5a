"""Basis-function generators.

Grid environments (cart-pole, car-hill) use a normalized bilinear
interpolation kernel over a 2-D state slice, replicated per action.
The queueing benchmark uses one dense feature per queue that folds in
the one-step routing effect of the serviced queue.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .core import BasisVector


@dataclass(frozen=True)
class GridSpec:
    """Uniformly spaced knot grid over two state coordinates, one copy of
    the grid per action. Feature index = action * grid_size + knot index,
    knot index = i1 * len(axis2) + i2 (action-major layout)."""

    axis1_points: tuple
    axis2_points: tuple
    cell_width1: float
    cell_width2: float
    action_count: int

    def __post_init__(self):
        for pts in (self.axis1_points, self.axis2_points):
            if len(pts) < 2 or any(b <= a for a, b in zip(pts, pts[1:])):
                raise ValueError("axis points must be >= 2 and strictly increasing")
        if self.action_count < 1:
            raise ValueError("action_count must be >= 1")

    @property
    def grid_size(self) -> int:
        return len(self.axis1_points) * len(self.axis2_points)

    @property
    def n(self) -> int:
        return self.grid_size * self.action_count


def _axis_weights(points, width, x):
    """Clamp x into the axis span; return the bracketing knot pair and the
    triangular kernel weights 1 - |x - knot| / width."""
    lo, hi = points[0], points[-1]
    x = min(max(x, lo), hi)
    i = bisect.bisect_right(points, x) - 1
    if i >= len(points) - 1:
        i = len(points) - 2
    elif i < 0:
        i = 0
    w0 = 1.0 - abs(x - points[i]) / width
    w1 = 1.0 - abs(x - points[i + 1]) / width
    return i, max(w0, 0.0), max(w1, 0.0)


def bilinear_features(spec: GridSpec, x1: float, x2: float, action: int) -> BasisVector:
    """Normalized bilinear kernel weights on the four knots of the cell
    containing (x1, x2), placed in the given action's feature block."""
    if not 0 <= action < spec.action_count:
        raise ValueError(f"action {action} out of range")
    i, a0, a1 = _axis_weights(spec.axis1_points, spec.cell_width1, x1)
    j, b0, b1 = _axis_weights(spec.axis2_points, spec.cell_width2, x2)
    n2 = len(spec.axis2_points)
    base = action * spec.grid_size + i * n2 + j
    idx = np.array([base, base + 1, base + n2, base + n2 + 1], dtype=np.int64)
    val = np.array([a0 * b0, a0 * b1, a1 * b0, a1 * b1])
    total = val.sum()
    if total <= 0.0:
        raise ArithmeticError("kernel weights vanished; cell wider than kernel support")
    val /= total
    keep = val > 0.0
    if not keep.all():
        idx, val = idx[keep], val[keep]
    return BasisVector(idx, val, spec.n)


@dataclass(frozen=True)
class CashierBasisSpec:
    """Queue features based on queue length plus the serviced queue's
    one-step routing probabilities."""

    routing: np.ndarray  # d x d row-stochastic

    def __post_init__(self):
        p = np.asarray(self.routing, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("routing matrix must be square")
        if np.any(p < 0) or np.abs(p.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("routing rows must be probability distributions")
        object.__setattr__(self, "routing", p)

    @property
    def d(self) -> int:
        return self.routing.shape[0]

    @property
    def n(self) -> int:
        return self.d


def cashier_features(spec: CashierBasisSpec, x, a: int) -> BasisVector:
    """phi_i = x_i + [x_i > 0] * (p_{a,i} - [i == a]), densely over queues."""
    x = np.asarray(x, dtype=np.float64)
    d = spec.d
    if x.shape != (d,):
        raise ValueError("queue-length vector has wrong length")
    if not 0 <= a < d:
        raise ValueError(f"serviced queue {a} out of range")
    adjust = spec.routing[a].copy()
    adjust[a] -= 1.0
    phi = x + (x > 0) * adjust
    return BasisVector(np.arange(d, dtype=np.int64), phi, d)


def cartpole_grid() -> GridSpec:
    """5x5 knots over (angle, angular velocity), 3 actions, 75 features."""
    half = math.pi / 2
    return GridSpec(
        axis1_points=(-math.pi, -half, 0.0, half, math.pi),
        axis2_points=(-0.5, -0.25, 0.0, 0.25, 0.5),
        cell_width1=half,
        cell_width2=0.25,
        action_count=3,
    )


def carhill_grid() -> GridSpec:
    """8x8 knots spread evenly over position [-1,1] x velocity [-3,3],
    2 actions, 128 features."""
    p = tuple(np.linspace(-1.0, 1.0, 8))
    v = tuple(np.linspace(-3.0, 3.0, 8))
    return GridSpec(p, v, p[1] - p[0], v[1] - v[0], 2)


def carhill_prior_mean(spec: GridSpec) -> np.ndarray:
    """Optimistic prior ramp toward the summit: max(0, 1 - 2(1-p)/3) per
    knot, replicated across actions."""
    n2 = len(spec.axis2_points)
    grid = np.empty(spec.grid_size)
    for i, p in enumerate(spec.axis1_points):
        grid[i * n2:(i + 1) * n2] = max(0.0, 1.0 - 2.0 * (1.0 - p) / 3.0)
    return np.tile(grid, spec.action_count)


class GridBasis:
    """Binds a GridSpec to a state-to-(x1, x2) projection."""

    def __init__(self, spec: GridSpec, coords):
        self.spec = spec
        self.coords = coords
        self.n = spec.n
        self.action_count = spec.action_count

    def features(self, state, action: int) -> BasisVector:
        x1, x2 = self.coords(state)
        return bilinear_features(self.spec, x1, x2, action)

    def feature_matrix(self, state) -> list[BasisVector]:
        """Features for every action; the knot weights are shared, only
        the action block offset differs."""
        x1, x2 = self.coords(state)
        first = bilinear_features(self.spec, x1, x2, 0)
        out = [first]
        step = self.spec.grid_size
        for a in range(1, self.action_count):
            out.append(BasisVector(first.indices + a * step, first.values, self.n))
        return out


class CashierBasis:
    def __init__(self, spec: CashierBasisSpec):
        self.spec = spec
        self.n = spec.n
        self.action_count = spec.d
        self._idx = np.arange(spec.d, dtype=np.int64)
        self._adjust = spec.routing - np.eye(spec.d)

    def features(self, state, action: int) -> BasisVector:
        return cashier_features(self.spec, state, action)

    def feature_matrix(self, state) -> list[BasisVector]:
        x = np.asarray(state, dtype=np.float64)
        rows = x + (x > 0) * self._adjust
        return [BasisVector(self._idx, rows[a], self.n) for a in range(self.spec.d)]
