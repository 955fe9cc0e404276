"""Rectangular grids, sampled fields and finite-difference operators.

Arrays are stored with shape ``(n2, n1)`` (axis 0 runs along x2, axis 1 along
x1), so ``values.ravel()`` is row-major with the x1 index fastest. Operators are
second order by default: central differences inside, one-sided second-order
formulas on the boundary. ``order=4`` switches to five-point central stencils
with fourth-order one-sided rows at the two nodes nearest each edge.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .exceptions import DomainError

logger = logging.getLogger(__name__)

# tolerance for points that fall a hair outside the grid after a mapping
_COVERAGE_SLACK = 1e-9


class Partial(str, Enum):
    D1 = 'd1'
    D2 = 'd2'
    D11 = 'd11'
    D22 = 'd22'
    D12 = 'd12'


@dataclass(frozen=True)
class Grid2:
    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    n1: int
    n2: int
    eps: int = 1
    eta: int = 1

    def __post_init__(self):
        if not (self.x1_max > self.x1_min and self.x2_max > self.x2_min):
            raise DomainError(
                f"grid bounds must be ordered, got x1 [{self.x1_min}, {self.x1_max}], "
                f"x2 [{self.x2_min}, {self.x2_max}]"
            )
        if self.n1 < 3 or self.n2 < 3:
            raise DomainError(f"grid needs at least 3 nodes per axis, got {self.n1}x{self.n2}")
        if self.eps not in (-1, 1) or self.eta not in (-1, 1):
            raise DomainError(f"signature signs must be ±1, got eps={self.eps}, eta={self.eta}")

    @property
    def h1(self) -> float:
        return (self.x1_max - self.x1_min) / (self.n1 - 1)

    @property
    def h2(self) -> float:
        return (self.x2_max - self.x2_min) / (self.n2 - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n2, self.n1)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(self.x1_min, self.x1_max, self.n1)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(self.x2_min, self.x2_max, self.n2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays ``(X1, X2)``, each of shape ``(n2, n1)``."""
        return np.meshgrid(self.x1, self.x2)

    def header(self) -> list:
        return [self.x1_min, self.x1_max, self.x2_min, self.x2_max, self.n1, self.n2, self.eps, self.eta]

    @classmethod
    def from_header(cls, values: Sequence) -> 'Grid2':
        x1_min, x1_max, x2_min, x2_max, n1, n2, eps, eta = values
        return cls(float(x1_min), float(x1_max), float(x2_min), float(x2_max),
                   int(n1), int(n2), int(eps), int(eta))

    def scaled(self, factor: float) -> 'Grid2':
        """The same node counts on bounds multiplied by ``factor`` (> 0)."""
        return Grid2(self.x1_min * factor, self.x1_max * factor,
                     self.x2_min * factor, self.x2_max * factor,
                     self.n1, self.n2, self.eps, self.eta)

    def transposed(self) -> 'Grid2':
        return Grid2(self.x2_min, self.x2_max, self.x1_min, self.x1_max,
                     self.n2, self.n1, self.eta, self.eps)


def make_grid(bounds: Sequence[float], n1: int, n2: int, eps: int = 1, eta: int = 1) -> Grid2:
    x1_min, x1_max, x2_min, x2_max = bounds
    return Grid2(float(x1_min), float(x1_max), float(x2_min), float(x2_max), int(n1), int(n2), int(eps), int(eta))


def _check_finite(values: np.ndarray, what: str):
    bad = ~np.isfinite(values)
    if bad.any():
        j, i = np.argwhere(bad.reshape(values.shape[0], values.shape[1], -1).any(axis=2))[0]
        raise DomainError(f"{what} has a non-finite value", node=(int(i), int(j)))


@dataclass(frozen=True, eq=False)
class ScalarField2D:
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            if values.size != self.grid.n1 * self.grid.n2:
                raise DomainError(
                    f"field has {values.size} values, grid needs {self.grid.n1 * self.grid.n2}"
                )
            values = values.reshape(self.grid.shape)
        _check_finite(values, "scalar field")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_function(cls, grid: Grid2, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> 'ScalarField2D':
        X1, X2 = grid.mesh()
        return cls(grid, np.broadcast_to(fn(X1, X2), grid.shape).astype(float))

    @classmethod
    def constant(cls, grid: Grid2, value: float) -> 'ScalarField2D':
        return cls(grid, np.full(grid.shape, float(value)))

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, values: np.ndarray) -> 'ScalarField2D':
        return ScalarField2D(self.grid, values)


@dataclass(frozen=True, eq=False)
class Vec3Field2D:
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        shape = self.grid.shape + (3,)
        if values.shape != shape:
            if values.size != 3 * self.grid.n1 * self.grid.n2:
                raise DomainError(f"vector field has {values.size // 3} nodes, grid needs {self.grid.n1 * self.grid.n2}")
            values = values.reshape(shape)
        _check_finite(values, "vector field")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def component(self, index: int) -> ScalarField2D:
        return ScalarField2D(self.grid, self.values[..., index])


def _first(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    return np.gradient(values, h, axis=axis, edge_order=2)


def _second(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    if v.shape[0] >= 4:
        out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
        out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    else:
        out[0] = out[1]
        out[-1] = out[1]
    return np.moveaxis(out, 0, axis)


# fourth-order weights: the central row, then the rows for the first two nodes
_D1_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D1_EDGE = (np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
            np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0)
_D2_CENTRAL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D2_EDGE = (np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0,
            np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0)


def _stencil(values: np.ndarray, h: float, axis: int, central: np.ndarray, edge: tuple, power: int) -> np.ndarray:
    v = np.moveaxis(values, axis, 0)
    n = v.shape[0]
    width = max(len(w) for w in edge)
    if n < width:
        raise DomainError(f"fourth-order differences need {width} nodes per axis, got {n}")
    out = np.zeros(v.shape)
    for k, w in enumerate(central):
        out[2:-2] += w * v[k:n - 4 + k]
    # odd derivatives change sign when the edge rows are mirrored
    mirror = -1.0 if power % 2 else 1.0
    for row, w in enumerate(edge):
        out[row] = np.tensordot(w, v[:len(w)], axes=1)
        out[n - 1 - row] = mirror * np.tensordot(w, v[::-1][:len(w)], axes=1)
    return np.moveaxis(out / h**power, 0, axis)


def _first4(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    return _stencil(values, h, axis, _D1_CENTRAL, _D1_EDGE, 1)


def _second4(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    return _stencil(values, h, axis, _D2_CENTRAL, _D2_EDGE, 2)


def derivative(values: np.ndarray, grid: Grid2, which: Partial | str, order: int = 2) -> np.ndarray:
    """Partial derivative of raw samples; trailing axes (vector components) ride along.

    Mixed derivatives apply the x2 operator then the x1 operator, so no axis is
    differenced twice.
    """
    which = Partial(which)
    if order == 2:
        first, second = _first, _second
    elif order == 4:
        first, second = _first4, _second4
    else:
        raise DomainError(f"difference order must be 2 or 4, got {order}")
    if which is Partial.D1:
        return first(values, grid.h1, axis=1)
    if which is Partial.D2:
        return first(values, grid.h2, axis=0)
    if which is Partial.D11:
        return second(values, grid.h1, axis=1)
    if which is Partial.D22:
        return second(values, grid.h2, axis=0)
    return first(first(values, grid.h2, axis=0), grid.h1, axis=1)


def diff(field: ScalarField2D, which: Partial | str) -> ScalarField2D:
    return ScalarField2D(field.grid, derivative(field.values, field.grid, which))


def diff_vec(field: Vec3Field2D, which: Partial | str) -> Vec3Field2D:
    return Vec3Field2D(field.grid, derivative(field.values, field.grid, which))


def laplace0_array(values: np.ndarray, grid: Grid2) -> np.ndarray:
    return grid.eps * derivative(values, grid, Partial.D11) + grid.eta * derivative(values, grid, Partial.D22)


def laplace0(field: ScalarField2D) -> ScalarField2D:
    """Δ0 = ε∂1² + η∂2² with the signature of the field's grid."""
    return ScalarField2D(field.grid, laplace0_array(field.values, field.grid))


def sample_at(values: np.ndarray, grid: Grid2, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Bilinear samples of ``values`` at the points ``(p1, p2)``.

    Points must lie in the grid rectangle; trailing value axes are kept.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    slack1 = _COVERAGE_SLACK * max(1.0, abs(grid.x1_min), abs(grid.x1_max))
    slack2 = _COVERAGE_SLACK * max(1.0, abs(grid.x2_min), abs(grid.x2_max))
    outside = ((p1 < grid.x1_min - slack1) | (p1 > grid.x1_max + slack1)
               | (p2 < grid.x2_min - slack2) | (p2 > grid.x2_max + slack2))
    if outside.any():
        idx = np.argwhere(outside)[0]
        node = (int(idx[-1]), int(idx[0])) if idx.size >= 2 else (int(idx[0]), 0)
        raise DomainError("resample point lies outside the source grid", node=node)
    p1 = np.clip(p1, grid.x1_min, grid.x1_max)
    p2 = np.clip(p2, grid.x2_min, grid.x2_max)
    # interpolator axes are (x2, x1) to match the storage layout
    interpolator = RegularGridInterpolator((grid.x2, grid.x1), values, method='linear')
    points = np.stack([p2.ravel(), p1.ravel()], axis=-1)
    sampled = interpolator(points)
    return sampled.reshape(p1.shape + values.shape[2:])


def resample(field: ScalarField2D, target: Grid2, mapping: Callable | None = None) -> ScalarField2D:
    """Bilinear resample of ``field`` onto ``target``.

    ``mapping(X1, X2) -> (P1, P2)`` gives, for each target node, the source
    point to sample; identity when omitted.
    """
    X1, X2 = target.mesh()
    P1, P2 = (X1, X2) if mapping is None else mapping(X1, X2)
    return ScalarField2D(target, sample_at(field.values, field.grid, P1, P2))
