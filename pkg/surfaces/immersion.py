"""Surfaces in 3-space from Blaschke structures and back.

The Gauss–Weingarten system is integrated for the 4×3 state Y = (f, F1, F2, ξ)
with ∂_i Y = A_i Y, where F_i = ∂_i f and ξ is the affine normal.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from django.conf import settings
from numpy.polynomial import Polynomial

from .blaschke import (
    SPHERE_NORMAL_FORMS, BlaschkeStructure, ConnectionField, DifferenceField, MetricField, ShapeField,
    constant_structure, levi_civita,
)
from .exceptions import BlowUp, DomainError
from .grid_fields import Grid2, Partial, ScalarField2D, Vec3Field2D, derivative, sample_at

DEGENERACY_TOL = getattr(settings, 'SURFACES_DEGENERACY_TOL', 1e-12)
SEED_TOL = getattr(settings, 'SURFACES_SEED_TOL', 1e-8)
CURVE_MAX_STEP = getattr(settings, 'SURFACES_CURVE_MAX_STEP', 1e-3)
PATH_THRESHOLD = getattr(settings, 'SURFACES_PATH_THRESHOLD', 1e-3)

logger = logging.getLogger(__name__)

SQRT3 = np.sqrt(3.0)

CATALOGUE_KINDS = ('definite_const_fp', 'indefinite_const_fp', 'improper_graph', 'orbit_hyperbolic',
                   'orbit_elliptic')


@dataclass(frozen=True, eq=False)
class SeedFrame:
    f0: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        for name in ('f0', 'F1', 'F2', 'xi'):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (3,) or not np.all(np.isfinite(value)):
                raise DomainError(f"seed vector {name} must be 3 finite numbers")
            object.__setattr__(self, name, value)

    @property
    def volume(self) -> float:
        return float(np.linalg.det(np.stack([self.F1, self.F2, self.xi], axis=-1)))

    def state(self) -> np.ndarray:
        return np.stack([self.f0, self.F1, self.F2, self.xi])

    @classmethod
    def orthonormal(cls, metric_at_origin: np.ndarray, H: float = 0.0) -> 'SeedFrame':
        """A frame with F_i·F_j = |h| and ξ = e3 scaled to the volume condition.

        f0 = −ξ/H puts the center of a proper sphere at the origin; f0 = 0 otherwise.
        """
        h = np.asarray(metric_at_origin, dtype=float)
        w, v = np.linalg.eigh(h)
        root = v @ np.diag(np.sqrt(np.abs(w))) @ v.T
        scale = np.sqrt(abs(np.linalg.det(h))) / np.linalg.det(root)
        xi = np.array([0.0, 0.0, scale])
        f0 = -xi / H if H else np.zeros(3)
        return cls(f0, np.append(root[:, 0], 0.0), np.append(root[:, 1], 0.0), xi)


@dataclass(frozen=True, eq=False)
class ImmersionSheet:
    grid: Grid2
    f: Vec3Field2D
    F1: Vec3Field2D
    F2: Vec3Field2D
    xi: Vec3Field2D

    @classmethod
    def from_arrays(cls, grid: Grid2, f, F1, F2, xi) -> 'ImmersionSheet':
        return cls(grid, Vec3Field2D(grid, f), Vec3Field2D(grid, F1), Vec3Field2D(grid, F2), Vec3Field2D(grid, xi))

    def seed(self) -> SeedFrame:
        return SeedFrame(self.f.values[0, 0], self.F1.values[0, 0], self.F2.values[0, 0], self.xi.values[0, 0])


@dataclass(frozen=True)
class GWReport:
    frame: float
    normal: float
    position: float

    def as_dict(self) -> dict:
        return {'frame': self.frame, 'normal': self.normal, 'position': self.position}


@dataclass(frozen=True, eq=False)
class CurveSolution:
    t: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray
    ddxi: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def wronskian(self) -> np.ndarray:
        return np.linalg.det(np.stack([self.xi, self.dxi, self.ddxi], axis=-2))


@dataclass(frozen=True)
class GroupElement:
    kind: str = 'AO2'
    angle: float = 0.0
    eps: int = 1
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ('AO2', 'AO11'):
            raise DomainError(f"group kind must be AO2 or AO11, got '{self.kind}'")
        if self.eps not in (-1, 1):
            raise DomainError(f"eps must be ±1, got {self.eps}")

    def linear(self) -> np.ndarray:
        if self.kind == 'AO2':
            c, s = np.cos(self.angle), np.sin(self.angle)
            return np.array([[c, -self.eps * s], [s, self.eps * c]])
        c, s = np.cosh(self.angle), np.sinh(self.angle)
        return np.array([[c, self.eps * s], [s, self.eps * c]])

    def matrix(self) -> np.ndarray:
        out = np.eye(3)
        out[:2, :2] = self.linear()
        out[:2, 2] = (self.a, self.b)
        return out

    def apply(self, X1: np.ndarray, X2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        R = self.linear()
        return R[0, 0] * X1 + R[0, 1] * X2 + self.a, R[1, 0] * X1 + R[1, 1] * X2 + self.b


# Gauss–Weingarten integration

def _system_matrices(s: BlaschkeStructure) -> np.ndarray:
    """A_i as ``[..., i, 4, 4]`` acting on the rows (f, F1, F2, ξ)."""
    G, h, S = s.nabla.values, s.metric.h, s.shape.S
    A = np.zeros(s.grid.shape + (2, 4, 4))
    for i in range(2):
        A[..., i, 0, 1 + i] = 1.0
        for j in range(2):
            A[..., i, 1 + j, 1] = G[..., 0, i, j]
            A[..., i, 1 + j, 2] = G[..., 1, i, j]
            A[..., i, 1 + j, 3] = h[..., i, j]
        A[..., i, 3, 1] = -S[..., 0, i]
        A[..., i, 3, 2] = -S[..., 1, i]
    return A


def _march(A: np.ndarray, Y0: np.ndarray, step: float) -> np.ndarray:
    """Classical RK4 for Y' = A(t)Y along axis 0 of ``A``; midpoint matrices are interpolated."""
    n = A.shape[0]
    mid = np.empty_like(A[:-1])
    if n >= 4:
        mid[1:-1] = (-A[:-3] + 9.0 * A[1:-2] + 9.0 * A[2:-1] - A[3:]) / 16.0
    mid[0] = (3.0 * A[0] + 6.0 * A[1] - A[2]) / 8.0
    mid[-1] = (3.0 * A[-1] + 6.0 * A[-2] - A[-3]) / 8.0
    Y = np.empty((n,) + Y0.shape)
    Y[0] = Y0
    half = 0.5 * step
    for m in range(n - 1):
        y = Y[m]
        k1 = A[m] @ y
        k2 = mid[m] @ (y + half * k1)
        k3 = mid[m] @ (y + half * k2)
        k4 = A[m + 1] @ (y + step * k3)
        Y[m + 1] = y + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(Y[m + 1])):
            raise BlowUp(f"Gauss–Weingarten integration blew up after {m + 1} steps")
    return Y


def umbilic_value(s: BlaschkeStructure, tol: float = SEED_TOL) -> Optional[float]:
    """H when S = H·Id with H ≠ 0 at the origin node, otherwise None."""
    S = s.shape.S[0, 0]
    H = float(S[0, 0])
    if abs(S[0, 1]) > tol or abs(S[1, 0]) > tol or abs(S[1, 1] - H) > tol or abs(H) <= tol:
        return None
    return H


def _check_seed(s: BlaschkeStructure, seed: SeedFrame, tol: float):
    expected = np.sqrt(abs(s.metric.det[0, 0]))
    if abs(abs(seed.volume) - expected) > tol * max(1.0, expected):
        raise DomainError(
            f"seed violates det(F1, F2, ξ) = ±√|det h|: {seed.volume:.12g} vs ±{expected:.12g}", node=(0, 0)
        )
    H = umbilic_value(s, tol)
    if H is not None:
        gap = float(np.max(np.abs(seed.xi + H * seed.f0)))
        if gap > tol * max(1.0, float(np.max(np.abs(seed.xi)))):
            raise DomainError(f"seed of a proper sphere violates ξ = −H·f with H = {H:g}: gap {gap:.3e}",
                              node=(0, 0))


def integrate(s: BlaschkeStructure, seed: SeedFrame, seed_tol: float = SEED_TOL) -> tuple[ImmersionSheet, float]:
    """Integrate along the bottom row then up every column; the transposed path measures integrability."""
    for name, values in (('nabla', s.nabla.values), ('h', s.metric.h), ('S', s.shape.S)):
        if not np.all(np.isfinite(values)):
            raise DomainError(f"structure field {name} is not finite")
    _check_seed(s, seed, seed_tol)
    grid = s.grid
    A = _system_matrices(s)
    Y0 = seed.state()

    row = _march(A[0, :, 0], Y0, grid.h1)
    first = _march(A[:, :, 1], row, grid.h2)

    column = _march(A[:, 0, 1], Y0, grid.h2)
    second = np.swapaxes(_march(np.swapaxes(A[:, :, 0], 0, 1), column, grid.h1), 0, 1)

    path_residual = float(np.max(np.abs(first - second)))
    if path_residual > PATH_THRESHOLD:
        logger.warning(f"integrate {s.case_tag}: path residual {path_residual:.3e} exceeds {PATH_THRESHOLD:g}")
    else:
        logger.info(f"integrate {s.case_tag}: path residual {path_residual:.3e}")
    sheet = ImmersionSheet.from_arrays(grid, first[..., 0, :], first[..., 1, :], first[..., 2, :], first[..., 3, :])
    return sheet, path_residual


def _interior_norm(values: np.ndarray) -> float:
    return float(np.max(np.abs(values[1:-1, 1:-1])))


def gw_residual(sheet: ImmersionSheet, s: BlaschkeStructure) -> GWReport:
    if sheet.grid != s.grid:
        raise DomainError("sheet and structure live on different grids")
    grid = sheet.grid
    G, h, S = s.nabla.values, s.metric.h, s.shape.S
    F = np.stack([sheet.F1.values, sheet.F2.values], axis=2)
    xi = sheet.xi.values
    dF = np.stack([derivative(F, grid, Partial.D1), derivative(F, grid, Partial.D2)], axis=2)
    frame = dF - np.einsum('...kij,...kc->...ijc', G, F) - h[..., None] * xi[:, :, None, None, :]
    dxi = np.stack([derivative(xi, grid, Partial.D1), derivative(xi, grid, Partial.D2)], axis=2)
    normal = dxi + np.einsum('...ki,...kc->...ic', S, F)
    df = np.stack([derivative(sheet.f.values, grid, Partial.D1), derivative(sheet.f.values, grid, Partial.D2)], axis=2)
    return GWReport(_interior_norm(frame), _interior_norm(normal), _interior_norm(df - F))


# Induced structure
#
# Only first and second partials of F are differenced, each with a single
# fourth-order stencil; ∂h follows from them by the product rule.

def _frame_jets(sheet: ImmersionSheet) -> tuple[np.ndarray, np.ndarray]:
    """``dF[..., a, j, :]`` = ∂_a F_j and ``ddF[..., a, b, j, :]`` = ∂_a ∂_b F_j."""
    grid = sheet.grid
    dF = np.empty(grid.shape + (2, 2, 3))
    ddF = np.empty(grid.shape + (2, 2, 2, 3))
    for j, F in enumerate((sheet.F1.values, sheet.F2.values)):
        dF[..., 0, j, :] = derivative(F, grid, Partial.D1, order=4)
        dF[..., 1, j, :] = derivative(F, grid, Partial.D2, order=4)
        ddF[..., 0, 0, j, :] = derivative(F, grid, Partial.D11, order=4)
        ddF[..., 1, 1, j, :] = derivative(F, grid, Partial.D22, order=4)
        ddF[..., 0, 1, j, :] = ddF[..., 1, 0, j, :] = derivative(F, grid, Partial.D12, order=4)
    return dF, ddF


@dataclass(frozen=True, eq=False)
class _InducedMetric:
    metric: MetricField
    dh: np.ndarray
    P: np.ndarray


def _induced(sheet: ImmersionSheet) -> _InducedMetric:
    """h_ij = G_ij/|det G|^{1/4} with G_ij = det(F1, F2, P_ij), plus ∂_k h_ij.

    P_ij is the symmetrized ∂_i F_j.
    """
    dF, ddF = _frame_jets(sheet)
    P = 0.5 * (dF + np.swapaxes(dF, 2, 3))
    dP = 0.5 * (ddF + np.swapaxes(ddF, 3, 4))
    F1, F2 = sheet.F1.values, sheet.F2.values
    N = np.cross(F1, F2)
    dN = np.cross(dF[..., 0, :], F2[:, :, None, :]) + np.cross(F1[:, :, None, :], dF[..., 1, :])
    G = np.einsum('...c,...ijc->...ij', N, P)
    dG = np.einsum('...kc,...ijc->...kij', dN, P) + np.einsum('...c,...kijc->...kij', N, dP)
    det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] ** 2
    bad = np.abs(det) < DEGENERACY_TOL
    if bad.any():
        j, i = np.argwhere(bad)[0]
        raise DomainError("immersion is degenerate, det G vanishes", node=(int(i), int(j)))
    ddet = (dG[..., 0, 0] * G[..., None, 1, 1] + G[..., None, 0, 0] * dG[..., 1, 1]
            - 2.0 * G[..., None, 0, 1] * dG[..., 0, 1])
    scale = np.abs(det) ** -0.25
    h = G * scale[..., None, None]
    dh = dG * scale[..., None, None, None] - 0.25 * h[..., None, :, :] * (ddet / det[..., None])[..., None, None]
    return _InducedMetric(MetricField.general(sheet.grid, h), dh, P)


def induced_metric(sheet: ImmersionSheet) -> MetricField:
    return _induced(sheet).metric


def _normal(sheet: ImmersionSheet, induced: _InducedMetric) -> tuple[np.ndarray, ConnectionField]:
    gamma_hat = levi_civita(induced.metric, dh=induced.dh)
    F = np.stack([sheet.F1.values, sheet.F2.values], axis=2)
    hess = induced.P - np.einsum('...kij,...kc->...ijc', gamma_hat.values, F)
    return 0.5 * np.einsum('...ij,...ijc->...c', induced.metric.inverse, hess), gamma_hat


def affine_normal(sheet: ImmersionSheet) -> np.ndarray:
    """ξ = ½ Δ_h f = ½ h^{ij}(∂i∂j f − Γ̂^k_ij ∂k f)."""
    return _normal(sheet, _induced(sheet))[0]


def induce(sheet: ImmersionSheet) -> BlaschkeStructure:
    """The Blaschke structure of a sampled immersion, from its own first and second derivatives.

    S comes from differencing ξ once more, so it is a derivative order behind h,
    ∇ and K next to the boundary.
    """
    grid = sheet.grid
    induced = _induced(sheet)
    xi, gamma_hat = _normal(sheet, induced)
    frame = np.stack([sheet.F1.values, sheet.F2.values, xi], axis=-1)
    coeffs = np.linalg.solve(frame[:, :, None, None], induced.P[..., None])[..., 0]
    dxi = np.stack([derivative(xi, grid, Partial.D1, order=4), derivative(xi, grid, Partial.D2, order=4)], axis=2)
    xi_coeffs = np.linalg.solve(frame[:, :, None], dxi[..., None])[..., 0]

    nabla = np.moveaxis(coeffs[..., :2], -1, 2)
    S = -np.swapaxes(xi_coeffs[..., :2], -1, -2)
    return BlaschkeStructure(induced.metric, ConnectionField(grid, nabla), gamma_hat,
                             DifferenceField(grid, nabla - gamma_hat.values), ShapeField(grid, S), 'induced',
                             {'xi': xi})


def is_quadric(s: BlaschkeStructure, tol: float = 1e-6) -> bool:
    """Pick–Berwald: a nondegenerate surface is a quadric iff its difference tensor vanishes."""
    return float(np.max(np.abs(s.K.values[1:-1, 1:-1]))) <= tol


# The curve equation ξ''' = aξ' + bξ and the Liouville immersion

def integrate_curve(a_fn: Callable, b_fn: Callable, H: float, t: Sequence[float], basis_init: np.ndarray,
                    max_step: float = CURVE_MAX_STEP) -> CurveSolution:
    """RK4 for the companion system of ξ''' = aξ' + bξ, output at the nodes ``t``.

    The rows of ``basis_init`` (ξ, ξ', ξ'' at t[0]) are rescaled so the
    Wronskian det(ξ, ξ', ξ'') starts at exactly H.
    """
    t = np.asarray(t, dtype=float)
    basis = np.asarray(basis_init, dtype=float)
    if basis.shape != (3, 3):
        raise DomainError("basis_init must be 3×3 (rows ξ, ξ', ξ'')")
    W0 = np.linalg.det(basis)
    if abs(W0) < DEGENERACY_TOL:
        raise DomainError("basis_init has zero Wronskian")
    Y = basis * np.cbrt(H / W0)

    def rhs(tt, Y):
        return np.stack([Y[1], Y[2], a_fn(tt) * Y[1] + b_fn(tt) * Y[0]])

    out = np.empty((t.size, 3, 3))
    out[0] = Y
    for m in range(t.size - 1):
        span = t[m + 1] - t[m]
        steps = max(1, int(np.ceil(abs(span) / max_step - 1e-9)))
        dt = span / steps
        tt = t[m]
        for _ in range(steps):
            k1 = rhs(tt, Y)
            k2 = rhs(tt + 0.5 * dt, Y + 0.5 * dt * k1)
            k3 = rhs(tt + 0.5 * dt, Y + 0.5 * dt * k2)
            k4 = rhs(tt + dt, Y + dt * k3)
            Y = Y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            tt += dt
        if not np.all(np.isfinite(Y)):
            raise BlowUp(f"curve integration blew up near t={tt:.6g}")
        out[m + 1] = Y
    a = np.array([a_fn(v) for v in t], dtype=float)
    b = np.array([b_fn(v) for v in t], dtype=float)
    return CurveSolution(t, out[:, 0], out[:, 1], out[:, 2], a, b)


def liouville_build(a_fn: Callable, b_fn: Callable, H: float, grid: Grid2, basis_init: np.ndarray,
                    require_constraint: bool = False, constraint_tol: float = 1e-10) -> ImmersionSheet:
    """f(x1, x2) = x1 ξ(x2) − ξ'(x2)/H with F1 = ξ and F2 = x1 ξ' − ξ''/H.

    With ``require_constraint`` the data must satisfy a' − 2b = 2H on the x2 range.
    """
    if H == 0 or not np.isfinite(H):
        raise DomainError("H must be a nonzero finite number; H = 0 is the improper graph")
    curve = integrate_curve(a_fn, b_fn, H, grid.x2, basis_init)
    if require_constraint:
        da = np.gradient(curve.a, grid.x2, edge_order=2)
        defect = np.abs(da - 2.0 * curve.b - 2.0 * H)
        if (defect > constraint_tol).any():
            j = int(np.argmax(defect > constraint_tol))
            raise DomainError(f"a' − 2b = 2H fails by {defect[j]:.3e}", node=(0, j))
    X1 = grid.mesh()[0][..., None]
    xi = np.broadcast_to(curve.xi[:, None, :], grid.shape + (3,)).copy()
    dxi = curve.dxi[:, None, :]
    ddxi = curve.ddxi[:, None, :]
    f = X1 * xi - dxi / H
    F2 = X1 * dxi - ddxi / H
    # affine normal of the Liouville sphere
    return ImmersionSheet.from_arrays(grid, f, xi, F2, -H * f)


# Closed forms

def orbit_point(kind: str, a, b, c: float, sign: int = 1) -> np.ndarray:
    """Image of (1, 0, sign/c) under the homogeneity group element with parameters (a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    k = sign / c
    decay = np.exp(-a)
    if kind == 'orbit_hyperbolic':
        return np.stack([decay * np.cosh(b), decay * np.sinh(b), np.exp(2.0 * a) * k], axis=-1)
    if kind == 'orbit_elliptic':
        return np.stack([decay * np.cos(b), -decay * np.sin(b), np.exp(2.0 * a) * k], axis=-1)
    raise DomainError(f"unknown orbit kind '{kind}'")


def catalogue_constant(lam: float) -> float:
    """c with h(C,C) = 16λ²."""
    return 3.0 * SQRT3 / 128.0 * (16.0 * lam ** 2) ** 2


def _check_lambda(lam: float):
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")


def _closed_form(kind: str, lam: float, sign: int, X1: np.ndarray, X2: np.ndarray):
    """(f, ∂1f, ∂2f) of the constant Fubini–Pick spheres in catalogue coordinates."""
    k = sign / catalogue_constant(lam)
    decay = np.exp(-lam * X2)
    grow = k * np.exp(2.0 * lam * X2)
    arg = SQRT3 * lam * X1
    zero = np.zeros_like(X1)
    if kind == 'definite_const_fp':
        ch, sh = np.cosh(arg), np.sinh(arg)
        f = np.stack([decay * ch, decay * sh, grow], axis=-1)
        F1 = SQRT3 * lam * np.stack([decay * sh, decay * ch, zero], axis=-1)
        F2 = np.stack([-lam * decay * ch, -lam * decay * sh, 2.0 * lam * grow], axis=-1)
    else:
        co, si = np.cos(arg), np.sin(arg)
        f = np.stack([decay * co, -decay * si, grow], axis=-1)
        F1 = SQRT3 * lam * np.stack([-decay * si, -decay * co, zero], axis=-1)
        F2 = np.stack([-lam * decay * co, lam * decay * si, 2.0 * lam * grow], axis=-1)
    return f, F1, F2


def catalogue(kind: str, grid: Grid2, lam: float = 1.0, sign: int = 1, c: Optional[float] = None,
              phi_coeffs: Sequence[float] = (0.0, 0.0, 0.0, 1.0)) -> ImmersionSheet:
    """Closed-form surfaces sampled on ``grid``.

    ``phi_coeffs`` are the power-series coefficients of φ for the improper
    graph z = xy + φ(y); ``c`` is the orbit constant (default: from ``lam``).
    """
    if kind not in CATALOGUE_KINDS:
        raise DomainError(f"unknown catalogue kind '{kind}', expected one of {CATALOGUE_KINDS}")
    if sign not in (-1, 1):
        raise DomainError(f"sign must be ±1, got {sign}")
    X1, X2 = grid.mesh()
    if kind in ('definite_const_fp', 'indefinite_const_fp'):
        _check_lambda(lam)
        f, F1, F2 = _closed_form(kind, lam, sign, X1, X2)
        return ImmersionSheet.from_arrays(grid, f, F1, F2, 2.0 * lam ** 2 * f)
    if kind == 'improper_graph':
        phi = Polynomial(phi_coeffs)
        if not np.any(phi.deriv(3).coef):
            raise DomainError("improper graph needs φ''' ≠ 0")
        one, zero = np.ones_like(X1), np.zeros_like(X1)
        f = np.stack([X1, X2, X1 * X2 + phi(X2)], axis=-1)
        F1 = np.stack([one, zero, X2], axis=-1)
        F2 = np.stack([zero, one, X1 + phi.deriv()(X2)], axis=-1)
        xi = np.stack([zero, zero, one], axis=-1)
        return ImmersionSheet.from_arrays(grid, f, F1, F2, xi)

    c = catalogue_constant(lam) if c is None else float(c)
    if not c > 0:
        raise DomainError(f"orbit constant c must be positive, got {c}")
    orbit_lam = (c / (6.0 * SQRT3)) ** 0.25
    f = orbit_point(kind, X1, X2, c, sign)
    decay = np.exp(-X1)
    zero = np.zeros_like(X1)
    if kind == 'orbit_hyperbolic':
        F1 = np.stack([-decay * np.cosh(X2), -decay * np.sinh(X2), 2.0 * f[..., 2]], axis=-1)
        F2 = np.stack([decay * np.sinh(X2), decay * np.cosh(X2), zero], axis=-1)
    else:
        F1 = np.stack([-decay * np.cos(X2), decay * np.sin(X2), 2.0 * f[..., 2]], axis=-1)
        F2 = np.stack([-decay * np.sin(X2), -decay * np.cos(X2), zero], axis=-1)
    return ImmersionSheet.from_arrays(grid, f, F1, F2, 2.0 * orbit_lam ** 2 * f)


def catalogue_in_chart(kind: str, lam: float, grid: Grid2, sign: int = 1) -> ImmersionSheet:
    """The constant Fubini–Pick sphere sampled in the chart ``integrate`` uses.

    The definite chart is the catalogue chart. The indefinite chart swaps the
    coordinates: (y1, y2) = (x2, x1), so F_y1 = ∂f/∂x2 and F_y2 = ∂f/∂x1.
    """
    _check_lambda(lam)
    Y1, Y2 = grid.mesh()
    if kind == 'definite_const_fp':
        f, F1, F2 = _closed_form(kind, lam, sign, Y1, Y2)
    elif kind == 'indefinite_const_fp':
        f, Fx1, Fx2 = _closed_form(kind, lam, sign, Y2, Y1)
        F1, F2 = Fx2, Fx1
    else:
        raise DomainError(f"no integration chart for catalogue kind '{kind}'")
    return ImmersionSheet.from_arrays(grid, f, F1, F2, 2.0 * lam ** 2 * f)


def catalogue_seed(kind: str, lam: float, grid: Grid2, sign: int = 1) -> SeedFrame:
    return catalogue_in_chart(kind, lam, grid, sign).seed()


def catalogue_structure(kind: str, lam: float, grid: Grid2) -> BlaschkeStructure:
    """The constant structure of a catalogue sphere in its integration chart.

    h = Id (definite) or diag(1, −1) (indefinite), K = λ times the normal form
    of the sphere tables, S = −2λ² Id. At λ = 1 these are the sphere
    constructors at u ≡ 0, H = −2.
    """
    _check_lambda(lam)
    if kind == 'definite_const_fp':
        h, table = np.eye(2), SPHERE_NORMAL_FORMS['sphere_definite']
    elif kind == 'indefinite_const_fp':
        h, table = np.diag([1.0, -1.0]), SPHERE_NORMAL_FORMS['sphere_indefinite']
    else:
        raise DomainError(f"no structure for catalogue kind '{kind}'")
    return constant_structure(grid, h, lam * table, -2.0 * lam ** 2 * np.eye(2), tag=kind)


# Symmetry group action

def _covered(grid: Grid2, P1: np.ndarray, P2: np.ndarray) -> np.ndarray:
    slack = 1e-9 * max(1.0, abs(grid.x1_min), abs(grid.x1_max), abs(grid.x2_min), abs(grid.x2_max))
    return ((P1 >= grid.x1_min - slack) & (P1 <= grid.x1_max + slack)
            & (P2 >= grid.x2_min - slack) & (P2 <= grid.x2_max + slack))


def group_apply(target, g: GroupElement):
    """Precompose a field (u∘g) or a sheet (f∘g, F by the chain rule) with the planar map g."""
    grid = target.grid
    X1, X2 = grid.mesh()
    P1, P2 = g.apply(X1, X2)
    if isinstance(target, ScalarField2D):
        return ScalarField2D(grid, sample_at(target.values, grid, P1, P2))
    if isinstance(target, ImmersionSheet):
        R = g.linear()
        f = sample_at(target.f.values, grid, P1, P2)
        F1 = sample_at(target.F1.values, grid, P1, P2)
        F2 = sample_at(target.F2.values, grid, P1, P2)
        xi = sample_at(target.xi.values, grid, P1, P2)
        return ImmersionSheet.from_arrays(grid, f, R[0, 0] * F1 + R[1, 0] * F2, R[0, 1] * F1 + R[1, 1] * F2, xi)
    raise DomainError(f"cannot apply a group element to {type(target).__name__}")


def invariance_defect(u: ScalarField2D, g: GroupElement) -> float:
    """max |u∘g − u| over the nodes whose image under g stays in the grid."""
    grid = u.grid
    X1, X2 = grid.mesh()
    P1, P2 = g.apply(X1, X2)
    inside = _covered(grid, P1, P2)
    if not inside.any():
        raise DomainError("no grid node is mapped back into the grid")
    moved = sample_at(u.values, grid, P1[inside], P2[inside])
    return float(np.max(np.abs(moved - u.values[inside])))
