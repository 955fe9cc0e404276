"""Soliton equations: residual evaluation and the elliptic, Goursat and Cauchy solvers.

Single-field equations are written ``L Ψ = rhs(Ψ)`` with ``L`` either the
signature Laplacian ``Δ0 = ε∂1² + η∂2²`` or the mixed derivative ``∂1∂2``; the
residual is always ``L Ψ − rhs(Ψ)``. The residual evaluator is the reference
every solver is checked against.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from django.conf import settings
from scipy.sparse.linalg import spsolve

from .exceptions import BlowUp, CellDivergence, DomainError, NonConvergence, SingularJacobian
from .grid_fields import Grid2, Partial, ScalarField2D, derivative, laplace0_array

# Configuration
NEWTON_TOL = getattr(settings, 'SURFACES_NEWTON_TOL', 1e-10)
NEWTON_MAX_ITER = getattr(settings, 'SURFACES_NEWTON_MAX_ITER', 50)
NEWTON_DAMPING = getattr(settings, 'SURFACES_NEWTON_DAMPING', 1.0)
NEWTON_MAX_HALVINGS = getattr(settings, 'SURFACES_NEWTON_MAX_HALVINGS', 8)
GAP_TOL = getattr(settings, 'SURFACES_GAP_TOL', 1e-8)
TAU_MARGIN = getattr(settings, 'SURFACES_TAU_MARGIN', 1e-8)
GOURSAT_CELL_TOL = getattr(settings, 'SURFACES_GOURSAT_CELL_TOL', 1e-13)
GOURSAT_MAX_STEPS = getattr(settings, 'SURFACES_GOURSAT_MAX_STEPS', 50)

logger = logging.getLogger(__name__)

LAPLACE = 'laplace'
MIXED = 'mixed'
SYSTEM = 'system'


def _check_sign(value, name: str, allow_zero: bool = False):
    allowed = (-1, 0, 1) if allow_zero else (-1, 1)
    if value not in allowed:
        raise DomainError(f"{name} must be one of {allowed}, got {value}")


def _check_finite_param(value, name: str):
    if not np.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")


class _Scalar:
    """Shared behaviour of the single-field equations."""

    form = LAPLACE
    arity = 1
    needs_gradient = False

    def rhs(self, psi, d1=None, d2=None):
        raise NotImplementedError

    def rhs_prime(self, psi):
        """∂rhs/∂Ψ, used by the Newton Jacobian."""
        raise NotImplementedError

    def check(self, psi: np.ndarray):
        pass


@dataclass(frozen=True)
class SinhGordon(_Scalar):
    tag = 'sinh-gordon'

    def rhs(self, psi, d1=None, d2=None):
        return -np.sinh(psi)

    def rhs_prime(self, psi):
        return -np.cosh(psi)


@dataclass(frozen=True)
class LinearDegenerate(_Scalar):
    """Δ0Ψ = sign·Ψ. The substitution Ψ = 1/λ of the τ = 0 case lands on sign = +1."""

    sign: int = -1
    tag = 'linear'

    def __post_init__(self):
        _check_sign(self.sign, 'sign')

    def rhs(self, psi, d1=None, d2=None):
        return self.sign * psi

    def rhs_prime(self, psi):
        return np.full_like(psi, float(self.sign))


@dataclass(frozen=True)
class SineGordon(_Scalar):
    tag = 'sine-gordon'

    def rhs(self, psi, d1=None, d2=None):
        return np.sin(psi)

    def rhs_prime(self, psi):
        return np.cos(psi)


@dataclass(frozen=True)
class CoshGordonMixed(_Scalar):
    tag = 'cosh-gordon'
    form = MIXED

    def rhs(self, psi, d1=None, d2=None):
        return np.cosh(psi)

    def rhs_prime(self, psi):
        return np.sinh(psi)


@dataclass(frozen=True)
class Tzitzeica(_Scalar):
    eps_t: int = 1
    tag = 'tzitzeica'

    def __post_init__(self):
        _check_sign(self.eps_t, 'eps_t', allow_zero=True)

    def rhs(self, psi, d1=None, d2=None):
        return np.exp(2.0 * psi) + self.eps_t * np.exp(-psi)

    def rhs_prime(self, psi):
        return 2.0 * np.exp(2.0 * psi) - self.eps_t * np.exp(-psi)


@dataclass(frozen=True)
class SphereLambda(_Scalar):
    H: float = 0.0
    tag = 'sphere-lambda'

    def __post_init__(self):
        _check_finite_param(self.H, 'H')

    @property
    def coefficient(self) -> float:
        return self.H

    def rhs(self, psi, d1=None, d2=None):
        return self.coefficient * np.exp(-2.0 * psi) + 2.0 * np.exp(4.0 * psi)

    def rhs_prime(self, psi):
        return -2.0 * self.coefficient * np.exp(-2.0 * psi) + 8.0 * np.exp(4.0 * psi)


@dataclass(frozen=True)
class SphereLambda1(SphereLambda):
    alpha: int = 1
    tag = 'sphere-lambda1'

    def __post_init__(self):
        super().__post_init__()
        _check_sign(self.alpha, 'alpha')

    @property
    def coefficient(self) -> float:
        return self.alpha * self.H


@dataclass(frozen=True)
class LiouvilleMixed(_Scalar):
    H: float = -1.0
    tag = 'liouville'
    form = MIXED

    def __post_init__(self):
        _check_finite_param(self.H, 'H')

    def rhs(self, psi, d1=None, d2=None):
        return self.H * np.exp(-psi)

    def rhs_prime(self, psi):
        return -self.H * np.exp(-psi)


@dataclass(frozen=True)
class ConstantTauReduced(_Scalar):
    """The constant-τ form of the Gauss system, an equation on the eigenvalue λ."""

    tau: float = 1.0
    tag = 'constant-tau'
    needs_gradient = True

    def __post_init__(self):
        _check_finite_param(self.tau, 'tau')

    def check(self, psi: np.ndarray):
        gap = np.abs(self.tau - psi ** 2)
        if self.tau > 0:
            inside = np.abs(psi) < np.sqrt(self.tau)
            if not inside.all():
                raise DomainError("constant-tau equation needs |λ| < √τ", node=_first_node(~inside))
        if (gap < GAP_TOL).any():
            raise DomainError("λ² = τ, the eigenvalues coincide", node=_first_node(gap < GAP_TOL))

    def gradient_weight(self, psi):
        return 2.0 * psi / (self.tau - psi ** 2)

    def rhs(self, psi, d1=None, d2=None, eps: int = 1, eta: int = 1):
        return -psi - self.gradient_weight(psi) * (eps * d1 ** 2 + eta * d2 ** 2)

    def project(self, psi: np.ndarray) -> np.ndarray:
        if self.tau > 0:
            bound = np.sqrt(self.tau) - TAU_MARGIN
            return np.clip(psi, -bound, bound)
        return psi


@dataclass(frozen=True)
class PhiEquation(_Scalar):
    """cos φ ∂1∂2φ + sin φ ∂1φ ∂2φ + cos φ = 0, the constant-τ form of the complex Gauss system."""

    tag = 'phi-eq'
    form = MIXED
    needs_gradient = True


@dataclass(frozen=True)
class GaussSystem:
    alpha_g: int = 1
    tag = 'gauss-system'
    form = SYSTEM
    arity = 2

    def __post_init__(self):
        _check_sign(self.alpha_g, 'alpha_g')


@dataclass(frozen=True)
class ComplexGaussSystem:
    tag = 'complex-gauss'
    form = SYSTEM
    arity = 2


SolitonEquation = Union[
    SinhGordon, LinearDegenerate, SineGordon, CoshGordonMixed, Tzitzeica, SphereLambda,
    SphereLambda1, LiouvilleMixed, GaussSystem, ConstantTauReduced, ComplexGaussSystem, PhiEquation,
]

EQUATION_TAGS = {
    cls.tag: cls for cls in (
        SinhGordon, LinearDegenerate, SineGordon, CoshGordonMixed, Tzitzeica, SphereLambda,
        SphereLambda1, LiouvilleMixed, GaussSystem, ConstantTauReduced, ComplexGaussSystem, PhiEquation,
    )
}


def equation_from_tag(tag: str, H: float = 0.0, tau: float = 1.0, alpha: int = 1, eps_t: int = 1,
                      sign: int = -1) -> SolitonEquation:
    """Build an equation from its command-line tag and the generic parameter flags."""
    if tag not in EQUATION_TAGS:
        raise DomainError(f"unknown equation '{tag}', expected one of {sorted(EQUATION_TAGS)}")
    cls = EQUATION_TAGS[tag]
    if cls is LinearDegenerate:
        return cls(sign=sign)
    if cls is Tzitzeica:
        return cls(eps_t=eps_t)
    if cls is SphereLambda:
        return cls(H=H)
    if cls is SphereLambda1:
        return cls(H=H, alpha=alpha)
    if cls is LiouvilleMixed:
        return cls(H=H)
    if cls is GaussSystem:
        return cls(alpha_g=alpha)
    if cls is ConstantTauReduced:
        return cls(tau=tau)
    return cls()


def reduced_equation(case) -> SolitonEquation:
    """The soliton equation the constant-τ equation becomes for an eigen case."""
    if case.tau > 0:
        return SinhGordon()
    if case.tau == 0:
        return LinearDegenerate(sign=1)
    return SineGordon()


def _first_node(mask: np.ndarray) -> tuple[int, int]:
    j, i = np.argwhere(mask)[0]
    return int(i), int(j)


def _same_grid(fields):
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid != grid:
            raise DomainError("fields live on different grids")
    return grid


def _scalar_residual(eq, values: np.ndarray, grid: Grid2) -> np.ndarray:
    eq.check(values)
    if isinstance(eq, PhiEquation):
        d1 = derivative(values, grid, Partial.D1)
        d2 = derivative(values, grid, Partial.D2)
        d12 = derivative(values, grid, Partial.D12)
        return np.cos(values) * d12 + np.sin(values) * d1 * d2 + np.cos(values)
    if isinstance(eq, ConstantTauReduced):
        d1 = derivative(values, grid, Partial.D1)
        d2 = derivative(values, grid, Partial.D2)
        return laplace0_array(values, grid) - eq.rhs(values, d1, d2, grid.eps, grid.eta)
    if eq.form == MIXED:
        return derivative(values, grid, Partial.D12) - eq.rhs(values)
    return laplace0_array(values, grid) - eq.rhs(values)


def _gauss_residuals(eq: GaussSystem, lam: np.ndarray, mu: np.ndarray, grid: Grid2):
    gap = lam - mu
    if (np.abs(gap) < GAP_TOL).any():
        raise DomainError("λ = μ, the eigenvalues coincide", node=_first_node(np.abs(gap) < GAP_TOL))
    l1, l2 = derivative(lam, grid, Partial.D1), derivative(lam, grid, Partial.D2)
    m1, m2 = derivative(mu, grid, Partial.D1), derivative(mu, grid, Partial.D2)
    grad_mu = grid.eps * m1 ** 2 + grid.eta * m2 ** 2
    grad_lam = grid.eps * l1 ** 2 + grid.eta * l2 ** 2
    r_mu = laplace0_array(mu, grid) + 2.0 / gap * grad_mu - eq.alpha_g * mu
    r_lam = laplace0_array(lam, grid) - 2.0 / gap * grad_lam + eq.alpha_g * lam
    r_cross = l1 * m2 - m1 * l2
    return r_mu, r_lam, r_cross


def _complex_gauss_residuals(a: np.ndarray, b: np.ndarray, grid: Grid2):
    if (np.abs(b) < GAP_TOL).any():
        raise DomainError("b vanishes, the metric 1/b is undefined", node=_first_node(np.abs(b) < GAP_TOL))
    a1, a2 = derivative(a, grid, Partial.D1), derivative(a, grid, Partial.D2)
    b1, b2 = derivative(b, grid, Partial.D1), derivative(b, grid, Partial.D2)
    r_a = b * derivative(a, grid, Partial.D12) - 2.0 * a1 * b2 + b ** 2
    r_b = b * derivative(b, grid, Partial.D12) + a1 * a2 - b1 * b2 - a * b
    return r_a, r_b


def residual(eq: SolitonEquation, *fields: ScalarField2D):
    """LHS − RHS of ``eq`` at the given field(s).

    Returns one ScalarField2D for the scalar equations and a tuple for the two
    systems (three residuals for the Gauss system, two for the complex one).
    """
    if len(fields) != eq.arity:
        raise DomainError(f"{eq.tag} takes {eq.arity} field(s), got {len(fields)}")
    grid = _same_grid(fields)
    if isinstance(eq, GaussSystem):
        out = _gauss_residuals(eq, fields[0].values, fields[1].values, grid)
    elif isinstance(eq, ComplexGaussSystem):
        out = _complex_gauss_residuals(fields[0].values, fields[1].values, grid)
    else:
        return ScalarField2D(grid, _scalar_residual(eq, fields[0].values, grid))
    return tuple(ScalarField2D(grid, r) for r in out)


@dataclass(frozen=True)
class Solution:
    field: ScalarField2D
    iterations: int
    residual_norm: float


def _interior_laplacian(grid: Grid2) -> sp.csr_matrix:
    m1, m2 = grid.n1 - 2, grid.n2 - 2
    lx = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m1, m1)) / grid.h1 ** 2
    ly = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m2, m2)) / grid.h2 ** 2
    return (grid.eps * sp.kron(sp.identity(m2), lx) + grid.eta * sp.kron(ly, sp.identity(m1))).tocsr()


def _interior_residual(eq, values: np.ndarray, grid: Grid2, source: Optional[np.ndarray]) -> np.ndarray:
    r = laplace0_array(values, grid) - eq.rhs(values)
    if source is not None:
        r = r - source
    return r[1:-1, 1:-1]


def _max_norm(values: np.ndarray) -> float:
    norm = float(np.max(np.abs(values))) if values.size else 0.0
    return norm if np.isfinite(norm) else np.inf


def solve_elliptic(eq: SolitonEquation, init: ScalarField2D, boundary: Optional[ScalarField2D] = None,
                   tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER, damping: float = NEWTON_DAMPING,
                   source: Optional[ScalarField2D] = None, max_halvings: int = NEWTON_MAX_HALVINGS) -> Solution:
    """Damped Newton on the 5-point discretization with Dirichlet edges.

    The edges of ``boundary`` (default: of ``init``) are held fixed. With a
    ``source`` the solved equation is ``residual(eq, Ψ) = source``.
    """
    grid = init.grid
    if eq.form != LAPLACE or eq.needs_gradient or eq.arity != 1:
        raise DomainError(f"{eq.tag} is not a Δ0-form equation the elliptic solver handles")
    if grid.eps != grid.eta:
        raise DomainError(f"elliptic solve needs eps = eta, got eps={grid.eps}, eta={grid.eta}")
    if not 0.0 < damping <= 1.0:
        raise DomainError(f"damping must lie in (0, 1], got {damping}")

    values = np.array(init.values, dtype=float)
    if boundary is not None:
        _same_grid([init, boundary])
        edge = np.ones(grid.shape, dtype=bool)
        edge[1:-1, 1:-1] = False
        mismatch = edge & (np.abs(values - boundary.values) > 1e-12)
        if mismatch.any():
            raise DomainError("initial guess does not match the boundary data", node=_first_node(mismatch))
    src = None if source is None else source.values

    laplacian = _interior_laplacian(grid)
    r = _interior_residual(eq, values, grid, src)
    norm = _max_norm(r)
    step_norm = 0.0
    iterations = 0
    while norm >= tol:
        if iterations >= max_iter:
            raise NonConvergence("Newton iteration did not converge", norm, step_norm, iterations)
        jacobian = laplacian - sp.diags(eq.rhs_prime(values[1:-1, 1:-1]).ravel())
        step = spsolve(jacobian.tocsc(), -r.ravel())
        if not np.all(np.isfinite(step)):
            raise SingularJacobian(f"Newton step is not finite at iteration {iterations}")
        step = step.reshape(r.shape)

        t = damping
        for halving in range(max_halvings + 1):
            trial = values.copy()
            trial[1:-1, 1:-1] += t * step
            with np.errstate(over='ignore', invalid='ignore'):
                r_trial = _interior_residual(eq, trial, grid, src)
            trial_norm = _max_norm(r_trial)
            if trial_norm < norm or halving == max_halvings:
                break
            t /= 2.0
        if not np.isfinite(trial_norm):
            raise NonConvergence("Newton iterate left the finite range", norm, _max_norm(step), iterations)
        values, r, norm = trial, r_trial, trial_norm
        step_norm = t * _max_norm(step)
        iterations += 1
        logger.debug(f"newton {eq.tag}: iteration {iterations}, residual {norm:.3e}, step {step_norm:.3e}")

    logger.info(f"newton {eq.tag}: converged in {iterations} iterations, residual {norm:.3e}")
    return Solution(ScalarField2D(grid, values), iterations, norm)


def solve_goursat(eq: Optional[SolitonEquation], grid: Grid2, bottom: np.ndarray, left: np.ndarray,
                  cell_tol: float = GOURSAT_CELL_TOL, max_steps: int = GOURSAT_MAX_STEPS) -> Solution:
    """Characteristic marching for ∂1∂2Ψ = G(Ψ).

    ``bottom`` holds Ψ on x2 = x2_min (length n1), ``left`` holds Ψ on
    x1 = x1_min (length n2). ``eq=None`` marches ∂1∂2Ψ = 0. Each cell uses the
    trapezoidal rule over its four corners, iterated to ``cell_tol``; the cells
    of one anti-diagonal are independent and are iterated together.
    """
    if eq is not None and (eq.form != MIXED or eq.needs_gradient):
        raise DomainError(f"{eq.tag} is not a ∂1∂2-form equation")
    bottom = np.asarray(bottom, dtype=float)
    left = np.asarray(left, dtype=float)
    if bottom.shape != (grid.n1,) or left.shape != (grid.n2,):
        raise DomainError(f"edge data must have {grid.n1} and {grid.n2} values")
    if abs(bottom[0] - left[0]) > 1e-12:
        raise DomainError(f"edge data disagree at the corner: {bottom[0]} vs {left[0]}", node=(0, 0))

    def G(psi):
        return np.zeros_like(psi) if eq is None else eq.rhs(psi)

    values = np.zeros(grid.shape)
    values[0, :] = bottom
    values[:, 0] = left
    area = grid.h1 * grid.h2
    worst = 0
    for d in range(2, grid.n1 + grid.n2 - 1):
        i = np.arange(max(1, d - grid.n2 + 1), min(d, grid.n1 - 1) + 1)
        j = d - i
        a, b, c = values[j, i - 1], values[j - 1, i], values[j - 1, i - 1]
        known = a + b - c
        known_rhs = G(a) + G(b) + G(c)
        psi = known.copy()
        for step in range(1, max_steps + 2):
            if step > max_steps:
                k = int(np.argmax(moved))
                raise CellDivergence((int(i[k]), int(j[k])), max_steps)
            with np.errstate(over='ignore', invalid='ignore'):
                new = known + 0.25 * area * (known_rhs + G(psi))
            if not np.all(np.isfinite(new)):
                k = int(np.argmax(~np.isfinite(new)))
                raise BlowUp(f"Goursat march blew up at node ({int(i[k])}, {int(j[k])})")
            moved = np.abs(new - psi)
            psi = new
            if np.all(moved < cell_tol):
                break
        worst = max(worst, step)
        values[j, i] = psi

    field = ScalarField2D(grid, values)
    norm = 0.0 if eq is None else _max_norm(residual(eq, field).values[1:-1, 1:-1])
    logger.info(f"goursat {getattr(eq, 'tag', 'zero-rhs')}: at most {worst} iterations per cell")
    return Solution(field, worst, norm)


def _hyperbolic_accel(eq, psi, d2, grid: Grid2, src):
    """∂2²Ψ from the equation written as η∂2²Ψ = rhs − ε∂1²Ψ (εη = −1)."""
    d11 = derivative(psi, grid, Partial.D11)
    if eq.needs_gradient:
        d1 = derivative(psi, grid, Partial.D1)
        rhs = eq.rhs(psi, d1, d2, grid.eps, grid.eta)
    else:
        rhs = eq.rhs(psi)
    if src is not None:
        rhs = rhs + src
    return grid.eta * (rhs - grid.eps * d11)


def solve_cauchy(eq: SolitonEquation, grid: Grid2, psi0: np.ndarray, dpsi0: np.ndarray,
                 source: Optional[ScalarField2D] = None, side_data: Optional[ScalarField2D] = None) -> Solution:
    """Leapfrog in x2 for Δ0-form equations with εη = −1.

    ``psi0`` and ``dpsi0`` are Ψ and ∂2Ψ on x2 = x2_min. The first level is a
    Taylor step. ``side_data`` pins the columns x1 = x1_min and x1 = x1_max;
    without it those columns use the one-sided stencils.
    """
    if eq.form != LAPLACE or eq.arity != 1:
        raise DomainError(f"{eq.tag} is not a Δ0-form equation")
    if grid.eps * grid.eta != -1:
        raise DomainError(f"leapfrog needs eps·eta = −1, got eps={grid.eps}, eta={grid.eta}")
    if grid.h2 > grid.h1 * (1.0 + 1e-12):
        raise DomainError(f"CFL condition violated: h2={grid.h2:.6g} > h1={grid.h1:.6g}")
    psi0 = np.asarray(psi0, dtype=float)
    dpsi0 = np.asarray(dpsi0, dtype=float)
    if psi0.shape != (grid.n1,) or dpsi0.shape != (grid.n1,):
        raise DomainError(f"line data must have {grid.n1} values")

    project = getattr(eq, 'project', lambda v: v)
    src = None if source is None else source.values
    h2 = grid.h2
    values = np.empty(grid.shape)
    values[0] = project(psi0)

    # rows are handed to the x1 stencils as one-row grids
    row_grid = Grid2(grid.x1_min, grid.x1_max, 0.0, 1.0, grid.n1, 3, grid.eps, grid.eta)

    def accel(n, d2):
        row = np.broadcast_to(values[n], (3, grid.n1))
        d2_row = np.broadcast_to(d2, (3, grid.n1))
        s = None if src is None else np.broadcast_to(src[n], (3, grid.n1))
        return _hyperbolic_accel(eq, row, d2_row, row_grid, s)[0]

    def pin(n):
        if side_data is not None:
            values[n, 0] = side_data.values[n, 0]
            values[n, -1] = side_data.values[n, -1]

    with np.errstate(over='ignore', invalid='ignore'):
        values[1] = project(values[0] + h2 * dpsi0 + 0.5 * h2 ** 2 * accel(0, dpsi0))
        pin(1)
        for n in range(1, grid.n2 - 1):
            d2 = (values[n] - values[n - 1]) / h2
            passes = 4 if eq.needs_gradient else 1
            for _ in range(passes):
                new = 2.0 * values[n] - values[n - 1] + h2 ** 2 * accel(n, d2)
                d2 = (new - values[n - 1]) / (2.0 * h2)
            values[n + 1] = project(new)
            pin(n + 1)
            if not np.all(np.isfinite(values[n + 1])):
                raise BlowUp(f"leapfrog blew up at row j={n + 1}")

    field = ScalarField2D(grid, values)
    r = residual(eq, field).values
    if src is not None:
        r = r - src
    logger.info(f"leapfrog {eq.tag}: marched {grid.n2 - 1} rows")
    return Solution(field, grid.n2 - 1, _max_norm(r[1:-1, 1:-1]))
