"""Changes of variables between geometric fields (λ, u, a, b) and soliton unknowns (Ψ, φ)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from django.conf import settings

from .exceptions import DomainError
from .grid_fields import Grid2, ScalarField2D, sample_at
from .soliton_eqs import Tzitzeica

GAP_TOL = getattr(settings, 'SURFACES_GAP_TOL', 1e-8)

logger = logging.getLogger(__name__)

FORWARD = 'forward'
INVERSE = 'inverse'

POSITIVE_TAU = 'PositiveTau'
ZERO_TAU = 'ZeroTau'
NEGATIVE_TAU = 'NegativeTau'

CASE_ALIASES = {'pos': POSITIVE_TAU, 'zero': ZERO_TAU, 'neg': NEGATIVE_TAU}
DIRECTION_ALIASES = {'fwd': FORWARD, 'inv': INVERSE, FORWARD: FORWARD, INVERSE: INVERSE}


def _first_node(mask: np.ndarray) -> tuple[int, int]:
    j, i = np.argwhere(mask)[0]
    return int(i), int(j)


def _direction(direction: str) -> str:
    try:
        return DIRECTION_ALIASES[direction]
    except KeyError:
        raise DomainError(f"direction must be forward or inverse, got '{direction}'")


@dataclass(frozen=True)
class EigenCase:
    tag: str
    tau: float

    def __post_init__(self):
        expected = POSITIVE_TAU if self.tau > 0 else ZERO_TAU if self.tau == 0 else NEGATIVE_TAU
        if self.tag != expected:
            raise DomainError(f"case {self.tag} does not match tau={self.tau}")

    @classmethod
    def from_tau(cls, tau: float) -> 'EigenCase':
        tau = float(tau)
        if not np.isfinite(tau):
            raise DomainError(f"tau must be finite, got {tau}")
        return cls(POSITIVE_TAU if tau > 0 else ZERO_TAU if tau == 0 else NEGATIVE_TAU, tau)

    @classmethod
    def from_flag(cls, case: str, tau: float) -> 'EigenCase':
        """``case`` is one of pos, zero, neg; ``tau`` must have the matching sign."""
        if case not in CASE_ALIASES:
            raise DomainError(f"case must be one of {sorted(CASE_ALIASES)}, got '{case}'")
        return cls(CASE_ALIASES[case], float(tau))


def lambda_psi(case: EigenCase, direction: str, field: ScalarField2D) -> ScalarField2D:
    """λ ↔ Ψ for the three constant-τ cases.

    * τ > 0: Ψ = −2 artanh(λ/√τ), needs |λ| < √τ.
    * τ = 0: Ψ = 1/λ, needs λ ≠ 0 (and Ψ ≠ 0 backwards).
    * τ < 0: Ψ = −2 arccot(λ/√−τ) on the arccot branch (0, π), so Ψ ∈ (−2π, 0).
      The inverse λ = −√−τ cot(Ψ/2) accepts any Ψ off the zeros of sin(Ψ/2).
    """
    direction = _direction(direction)
    v = field.values
    if case.tag == POSITIVE_TAU:
        root = np.sqrt(case.tau)
        if direction == FORWARD:
            bad = np.abs(v) >= root
            if bad.any():
                raise DomainError("λ must satisfy |λ| < √τ", node=_first_node(bad))
            out = -2.0 * np.arctanh(v / root)
        else:
            out = -root * np.tanh(v / 2.0)
    elif case.tag == ZERO_TAU:
        bad = np.abs(v) < GAP_TOL
        if bad.any():
            what = "λ" if direction == FORWARD else "Ψ"
            raise DomainError(f"{what} must be nonzero when τ = 0", node=_first_node(bad))
        out = 1.0 / v
    else:
        root = np.sqrt(-case.tau)
        if direction == FORWARD:
            out = -2.0 * (np.pi / 2.0 - np.arctan(v / root))
        else:
            half = np.sin(v / 2.0)
            bad = np.abs(half) < GAP_TOL
            if bad.any():
                raise DomainError("Ψ hits a zero of sin(Ψ/2)", node=_first_node(bad))
            out = -root * np.cos(v / 2.0) / half
    return ScalarField2D(field.grid, out)


def companion_eigenvalue(case: EigenCase, lam: ScalarField2D) -> ScalarField2D:
    """μ with λμ = τ; identically zero when τ = 0 and λ is the nonzero eigenvalue."""
    if case.tag == ZERO_TAU:
        return ScalarField2D.constant(lam.grid, 0.0)
    bad = np.abs(lam.values) < GAP_TOL
    if bad.any():
        raise DomainError("λ vanishes, μ = τ/λ is undefined", node=_first_node(bad))
    return ScalarField2D(lam.grid, case.tau / lam.values)


def tzitzeica_constants(H: float) -> tuple[float, float]:
    """Dilation ``a`` and shift ``b`` of the sphere-to-Tzitzeica rescale."""
    if H == 0:
        return 2.0, 1.0
    return float(np.cbrt(4.0 * abs(H))), float(np.cbrt(abs(H) / 2.0))


def tzitzeica_rescale(u: ScalarField2D, H: float, direction: str = FORWARD, alpha: Optional[int] = None,
                      target: Optional[Grid2] = None) -> tuple[ScalarField2D, Tzitzeica]:
    """Ψ(x) = 2u(x/a) − ln b and the Tzitzeica equation Ψ solves.

    Forward output lives on the grid of ``u`` dilated by ``a`` (same node
    counts, no interpolation) unless ``target`` is given, in which case Ψ is
    sampled bilinearly there. ``alpha`` selects the indefinite twin, where the
    sign of the Tzitzeica term is sgn(αH). Inverse recovers u from Ψ.
    """
    direction = _direction(direction)
    if not np.isfinite(H):
        raise DomainError(f"H must be finite, got {H}")
    a, b = tzitzeica_constants(H)
    signed = H if alpha is None else alpha * H
    eq = Tzitzeica(eps_t=int(np.sign(signed)))
    shift = np.log(b)
    if direction == FORWARD:
        if target is None:
            return ScalarField2D(u.grid.scaled(a), 2.0 * u.values - shift), eq
        X1, X2 = target.mesh()
        sampled = sample_at(u.values, u.grid, X1 / a, X2 / a)
        return ScalarField2D(target, 2.0 * sampled - shift), eq
    if target is None:
        return ScalarField2D(u.grid.scaled(1.0 / a), 0.5 * (u.values + shift)), eq
    X1, X2 = target.mesh()
    sampled = sample_at(u.values, u.grid, X1 * a, X2 * a)
    return ScalarField2D(target, 0.5 * (sampled + shift)), eq


def _unwrap2d(angle: np.ndarray) -> np.ndarray:
    """Unwrap along x1 rows, then shift rows so the x1_min column is continuous in x2."""
    rows = np.unwrap(angle, axis=1)
    column = np.unwrap(rows[:, 0])
    return rows + (column - rows[:, 0])[:, None]


def complex_angle_maps(a: ScalarField2D, b: ScalarField2D, tau: float,
                       tol: float = 1e-8) -> tuple[ScalarField2D, Optional[ScalarField2D]]:
    """φ with (a, b) = √τ(sin φ, cos φ), and the Ψ solving ∂1∂2Ψ = cosh Ψ.

    Ψ = −sgn(b)·artanh(sin φ); on the nodes where φ solves its equation the
    residual of ∂1∂2Ψ = cosh Ψ is −sgn(b)·sec²φ times the residual of φ.
    Ψ is None when b vanishes somewhere on the grid.
    """
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    if a.grid != b.grid:
        raise DomainError("a and b live on different grids")
    drift = np.abs(a.values ** 2 + b.values ** 2 - tau)
    if (drift > tol).any():
        raise DomainError(f"a² + b² deviates from τ={tau}", node=_first_node(drift > tol))
    phi = _unwrap2d(np.arctan2(a.values, b.values))
    cos_phi = np.cos(phi)
    if (np.abs(cos_phi) < GAP_TOL).any():
        logger.warning("b vanishes on the grid, Ψ is left undefined")
        return ScalarField2D(a.grid, phi), None
    psi = -np.sign(cos_phi) * np.arctanh(np.sin(phi))
    return ScalarField2D(a.grid, phi), ScalarField2D(a.grid, psi)


@dataclass(frozen=True)
class FrameAngles:
    lam: ScalarField2D
    psi: ScalarField2D
    phi: ScalarField2D
    eps: int
    kind: str = 'definite'
    # null case only: nodes where a = −b and E1 has been replaced by −E1
    flipped: Optional[np.ndarray] = None

    @property
    def period(self) -> float:
        return 2.0 * np.pi / 3.0 if self.kind == 'definite' else 0.0

    def reconstruct(self) -> tuple[np.ndarray, np.ndarray]:
        """(a, b) back from (λ, ψ); the null case gives a ≥ 0."""
        lam, psi = self.lam.values, self.psi.values
        if self.kind == 'definite':
            return lam * np.cos(psi), lam * np.sin(psi)
        if self.eps == 1:
            return lam * np.cosh(psi), lam * np.sinh(psi)
        if self.eps == -1:
            return lam * np.sinh(psi), lam * np.cosh(psi)
        sign = np.where(self.flipped, -1.0, 1.0)
        return lam, sign * lam


def canonical_frame(kind: str, a: ScalarField2D, b: ScalarField2D, tol: float = GAP_TOL) -> FrameAngles:
    if a.grid != b.grid:
        raise DomainError("a and b live on different grids")
    av, bv = a.values, b.values
    grid = a.grid
    if kind == 'definite':
        lam = np.hypot(av, bv)
        if (lam < tol).any():
            raise DomainError("(a, b) vanishes", node=_first_node(lam < tol))
        psi = _unwrap2d(np.arctan2(bv, av))
        return FrameAngles(ScalarField2D(grid, lam), ScalarField2D(grid, psi),
                           ScalarField2D(grid, psi / 3.0), 0, 'definite')
    if kind != 'indefinite':
        raise DomainError(f"kind must be definite or indefinite, got '{kind}'")

    d = av ** 2 - bv ** 2
    signs = np.where(np.abs(d) < tol, 0, np.sign(d)).astype(int)
    eps = int(signs.flat[0])
    mixed = signs != eps
    if mixed.any():
        raise DomainError(f"sign of a² − b² changes across the field (origin has {eps})", node=_first_node(mixed))
    zeros = ScalarField2D.constant(grid, 0.0)
    if eps == 0:
        logger.info("indefinite frame: null case a = ±b")
        return FrameAngles(ScalarField2D(grid, np.abs(av)), zeros, zeros, 0, 'indefinite',
                           flipped=np.sign(av) != np.sign(bv))
    lead, other = (av, bv) if eps == 1 else (bv, av)
    bad = lead <= 0
    if bad.any():
        name = 'a' if eps == 1 else 'b'
        raise DomainError(f"{name} must be positive for eps={eps}; replace E1 by −E1", node=_first_node(bad))
    lam = np.sqrt(eps * d)
    psi = np.arctanh(other / lead)
    return FrameAngles(ScalarField2D(grid, lam), ScalarField2D(grid, psi),
                       ScalarField2D(grid, psi / 3.0), eps, 'indefinite')
