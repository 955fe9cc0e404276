"""Coordinate Blaschke structures (∇, h, S), their invariants and the structure-equation checks.

Component arrays carry the grid axes first and tensor slots last:

* ``h[..., i, j]``     = h(∂i, ∂j)
* ``gamma[..., k, i, j]`` = Γ^k_ij, so ∇_{∂i}∂j = Γ^k_ij ∂k (same layout for K)
* ``S[..., k, j]``     = S^k_j, so S∂j = S^k_j ∂k

Slot indices in the arrays are 0-based; the ``component`` accessors take the
1-based indices of the usual notation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Optional, Union

import numpy as np
from django.conf import settings

from .exceptions import DomainError
from .grid_fields import Grid2, Partial, ScalarField2D, derivative

GAP_TOL = getattr(settings, 'SURFACES_GAP_TOL', 1e-8)
DEGENERACY_TOL = getattr(settings, 'SURFACES_DEGENERACY_TOL', 1e-12)

logger = logging.getLogger(__name__)

GENERAL = 'general'
CONFORMAL = 'conformal'
NULL = 'null'


def _first_node(mask: np.ndarray) -> tuple[int, int]:
    j, i = np.argwhere(mask)[0][:2]
    return int(i), int(j)


def _interior(values: np.ndarray) -> np.ndarray:
    return values[1:-1, 1:-1]


def _norm(values: np.ndarray) -> float:
    inner = _interior(values)
    return float(np.max(np.abs(inner))) if inner.size else 0.0


def _partials(values: np.ndarray, grid: Grid2) -> np.ndarray:
    """∂1 and ∂2 stacked on a new axis right after the grid axes."""
    return np.stack([derivative(values, grid, Partial.D1), derivative(values, grid, Partial.D2)], axis=2)


@dataclass(frozen=True, eq=False)
class MetricField:
    """h with an optional chart hint.

    ``conformal``: h = scale·e^{−2u}(ε dx1² + η dx2²).
    ``null``: h11 = h22 = 0, h12 = scale·e^{−u}.
    The hint lets the Levi-Civita connection and K_h be computed from u directly.
    """

    grid: Grid2
    h: np.ndarray
    chart: str = GENERAL
    u: Optional[np.ndarray] = None
    scale: Union[float, np.ndarray] = 1.0
    signature: tuple[int, int] = (1, 1)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.shape != self.grid.shape + (2, 2):
            raise DomainError(f"metric array has shape {h.shape}, expected {self.grid.shape + (2, 2)}")
        h = 0.5 * (h + np.swapaxes(h, -1, -2))
        det = h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] ** 2
        bad = ~np.isfinite(det) | (np.abs(det) < DEGENERACY_TOL)
        if bad.any():
            raise DomainError("metric is degenerate", node=_first_node(bad))
        object.__setattr__(self, 'h', h)

    @classmethod
    def general(cls, grid: Grid2, h: np.ndarray) -> 'MetricField':
        return cls(grid, h)

    @classmethod
    def conformal(cls, u: ScalarField2D, scale=1.0, eps: int = 1, eta: int = 1) -> 'MetricField':
        factor = scale * np.exp(-2.0 * u.values)
        h = np.zeros(u.grid.shape + (2, 2))
        h[..., 0, 0] = eps * factor
        h[..., 1, 1] = eta * factor
        return cls(u.grid, h, CONFORMAL, u.values, scale, (eps, eta))

    @classmethod
    def null(cls, u: ScalarField2D, scale=1.0) -> 'MetricField':
        h = np.zeros(u.grid.shape + (2, 2))
        h[..., 0, 1] = h[..., 1, 0] = scale * np.exp(-u.values)
        return cls(u.grid, h, NULL, u.values, scale)

    @property
    def h11(self) -> ScalarField2D:
        return ScalarField2D(self.grid, self.h[..., 0, 0])

    @property
    def h12(self) -> ScalarField2D:
        return ScalarField2D(self.grid, self.h[..., 0, 1])

    @property
    def h22(self) -> ScalarField2D:
        return ScalarField2D(self.grid, self.h[..., 1, 1])

    @property
    def det(self) -> np.ndarray:
        return self.h[..., 0, 0] * self.h[..., 1, 1] - self.h[..., 0, 1] ** 2

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.h)


class _ThreeIndexField:
    grid: Grid2
    values: np.ndarray

    def _validate(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape + (2, 2, 2):
            raise DomainError(f"component array has shape {values.shape}, expected {self.grid.shape + (2, 2, 2)}")
        asym = np.abs(values[..., 0, 1] - values[..., 1, 0])
        if (asym > 1e-12 * (1.0 + np.abs(values[..., 0, 1]))).any():
            raise DomainError("lower indices must be symmetric", node=_first_node(asym.max(axis=-1) > 1e-12))
        object.__setattr__(self, 'values', values)

    def component(self, k: int, i: int, j: int) -> ScalarField2D:
        return ScalarField2D(self.grid, self.values[..., k - 1, i - 1, j - 1])


@dataclass(frozen=True, eq=False)
class ConnectionField(_ThreeIndexField):
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        self._validate()


@dataclass(frozen=True, eq=False)
class DifferenceField(_ThreeIndexField):
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        self._validate()

    def operator(self, i: int) -> np.ndarray:
        """Matrices of K_{∂i} (0-based i): column j holds K(∂i, ∂j)."""
        return self.values[..., :, i, :]


@dataclass(frozen=True, eq=False)
class ShapeField:
    grid: Grid2
    S: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.shape != self.grid.shape + (2, 2):
            raise DomainError(f"shape operator array has shape {S.shape}, expected {self.grid.shape + (2, 2)}")
        object.__setattr__(self, 'S', S)

    @classmethod
    def umbilic(cls, grid: Grid2, H: float) -> 'ShapeField':
        S = np.zeros(grid.shape + (2, 2))
        S[..., 0, 0] = S[..., 1, 1] = H
        return cls(grid, S)

    def component(self, k: int, j: int) -> ScalarField2D:
        return ScalarField2D(self.grid, self.S[..., k - 1, j - 1])

    @property
    def H(self) -> ScalarField2D:
        return ScalarField2D(self.grid, 0.5 * (self.S[..., 0, 0] + self.S[..., 1, 1]))

    @property
    def tau(self) -> ScalarField2D:
        return ScalarField2D(self.grid, np.linalg.det(self.S))


@dataclass(frozen=True, eq=False)
class BlaschkeStructure:
    metric: MetricField
    nabla: ConnectionField
    nabla_hat: ConnectionField
    K: DifferenceField
    shape: ShapeField
    case_tag: str
    params: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid2:
        return self.metric.grid

    def consistency_defect(self) -> float:
        return float(np.max(np.abs(self.nabla.values - self.nabla_hat.values - self.K.values)))


@dataclass(frozen=True)
class ResidualReport:
    gauss: float
    codazzi_C: float
    codazzi_S: float
    ricci: float
    r1_symmetry: float
    apolarity: float
    proj_flat: float
    egregium: float
    gamma_sym: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def worst(self) -> tuple[str, float]:
        name = max(self.as_dict(), key=lambda key: getattr(self, key))
        return name, getattr(self, name)


# Connections and curvature

def _conformal_christoffel(u: np.ndarray, grid: Grid2, signature) -> np.ndarray:
    du = _partials(u, grid)
    g0 = np.array(signature, dtype=float)
    gamma = np.zeros(grid.shape + (2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                value = np.zeros(grid.shape)
                if k == i:
                    value = value - du[:, :, j]
                if k == j:
                    value = value - du[:, :, i]
                if i == j:
                    value = value + g0[i] * g0[k] * du[:, :, k]
                gamma[..., k, i, j] = value
    return gamma


def _null_christoffel(u: np.ndarray, grid: Grid2) -> np.ndarray:
    du = _partials(u, grid)
    gamma = np.zeros(grid.shape + (2, 2, 2))
    gamma[..., 0, 0, 0] = -du[:, :, 0]
    gamma[..., 1, 1, 1] = -du[:, :, 1]
    return gamma


def _general_christoffel(metric: MetricField, dh: Optional[np.ndarray] = None) -> np.ndarray:
    dh = _partials(metric.h, metric.grid) if dh is None else dh
    first_kind = 0.5 * (np.einsum('...ilj->...lij', dh) + np.einsum('...jli->...lij', dh) - dh)
    return np.einsum('...kl,...lij->...kij', metric.inverse, first_kind)


def levi_civita(metric: MetricField, use_chart: bool = True, dh: Optional[np.ndarray] = None) -> ConnectionField:
    """Christoffel symbols of h.

    Conformal and null charts are differentiated through u; ``use_chart=False``
    forces the general formula on finite differences of h. A known ``dh``
    (∂_k h_ij as ``[..., k, i, j]``) replaces the finite differences.
    """
    if dh is not None:
        gamma = _general_christoffel(metric, np.asarray(dh, dtype=float))
    elif use_chart and metric.chart == CONFORMAL:
        gamma = _conformal_christoffel(metric.u, metric.grid, metric.signature)
    elif use_chart and metric.chart == NULL:
        gamma = _null_christoffel(metric.u, metric.grid)
    else:
        gamma = _general_christoffel(metric)
    return ConnectionField(metric.grid, gamma)


def curvature(connection: ConnectionField) -> np.ndarray:
    """R(∂1, ∂2)∂l as an array ``[..., k, l]``."""
    G = connection.values
    dG = _partials(G, connection.grid)
    return (dG[:, :, 0, :, 1, :] - dG[:, :, 1, :, 0, :]
            + np.einsum('...km,...ml->...kl', G[..., :, 0, :], G[..., :, 1, :])
            - np.einsum('...km,...ml->...kl', G[..., :, 1, :], G[..., :, 0, :]))


def gaussian_curvature(s: Union[BlaschkeStructure, MetricField]) -> ScalarField2D:
    """K_h, from u in conformal and null charts and from the curvature of ∇̂ otherwise."""
    metric = s.metric if isinstance(s, BlaschkeStructure) else s
    grid = metric.grid
    if metric.chart == CONFORMAL:
        eps, eta = metric.signature
        u = metric.u
        lap = eps * derivative(u, grid, Partial.D11) + eta * derivative(u, grid, Partial.D22)
        return ScalarField2D(grid, np.exp(2.0 * u) * lap / metric.scale)
    if metric.chart == NULL:
        u = metric.u
        return ScalarField2D(grid, np.exp(u) * derivative(u, grid, Partial.D12) / metric.scale)
    R = curvature(levi_civita(metric))
    # h(R(∂1,∂2)∂2, ∂1) / det h
    numerator = np.einsum('...k,...k->...', R[..., :, 1], metric.h[..., :, 0])
    return ScalarField2D(grid, numerator / metric.det)


# Invariants

def cubic_form(s: BlaschkeStructure) -> np.ndarray:
    """C_ijk = (∇_{∂i} h)(∂j, ∂k) with ∇̂h = 0 used exactly."""
    Kh = np.einsum('...mij,...mk->...ijk', s.K.values, s.metric.h)
    return -(Kh + np.swapaxes(Kh, -1, -2))


def cubic_invariants(s: BlaschkeStructure) -> tuple[np.ndarray, ScalarField2D, ScalarField2D]:
    """(C, J, h(C,C)) with J = h(C,C)/8."""
    C = cubic_form(s)
    hi = s.metric.inverse
    hCC = np.einsum('...ip,...jq,...kr,...ijk,...pqr->...', hi, hi, hi, C, C)
    return C, ScalarField2D(s.grid, hCC / 8.0), ScalarField2D(s.grid, hCC)


def _covariant_S(s: BlaschkeStructure) -> np.ndarray:
    """∇S(∂i, ∂j)^k = ∂i S^k_j + Γ^k_im S^m_j − S^k_m Γ^m_ij, as ``[..., i, j, k]``."""
    G = s.nabla.values
    S = s.shape.S
    dS = _partials(S, s.grid)
    return (np.einsum('...ikj->...ijk', dS)
            + np.einsum('...kim,...mj->...ijk', G, S)
            - np.einsum('...km,...mij->...ijk', S, G))


def _full_cubic_form(s: BlaschkeStructure) -> np.ndarray:
    """C_ijk = ∂i h_jk − Γ^m_ij h_mk − Γ^m_ik h_jm on finite differences."""
    G = s.nabla.values
    h = s.metric.h
    dh = _partials(h, s.grid)
    Gh = np.einsum('...mij,...mk->...ijk', G, h)
    return dh - Gh - np.swapaxes(Gh, -1, -2)


def verify(s: BlaschkeStructure) -> ResidualReport:
    """Max-norm defects of the structure equations over interior nodes."""
    grid = s.grid
    h, S, K = s.metric.h, s.shape.S, s.K.values
    hi = s.metric.inverse

    R = curvature(s.nabla)
    expected = h[..., None, 1, :] * S[..., :, 0, None] - h[..., None, 0, :] * S[..., :, 1, None]
    gauss = _norm(R - expected)

    C = _full_cubic_form(s)
    codazzi_C = _norm(C[..., 0, 1, :] - C[..., 1, 0, :])

    nS = _covariant_S(s)
    codazzi_S = _norm(nS[..., 0, 1, :] - nS[..., 1, 0, :])
    proj_flat = _norm(np.einsum('...ij,...ijk->...k', hi, nS))

    hS = np.einsum('...mi,...mj->...ij', S, h)
    ricci = _norm(hS[..., 0, 1] - hS[..., 1, 0])

    Kh = np.einsum('...mij,...mk->...ijk', K, h)
    r1 = _norm(Kh - np.einsum('...ikj->...ijk', Kh))
    apolarity = _norm(np.einsum('...ij,...kij->...k', hi, K))

    J = cubic_invariants(s)[1].values
    K_h = gaussian_curvature(s).values
    egregium = _norm(K_h - s.shape.H.values - J)

    H = s.shape.H.values
    gamma = 2.0 * H[..., None, None] * h - np.einsum('...im,...mj->...ij', h, S)
    dgamma = _partials(gamma, grid)
    G = s.nabla.values
    Gg = np.einsum('...mij,...mk->...ijk', G, gamma)
    ngamma = dgamma - Gg - np.einsum('...mik,...jm->...ijk', G, gamma)
    gamma_sym = _norm(ngamma[..., 0, 1, :] - ngamma[..., 1, 0, :])

    report = ResidualReport(gauss, codazzi_C, codazzi_S, ricci, r1, apolarity, proj_flat, egregium, gamma_sym)
    logger.debug(f"verify {s.case_tag}: {report.as_dict()}")
    return report


def _abs_metric(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return np.einsum('...ik,...k,...jk->...ij', v, np.abs(w), v)


def commutator_identity(s: BlaschkeStructure) -> float:
    """max |[K_{∂1}, K_{∂2}]∂k + J(h(∂2,∂k)∂1 − h(∂1,∂k)∂2)| over nodes and k.

    Lengths are taken in |h|, the positive metric with the absolute eigenvalues of h.
    """
    K1, K2 = s.K.operator(0), s.K.operator(1)
    bracket = K1 @ K2 - K2 @ K1
    J = cubic_invariants(s)[1].values
    h = s.metric.h
    target = np.zeros_like(bracket)
    target[..., 0, :] = -J[..., None] * h[..., 1, :]
    target[..., 1, :] = J[..., None] * h[..., 0, :]
    defect = bracket - target
    size = np.einsum('...ak,...ab,...bk->...k', defect, _abs_metric(h), defect)
    return float(np.sqrt(np.max(np.abs(size))))


# Frame checks for the sphere constructors

SPHERE_NORMAL_FORMS = {
    # K(E_i, E_j) in units of λ, as [k, i, j] in the frame E_i = e^u ∂_i
    'sphere_definite': np.array([[[0.0, -1.0], [-1.0, 0.0]], [[-1.0, 0.0], [0.0, 1.0]]]),
    'sphere_indefinite': np.array([[[1.0, 0.0], [0.0, 1.0]], [[0.0, -1.0], [-1.0, 0.0]]]),
}


def _require_sphere(s: BlaschkeStructure):
    if s.case_tag not in SPHERE_NORMAL_FORMS:
        raise DomainError(f"frame checks apply to sphere structures, got '{s.case_tag}'")


def lemma_frame_defect(s: BlaschkeStructure) -> float:
    """Deviation of K in the frame E_i = e^u ∂_i from the normal form with λ = ¼√|h(C,C)|."""
    _require_sphere(s)
    u = s.metric.u
    lam = 0.25 * np.sqrt(np.abs(cubic_invariants(s)[2].values))
    in_frame = np.exp(u)[..., None, None, None] * s.K.values
    expected = lam[..., None, None, None] * SPHERE_NORMAL_FORMS[s.case_tag]
    return float(np.max(np.abs(in_frame - expected)))


def connection_form_defect(s: BlaschkeStructure) -> float:
    """Check ω(E1) = −du(E2) and ω(E2) = εη du(E1) for ∇̂_X E2 = ω(X) E1.

    ∇̂ is recomputed from finite differences of h, not from u.
    """
    _require_sphere(s)
    grid = s.grid
    u = s.metric.u
    eps, eta = s.metric.signature
    G = levi_civita(s.metric, use_chart=False).values
    e_u = np.exp(u)
    omega1 = e_u * G[..., 0, 0, 1]
    omega2 = e_u * G[..., 0, 1, 1]
    du1 = e_u * derivative(u, grid, Partial.D1)
    du2 = e_u * derivative(u, grid, Partial.D2)
    return max(_norm(omega1 + du2), _norm(omega2 - eps * eta * du1))


# Constructors

def _structure(metric: MetricField, gamma_hat: ConnectionField, K: np.ndarray, S: ShapeField,
               tag: str, nabla: Optional[np.ndarray] = None, **params) -> BlaschkeStructure:
    grid = metric.grid
    if nabla is None:
        nabla = gamma_hat.values + K
    else:
        K = nabla - gamma_hat.values
    return BlaschkeStructure(metric, ConnectionField(grid, nabla), gamma_hat,
                             DifferenceField(grid, K), S, tag, params)


def _check_field(f: ScalarField2D, name: str):
    if not np.all(np.isfinite(f.values)):
        raise DomainError(f"{name} must be finite", node=_first_node(~np.isfinite(f.values)))


def eigen(lam: ScalarField2D, mu: ScalarField2D, eps: Optional[int] = None,
          eta: Optional[int] = None) -> BlaschkeStructure:
    """Diagonal shape operator S = diag(λ, μ) in the coordinates where E_i = √|λ−μ| ∂_i."""
    grid = lam.grid
    eps = grid.eps if eps is None else eps
    eta = grid.eta if eta is None else eta
    gap = mu.values - lam.values
    bad = gap <= GAP_TOL
    if bad.any():
        raise DomainError("eigen structure needs μ > λ", node=_first_node(bad))
    d = -gap
    # fourth order, so the curvature of ∇ stays second order next to the edges
    l1, l2 = derivative(lam.values, grid, Partial.D1, order=4), derivative(lam.values, grid, Partial.D2, order=4)
    m1, m2 = derivative(mu.values, grid, Partial.D1, order=4), derivative(mu.values, grid, Partial.D2, order=4)
    ee = eps * eta
    nabla = np.zeros(grid.shape + (2, 2, 2))
    nabla[..., 0, 0, 0] = -l1 / d
    nabla[..., 1, 0, 0] = -ee * m2 / d
    nabla[..., 0, 0, 1] = nabla[..., 0, 1, 0] = -l2 / d
    nabla[..., 1, 0, 1] = nabla[..., 1, 1, 0] = m1 / d
    nabla[..., 0, 1, 1] = ee * l1 / d
    nabla[..., 1, 1, 1] = m2 / d

    # h = e^{-2u}(ε, η) with e^{-2u} = 1/(μ − λ)
    metric = MetricField.conformal(ScalarField2D(grid, 0.5 * np.log(gap)), 1.0, eps, eta)
    S = np.zeros(grid.shape + (2, 2))
    S[..., 0, 0] = lam.values
    S[..., 1, 1] = mu.values
    return _structure(metric, levi_civita(metric), None, ShapeField(grid, S), 'eigen', nabla=nabla,
                      eps=eps, eta=eta)


def complex_(a: ScalarField2D, b: ScalarField2D) -> BlaschkeStructure:
    """Shape operator with complex eigenvalues a ± ib in a null chart, h12 = 1/b."""
    grid = a.grid
    bad = np.abs(b.values) < GAP_TOL
    if bad.any():
        raise DomainError("complex structure needs b ≠ 0", node=_first_node(bad))
    bv = b.values
    a1, a2 = derivative(a.values, grid, Partial.D1, order=4), derivative(a.values, grid, Partial.D2, order=4)
    b1, b2 = derivative(bv, grid, Partial.D1, order=4), derivative(bv, grid, Partial.D2, order=4)
    nabla = np.zeros(grid.shape + (2, 2, 2))
    nabla[..., 0, 0, 0] = -b1 / bv
    nabla[..., 1, 0, 0] = a1 / bv
    nabla[..., 0, 1, 1] = -a2 / bv
    nabla[..., 1, 1, 1] = -b2 / bv

    metric = MetricField.null(ScalarField2D(grid, np.log(np.abs(bv))), np.sign(bv))
    S = np.zeros(grid.shape + (2, 2))
    S[..., 0, 0] = S[..., 1, 1] = a.values
    S[..., 1, 0] = bv
    S[..., 0, 1] = -bv
    return _structure(metric, levi_civita(metric), None, ShapeField(grid, S), 'complex', nabla=nabla)


def _definite_K(w: np.ndarray, angle: float = 0.0, eps: int = 1) -> np.ndarray:
    s3, c3 = np.sin(3.0 * angle), np.cos(3.0 * angle)
    K = np.zeros(w.shape + (2, 2, 2))
    K[..., 0, 0, 0] = -w * s3
    K[..., 1, 0, 0] = -w * eps * c3
    K[..., 0, 1, 1] = w * s3
    K[..., 1, 1, 1] = w * eps * c3
    K[..., 0, 0, 1] = K[..., 0, 1, 0] = -w * eps * c3
    K[..., 1, 0, 1] = K[..., 1, 1, 0] = w * s3
    return K


def _indefinite_K(w: np.ndarray, angle: float = 0.0, eps: int = 1) -> np.ndarray:
    ch, sh = np.cosh(3.0 * angle), np.sinh(3.0 * angle)
    K = np.zeros(w.shape + (2, 2, 2))
    K[..., 0, 0, 0] = K[..., 0, 1, 1] = w * ch
    K[..., 1, 0, 0] = K[..., 1, 1, 1] = -w * eps * sh
    K[..., 0, 0, 1] = K[..., 0, 1, 0] = w * eps * sh
    K[..., 1, 0, 1] = K[..., 1, 1, 0] = -w * ch
    return K


def sphere_definite(u: ScalarField2D, H: float) -> BlaschkeStructure:
    """Definite proper affine sphere: h = e^{−2u}(dx1² + dx2²), S = H·Id."""
    _check_field(u, 'u')
    metric = MetricField.conformal(u, 1.0, 1, 1)
    K = _definite_K(np.exp(2.0 * u.values))
    return _structure(metric, levi_civita(metric), K, ShapeField.umbilic(u.grid, H), 'sphere_definite', H=H)


def sphere_indefinite(u: ScalarField2D, H: float, alpha: int = 1) -> BlaschkeStructure:
    """Indefinite proper affine sphere: h = α e^{−2u}(dx1² − dx2²), S = H·Id."""
    _check_field(u, 'u')
    if alpha not in (-1, 1):
        raise DomainError(f"alpha must be ±1, got {alpha}")
    metric = MetricField.conformal(u, float(alpha), 1, -1)
    K = _indefinite_K(np.exp(2.0 * u.values))
    return _structure(metric, levi_civita(metric), K, ShapeField.umbilic(u.grid, H), 'sphere_indefinite',
                      H=H, alpha=alpha)


def liouville(u: ScalarField2D, H: float) -> BlaschkeStructure:
    """Sphere with h(C,C) = 0: h12 = e^{−u}, h11 = h22 = 0, K(∂2,∂2) = e^u ∂1."""
    _check_field(u, 'u')
    metric = MetricField.null(u)
    K = np.zeros(u.grid.shape + (2, 2, 2))
    K[..., 0, 1, 1] = np.exp(u.values)
    return _structure(metric, levi_civita(metric), K, ShapeField.umbilic(u.grid, H), 'liouville', H=H)


def family(u: ScalarField2D, angle: float, eps: int = 1, kind: str = 'definite', H: float = 0.0,
           alpha: int = 1) -> BlaschkeStructure:
    """The rotated difference tensors K_angle sharing h and J with the sphere structures.

    Definite: K_angle has period 2π/3 and angle 0 with eps = 1 is the sphere table.
    Indefinite: hyperbolic rotation of the indefinite sphere table; angle 0 with
    eps = 1 reproduces it.
    """
    _check_field(u, 'u')
    if eps not in (-1, 1):
        raise DomainError(f"eps must be ±1, got {eps}")
    w = np.exp(2.0 * u.values)
    if kind == 'definite':
        metric = MetricField.conformal(u, 1.0, 1, 1)
        K = _definite_K(w, angle, eps)
    elif kind == 'indefinite':
        metric = MetricField.conformal(u, float(alpha), 1, -1)
        K = _indefinite_K(w, angle, eps)
    else:
        raise DomainError(f"kind must be definite or indefinite, got '{kind}'")
    return _structure(metric, levi_civita(metric), K, ShapeField.umbilic(u.grid, H), f'family_{kind}',
                      angle=angle, eps=eps, H=H, alpha=alpha)


def constant_structure(grid: Grid2, h, gamma, S, tag: str = 'constant') -> BlaschkeStructure:
    """A structure whose h, Γ and S are the same at every node."""
    h = np.broadcast_to(np.asarray(h, dtype=float), grid.shape + (2, 2)).copy()
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), grid.shape + (2, 2, 2)).copy()
    S = np.broadcast_to(np.asarray(S, dtype=float), grid.shape + (2, 2)).copy()
    metric = MetricField.general(grid, h)
    return _structure(metric, levi_civita(metric), None, ShapeField(grid, S), tag, nabla=gamma)


def from_arrays(grid: Grid2, h: np.ndarray, nabla: np.ndarray, nabla_hat: np.ndarray, K: np.ndarray,
                S: np.ndarray, tag: str, params: Optional[dict] = None) -> BlaschkeStructure:
    """Rebuild a stored structure without recomputing any field."""
    return BlaschkeStructure(MetricField.general(grid, h), ConnectionField(grid, nabla),
                             ConnectionField(grid, nabla_hat), DifferenceField(grid, K),
                             ShapeField(grid, S), tag, dict(params or {}))


CONSTRUCTORS = {
    'eigen': eigen,
    'complex': complex_,
    'sphere-definite': sphere_definite,
    'sphere-indefinite': sphere_indefinite,
    'liouville': liouville,
    'family': family,
}
