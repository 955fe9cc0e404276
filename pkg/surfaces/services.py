import json
import logging
from typing import Any

import numpy as np
from django.conf import settings
from numpy.polynomial import Polynomial

from . import blaschke, immersion, soliton_eqs, variable_maps
from .exceptions import DomainError
from .grid_fields import Grid2, ScalarField2D, make_grid
from .utils import (
    json_safe, read_field, read_sheet, read_structure, write_field, write_obj, write_output_sheet, write_report,
    write_structure,
)

# Configuration
VERIFY_THRESHOLD = getattr(settings, 'SURFACES_VERIFY_THRESHOLD', 1e-4)
PATH_THRESHOLD = getattr(settings, 'SURFACES_PATH_THRESHOLD', 1e-3)
DEFAULT_BOUNDS = (-0.5, 0.5, -0.5, 0.5)
DEFAULT_NODES = 33

logger = logging.getLogger(__name__)


def _opt(options: dict, key: str, default: Any = None) -> Any:
    value = options.get(key)
    return default if value is None else value


def _require(options: dict, key: str) -> Any:
    value = options.get(key)
    if value is None:
        raise DomainError(f"--{key.replace('_', '-')} is required for this action")
    return value


def _catalogue_kind(name: str) -> str:
    return name.replace('-', '_')


def _interior_max(field: ScalarField2D) -> float:
    return float(np.max(np.abs(field.values[1:-1, 1:-1])))


class SurfacePipeline:
    """One static method per command action; each returns the run summary as a dict."""

    @staticmethod
    def grid(options: dict) -> Grid2:
        bounds = _opt(options, 'bounds', DEFAULT_BOUNDS)
        if len(bounds) != 4:
            raise DomainError(f"--bounds takes 4 numbers, got {len(bounds)}")
        return make_grid(bounds, _opt(options, 'n1', DEFAULT_NODES), _opt(options, 'n2', DEFAULT_NODES),
                         _opt(options, 'eps', 1), _opt(options, 'eta', 1))

    @staticmethod
    def equation(options: dict):
        return soliton_eqs.equation_from_tag(
            _require(options, 'eq'), H=_opt(options, 'H', 1.0), tau=_opt(options, 'tau', 1.0),
            alpha=_opt(options, 'alpha', 1), eps_t=_opt(options, 'eps_t', 1), sign=_opt(options, 'sign', -1),
        )

    @staticmethod
    def field_or_constant(options: dict, key: str, grid: Grid2, value: float = 0.0) -> ScalarField2D:
        path = options.get(key)
        return read_field(path) if path else ScalarField2D.constant(grid, value)

    # solve

    @staticmethod
    def _with_boundary(init: ScalarField2D, boundary: str) -> ScalarField2D:
        if boundary == 'init':
            return init
        if boundary == 'zero':
            edge = np.zeros(init.grid.shape)
        else:
            data = read_field(boundary)
            if data.grid != init.grid:
                raise DomainError("boundary field and initial guess live on different grids")
            edge = np.array(data.values)
        edge[1:-1, 1:-1] = init.values[1:-1, 1:-1]
        return init.with_values(edge)

    @staticmethod
    def _method(eq, grid: Grid2) -> str:
        if eq.form == soliton_eqs.MIXED:
            return 'goursat'
        return 'cauchy' if grid.eps * grid.eta == -1 else 'elliptic'

    @staticmethod
    def solve(options: dict) -> dict:
        eq = SurfacePipeline.equation(options)
        if eq.arity != 1:
            raise DomainError(f"{eq.tag} is a system; only scalar equations can be solved")
        init = SurfacePipeline.field_or_constant(options, 'init', SurfacePipeline.grid(options))
        grid = init.grid
        source = read_field(options['source']) if options.get('source') else None
        method = _opt(options, 'method', SurfacePipeline._method(eq, grid))

        if method == 'elliptic':
            start = SurfacePipeline._with_boundary(init, _opt(options, 'boundary', 'init'))
            solution = soliton_eqs.solve_elliptic(
                eq, start, tol=_opt(options, 'tol', soliton_eqs.NEWTON_TOL),
                max_iter=_opt(options, 'max_iter', soliton_eqs.NEWTON_MAX_ITER),
                damping=_opt(options, 'damping', soliton_eqs.NEWTON_DAMPING), source=source,
            )
        elif method == 'goursat':
            solution = soliton_eqs.solve_goursat(eq, grid, init.values[0, :], init.values[:, 0])
        elif method == 'cauchy':
            rate = read_field(options['rate']).values[0] if options.get('rate') else np.zeros(grid.n1)
            side = init if options.get('pin_sides') else None
            solution = soliton_eqs.solve_cauchy(eq, grid, init.values[0], rate, source=source, side_data=side)
        else:
            raise DomainError(f"unknown method '{method}', expected elliptic, goursat or cauchy")

        out = _require(options, 'out')
        write_field(out, solution.field)
        logger.info(f"solve {eq.tag} with {method}: {solution.iterations} iterations")
        return {
            'action': 'solve', 'equation': eq.tag, 'method': method, 'iterations': solution.iterations,
            'residual_norm': solution.residual_norm, 'output': out,
        }

    # map

    @staticmethod
    def map(options: dict) -> dict:
        kind = _require(options, 'map')
        field = read_field(_require(options, 'input'))
        out = _require(options, 'out')
        direction = _opt(options, 'direction', 'fwd')
        summary: dict[str, Any] = {'action': 'map', 'map': kind, 'output': out}

        if kind == 'lambda-psi':
            case = variable_maps.EigenCase.from_flag(_require(options, 'case'), _opt(options, 'tau', 1.0))
            result = variable_maps.lambda_psi(case, direction, field)
            write_field(out, result)
            summary.update(case=case.tag, direction=variable_maps.DIRECTION_ALIASES[direction],
                           equation=soliton_eqs.reduced_equation(case).tag)
        elif kind == 'tzitzeica':
            H = _opt(options, 'H', 1.0)
            result, eq = variable_maps.tzitzeica_rescale(field, H, direction, options.get('alpha'))
            write_field(out, result)
            summary.update(equation=eq.tag, eps_t=eq.eps_t, direction=variable_maps.DIRECTION_ALIASES[direction])
            if summary['direction'] == variable_maps.FORWARD:
                summary['residual_norm'] = _interior_max(soliton_eqs.residual(eq, result))
        elif kind == 'complex-angle':
            b = read_field(_require(options, 'input_b'))
            phi, psi = variable_maps.complex_angle_maps(field, b, _opt(options, 'tau', 1.0))
            write_field(out, phi)
            if psi is not None and options.get('out_psi'):
                write_field(options['out_psi'], psi)
            summary['psi_defined'] = psi is not None
        elif kind == 'frame':
            b = read_field(_require(options, 'input_b'))
            angles = variable_maps.canonical_frame(_opt(options, 'kind', 'definite'), field, b)
            write_field(out, angles.lam)
            if options.get('out_psi'):
                write_field(options['out_psi'], angles.psi)
            if options.get('out_phi'):
                write_field(options['out_phi'], angles.phi)
            summary.update(kind=angles.kind, eps=angles.eps, period=angles.period)
        else:
            raise DomainError(f"unknown map '{kind}', expected lambda-psi, tzitzeica, complex-angle or frame")
        return summary

    # structures

    @staticmethod
    def structure(options: dict) -> blaschke.BlaschkeStructure:
        kind = _require(options, 'structure')
        grid = SurfacePipeline.grid(options)
        if kind == 'eigen':
            lam = read_field(_require(options, 'input'))
            if options.get('input_b'):
                mu = read_field(options['input_b'])
            else:
                case = variable_maps.EigenCase.from_tau(_opt(options, 'tau', 1.0))
                mu = variable_maps.companion_eigenvalue(case, lam)
            return blaschke.eigen(lam, mu)
        if kind == 'complex':
            return blaschke.complex_(read_field(_require(options, 'input')), read_field(_require(options, 'input_b')))

        u = SurfacePipeline.field_or_constant(options, 'input', grid, _opt(options, 'u_const', 0.0))
        H = _opt(options, 'H', -2.0)
        alpha = _opt(options, 'alpha', 1)
        if kind == 'sphere-definite':
            return blaschke.sphere_definite(u, H)
        if kind == 'sphere-indefinite':
            return blaschke.sphere_indefinite(u, H, alpha)
        if kind == 'liouville':
            return blaschke.liouville(u, H)
        if kind == 'family':
            return blaschke.family(u, _opt(options, 'angle', 0.0), _opt(options, 'sign', 1),
                                   _opt(options, 'kind', 'definite'), H, alpha)
        if kind in ('definite-const-fp', 'indefinite-const-fp'):
            return immersion.catalogue_structure(_catalogue_kind(kind), _opt(options, 'lam', 1.0), grid)
        raise DomainError(f"unknown structure '{kind}', expected one of {sorted(blaschke.CONSTRUCTORS)}")

    @staticmethod
    def build_structure(options: dict) -> dict:
        s = SurfacePipeline.structure(options)
        out = _require(options, 'out')
        write_structure(out, s)
        return {
            'action': 'build-structure', 'case_tag': s.case_tag, 'grid': s.grid.header(),
            'consistency_defect': s.consistency_defect(), 'output': out,
        }

    @staticmethod
    def verify(options: dict) -> dict:
        source = _require(options, 'input')
        s = read_structure(source)
        report = blaschke.verify(s)
        worst, value = report.worst()
        threshold = _opt(options, 'threshold', VERIFY_THRESHOLD)
        summary = {
            'action': 'verify', 'case_tag': s.case_tag, 'residuals': report.as_dict(),
            'commutator': blaschke.commutator_identity(s), 'worst': worst, 'worst_value': value,
            'threshold': threshold, 'passed': value <= threshold, 'input': source,
        }
        if options.get('out'):
            write_report(options['out'], dict(summary, grid=s.grid.header(), params=s.params))
        if not summary['passed']:
            logger.warning(f"verify {s.case_tag}: {worst} = {value:.3e} exceeds {threshold:.3e}")
        return summary

    # immersions

    @staticmethod
    def seed(options: dict, s: blaschke.BlaschkeStructure) -> immersion.SeedFrame:
        choice = _opt(options, 'seed', 'orthonormal')
        if choice == 'orthonormal':
            return immersion.SeedFrame.orthonormal(s.metric.h[0, 0], immersion.umbilic_value(s) or 0.0)
        if _catalogue_kind(choice) in ('definite_const_fp', 'indefinite_const_fp'):
            return immersion.catalogue_seed(_catalogue_kind(choice), _opt(options, 'lam', 1.0), s.grid,
                                            _opt(options, 'sign', 1))
        try:
            with open(choice, encoding='utf-8') as handle:
                data = json.load(handle)
            return immersion.SeedFrame(data['f0'], data['F1'], data['F2'], data['xi'])
        except FileNotFoundError:
            raise DomainError(f"seed must be orthonormal, a catalogue kind or a JSON file; got '{choice}'")
        except (KeyError, json.JSONDecodeError) as exc:
            raise DomainError(f"seed file {choice} is malformed: {exc}")

    @staticmethod
    def _immerse(s: blaschke.BlaschkeStructure, options: dict, action: str) -> dict:
        sheet, path_residual = immersion.integrate(s, SurfacePipeline.seed(options, s))
        gw = immersion.gw_residual(sheet, s).as_dict()
        threshold = _opt(options, 'threshold', PATH_THRESHOLD)
        summary = {
            'action': action, 'case_tag': s.case_tag, 'path_residual': path_residual, 'gw_residual': gw,
            'threshold': threshold, 'passed': path_residual <= threshold,
        }
        out = _require(options, 'out')
        write_output_sheet(out, sheet, dict(summary, params=json_safe(s.params), grid=s.grid.header()))
        summary['output'] = out
        return summary

    @staticmethod
    def immerse(options: dict) -> dict:
        return SurfacePipeline._immerse(read_structure(_require(options, 'input')), options, 'immerse')

    @staticmethod
    def family(options: dict) -> dict:
        s = SurfacePipeline.structure(dict(options, structure='family'))
        if options.get('structure_out'):
            write_structure(options['structure_out'], s)
        summary = SurfacePipeline._immerse(s, options, 'family')
        hCC = blaschke.cubic_invariants(s)[2].values
        summary.update(angle=s.params['angle'], hCC_min=float(hCC.min()), hCC_max=float(hCC.max()))
        return summary

    @staticmethod
    def liouville(options: dict) -> dict:
        grid = SurfacePipeline.grid(options)
        a_fn = Polynomial(_opt(options, 'a_coeffs', [0.0]))
        b_fn = Polynomial(_opt(options, 'b_coeffs', [1.0]))
        H = _opt(options, 'H', -1.0)
        basis = np.asarray(_opt(options, 'basis', np.eye(3).ravel().tolist()), dtype=float)
        if basis.size != 9:
            raise DomainError(f"--basis takes 9 numbers, got {basis.size}")
        basis = basis.reshape(3, 3)
        sheet = immersion.liouville_build(a_fn, b_fn, H, grid, basis,
                                          require_constraint=bool(options.get('require_constraint')))
        curve = immersion.integrate_curve(a_fn, b_fn, H, grid.x2, basis)
        drift = float(np.max(np.abs(curve.wronskian() - H)))
        out = _require(options, 'out')
        summary = {'action': 'liouville', 'H': H, 'wronskian_drift': drift, 'grid': grid.header()}
        write_output_sheet(out, sheet, dict(summary, a_coeffs=a_fn.coef.tolist(), b_coeffs=b_fn.coef.tolist()))
        summary['output'] = out
        return summary

    @staticmethod
    def catalogue(options: dict) -> dict:
        kind = _catalogue_kind(_require(options, 'kind'))
        grid = SurfacePipeline.grid(options)
        lam = _opt(options, 'lam', 1.0)
        sign = _opt(options, 'sign', 1)
        sheet = immersion.catalogue(kind, grid, lam, sign, options.get('c'),
                                    _opt(options, 'phi_coeffs', (0.0, 0.0, 0.0, 1.0)))
        summary: dict[str, Any] = {'action': 'catalogue', 'kind': kind, 'lambda': lam, 'sign': sign,
                                   'vertices': grid.n1 * grid.n2}
        X, Y, Z = (sheet.f.values[..., k] for k in range(3))
        if kind == 'definite_const_fp':
            summary['identity_defect'] = float(np.max(np.abs((X ** 2 - Y ** 2) * Z - sign / immersion.catalogue_constant(lam))))
        elif kind == 'indefinite_const_fp':
            summary['identity_defect'] = float(np.max(np.abs((X ** 2 + Y ** 2) * Z - sign / immersion.catalogue_constant(lam))))
        out = _require(options, 'out')
        write_output_sheet(out, sheet, dict(summary, grid=grid.header()))
        summary['output'] = out
        return summary

    @staticmethod
    def export_obj(options: dict) -> dict:
        source = _require(options, 'input')
        sheet = read_sheet(source)
        report: dict[str, Any] = {'source': source}
        if options.get('structure_in'):
            s = read_structure(options['structure_in'])
            report.update(case_tag=s.case_tag, gw_residual=immersion.gw_residual(sheet, s).as_dict())
        out = _require(options, 'out')
        write_obj(out, sheet, report)
        n1, n2 = sheet.grid.n1, sheet.grid.n2
        return {'action': 'export-obj', 'vertices': n1 * n2, 'faces': (n1 - 1) * (n2 - 1), 'output': out}


ACTIONS = {
    'solve': SurfacePipeline.solve,
    'map': SurfacePipeline.map,
    'build-structure': SurfacePipeline.build_structure,
    'verify': SurfacePipeline.verify,
    'immerse': SurfacePipeline.immerse,
    'liouville': SurfacePipeline.liouville,
    'catalogue': SurfacePipeline.catalogue,
    'family': SurfacePipeline.family,
    'export-obj': SurfacePipeline.export_obj,
}


def run_action(action: str, options: dict) -> dict:
    handler = ACTIONS.get(action)
    if handler is None:
        raise DomainError(f"unknown action '{action}', expected one of {sorted(ACTIONS)}")
    return handler(options)
