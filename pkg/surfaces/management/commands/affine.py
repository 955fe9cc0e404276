import json
import logging
import sys

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from surfaces.exceptions import NumericalFailure, ThresholdExceeded
from surfaces.services import ACTIONS, run_action
from surfaces.utils import read_config

logger = logging.getLogger(__name__)


def _config_path(argv: list[str]):
    for index, arg in enumerate(argv):
        if arg == '--config' and index + 1 < len(argv):
            return argv[index + 1]
        if arg.startswith('--config='):
            return arg.split('=', 1)[1]
    return None


class Command(BaseCommand):
    help = (
        "Solve soliton equations, build and verify Blaschke structures, integrate immersions "
        "and export meshes. Prints a one-line JSON summary."
    )
    requires_system_checks = []

    config_defaults: dict = {}

    def add_arguments(self, parser):
        parser.add_argument('action', choices=sorted(ACTIONS))
        parser.add_argument('--config', help="JSON file of flag defaults; explicit flags win")

        grid = parser.add_argument_group('grid')
        grid.add_argument('--bounds', type=float, nargs=4, metavar=('X1MIN', 'X1MAX', 'X2MIN', 'X2MAX'))
        grid.add_argument('--n1', type=int)
        grid.add_argument('--n2', type=int)
        grid.add_argument('--eps', type=int, choices=(-1, 1))
        grid.add_argument('--eta', type=int, choices=(-1, 1))

        files = parser.add_argument_group('files')
        files.add_argument('--input', help="field CSV, structure JSON or sheet JSON depending on the action")
        files.add_argument('--input-b', help="second field: μ for eigen, b for complex structures and maps")
        files.add_argument('--init', help="initial guess / line data field for solve")
        files.add_argument('--rate', help="field whose first row is ∂2Ψ on the initial line (cauchy)")
        files.add_argument('--source', help="right-hand side field: solve residual(Ψ) = source")
        files.add_argument('--boundary', help="zero, init, or a field CSV whose edges are the Dirichlet data")
        files.add_argument('--structure-in', help="structure JSON used for the export report")
        files.add_argument('--structure-out', help="also write the family structure here")
        files.add_argument('--out')
        files.add_argument('--out-psi')
        files.add_argument('--out-phi')

        eq = parser.add_argument_group('equations and maps')
        eq.add_argument('--eq', help="equation tag, e.g. sinh-gordon, tzitzeica, sphere-lambda")
        eq.add_argument('--method', choices=('elliptic', 'goursat', 'cauchy'))
        eq.add_argument('--H', type=float)
        eq.add_argument('--tau', type=float)
        eq.add_argument('--alpha', type=int, choices=(-1, 1))
        eq.add_argument('--eps-t', type=int, choices=(-1, 0, 1))
        eq.add_argument('--sign', type=int, choices=(-1, 1))
        eq.add_argument('--map', choices=('lambda-psi', 'tzitzeica', 'complex-angle', 'frame'))
        eq.add_argument('--case', choices=('pos', 'zero', 'neg'))
        eq.add_argument('--direction', choices=('fwd', 'inv', 'forward', 'inverse'))
        eq.add_argument('--kind', help="definite|indefinite, or a catalogue kind")
        eq.add_argument('--pin-sides', action='store_true', default=None)

        surf = parser.add_argument_group('structures and immersions')
        surf.add_argument('--structure', help="eigen, complex, sphere-definite, sphere-indefinite, liouville, family")
        surf.add_argument('--u-const', type=float)
        surf.add_argument('--angle', type=float)
        surf.add_argument('--lambda', dest='lam', type=float)
        surf.add_argument('--c', type=float)
        surf.add_argument('--phi-coeffs', type=float, nargs='+')
        surf.add_argument('--seed', help="orthonormal, a catalogue kind, or a seed JSON file")
        surf.add_argument('--a-coeffs', type=float, nargs='+')
        surf.add_argument('--b-coeffs', type=float, nargs='+')
        surf.add_argument('--basis', type=float, nargs=9)
        surf.add_argument('--require-constraint', action='store_true', default=None)

        numerics = parser.add_argument_group('numerics')
        numerics.add_argument('--tol', type=float)
        numerics.add_argument('--max-iter', type=int)
        numerics.add_argument('--damping', type=float)
        numerics.add_argument('--threshold', type=float, help="pass/fail threshold of verify, immerse and family")

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argparse errors become CommandError (exit 1) instead of argparse's exit 2
        parser.called_from_command_line = False
        if self.config_defaults:
            known = {action.dest for action in parser._actions}
            unknown = sorted(set(self.config_defaults) - known)
            if unknown:
                raise CommandError(f"unknown keys in config file: {', '.join(unknown)}", returncode=1)
            parser.set_defaults(**self.config_defaults)
        return parser

    def run_from_argv(self, argv):
        try:
            path = _config_path(argv[2:])
            if path:
                config = read_config(path)
                self.config_defaults = {key.replace('-', '_'): value for key, value in config.items()}
            super().run_from_argv(argv)
        except ValidationError as exc:
            self.stderr.write(f"DomainError: {'; '.join(exc.messages)}")
            sys.exit(1)
        except CommandError as exc:
            self.stderr.write(f"CommandError: {exc}")
            sys.exit(exc.returncode)

    def handle(self, *args, **options):
        action = options['action']
        check_paths(options)
        try:
            summary = run_action(action, options)
        except ValidationError as exc:
            logger.error(f"{action}: {'; '.join(exc.messages)}")
            raise CommandError('; '.join(exc.messages), returncode=1)
        except NumericalFailure as exc:
            logger.error(f"{action}: {exc}")
            raise CommandError(str(exc), returncode=2)

        self.stdout.write(json.dumps(summary, sort_keys=True))
        if summary.get('passed') is False:
            failure = ThresholdExceeded(summary.get('worst', 'path_residual'),
                                        summary.get('worst_value', summary.get('path_residual', 0.0)),
                                        summary['threshold'])
            raise CommandError(str(failure), returncode=2)


def check_paths(options: dict):
    """Output paths must differ from each other and from every input."""
    outputs = [options.get(key) for key in ('out', 'out_psi', 'out_phi', 'structure_out') if options.get(key)]
    inputs = [options.get(key) for key in ('input', 'input_b', 'init', 'rate', 'source', 'structure_in')
              if options.get(key)]
    if len(set(outputs)) != len(outputs):
        raise CommandError("output paths must be distinct", returncode=1)
    clash = set(outputs) & set(inputs)
    if clash:
        raise CommandError(f"output would overwrite an input: {', '.join(sorted(clash))}", returncode=1)
    for key in ('tol', 'threshold', 'damping'):
        value = options.get(key)
        if value is not None and not value > 0:
            raise CommandError(f"--{key} must be positive, got {value}", returncode=1)
