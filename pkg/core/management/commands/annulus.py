"""The ``annulus`` management command.

One command with five subcommands ties the numerical modules to tuple
files and JSON reports:

``check``      class certificates of every entry and the double commutation residual
``dilate``     quadrature dilation, node-class verification and moment table
``decompose``  canonical (d = 1) or 2^d decomposition
``factor``     UD factorization and joint spectral resolution
``generate``   example and random tuple files

Usage::

    python manage.py annulus generate normal --d 2 --dim 3 --r 0.5 --seed 7 -o pair.json
    python manage.py annulus check pair.json
    python manage.py annulus dilate pair.json --nodes 8192 --nodes 16384 --max-power 3

The ``annulus`` console script installed with the package runs the same
command without ``manage.py``.  Reports go to stdout (or ``-o``) as
JSON; log records go to stderr.  Toolkit errors are turned into
``CommandError`` with the exit code of the error class (2 input,
3 singular operator, 4 membership, 5 ambiguity).
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from core.decomposition import canonical_decompose, tuple_decompose
from core.dilation import (
    dilate_c1r,
    dilate_qar,
    moment_ratio,
    verify_moments,
    verify_node_class,
    verify_node_commutation,
)
from core.exceptions import AnnulusError, TupleFormatError
from core.instances import (
    SarasonShiftSpec,
    gen_normal_tuple,
    gen_sarason,
    gen_scalar_family,
    gen_tensor_tuple,
)
from core.matrix_core import ToleranceConfig
from core.operator_classes import ClassTag, OperatorTuple, certify_tuple
from core.spectral_factor import joint_spectral_resolution, ud_factorize
from core.tuple_io import Report, digest, dump_json, dump_tuple, parse_tuple, read_tuple, write_atomic

log = logging.getLogger('annulus.cli')

MEMBERSHIP_EXIT = 4
AMBIGUOUS_EXIT = 5


def _defaults() -> Dict[str, object]:
    return getattr(settings, 'ANNULUS_DEFAULTS', {}) or {}


def _moment_table(table) -> Dict[str, float]:
    return {','.join(str(v) for v in (n if isinstance(n, tuple) else (n,))): float(e) for n, e in table.items()}


class Command(BaseCommand):
    help = 'Certify, factor, dilate and decompose annulus-class operator tuples.'

    requires_system_checks: List[str] = []

    def add_arguments(self, parser):
        defaults = _defaults()
        subparsers = parser.add_subparsers(dest='subcommand', required=True)

        def sub(name: str, help_text: str):
            p = subparsers.add_parser(
                name,
                help=help_text,
                called_from_command_line=getattr(parser, 'called_from_command_line', None),
                missing_args_message=None,
            )
            p.add_argument('-o', '--output', default=None, help='Write the JSON output to this path')
            return p

        def tuple_input(p):
            p.add_argument('path', help='Tuple file (JSON)')
            p.add_argument('--r', type=float, default=None, help='Override the radius stored in the file')
            p.add_argument('--qa', action='store_true', help='Work with the quantum annulus class QA_r')

        check = sub('check', 'Class certificates and double commutation')
        tuple_input(check)
        check.add_argument(
            '--require',
            action='append',
            choices=[tag.value for tag in ClassTag],
            default=None,
            help='Class every entry must belong to (repeatable; default C1r, or QAr with --qa)',
        )

        dilate = sub('dilate', 'Quadrature dilation with moment verification')
        tuple_input(dilate)
        dilate.add_argument(
            '--nodes',
            type=int,
            action='append',
            default=None,
            help=f"Node count, a power of two (default {defaults.get('nodes', 8192)}); "
            'give twice for a convergence ratio',
        )
        dilate.add_argument('--max-power', type=int, default=defaults.get('max_power', 3))
        dilate.add_argument(
            '--snap-level',
            type=int,
            default=defaults.get('snap_level', 20),
            help='Dyadic level used when the spectrum touches the boundary',
        )
        dilate.add_argument('--export', default=None, help='Write the node model as JSON to this path')

        decompose = sub('decompose', 'Canonical or 2^d decomposition')
        tuple_input(decompose)
        decompose.add_argument('--no-basis', action='store_true', help='Omit block basis matrices')

        factor = sub('factor', 'UD factorization and joint spectral resolution')
        tuple_input(factor)

        generate = sub('generate', 'Write an example tuple file')
        generate.add_argument('kind', choices=['scalar', 'sarason', 'normal', 'tensor'])
        generate.add_argument('--r', type=float, default=None)
        generate.add_argument('--n', type=int, action='append', default=None, help='Scalar family index (repeatable)')
        generate.add_argument('--dim', type=int, default=None)
        generate.add_argument('--d', type=int, default=2)
        generate.add_argument('--alpha', type=float, default=0.0)
        generate.add_argument('--half-width', type=int, default=8)
        generate.add_argument('--seed', type=int, default=0)
        generate.add_argument('--factor', action='append', default=None, help='Tuple file whose first operator is a tensor factor')

    # ------------------------------------------------------------------
    # Plumbing

    def handle(self, *args, **options):
        name = options['subcommand']
        handler = getattr(self, f"cmd_{name}")
        try:
            handler(options)
        except AnnulusError as exc:
            log.error(f"[{name}] {exc}")
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        except (ValueError, OSError) as exc:
            log.error(f"[{name}] {exc}")
            raise CommandError(str(exc), returncode=2) from exc

    def _load(self, options):
        path = options['path']
        with open(path, 'rb') as handle:
            raw = handle.read()
        if options.get('r') is not None:
            log.warning(f"[input] radius overridden on the command line: r={options['r']}")
        try:
            text = raw.decode('utf-8')
        except UnicodeDecodeError as exc:
            raise TupleFormatError('file is not UTF-8', f"byte {exc.start}") from exc
        return parse_tuple(text, options.get('r')), digest(raw)

    def _emit(self, text: str, options) -> None:
        if options.get('output'):
            write_atomic(options['output'], text)
            self.stderr.write(self.style.SUCCESS(f"Wrote {options['output']}"))
        else:
            self.stdout.write(text, ending='')

    def _report(self, command: str, input_digest: str) -> Report:
        return Report(command=command, input_digest=input_digest, tolerances=ToleranceConfig.from_settings())

    # ------------------------------------------------------------------
    # Subcommands

    def cmd_check(self, options) -> None:
        tup, input_digest = self._load(options)
        required = options['require'] or [ClassTag.QAR.value if options['qa'] else ClassTag.C1R.value]
        cert = certify_tuple(tup)
        report = self._report('check', input_digest)
        report.results = {
            'r': tup.r,
            'd': tup.d,
            'dim': tup.dim,
            'entries': [[c.to_dict() for c in certs] for certs in cert.entries],
            'doubly_commuting': cert.doubly_commuting,
            'commutation_residual': cert.commutation_residual,
            'required': required,
        }
        failures = [
            {'entry': j, 'class': tag}
            for tag in required
            for j, member in enumerate(cert.members(tag))
            if not member
        ]
        report.results['failures'] = failures
        report.status = 'error' if failures else 'ok'
        self._emit(report.to_json(), options)
        if failures:
            raise CommandError(f"membership failed: {failures}", returncode=MEMBERSHIP_EXIT)

    def cmd_dilate(self, options) -> None:
        tup, input_digest = self._load(options)
        node_counts = options['nodes'] or [int(_defaults().get('nodes', 8192))]
        if len(node_counts) > 2:
            raise ValueError('--nodes may be given at most twice')
        build = dilate_qar if options['qa'] else dilate_c1r
        max_power = options['max_power']

        model = build(tup, node_counts[0], options['snap_level'])
        node_report = verify_node_class(model)
        moments = verify_moments(model, max_power=max_power)
        results: Dict[str, object] = {
            'N': model.N,
            'offset': model.offset,
            'offset_fallback': model.offset_fallback,
            'clearance': model.clearance,
            'scale': model.scale,
            'node_class': node_report.to_dict(),
            'node_commutation_residual': verify_node_commutation(model),
            'max_power': max_power,
            'moment_errors': _moment_table(moments),
            'max_moment_error': float(moments.max()),
            'snap': None,
        }
        if model.snap is not None:
            against_input = verify_moments(model, tup, max_power=max_power)
            results['snap'] = model.snap.to_dict()
            results['max_moment_error_vs_input'] = float(against_input.max())
        if len(node_counts) == 2:
            second = build(tup, node_counts[1], options['snap_level'])
            fine = verify_moments(second, max_power=max_power)
            ratio, worst = moment_ratio(moments, fine)
            results['convergence'] = {
                'N': [model.N, second.N],
                'worst_index': list(worst) if isinstance(worst, tuple) else [worst],
                'errors': [float(moments[worst]), float(fine[worst])],
                'ratio': ratio,
            }
        if options['verbosity'] >= 2:
            self.stderr.write(moments.to_string())
        if options['export']:
            write_atomic(options['export'], dump_json(model.to_dict()))
            log.info(f"[dilate] model exported to {options['export']}")
        report = self._report('dilate', input_digest)
        report.results = results
        self._emit(report.to_json(), options)

    def cmd_decompose(self, options) -> None:
        tup, input_digest = self._load(options)
        if tup.d == 1:
            result = canonical_decompose(tup.ops[0], tup.r, qa=options['qa'])
        else:
            result = tuple_decompose(tup, qa=options['qa'])
        report = self._report('decompose', input_digest)
        report.results = result.to_dict(include_basis=not options['no_basis'])
        report.status = 'ambiguous' if result.ambiguous else 'ok'
        self._emit(report.to_json(), options)
        if result.ambiguous:
            raise CommandError('decomposition is ambiguous at the configured kernel tolerance', returncode=AMBIGUOUS_EXIT)

    def cmd_factor(self, options) -> None:
        tup, input_digest = self._load(options)
        fact = ud_factorize(tup, qa=options['qa'])
        results: Dict[str, object] = fact.to_dict()
        results['unitaries'] = list(fact.unitaries)
        results['positives'] = list(fact.positives)
        results['resolution'] = joint_spectral_resolution(fact, tup.r).to_dict()
        report = self._report('factor', input_digest)
        report.results = results
        self._emit(report.to_json(), options)

    def cmd_generate(self, options) -> None:
        kind = options['kind']
        r: Optional[float] = options['r']
        if kind != 'tensor' and r is None:
            raise ValueError(f"generate {kind} needs --r")
        if kind == 'scalar':
            ops = [gen_scalar_family(n, r, options['dim'] or 1) for n in (options['n'] or [1])]
            tup = OperatorTuple(r=r, ops=tuple(ops))
        elif kind == 'sarason':
            spec = SarasonShiftSpec(alpha=options['alpha'], r=r, half_width=options['half_width'])
            tup = OperatorTuple.of(r, gen_sarason(spec))
        elif kind == 'normal':
            tup = gen_normal_tuple(options['seed'], options['d'], options['dim'] or 2, r)
        else:
            paths = options['factor'] or []
            if not paths:
                raise ValueError('generate tensor needs at least one --factor file')
            sources = [read_tuple(path) for path in paths]
            tup = gen_tensor_tuple([src.ops[0] for src in sources], sources[0].r if r is None else r)
        text = dump_tuple(tup)
        log.info(f"[generate] {kind}: d={tup.d} dim={tup.dim} digest {digest(text)[:12]}")
        self._emit(text, options)
