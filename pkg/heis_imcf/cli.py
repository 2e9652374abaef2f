"""
Command Line
============
heis-imcf <selftest|barrier|solve|flow|verify|schema> --config <path> [--jobs N] [--out DIR] [--resume PATH]

Exit codes: 0 ok, 2 config error, 3 non-convergence, 4 verification failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from config import Config
from heis_imcf import create_app
from heis_imcf.api.errors import EXIT_OK, HeisError, VerificationError
from heis_imcf.models.report_models import CheckReport
from heis_imcf.services.field_io import config_hash, write_json
from heis_imcf.services.job_service import Job, JobResult, run_jobs
from heis_imcf.services.observability import timings_snapshot
from heis_imcf.services.selftest_service import format_checklist, registered_checks, run_selftests
from heis_imcf.validation import SCHEMAS, load_run_config, validate_report

logger = logging.getLogger(__name__)

COMMANDS = ('selftest', 'barrier', 'solve', 'flow', 'verify')

# Keys that are swept or nested rather than copied into every job payload
_SWEEP_KEYS = ('command', 'p', 'eps', 'verify', 'selftest', 'out_dir')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='heis-imcf',
                                     description='IMCF in the Heisenberg group via p-capacitary potentials')
    sub = parser.add_subparsers(dest='command', required=True)

    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument('--config', type=Path, required=name != 'selftest', help='Run configuration (JSON)')
        cmd.add_argument('--jobs', type=int, default=1, help='Parallel jobs, capped by HEIS_IMCF_THREADS')
        cmd.add_argument('--out', type=Path, default=None, help='Output directory')
        cmd.add_argument('--resume', type=Path, default=None, help='Directory with saved fields to warm-start from')
        if name == 'selftest':
            cmd.add_argument('--list', action='store_true', help='Print check names without running them')

    schema = sub.add_parser('schema')
    schema.add_argument('--out', type=Path, default=None, help='Directory for the schema files')
    return parser


def _out_dir(args, run_config: dict) -> Path:
    out = args.out or Path(run_config.get('out_dir', Config.OUTPUT_DIR))
    out.mkdir(parents=True, exist_ok=True)
    args.resolved_out = out
    return out


def build_jobs(command: str, run_config: dict, out_dir: Path, resume: Optional[Path] = None) -> List[Job]:
    """One job per eps (per (p, eps) for barrier), all sharing the non-swept keys"""
    base = {k: v for k, v in run_config.items() if k not in _SWEEP_KEYS}
    base.update(run_config.get('verify', {}) if command == 'verify' else {})
    base['out_dir'] = str(out_dir)
    base['config_hash'] = config_hash(run_config)
    base['seed'] = run_config.get('seed', Config.DEFAULT_SEED)
    if resume is not None:
        base['resume'] = str(resume)

    eps_values = run_config.get('eps', [0.0])
    if command == 'barrier':
        return [Job('barrier.samples', {**base, 'p': p, 'eps': eps}, f"barrier-p{p:g}-eps{eps:g}")
                for p in run_config['p'] for eps in eps_values]
    job_type = {'solve': 'solve.continuation', 'flow': 'flow.levels', 'verify': 'verify.suite'}[command]
    return [Job(job_type, {**base, 'eps': eps}, f"{command}-eps{eps:g}") for eps in eps_values]


def _print_result(result: JobResult):
    status = 'ok' if result.ok and result.result.get('passed', True) else 'FAILED'
    print(f"[{status}] {result.job_id}")
    for report in result.result.get('reports', []):
        mark = '✅' if report['passed'] else '❌'
        print(f"    {mark} {report['name']:<28} worst={report['worst']} tol={report['tolerance']}")
    if result.error:
        print(f"    {result.error['error']['message']}")


def _exit_code(results: Sequence[JobResult]) -> int:
    """First failing job's code in submission order"""
    for result in results:
        if not result.ok:
            return result.exit_code
    failed = [name for result in results for name in result.result.get('failed', [])]
    failed += [result.job_id for result in results
               if not result.result.get('passed', True) and not result.result.get('failed')]
    if failed:
        raise VerificationError(failed)
    return EXIT_OK


def cmd_selftest(args) -> int:
    if args.list:
        for name in registered_checks():
            print(name)
        return EXIT_OK

    run_config = load_run_config(args.config, 'selftest') if args.config else {}
    reports: List[CheckReport] = run_selftests(run_config.get('selftest', {}).get('checks'),
                                               seed=run_config.get('seed'))
    print(format_checklist(reports))
    out = _out_dir(args, run_config)
    write_json(out / 'selftest.json', {'checks': [r.to_dict() for r in reports]},
               meta={'config_hash': config_hash(run_config), 'seed': run_config.get('seed', Config.DEFAULT_SEED)})

    failed = [r.name for r in reports if not r.passed]
    if failed:
        raise VerificationError(failed)
    return EXIT_OK


def cmd_jobs(args) -> int:
    """barrier, solve, flow and verify: validate, fan out jobs, aggregate"""
    run_config = load_run_config(args.config, args.command)
    out = _out_dir(args, run_config)
    jobs = build_jobs(args.command, run_config, out, args.resume)
    logger.info(f"{args.command}: {len(jobs)} job(s)", extra={'extra_data': {'jobs': [j.job_id for j in jobs]}})

    results = run_jobs(jobs, max_workers=args.jobs)
    for result in results:
        _print_result(result)
        if args.command == 'verify' and result.ok:
            validate_report(json.loads((out / result.result['file']).read_text()))
    return _exit_code(results)


def cmd_barrier(args) -> int:
    return cmd_jobs(args)


def cmd_solve(args) -> int:
    return cmd_jobs(args)


def cmd_flow(args) -> int:
    """Level radii per s; fitted in/out constants go into the CSV metadata"""
    return cmd_jobs(args)


def cmd_verify(args) -> int:
    return cmd_jobs(args)


def cmd_schema(args) -> int:
    out = args.out or Path(Config.OUTPUT_DIR)
    for name, schema in SCHEMAS.items():
        path = write_json(out / f"{name}.schema.json", schema)
        print(path)
    return EXIT_OK


HANDLERS = {
    'selftest': cmd_selftest,
    'barrier': cmd_barrier,
    'solve': cmd_solve,
    'flow': cmd_flow,
    'verify': cmd_verify,
    'schema': cmd_schema,
}


def main(argv: Optional[Sequence[str]] = None, config_class=Config) -> int:
    args = build_parser().parse_args(argv)
    app = create_app(config_class)
    logger.debug(f"Threads: {app.config['THREADS']}")

    try:
        code = HANDLERS[args.command](args)
    except HeisError as e:
        logger.error(e.message, extra={'extra_data': e.to_dict()})
        print(f"error: {e.message}", file=sys.stderr)
        code = e.exit_code
    finally:
        if args.command != 'schema' and not getattr(args, 'list', False):
            out = getattr(args, 'resolved_out', None) or args.out or Path(Config.OUTPUT_DIR)
            write_json(out / 'timings.json', {'command': args.command, 'timings': timings_snapshot()})
    return code


if __name__ == '__main__':
    sys.exit(main())
