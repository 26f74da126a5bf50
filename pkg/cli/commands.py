"""
Command-line front end: generate, eval, batch and reproduce
"""
import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

from config import get_config, load_config, set_config
from metrics.batch import METRIC_SELECTORS, compare_algorithms, evaluate, rank_algorithms
from metrics.core import MetricParams, load_trajectory_set
from metrics.errors import CapacityError, DomainError, SolverError, ValidationError
from metrics.lp import build_lp, dump_lp
from metrics.schedules import SCHEDULE_KINDS, ScheduleSpec, load_sampling_times, load_weights_file, resolve_weights
from cli.reports import (
    batch_summary,
    format_ranking,
    format_table,
    ranking_order,
    report_summary,
    write_decomposition_csv,
    write_json,
)
from cli.scenario import cmd_generate_benchmark_scenario, generate_benchmark_scenario
from version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

# Switching penalty of the "assignment fixed over time" table columns
LARGE_GAMMA = 1e8
BENCHMARK_GAMMA = 10.0
BENCHMARK_RHO = 0.995


@dataclass
class EvalConfig:
    """Everything `eval` needs, after flags and config have been merged"""
    truth: Path
    estimates: List[Path]
    metric: str
    params: MetricParams
    schedule: ScheduleSpec
    p_prime: Optional[float] = None
    csv_path: Optional[Path] = None
    json_path: Optional[Path] = None
    dump_lp_path: Optional[Path] = None
    max_workers: Optional[int] = None
    decimals: int = 2


def _pick(value, config: dict, key: str):
    return config.get(key) if value is None else value


def _add_metric_options(parser: argparse.ArgumentParser):
    parser.add_argument('--metric', choices=METRIC_SELECTORS, default='tm',
                        help='Metric to evaluate (default: tm)')
    parser.add_argument('--c', type=float, default=None, help='Cut-off distance c')
    parser.add_argument('--p', type=float, default=None, help='Exponent p')
    parser.add_argument('--gamma', type=float, default=None, help='Switching penalty (required for tm and tm-lp)')
    parser.add_argument('--base-norm', type=float, default=None,
                        help='Order of the base norm (2 = Euclidean, inf allowed)')
    parser.add_argument('--normalize', choices=('none', 'window'), default=None,
                        help='Divide by the window length T before the root')
    parser.add_argument('--weights', choices=SCHEDULE_KINDS, default=None, help='Weight schedule')
    parser.add_argument('--rho', type=float, default=None, help='Forgetting factor for exponential schedules')
    parser.add_argument('--sampling-times', type=Path, default=None,
                        help='JSON list of sampling times for the sampling schedules')
    parser.add_argument('--weights-file', type=Path, default=None,
                        help='JSON {"w1": [...], "w2": [...]} for the custom schedule')
    parser.add_argument('--p-prime', type=float, default=None, help="Order p' of the scenario average")
    parser.add_argument('--json', type=Path, default=None, help='Write full-precision results as JSON')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='trajectory-metrics',
        description='Time-weighted trajectory metrics for multi-object tracking evaluation.',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--config', type=Path, default=None, help='Config file (default: ~/.trajectory_metrics/config.json)')
    parser.add_argument('--log-level', default=None, choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))
    parser.add_argument('--workers', type=int, default=None, help='Threads for clusters and scenarios')
    sub = parser.add_subparsers(dest='command', required=True)

    generate = sub.add_parser('generate', help='Write the two-target benchmark scenario files')
    generate.add_argument('--out-dir', type=Path, required=True)
    generate.add_argument('--separation', type=float, default=None)
    generate.add_argument('--seed', type=int, default=None)

    ev = sub.add_parser('eval', help='Evaluate estimates against a ground truth')
    ev.add_argument('truth', type=Path)
    ev.add_argument('estimates', type=Path, nargs='+')
    _add_metric_options(ev)
    ev.add_argument('--decompose', type=Path, default=None, help='Per-time CSV output path')
    ev.add_argument('--dump-lp', type=Path, default=None, help='Write the LP of the first pair (CPLEX LP format)')

    batch = sub.add_parser('batch', help='Average over scenarios and rank algorithms')
    batch.add_argument('--truth', type=Path, nargs='+', required=True)
    batch.add_argument('--algorithm', action='append', required=True, metavar='NAME=E1,E2,...',
                       help='Estimates of one algorithm, one per truth file (repeatable)')
    _add_metric_options(batch)

    reproduce = sub.add_parser('reproduce', help='Tabulate all metrics on the benchmark scenario')
    reproduce.add_argument('--metric', choices=('tm', 'tm-lp'), default='tm',
                           help='Exact or relaxed trajectory metric for the TM columns')
    reproduce.add_argument('--separation', type=float, default=None)
    reproduce.add_argument('--seed', type=int, default=None)
    reproduce.add_argument('--c', type=float, default=None)
    reproduce.add_argument('--p', type=float, default=None)
    reproduce.add_argument('--gamma', type=float, default=None)
    reproduce.add_argument('--rho', type=float, default=None)
    reproduce.add_argument('--json', type=Path, default=None)
    return parser


def make_params(args: argparse.Namespace, config: dict, metric: str) -> MetricParams:
    gamma = _pick(args.gamma, config, 'gamma')
    if gamma is None:
        if metric in ('tm', 'tm-lp'):
            raise DomainError(f"--gamma is required for metric {metric}")
        gamma = 1.0
    return MetricParams(
        c=float(_pick(args.c, config, 'c')),
        p=float(_pick(args.p, config, 'p')),
        gamma=float(gamma),
        base=float(_pick(args.base_norm, config, 'base_norm')),
        normalization=_pick(args.normalize, config, 'normalize'),
    )


def make_schedule_spec(args: argparse.Namespace, config: dict) -> ScheduleSpec:
    if args.weights_file is not None:
        return load_weights_file(args.weights_file)
    kind = _pick(args.weights, config, 'weights')
    times = load_sampling_times(args.sampling_times) if args.sampling_times is not None else None
    rho = _pick(args.rho, config, 'rho')
    return ScheduleSpec(kind=kind, rho=rho, sampling_times=times)


def make_eval_config(args: argparse.Namespace, config: dict) -> EvalConfig:
    return EvalConfig(
        truth=args.truth,
        estimates=list(args.estimates),
        metric=args.metric,
        params=make_params(args, config, args.metric),
        schedule=make_schedule_spec(args, config),
        p_prime=_pick(args.p_prime, config, 'p_prime'),
        csv_path=args.decompose,
        json_path=args.json,
        dump_lp_path=args.dump_lp,
        max_workers=_pick(args.workers, config, 'max_workers'),
        decimals=int(config.get('table_decimals', 2)),
    )


def _csv_path_for(base: Path, estimate: Path, several: bool) -> Path:
    if not several:
        return base
    return base.with_name(f'{base.stem}_{estimate.stem}{base.suffix or ".csv"}')


def cmd_eval(cfg: EvalConfig) -> int:
    """Evaluate every estimate against the truth and write the requested outputs"""
    truth = load_trajectory_set(cfg.truth)
    several = len(cfg.estimates) > 1
    rows = []
    summaries = {}
    for idx, path in enumerate(cfg.estimates):
        estimate = load_trajectory_set(path)
        weights = resolve_weights(cfg.schedule, truth.T)
        if idx == 0 and cfg.dump_lp_path is not None:
            dump_lp(build_lp(truth, estimate, cfg.params, weights), cfg.dump_lp_path)
        report = evaluate(cfg.metric, truth, estimate, cfg.params, weights, cfg.max_workers)
        logger.info(f"{cfg.metric}({cfg.truth.name}, {path.name}) = {report.total:.6g}")
        rows.append((path.stem, report))
        summaries[path.stem] = report_summary(report)
        if cfg.csv_path is not None:
            write_decomposition_csv(report, _csv_path_for(cfg.csv_path, path, several))

    print(format_table(rows, cfg.decimals, title=f'{cfg.metric} vs {cfg.truth.name}'))
    if cfg.json_path is not None:
        write_json({'truth': cfg.truth.name, 'metric': cfg.metric, 'estimates': summaries}, cfg.json_path)
    return EXIT_OK


def _parse_algorithm(spec: str, count: int):
    name, sep, files = spec.partition('=')
    if not sep or not name or not files:
        raise ValidationError(f"--algorithm expects NAME=e1.json,e2.json,..., got {spec!r}")
    paths = [Path(p) for p in files.split(',') if p]
    if len(paths) != count:
        raise ValidationError(f"algorithm {name!r} lists {len(paths)} estimates for {count} truth files")
    return name, paths


def cmd_batch(args: argparse.Namespace, config: dict) -> int:
    """Average a metric over scenarios for several algorithms and rank them"""
    params = make_params(args, config, args.metric)
    schedule = make_schedule_spec(args, config)
    truths = [load_trajectory_set(p) for p in args.truth]
    estimates = {}
    for spec in args.algorithm:
        name, paths = _parse_algorithm(spec, len(truths))
        if name in estimates:
            raise ValidationError(f"algorithm {name!r} given twice")
        estimates[name] = [load_trajectory_set(p) for p in paths]

    results, ranking = compare_algorithms(
        truths, estimates, args.metric, params, schedule,
        p_prime=_pick(args.p_prime, config, 'p_prime'),
        max_workers=_pick(args.workers, config, 'max_workers'),
    )
    decimals = int(config.get('table_decimals', 2))
    print(format_ranking(ranking, decimals, title=f'{args.metric} ranking: {ranking_order(ranking)}'))
    if args.json is not None:
        write_json(batch_summary(results, ranking), args.json)
    return EXIT_OK


def benchmark_variants(metric: str, c: float, p: float, gamma: float, rho: float) -> list:
    """(name, selector, params, schedule) of every benchmark table row"""
    time_weighted = ScheduleSpec('online-exp-normalized', rho=rho)
    uniform = ScheduleSpec('uniform')
    return [
        ('TW-TM', metric, MetricParams(c, p, gamma), time_weighted),
        ('TM', metric, MetricParams(c, p, gamma, normalization='window'), uniform),
        ('OSPA2', 'ospa2', MetricParams(c, p, gamma), uniform),
        ('TW-TM(g=1e8)', metric, MetricParams(c, p, LARGE_GAMMA), time_weighted),
        ('TM(g=1e8)', metric, MetricParams(c, p, LARGE_GAMMA, normalization='window'), uniform),
    ]


def cmd_reproduce(args: argparse.Namespace, config: dict) -> int:
    """Print the error table and the rankings for the benchmark scenario"""
    sets = generate_benchmark_scenario(separation=args.separation, seed=args.seed, c=args.c)
    c = float(_pick(args.c, config, 'c'))
    p = float(_pick(args.p, config, 'p'))
    gamma = float(args.gamma if args.gamma is not None else BENCHMARK_GAMMA)
    rho = float(args.rho if args.rho is not None else BENCHMARK_RHO)
    decimals = int(config.get('table_decimals', 2))
    workers = _pick(args.workers, config, 'max_workers')
    names = ('e1', 'e2', 'e3', 'e4')

    payload = {'c': c, 'p': p, 'gamma': gamma, 'rho': rho, 'metric': args.metric, 'variants': {}}
    for label, selector, params, schedule in benchmark_variants(args.metric, c, p, gamma, rho):
        rows = []
        for name in names:
            report = evaluate(selector, sets['truth'], sets[name], params, schedule, workers)
            rows.append((name.upper(), report))
        ranking = rank_algorithms({name: report.total for name, report in rows})
        print(format_table(rows, decimals, title=f'{label}'))
        print(f'  ranking: {ranking_order(ranking)}\n')
        payload['variants'][label] = {
            'estimates': {name: report_summary(report) for name, report in rows},
            'order': ranking_order(ranking),
        }
    if args.json is not None:
        write_json(payload, args.json)
    return EXIT_OK


def _load_run_config(args: argparse.Namespace) -> dict:
    if args.config is not None:
        if not args.config.exists():
            raise ValidationError(f"config file {args.config} does not exist")
        set_config(load_config(args.config))
    return get_config()


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one command and map errors to exit codes.

    Returns:
        0 on success, 2 for invalid input, 3 for LP solver failures
    """
    args = build_parser().parse_args(argv)
    try:
        config = _load_run_config(args)
        level = _pick(args.log_level, config, 'log_level') or 'INFO'
        logging.getLogger().setLevel(getattr(logging, str(level).upper(), logging.INFO))

        if args.command == 'generate':
            paths = cmd_generate_benchmark_scenario(args.out_dir, args.separation, args.seed)
            for path in paths:
                print(path)
            return EXIT_OK
        if args.command == 'eval':
            return cmd_eval(make_eval_config(args, config))
        if args.command == 'batch':
            return cmd_batch(args, config)
        return cmd_reproduce(args, config)
    except SolverError as e:
        logger.error(f"Solver failure: {e}")
        return EXIT_SOLVER
    except (ValidationError, DomainError, CapacityError, json.JSONDecodeError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"File error: {e}")
        return EXIT_INVALID
    except Exception:
        logger.exception("Unexpected error")
        return 1


if __name__ == '__main__':
    sys.exit(main())
