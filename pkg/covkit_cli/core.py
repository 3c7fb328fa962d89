import functools
import json
from contextlib import contextmanager
from time import perf_counter
from typing import List, Optional

import click
import numpy as np

from covkit import CovKitFactory
from covkit.chains import Ar1Model, Var1Model, write_chain
from covkit.diagnostics import (StoppingConfig, StoppingEstimator, coverage_experiment, min_ess,
                                sequential_stop)
from covkit.errors import CovKitError, NonFiniteEstimateError, ScheduleConfigError, WindowConfigError
from covkit.estimators import BatchSchedule, EstimatorMethod, EstimatorSpec, SchedulePolicy, parse_schedule
from covkit.windows import VALID_WINDOW_NAMES, check_conditions, parse_window, window_name

from .bench import BENCH_MODES, BenchConfig, run_bench
from .chain_io import CHAIN_FORMATS, load_chain
from .configuration import config, logger, ConfigError
from .validators import ResultValidator

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONDITION_FAILED = 3
EXIT_NUMERIC = 4

DEFAULT_CHECK_GRID = tuple(2 ** k for k in range(2, 13))


@contextmanager
def performance_monitor(operation_name: str):
    """Context manager to monitor operation performance."""
    start_time = perf_counter()
    logger.info(f"Starting {operation_name}")
    try:
        yield
    finally:
        duration = perf_counter() - start_time
        minutes = int(duration // 60)
        seconds = duration % 60
        if minutes > 0:
            logger.info(f"{operation_name} completed in {minutes}m {seconds:.2f}s")
        else:
            logger.info(f"{operation_name} completed in {seconds:.2f}s")


def create_error_response(message: str, status_code: int = EXIT_NUMERIC, error_type: str = "Error") -> dict:
    """Create a standardized error document."""
    logger.error(message)
    return {
        "error": error_type,
        "message": message,
        "status": status_code
    }


def report_errors(func):
    """Turn library errors into a JSON error document on stderr and the mapped exit code."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CovKitError as e:
            logger.error(f"{e.error_type}: {e}")
            click.echo(json.dumps(e.to_dict()), err=True)
            raise click.exceptions.Exit(e.exit_code)
        except np.linalg.LinAlgError as e:
            click.echo(json.dumps(create_error_response(str(e), EXIT_NUMERIC, "LinAlgError")), err=True)
            raise click.exceptions.Exit(EXIT_NUMERIC)
        except (ConfigError, ValueError) as e:
            click.echo(json.dumps(create_error_response(str(e), EXIT_USAGE, type(e).__name__)), err=True)
            raise click.exceptions.Exit(EXIT_USAGE)
    return wrapper


class WindowParamType(click.ParamType):
    name = 'window'

    def convert(self, value, param, ctx):
        if not isinstance(value, str):
            return value
        try:
            return parse_window(value)
        except WindowConfigError as e:
            self.fail(str(e), param, ctx)


class ScheduleParamType(click.ParamType):
    name = 'schedule'

    def convert(self, value, param, ctx):
        if not isinstance(value, str):
            return value
        try:
            return parse_schedule(value)
        except ScheduleConfigError as e:
            self.fail(str(e), param, ctx)


WINDOW = WindowParamType()
SCHEDULE = ScheduleParamType()
METHOD_CHOICE = click.Choice([method.value for method in EstimatorMethod])


def emit(document, out: Optional[str], schema: Optional[str] = None) -> None:
    """
    Write a JSON document to --out or stdout after checking it against its schema.

    Raises:
        ResultSchemaError: If the document does not match the schema
        NonFiniteEstimateError: If the document holds inf or NaN
    """
    if schema is not None:
        ResultValidator(schema).check(document)
    try:
        text = json.dumps(document, indent=2, allow_nan=False)
    except ValueError as e:
        raise NonFiniteEstimateError(f"Result document holds a non-finite value: {e}")
    if out and out != '-':
        with open(out, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(text + '\n')
    else:
        click.echo(text)


def resolve_threads(threads: Optional[int]) -> int:
    """--threads wins over COVKIT_THREADS."""
    return int(threads) if threads is not None else int(config.get('threads', 1))


def resolve_schedule(schedule):
    return schedule if schedule is not None else parse_schedule(config.get('default_schedule'))


def resolve_stop_schedule(schedule):
    """Stopping runs on doubling batches; a pow default keeps its nu."""
    if schedule is not None:
        return schedule
    default = resolve_schedule(None)
    if default.policy == SchedulePolicy.POWER:
        return BatchSchedule.doubling(default.nu)
    return default


def build_spec(method: str, window, schedule) -> EstimatorSpec:
    method = EstimatorMethod(method)
    if method in (EstimatorMethod.BM, EstimatorMethod.OBM) and window is not None:
        raise click.UsageError(f"--window does not apply to --method {method.value}")
    return EstimatorSpec(method, window, resolve_schedule(schedule))


def build_model(model: str, phi: float, p: int, seed: int, offset: float, scale: float):
    if model == 'ar1':
        return Ar1Model(phi, seed=seed)
    return Var1Model.random(p, seed, offset=offset, scale=scale)


input_option = click.option('--input', 'input_path', required=True, type=click.Path(allow_dash=True),
                            help="Chain file, or '-' for stdin")
format_option = click.option('--format', 'fmt', type=click.Choice(CHAIN_FORMATS), default='csv', show_default=True)
out_option = click.option('--out', type=click.Path(allow_dash=True), default=None, help="Output file (default stdout)")
schedule_option = click.option('--schedule', type=SCHEDULE, default=None,
                               help="pow:<nu>, doubling:<nu> or fixed:<b> (default from COVKIT_SCHEDULE)")
seed_option = click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True)
threads_option = click.option('--threads', type=click.IntRange(min=1), default=None,
                              help="Replication threads (default COVKIT_THREADS or 1)")
model_options = [
    click.option('--model', type=click.Choice(['ar1', 'var1']), default='ar1', show_default=True),
    click.option('--phi', type=float, default=0.5, show_default=True, help="AR(1) coefficient"),
    click.option('--p', 'p', type=click.IntRange(min=1), default=10, show_default=True, help="VAR(1) dimension"),
    click.option('--offset', type=float, default=1.0, show_default=True, help="VAR(1) eigenvalue offset"),
    click.option('--scale', type=float, default=1.0, show_default=True, help="VAR(1) Phi scale"),
]


def with_model_options(func):
    for option in reversed(model_options):
        func = option(func)
    return func


@click.group()
@click.option('--log-level', type=click.Choice(sorted(config.VALID_LOG_LEVELS), case_sensitive=False), default=None)
@click.version_option(version='1.0.0', prog_name='covkit')
def cli(log_level):
    """Asymptotic covariance estimation for MCMC output."""
    if log_level:
        config.update_config({'log_level': log_level})


@cli.command()
@input_option
@format_option
@click.option('--method', type=METHOD_CHOICE, default='bm', show_default=True)
@click.option('--window', type=WINDOW, default=None, help=f"One of {', '.join(VALID_WINDOW_NAMES)}")
@schedule_option
@click.option('--no-fast-paths', is_flag=True, help="Use the generic flat-top computation")
@out_option
@report_errors
def estimate(input_path, fmt, method, window, schedule, no_fast_paths, out):
    """Estimate the asymptotic covariance matrix of a chain."""
    with performance_monitor("estimate"):
        spec = build_spec(method, window, schedule)
        chain = load_chain(input_path, fmt)
        service = CovKitFactory.create_service(fast_paths=not no_fast_paths)
        emit(service.estimate(chain, spec).to_dict(), out, 'estimate')
    return EXIT_OK


@cli.command()
@with_model_options
@click.option('--n', 'n', type=click.IntRange(min=2), required=True)
@seed_option
@format_option
@click.option('--header', is_flag=True, help="Write a y1..yp header row (csv)")
@click.option('--truth', type=click.Path(), default=None, help="Also write the analytic Σ as JSON")
@out_option
@report_errors
def simulate(model, phi, p, offset, scale, n, seed, fmt, header, truth, out):
    """Simulate a reference chain with known Σ."""
    with performance_monitor("simulate"):
        source = build_model(model, phi, p, seed, offset, scale)
        chain = source.generate(n)
        if fmt == 'bin':
            if out and out != '-':
                with open(out, 'wb') as handle:
                    write_chain(chain, handle, 'bin')
            else:
                write_chain(chain, click.get_binary_stream('stdout'), 'bin')
        elif out and out != '-':
            with open(out, 'w', encoding='utf-8', newline='\n') as handle:
                write_chain(chain, handle, 'csv', header=header)
        else:
            write_chain(chain, click.get_text_stream('stdout'), 'csv', header=header)
        if truth:
            document = {'model': model, 'p': source.p, 'seed': seed, 'sigma': source.true_sigma().tolist()}
            if model == 'var1':
                document['phi'] = source.phi.tolist()
            else:
                document['phi'] = phi
            emit(document, truth)
    return EXIT_OK


@cli.command()
@click.option('--mode', type=click.Choice(BENCH_MODES), default='timing', show_default=True)
@with_model_options
@click.option('--n', 'ns', type=click.IntRange(min=4), multiple=True, default=(100000,), show_default=True)
@click.option('--dims', 'dims', type=click.IntRange(min=1), multiple=True, default=None,
              help="VAR(1) dimensions to sweep (default: --p)")
@click.option('--method', 'methods', multiple=True, help="Estimator labels such as wbm:flat-top or sv:bartlett")
@click.option('--reps', type=click.IntRange(min=3), default=10, show_default=True)
@seed_option
@schedule_option
@threads_option
@click.option('--report', type=click.Path(), default=None, help="Also write the JSON report here")
@out_option
@report_errors
def bench(mode, model, phi, p, offset, scale, ns, dims, methods, reps, seed, schedule, threads, report, out):
    """Run timing, variance-ratio, MSE or estimate-scatter experiments; emits tidy CSV."""
    with performance_monitor(f"bench {mode}"):
        bench_config = BenchConfig(mode=mode, model=model, phi=phi, ps=tuple(dims) if dims else (p,), ns=tuple(ns),
                                   reps=reps, seed=seed, offset=offset, scale=scale,
                                   schedule=resolve_schedule(schedule), methods=list(methods) or None,
                                   threads=resolve_threads(threads))
        result = run_bench(bench_config)
        if out and out != '-':
            with open(out, 'w', encoding='utf-8', newline='') as handle:
                result.to_csv(handle)
        else:
            result.to_csv(click.get_text_stream('stdout'))
        if report:
            emit(result.to_dict(), report)
    return EXIT_OK


@cli.command('check-window')
@click.option('--window', type=WINDOW, required=True, help=f"One of {', '.join(VALID_WINDOW_NAMES)}")
@click.option('--b', 'grid', type=click.IntRange(min=2), multiple=True, default=DEFAULT_CHECK_GRID,
              show_default=True)
@click.option('--tol', type=click.FloatRange(min=0.0, min_open=True), default=None)
@out_option
@report_errors
def check_window(window, grid, tol, out):
    """Check the consistency conditions of a lag window; exits 3 when they fail."""
    reports = [check_conditions(window, b, tol) for b in grid]
    passes = all(report.passes for report in reports)
    emit({'window': window_name(window), 'passes': passes, 'reports': [report.to_dict() for report in reports]},
         out, 'condition_report')
    if not passes:
        logger.warning(f"Window {window_name(window)} fails the consistency checks")
        raise click.exceptions.Exit(EXIT_CONDITION_FAILED)
    return EXIT_OK


@cli.command()
@input_option
@format_option
@click.option('--method', type=METHOD_CHOICE, default='wbm', show_default=True)
@click.option('--window', type=WINDOW, default=None, help="Default flat-top for sv/wbm/owbm")
@schedule_option
@click.option('--level', type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True), default=None)
@out_option
@report_errors
def ess(input_path, fmt, method, window, schedule, level, out):
    """Multivariate effective sample size and confidence-region volume."""
    with performance_monitor("ess"):
        if window is None and method not in ('bm', 'obm'):
            window = parse_window('flat-top')
        spec = build_spec(method, window, schedule)
        chain = load_chain(input_path, fmt)
        level = level if level is not None else float(config.get('default_level'))
        emit(CovKitFactory.create_service().assess(chain, spec, level), out, 'diagnostics')
    return EXIT_OK


@cli.command()
@click.option('--input', 'input_path', type=click.Path(allow_dash=True), default=None,
              help="Chain file to feed; simulates an AR(1) chain when omitted")
@format_option
@click.option('--phi', type=float, default=0.5, show_default=True)
@seed_option
@click.option('--max-n', type=click.IntRange(min=4), default=1000000, show_default=True)
@click.option('--threshold', type=click.FloatRange(min=0.0, min_open=True), default=None,
              help="ESS threshold (default: minimum ESS for --alpha and --eps)")
@click.option('--alpha', type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True), default=0.05)
@click.option('--eps', type=click.FloatRange(min=0.0, min_open=True), default=0.05)
@click.option('--min-n', type=click.IntRange(min=4), default=1000, show_default=True)
@click.option('--interval', type=click.IntRange(min=1), default=100, show_default=True)
@click.option('--estimator', type=click.Choice([e.value for e in StoppingEstimator]), default='wbm-flat-top',
              show_default=True)
@click.option('--schedule', type=SCHEDULE, default=None,
              help="doubling:<nu> (default: doubling with the nu of COVKIT_SCHEDULE)")
@out_option
@report_errors
def stop(input_path, fmt, phi, seed, max_n, threshold, alpha, eps, min_n, interval, estimator, schedule, out):
    """Sequential stopping on the multivariate ESS."""
    with performance_monitor("stop"):
        if input_path is not None:
            chain = load_chain(input_path, fmt)
        else:
            chain = Ar1Model(phi, seed=seed).generate(max_n)
        if threshold is None:
            threshold = min_ess(chain.p, alpha, eps)
        stopping = StoppingConfig(ess_threshold=threshold, min_n=min_n, check_interval=interval,
                                  schedule=resolve_stop_schedule(schedule), estimator=StoppingEstimator(estimator),
                                  max_n=max_n)
        document = sequential_stop(chain, stopping).to_dict()
        document['ess_threshold'] = threshold
        emit(document, out, 'stopping')
    return EXIT_OK


@cli.command()
@with_model_options
@click.option('--n', 'n', type=click.IntRange(min=4), default=10000, show_default=True)
@click.option('--method', type=METHOD_CHOICE, default='bm', show_default=True)
@click.option('--window', type=WINDOW, default=None)
@schedule_option
@click.option('--level', type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True), default=None)
@click.option('--reps', type=click.IntRange(min=10), default=500, show_default=True)
@seed_option
@threads_option
@out_option
@report_errors
def coverage(model, phi, p, offset, scale, n, method, window, schedule, level, reps, seed, threads, out):
    """Coverage probability of confidence regions for the known mean."""
    with performance_monitor("coverage"):
        spec = build_spec(method, window, schedule)
        source = build_model(model, phi, p, seed, offset, scale)
        level = level if level is not None else float(config.get('default_level'))
        result = coverage_experiment(source, n, spec, level, reps, seed, threads=resolve_threads(threads))
        emit(result.to_dict(), out, 'coverage')
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point.

    Returns:
        int: Exit code (0 success, 2 usage error, 3 condition check failed, 4 numeric failure)
    """
    try:
        cli.main(args=argv, prog_name='covkit', standalone_mode=True)
    except SystemExit as e:
        if e.code is None:
            return EXIT_OK
        return e.code if isinstance(e.code, int) else 1
    return EXIT_OK
