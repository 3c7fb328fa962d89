"""
Benchmark harness for the estimators on reference chains.

Modes:
    timing          wall time of each estimator's numeric kernel
    variance-ratio  paired-seed variance ratios of the diagonal estimates
    mse             mean squared error against the analytic Σ
    estimates       per-replication diagonal estimates, for scatter plots

Each (p, n) grid cell draws `reps` chains with seeds seed + rep and runs every
estimator on the same chain, so comparisons are paired. Results are tidy rows
with one statistic per row.
"""
import csv
import os
import platform
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np
import scipy

from covkit.chains import Ar1Model, Var1Model
from covkit.errors import CovKitError
from covkit.estimators import (BatchSchedule, EstimatorMethod, EstimatorSpec, batch_size, mse)
from covkit.implementations import create_estimator
from covkit.interfaces import ChainSource
from covkit.windows import parse_window

from .configuration import logger

BENCH_MODES = ('timing', 'variance-ratio', 'mse', 'estimates')
BENCH_MODELS = ('ar1', 'var1')

DEFAULT_METHODS = {
    'timing': ['wbm:flat-top', 'sv:flat-top', 'obm', 'bm', 'wbm:tukey-hanning', 'sv:tukey-hanning'],
    'variance-ratio': ['wbm:flat-top', 'sv:flat-top', 'bm', 'sv:bartlett', 'wbm:tukey-hanning',
                       'sv:tukey-hanning'],
    'mse': ['wbm:bartlett', 'sv:bartlett', 'wbm:tukey-hanning', 'sv:tukey-hanning', 'wbm:flat-top',
            'sv:flat-top'],
    'estimates': ['wbm:flat-top', 'sv:flat-top', 'wbm:tukey-hanning', 'sv:tukey-hanning'],
}

VARIANCE_PAIRS = [
    ('wbm:flat-top', 'sv:flat-top'),
    ('bm', 'sv:bartlett'),
    ('sv:flat-top', 'sv:bartlett'),
    ('wbm:tukey-hanning', 'sv:tukey-hanning'),
]

CSV_COLUMNS = ['mode', 'model', 'p', 'n', 'b', 'method', 'reference', 'reps', 'rep', 'entry', 'statistic', 'value']


def parse_method_label(label: str, schedule: BatchSchedule) -> EstimatorSpec:
    """Parse 'method[:window]', e.g. 'bm', 'wbm:flat-top' or 'sv:parzen:2'."""
    method, _, window = label.strip().lower().partition(':')
    try:
        method = EstimatorMethod(method)
    except ValueError:
        raise ValueError(f"Unknown estimator '{label}'")
    return EstimatorSpec(method, parse_window(window) if window else None, schedule)


@dataclass
class BenchConfig:
    mode: str = 'timing'
    model: str = 'var1'
    phi: float = 0.5
    ps: Sequence[int] = (10,)
    ns: Sequence[int] = (100000,)
    reps: int = 10
    seed: int = 0
    offset: float = 1.0
    scale: float = 1.0
    schedule: BatchSchedule = field(default_factory=BatchSchedule.power)
    methods: Optional[Sequence[str]] = None
    threads: int = 1

    def __post_init__(self):
        if self.mode not in BENCH_MODES:
            raise ValueError(f"Unknown bench mode '{self.mode}', use one of {', '.join(BENCH_MODES)}")
        if self.model not in BENCH_MODELS:
            raise ValueError(f"Unknown model '{self.model}', use one of {', '.join(BENCH_MODELS)}")
        if self.reps < 3:
            raise ValueError(f"Benchmarks need reps >= 3, got {self.reps}")
        if not self.methods:
            self.methods = list(DEFAULT_METHODS[self.mode])
        if self.model == 'ar1':
            self.ps = (1,)

    @property
    def specs(self) -> Dict[str, EstimatorSpec]:
        return {label: parse_method_label(label, self.schedule) for label in self.methods}


@dataclass
class BenchReport:
    mode: str
    rows: List[dict]
    environment: dict
    failed_cells: List[dict] = field(default_factory=list)

    def value(self, statistic: str, method: str, reference: Optional[str] = None,
              p: Optional[int] = None, n: Optional[int] = None) -> float:
        """Look up a single statistic; raises KeyError when absent."""
        for row in self.rows:
            if (row['statistic'] == statistic and row['method'] == method
                    and (reference is None or row['reference'] == reference)
                    and (p is None or row['p'] == p) and (n is None or row['n'] == n)):
                return row['value']
        raise KeyError(f"No {statistic} for {method} (reference={reference}, p={p}, n={n})")

    def to_csv(self, out: TextIO) -> None:
        writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for row in self.rows:
            writer.writerow({key: ('' if row.get(key) is None else row.get(key)) for key in CSV_COLUMNS})

    def to_dict(self) -> dict:
        return {
            'mode': self.mode,
            'environment': self.environment,
            'rows': self.rows,
            'failed_cells': self.failed_cells,
        }


def environment_fingerprint(threads: int) -> dict:
    return {
        'platform': platform.platform(),
        'processor': platform.processor() or platform.machine(),
        'cpu_count': os.cpu_count(),
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'replication_threads': threads,
        'timed_kernels_single_threaded': True,
    }


def _make_source(bench: BenchConfig, p: int) -> ChainSource:
    if bench.model == 'ar1':
        return Ar1Model(bench.phi, seed=bench.seed)
    return Var1Model.random(p, bench.seed, offset=bench.offset, scale=bench.scale)


def _row(bench: BenchConfig, p: int, n: int, b: int, method: str, statistic: str, value,
         reference: Optional[str] = None, rep: Optional[int] = None, entry: Optional[int] = None) -> dict:
    return {'mode': bench.mode, 'model': bench.model, 'p': p, 'n': n, 'b': b, 'method': method,
            'reference': reference, 'reps': bench.reps, 'rep': rep, 'entry': entry, 'statistic': statistic,
            'value': float(value)}


class _Cell:
    """One (p, n) grid cell: a chain source, a batch size and the estimators to compare."""

    def __init__(self, bench: BenchConfig, p: int, n: int):
        self.bench = bench
        self.p = p
        self.n = n
        self.source = _make_source(bench, p)
        self.b = batch_size(n, bench.schedule)
        # SV is timed through its defining formula
        self.estimators = {label: create_estimator(spec, fast_paths=spec.method != EstimatorMethod.SV)
                           for label, spec in bench.specs.items()}

    def replicate(self, rep: int):
        chain = self.source.generate(self.n, seed=self.bench.seed + rep)
        return {label: estimator.estimate(chain, self.b) for label, estimator in self.estimators.items()}

    def run(self, threads: int) -> List[Dict[str, object]]:
        reps = range(self.bench.reps)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                return list(executor.map(self.replicate, reps))
        return [self.replicate(rep) for rep in reps]


def _timing_rows(bench: BenchConfig, cell: _Cell) -> List[dict]:
    # warm-up pass is discarded
    cell.replicate(0)
    results = cell.run(threads=1)
    rows = []
    for label in bench.methods:
        times = [result[label].wall_time for result in results]
        mc_se = statistics.stdev(times) / np.sqrt(len(times))
        rows.append(_row(bench, cell.p, cell.n, cell.b, label, 'mean_wall_time', statistics.fmean(times)))
        rows.append(_row(bench, cell.p, cell.n, cell.b, label, 'median_wall_time', statistics.median(times)))
        rows.append(_row(bench, cell.p, cell.n, cell.b, label, 'mc_se_time', mc_se))
    return rows


def _diagonals(results: List[dict], label: str) -> np.ndarray:
    return np.array([np.diag(result[label].matrix) for result in results])


def _variance_ratio_rows(bench: BenchConfig, cell: _Cell) -> List[dict]:
    results = cell.run(bench.threads)
    rows = []
    for label in bench.methods:
        rows.append(_row(bench, cell.p, cell.n, cell.b, label, 'mean_diagonal', _diagonals(results, label).mean()))
    for numerator, denominator in VARIANCE_PAIRS:
        if numerator not in bench.methods or denominator not in bench.methods:
            continue
        top = _diagonals(results, numerator).var(axis=0, ddof=1)
        bottom = _diagonals(results, denominator).var(axis=0, ddof=1)
        rows.append(_row(bench, cell.p, cell.n, cell.b, numerator, 'variance_ratio',
                         float(np.mean(top / bottom)), reference=denominator))
    return rows


def _mse_pairs(methods: Sequence[str]) -> List[Tuple[str, str]]:
    pairs = []
    for label in methods:
        method, _, window = label.partition(':')
        if method == 'wbm' and f"sv:{window}" in methods:
            pairs.append((label, f"sv:{window}"))
    return pairs


def _mse_rows(bench: BenchConfig, cell: _Cell) -> List[dict]:
    truth = cell.source.true_sigma()
    results = cell.run(bench.threads)
    rows = []
    errors = {label: np.array([mse(result[label], truth) for result in results]) for label in bench.methods}
    for label, values in errors.items():
        rows.append(_row(bench, cell.p, cell.n, cell.b, label, 'mean_mse', values.mean()))
        rows.append(_row(bench, cell.p, cell.n, cell.b, label, 'mc_se_mse', values.std(ddof=1) / np.sqrt(values.size)))
    for numerator, denominator in _mse_pairs(bench.methods):
        rows.append(_row(bench, cell.p, cell.n, cell.b, numerator, 'mse_ratio',
                         errors[numerator].mean() / errors[denominator].mean(), reference=denominator))
    return rows


def _estimate_rows(bench: BenchConfig, cell: _Cell) -> List[dict]:
    results = cell.run(bench.threads)
    rows = []
    for rep, result in enumerate(results):
        for label in bench.methods:
            for entry, value in enumerate(np.diag(result[label].matrix)):
                rows.append(_row(bench, cell.p, cell.n, cell.b, label, 'estimate', value, rep=rep, entry=entry))
    return rows


_MODE_RUNNERS = {
    'timing': _timing_rows,
    'variance-ratio': _variance_ratio_rows,
    'mse': _mse_rows,
    'estimates': _estimate_rows,
}


def run_bench(bench: BenchConfig) -> BenchReport:
    """
    Run every (p, n) cell of the grid. A cell that runs out of memory or fails
    numerically is recorded in failed_cells and the run continues.
    """
    if bench.mode == 'timing' and bench.threads > 1:
        logger.warning("Timing mode runs replications serially; --threads is ignored")
    threads = 1 if bench.mode == 'timing' else bench.threads
    report = BenchReport(bench.mode, [], environment_fingerprint(threads))
    runner = _MODE_RUNNERS[bench.mode]

    for p in bench.ps:
        for n in bench.ns:
            logger.info(f"Bench {bench.mode}: {bench.model} p={p}, n={n}, {bench.reps} reps")
            try:
                cell = _Cell(bench, p, n)
                report.rows.extend(runner(bench, cell))
            except MemoryError:
                logger.error(f"Cell p={p}, n={n} ran out of memory")
                report.failed_cells.append({'p': p, 'n': n, 'error': 'MemoryError'})
            except CovKitError as e:
                logger.error(f"Cell p={p}, n={n} failed: {e}")
                report.failed_cells.append({'p': p, 'n': n, 'error': f"{e.error_type}: {e}"})
    return report
