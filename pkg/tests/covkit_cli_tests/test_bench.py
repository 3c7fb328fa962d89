import io
import unittest
from unittest.mock import patch

import pytest

from covkit.errors import InsufficientBatchesError, WindowConfigError
from covkit.estimators import BatchSchedule, EstimatorMethod
from covkit.windows import FLAT_TOP, LagWindowSpec, WindowKind
from covkit_cli.bench import CSV_COLUMNS, DEFAULT_METHODS, BenchConfig, _Cell as Cell, parse_method_label, run_bench


class TestParseMethodLabel(unittest.TestCase):
    def setUp(self):
        self.schedule = BatchSchedule.fixed(10)

    def test_labels(self):
        """Test method and window parsing."""
        spec = parse_method_label('bm', self.schedule)
        self.assertEqual(spec.method, EstimatorMethod.BM)
        self.assertIsNone(spec.window)
        spec = parse_method_label('WBM:flat-top', self.schedule)
        self.assertEqual((spec.method, spec.window), (EstimatorMethod.WBM, FLAT_TOP))
        spec = parse_method_label('sv:parzen:2', self.schedule)
        self.assertEqual(spec.window, LagWindowSpec(WindowKind.PARZEN, q=2))
        self.assertIs(spec.schedule, self.schedule)

    def test_invalid_labels(self):
        """Test unknown methods and windows."""
        with self.assertRaises(ValueError):
            parse_method_label('qbm', self.schedule)
        with self.assertRaises(WindowConfigError):
            parse_method_label('sv:hamming', self.schedule)


class TestBenchConfig(unittest.TestCase):
    def test_defaults(self):
        """Test that default methods follow the mode."""
        bench = BenchConfig(mode='mse')
        self.assertEqual(bench.methods, DEFAULT_METHODS['mse'])
        self.assertEqual(set(bench.specs), set(DEFAULT_METHODS['mse']))

    def test_ar1_is_univariate(self):
        """Test that AR(1) benches ignore the dimension grid."""
        self.assertEqual(BenchConfig(model='ar1', ps=(5, 10)).ps, (1,))

    def test_invalid(self):
        """Test rejected modes, models and replication counts."""
        with self.assertRaises(ValueError):
            BenchConfig(mode='profile')
        with self.assertRaises(ValueError):
            BenchConfig(model='garch')
        with self.assertRaises(ValueError):
            BenchConfig(reps=2)


class TestRunBench(unittest.TestCase):
    def test_timing(self):
        """Test timing rows and that timing never uses replication threads."""
        bench = BenchConfig(mode='timing', model='ar1', ns=(200,), reps=3, methods=['bm', 'wbm:flat-top'],
                            schedule=BatchSchedule.fixed(10), threads=2)
        report = run_bench(bench)
        self.assertEqual(len(report.rows), 6)
        self.assertEqual({row['statistic'] for row in report.rows},
                         {'mean_wall_time', 'median_wall_time', 'mc_se_time'})
        self.assertGreaterEqual(report.value('median_wall_time', 'bm'), 0.0)
        self.assertEqual(report.environment['replication_threads'], 1)
        self.assertTrue(report.environment['timed_kernels_single_threaded'])
        self.assertEqual(report.failed_cells, [])

    def test_variance_ratio_is_deterministic(self):
        """Test that paired-seed ratios repeat exactly and ignore the thread count."""
        methods = ['wbm:flat-top', 'sv:flat-top']
        serial = run_bench(BenchConfig(mode='variance-ratio', model='ar1', ns=(1000,), reps=5, seed=3,
                                       methods=methods))
        threaded = run_bench(BenchConfig(mode='variance-ratio', model='ar1', ns=(1000,), reps=5, seed=3,
                                         methods=methods, threads=3))
        ratio = serial.value('variance_ratio', 'wbm:flat-top', reference='sv:flat-top')
        self.assertGreater(ratio, 0.0)
        self.assertEqual(ratio, threaded.value('variance_ratio', 'wbm:flat-top', reference='sv:flat-top'))
        self.assertEqual(len(serial.rows), 3)

    def test_mse_grid(self):
        """Test MSE rows over a VAR(1) grid."""
        bench = BenchConfig(mode='mse', model='var1', ps=(2,), ns=(500, 1000), reps=3, seed=1,
                            methods=['wbm:bartlett', 'sv:bartlett'])
        report = run_bench(bench)
        for n in (500, 1000):
            with self.subTest(n=n):
                self.assertGreater(report.value('mean_mse', 'sv:bartlett', n=n, p=2), 0.0)
                self.assertGreater(report.value('mse_ratio', 'wbm:bartlett', reference='sv:bartlett', n=n), 0.0)
        with self.assertRaises(KeyError):
            report.value('mse_ratio', 'sv:bartlett')

    def test_estimates_rows(self):
        """Test one row per replication, method and diagonal entry."""
        bench = BenchConfig(mode='estimates', model='var1', ps=(2,), ns=(400,), reps=3, methods=['bm', 'obm'])
        report = run_bench(bench)
        self.assertEqual(len(report.rows), 3 * 2 * 2)
        self.assertEqual({(row['rep'], row['entry']) for row in report.rows},
                         {(rep, entry) for rep in range(3) for entry in range(2)})

    def test_failed_cell_continues(self):
        """Test that a failing cell is recorded and the grid continues."""
        def make_cell(bench, p, n):
            if n == 4:
                raise InsufficientBatchesError("Need at least 2 closed batches, have 1")
            return Cell(bench, p, n)

        bench = BenchConfig(mode='mse', model='ar1', ns=(4, 400), reps=3, methods=['bm'])
        with patch('covkit_cli.bench._Cell', side_effect=make_cell):
            report = run_bench(bench)
        self.assertEqual(len(report.failed_cells), 1)
        self.assertEqual(report.failed_cells[0]['n'], 4)
        self.assertTrue(report.failed_cells[0]['error'].startswith('InsufficientBatchesError'))
        self.assertGreater(report.value('mean_mse', 'bm', n=400), 0.0)

    @patch('covkit_cli.bench._Cell', side_effect=MemoryError)
    def test_out_of_memory(self, mock_cell):
        """Test that MemoryError is reported per cell."""
        report = run_bench(BenchConfig(mode='timing', model='var1', ps=(2, 3), ns=(100,), reps=3))
        self.assertEqual(report.failed_cells, [{'p': 2, 'n': 100, 'error': 'MemoryError'},
                                               {'p': 3, 'n': 100, 'error': 'MemoryError'}])
        self.assertEqual(report.rows, [])

    def test_to_csv(self):
        """Test the tidy CSV layout."""
        report = run_bench(BenchConfig(mode='mse', model='ar1', ns=(300,), reps=3, methods=['bm']))
        out = io.StringIO()
        report.to_csv(out)
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0].split(','), CSV_COLUMNS)
        self.assertEqual(len(lines), 1 + len(report.rows))
        first = dict(zip(CSV_COLUMNS, lines[1].split(',')))
        self.assertEqual(first['mode'], 'mse')
        self.assertEqual(first['reference'], '')
        self.assertEqual(report.to_dict()['rows'], report.rows)


@pytest.mark.acceptance
class TestBenchAcceptance(unittest.TestCase):
    def test_variance_ratios(self):
        """Test the paired-seed variance ratios on AR(1) with phi = 0.5."""
        report = run_bench(BenchConfig(mode='variance-ratio', model='ar1', phi=0.5, ns=(100000,), reps=300,
                                       threads=4))
        cases = [
            ('wbm:flat-top', 'sv:flat-top', 1.65, 2.10),
            ('bm', 'sv:bartlett', 1.30, 1.70),
            ('sv:flat-top', 'sv:bartlett', 1.75, 2.25),
        ]
        for numerator, denominator, low, high in cases:
            with self.subTest(numerator=numerator, denominator=denominator):
                ratio = report.value('variance_ratio', numerator, reference=denominator)
                self.assertGreaterEqual(ratio, low)
                self.assertLessEqual(ratio, high)

    def test_speed_ordering(self):
        """Test that flat-top WBM is much faster than flat-top SV and OBM."""
        report = run_bench(BenchConfig(mode='timing', model='var1', ps=(10,), ns=(100000,), reps=10,
                                       methods=['wbm:flat-top', 'sv:flat-top', 'obm']))
        fast = report.value('median_wall_time', 'wbm:flat-top')
        self.assertGreaterEqual(report.value('median_wall_time', 'sv:flat-top'), 10.0 * fast)
        self.assertGreaterEqual(report.value('median_wall_time', 'obm'), 5.0 * fast)

    def test_mse_ratios(self):
        """Test that WBM inflates MSE over SV by less than 2.5 for each window."""
        for scale in (0.2, 0.6):
            report = run_bench(BenchConfig(mode='mse', model='var1', ps=(10,), ns=(100000,), reps=100,
                                           scale=scale, threads=4))
            for window in ('bartlett', 'tukey-hanning', 'flat-top'):
                with self.subTest(scale=scale, window=window):
                    ratio = report.value('mse_ratio', f'wbm:{window}', reference=f'sv:{window}')
                    self.assertGreater(ratio, 1.0)
                    self.assertLess(ratio, 2.5)

    def test_mse_decreases_with_n(self):
        """Test consistency: every estimator's MSE falls from n = 1e4 to 1e5."""
        bench = BenchConfig(mode='mse', model='var1', ps=(5,), ns=(10000, 100000), reps=50, threads=4)
        report = run_bench(bench)
        for label in bench.methods:
            with self.subTest(method=label):
                self.assertLess(report.value('mean_mse', label, n=100000), report.value('mean_mse', label, n=10000))


if __name__ == '__main__':
    unittest.main()
