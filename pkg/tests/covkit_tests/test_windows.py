import unittest

import numpy as np

from covkit.errors import WindowConfigError
from covkit.windows import (BARTLETT, FLAT_TOP, TRUNCATION, TUKEY_HANNING, LagWindowSpec, WindowKind,
                            check_conditions, delta1, delta2, delta2_vector, effective_b, parse_window,
                            window_name, window_weight)

ALL_WINDOWS = [
    BARTLETT,
    TUKEY_HANNING,
    FLAT_TOP,
    TRUNCATION,
    LagWindowSpec(WindowKind.PARZEN, q=1),
    LagWindowSpec(WindowKind.PARZEN, q=2),
    LagWindowSpec(WindowKind.PARZEN, q=3),
    LagWindowSpec(WindowKind.SCALED_BARTLETT, eta=2.0),
]

CONSISTENT_WINDOWS = [
    BARTLETT,
    TUKEY_HANNING,
    FLAT_TOP,
    LagWindowSpec(WindowKind.PARZEN, q=1),
    LagWindowSpec(WindowKind.PARZEN, q=2),
    LagWindowSpec(WindowKind.PARZEN, q=3),
]


class TestWindowWeight(unittest.TestCase):
    def test_known_values(self):
        """Test window weights at hand-computed points."""
        self.assertEqual(window_weight(BARTLETT, 0, 10), 1.0)
        self.assertAlmostEqual(window_weight(BARTLETT, 5, 10), 0.5)
        self.assertEqual(window_weight(FLAT_TOP, 5, 10), 1.0)
        self.assertAlmostEqual(window_weight(FLAT_TOP, 8, 10), 0.4)
        self.assertAlmostEqual(window_weight(TUKEY_HANNING, 5, 10), 0.5)
        self.assertEqual(window_weight(TRUNCATION, 9, 10), 1.0)
        self.assertAlmostEqual(window_weight(LagWindowSpec(WindowKind.PARZEN, q=2), 5, 10), 0.75)
        self.assertAlmostEqual(window_weight(LagWindowSpec(WindowKind.SCALED_BARTLETT, eta=2.0), 5, 10), 0.0)

    def test_window_axioms(self):
        """Test w(0) = 1, evenness, |w| <= 1 and compact support for every family."""
        rng = np.random.default_rng(7)
        for spec in ALL_WINDOWS:
            for _ in range(50):
                b = int(rng.integers(2, 300))
                k = int(rng.integers(-2 * b, 2 * b))
                with self.subTest(window=window_name(spec), k=k, b=b):
                    self.assertEqual(window_weight(spec, 0, b), 1.0)
                    self.assertEqual(window_weight(spec, k, b), window_weight(spec, -k, b))
                    self.assertLessEqual(abs(window_weight(spec, k, b)), 1.0)
                    if abs(k) >= effective_b(spec, b):
                        self.assertEqual(window_weight(spec, k, b), 0.0)

    def test_flat_top_rounds_b_down_to_even(self):
        """Test that flat-top uses an even truncation point."""
        self.assertEqual(effective_b(FLAT_TOP, 11), 10)
        self.assertEqual(effective_b(FLAT_TOP, 3), 2)
        self.assertEqual(effective_b(BARTLETT, 11), 11)
        self.assertEqual(window_weight(FLAT_TOP, 10, 11), 0.0)

    def test_invalid_truncation_point(self):
        """Test that b < 1 is rejected."""
        with self.assertRaises(WindowConfigError):
            window_weight(BARTLETT, 1, 0)


class TestDifferences(unittest.TestCase):
    def test_bartlett_second_difference(self):
        """Test that Bartlett Δ₂ vanishes inside the support and is 1/b at b."""
        self.assertLess(abs(delta2(BARTLETT, 3, 10)), 1e-15)
        self.assertAlmostEqual(delta2(BARTLETT, 10, 10), 0.1, places=15)

    def test_flat_top_second_difference(self):
        """Test the two nonzero flat-top Δ₂ values."""
        self.assertAlmostEqual(delta2(FLAT_TOP, 5, 10), -0.2, places=14)
        self.assertAlmostEqual(delta2(FLAT_TOP, 10, 10), 0.2, places=14)

        d2 = delta2_vector(FLAT_TOP, 64)
        nonzero = np.flatnonzero(np.abs(d2) > 1e-12) + 1
        self.assertEqual(nonzero.tolist(), [32, 64])

    def test_truncation_second_difference(self):
        """Test that simple truncation has Δ₂w(b) = 1."""
        self.assertEqual(delta2(TRUNCATION, 10, 10), 1.0)
        self.assertEqual(delta2(TRUNCATION, 9, 10), -1.0)

    def test_delta2_matches_definition(self):
        """Test that delta2 and delta2_vector agree with w(k-1) - 2w(k) + w(k+1) exactly."""
        for spec in ALL_WINDOWS:
            for b in (7, 16, 33):
                vector = delta2_vector(spec, b)
                b_used = effective_b(spec, b)
                for k in range(1, b_used + 1):
                    expected = (window_weight(spec, k - 1, b_used) - 2.0 * window_weight(spec, k, b_used)
                                + window_weight(spec, k + 1, b_used))
                    self.assertEqual(delta2(spec, k, b_used), expected)
                    self.assertEqual(vector[k - 1], expected)

    def test_delta1(self):
        """Test the first difference."""
        self.assertAlmostEqual(delta1(BARTLETT, 1, 4), 0.25)
        self.assertEqual(delta1(FLAT_TOP, 2, 8), 0.0)


class TestParseWindow(unittest.TestCase):
    def test_parse_names(self):
        """Test parsing each supported family."""
        self.assertEqual(parse_window("bartlett"), BARTLETT)
        self.assertEqual(parse_window(" Tukey-Hanning "), TUKEY_HANNING)
        self.assertEqual(parse_window("flat-top"), FLAT_TOP)
        self.assertEqual(parse_window("truncation"), TRUNCATION)
        self.assertEqual(parse_window("parzen:3"), LagWindowSpec(WindowKind.PARZEN, q=3))
        self.assertEqual(parse_window("scaled-bartlett:2"), LagWindowSpec(WindowKind.SCALED_BARTLETT, eta=2.0))

    def test_window_name_round_trip(self):
        """Test that window_name gives back a parseable name."""
        for spec in ALL_WINDOWS:
            self.assertEqual(parse_window(window_name(spec)), spec)

    def test_unknown_window_lists_valid_names(self):
        """Test that an unknown window name reports the valid names."""
        with self.assertRaises(WindowConfigError) as context:
            parse_window("hamming")
        self.assertIn("tukey-hanning", str(context.exception))
        self.assertEqual(context.exception.exit_code, 2)

    def test_invalid_parameters(self):
        """Test missing or malformed window parameters."""
        for name in ("parzen", "parzen:x", "parzen:0", "scaled-bartlett", "scaled-bartlett:1", "bartlett:2", ""):
            with self.subTest(name=name):
                with self.assertRaises(WindowConfigError):
                    parse_window(name)

    def test_spec_validation(self):
        """Test LagWindowSpec parameter validation."""
        with self.assertRaises(WindowConfigError):
            LagWindowSpec(WindowKind.PARZEN)
        with self.assertRaises(WindowConfigError):
            LagWindowSpec(WindowKind.SCALED_BARTLETT)
        with self.assertRaises(WindowConfigError):
            LagWindowSpec(WindowKind.SCALED_BARTLETT, eta=1.0)


class TestCheckConditions(unittest.TestCase):
    def test_bartlett_sum_is_one(self):
        """Test Σ k·Δ₂w(k) = 1 for Bartlett at b = 100."""
        report = check_conditions(BARTLETT, 100)
        self.assertAlmostEqual(report.sum_k_delta2, 1.0, places=12)
        self.assertTrue(report.cond1_holds)
        self.assertTrue(report.decay_holds)
        self.assertTrue(report.passes)

    def test_tukey_hanning_sum_is_one(self):
        """Test Σ k·Δ₂w(k) = 1 for Tukey-Hanning at b = 64."""
        report = check_conditions(TUKEY_HANNING, 64)
        self.assertLess(abs(report.sum_k_delta2 - 1.0), 1e-10)
        self.assertTrue(report.passes)

    def test_flat_top_abs_sum_decays(self):
        """Test that flat-top Σ|Δ₂w(k)| = 4/b and halves with b."""
        report = check_conditions(FLAT_TOP, 16)
        self.assertAlmostEqual(report.abs_sum_delta2, 0.25, places=14)
        self.assertEqual(report.abs_sum_trend[0][0], 16)
        self.assertEqual(report.abs_sum_trend[1][0], 32)
        self.assertAlmostEqual(report.abs_sum_trend[1][1], 0.125, places=14)
        self.assertTrue(report.passes)

    def test_consistent_windows_over_grid(self):
        """Test Σ k·Δ₂w(k) = 1 within 1e-9 for b = 4..4096."""
        for spec in CONSISTENT_WINDOWS:
            for exponent in range(2, 13):
                b = 2 ** exponent
                with self.subTest(window=window_name(spec), b=b):
                    d2 = delta2_vector(spec, b)
                    total = float(np.arange(1, d2.size + 1) @ d2)
                    self.assertLess(abs(total - 1.0), 1e-9)

    def test_truncation_fails(self):
        """Test that simple truncation is flagged as failing."""
        report = check_conditions(TRUNCATION, 32)
        self.assertAlmostEqual(report.abs_sum_delta2, 2.0)
        self.assertFalse(report.decay_holds)
        self.assertFalse(report.passes)
        for _, abs_sum in report.abs_sum_trend:
            self.assertAlmostEqual(abs_sum, 2.0)

    def test_scaled_bartlett_fails(self):
        """Test that scaled Bartlett with eta = 2 does not decay."""
        report = check_conditions(LagWindowSpec(WindowKind.SCALED_BARTLETT, eta=2.0), 32)
        self.assertTrue(report.cond1_holds)
        self.assertFalse(report.decay_holds)
        self.assertFalse(report.passes)
        self.assertGreater(report.abs_sum_trend[-1][1], 1.9)

    def test_invalid_arguments(self):
        """Test b < 2 and non-positive tolerance."""
        with self.assertRaises(WindowConfigError):
            check_conditions(BARTLETT, 1)
        with self.assertRaises(WindowConfigError):
            check_conditions(BARTLETT, 10, tol=0.0)

    def test_report_to_dict(self):
        """Test the JSON form of a condition report."""
        result = check_conditions(FLAT_TOP, 9).to_dict()
        self.assertEqual(result['window'], 'flat-top')
        self.assertEqual(result['b_used'], 8)
        self.assertTrue(result['passes'])
        self.assertEqual(result['abs_sum_trend'][0][0], 8)
        self.assertEqual(set(result), {'window', 'b_used', 'sum_k_delta2', 'abs_sum_delta2', 'cond1_holds',
                                       'tolerance', 'abs_sum_trend', 'decay_holds', 'passes'})


if __name__ == '__main__':
    unittest.main()
