import importlib.util
import tempfile
import unittest
from pathlib import Path
import sys

import numpy as np
from hypothesis import given, settings, strategies as st

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from evaluation import ReplicationSet, curve_table, imse, pitman_probability, plot_curves, quadratic_error
from model import ModelParams

TRUTH = ModelParams(eta0=2.0, eta1=1.0, beta=2.0)


def _set(eta0_values, label=""):
    return ReplicationSet([ModelParams(eta0=v, eta1=1.0, beta=2.0) for v in eta0_values], TRUTH, label)


class PitmanTests(unittest.TestCase):
    def test_simple_counts(self):
        a = _set([2.1, 1.5, 2.0])
        b = _set([2.5, 1.9, 2.2])
        self.assertAlmostEqual(pitman_probability(a, b, "eta0"), 2 / 3)
        self.assertAlmostEqual(pitman_probability(b, a, "eta0"), 1 / 3)

    def test_ties_count_for_neither(self):
        a = _set([2.1, 1.9])
        self.assertEqual(pitman_probability(a, a, "eta0"), 0.0)
        self.assertEqual(pitman_probability(a, a, "eta1"), 0.0)

    def test_truth_dominates(self):
        exact = _set([2.0] * 5)
        noisy = _set([2.3, 1.2, 2.01, 1.99, 3.0])
        self.assertEqual(pitman_probability(exact, noisy, "eta0"), 1.0)

    def test_unpaired_sets_are_refused(self):
        with self.assertRaises(ValueError):
            pitman_probability(_set([2.0, 2.1]), _set([2.0]), "eta0")
        other = ReplicationSet([ModelParams(2.0, 1.0, 2.0)], ModelParams(3.0, 1.0, 2.0))
        with self.assertRaises(ValueError):
            pitman_probability(_set([2.0]), other, "eta0")
        with self.assertRaises(ValueError):
            pitman_probability(_set([2.0]), _set([2.0]), "gamma")

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(0.5, 4.0), st.floats(0.5, 4.0)), min_size=1, max_size=40))
    def test_complementary_sum(self, pairs):
        a = _set([p[0] for p in pairs])
        b = _set([p[1] for p in pairs])
        ties = np.mean([abs(p[0] - 2.0) == abs(p[1] - 2.0) for p in pairs])
        total = pitman_probability(a, b, "eta0") + pitman_probability(b, a, "eta0")
        self.assertAlmostEqual(total, 1.0 - ties, places=12)
        self.assertTrue(0.0 <= pitman_probability(a, b, "eta0") <= 1.0)


class ImseTests(unittest.TestCase):
    def test_symmetric_errors(self):
        self.assertAlmostEqual(imse(_set([1.0, 3.0]), "eta0"), 1.0, places=12)

    def test_quadratic_error_example(self):
        qe = quadratic_error(ModelParams(eta0=1.9985, eta1=1.0, beta=2.0), TRUTH)
        self.assertAlmostEqual(qe["eta0"], 2.25e-6, places=15)
        self.assertEqual(qe["eta1"], 0.0)

    def test_matches_mean_quadratic_error_and_streaming_sum(self):
        rng = np.random.default_rng(0)
        reps = ReplicationSet.from_array(
            np.column_stack([rng.gamma(8, 0.25, 500), rng.gamma(8, 0.125, 500), rng.uniform(1, 3, 500)]), TRUTH)
        for name in ("eta0", "eta1", "beta"):
            per_rep = np.mean([quadratic_error(e, TRUTH)[name] for e in reps.estimates])
            streaming = 0.0
            for k, e in enumerate(reps.estimates, start=1):
                streaming += ((getattr(e, name) - getattr(TRUTH, name)) ** 2 - streaming) / k
            self.assertAlmostEqual(imse(reps, name), per_rep, delta=1e-12)
            self.assertAlmostEqual(imse(reps, name), streaming, delta=1e-12)

    def test_permutation_invariant(self):
        values = [1.2, 2.7, 1.9, 2.05, 3.3]
        self.assertAlmostEqual(imse(_set(values), "eta0"), imse(_set(values[::-1]), "eta0"), places=12)

    def test_mean(self):
        self.assertAlmostEqual(_set([1.0, 3.0]).mean().eta0, 2.0)


class CurveTests(unittest.TestCase):
    def test_table_shape_and_values(self):
        grid = [0.0, 0.5, 1.0, 2.0]
        table = curve_table({"truth": TRUTH, "copy": TRUTH}, grid)
        self.assertEqual(list(table.columns),
                         ["t", "survival_truth", "hazard_truth", "survival_copy", "hazard_copy"])
        self.assertEqual(table["survival_truth"].iloc[0], 1.0)
        np.testing.assert_array_equal(table["survival_truth"], table["survival_copy"])
        self.assertTrue(np.all(np.diff(table["survival_truth"]) <= 0))
        self.assertAlmostEqual(table["hazard_truth"].iloc[2], 2.5)

    def test_default_grid(self):
        table = curve_table({"truth": TRUTH})
        self.assertEqual(len(table), 50)
        self.assertEqual(table["t"].iloc[0], 1.0)
        self.assertEqual(table["t"].iloc[-1], 50.0)

    def test_bad_grids(self):
        with self.assertRaises(ValueError):
            curve_table({"truth": TRUTH}, [])
        with self.assertRaises(ValueError):
            curve_table({"truth": TRUTH}, [2.0, 1.0])
        with self.assertRaises(ValueError):
            curve_table({}, [1.0])

    @unittest.skipIf(importlib.util.find_spec("matplotlib") is None, "matplotlib not installed")
    def test_plot_writes_svg(self):
        table = curve_table({"truth": TRUTH}, np.linspace(0.0, 3.0, 10))
        with tempfile.TemporaryDirectory() as td:
            path = plot_curves(table, Path(td) / "curves.svg")
            self.assertTrue(path.read_text().lstrip().startswith("<?xml"))


if __name__ == "__main__":
    unittest.main()
