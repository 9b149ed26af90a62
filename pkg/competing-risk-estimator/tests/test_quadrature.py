import unittest
from pathlib import Path
import sys

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from bayes import LossSpec, MhConfig, PosteriorGrid, PriorSpec, estimate, mh_sample, quadrature_oracle, quadrature_reports
from bayes.quadrature import default_boxes, locate_mass
from censor import CensorScheme, apply
from mle import ConvergenceError
from model import CensoredSample, Event, ModelParams, Observation, sample_many

TRUTH = ModelParams(eta0=2.0, eta1=1.0, beta=2.0)
FIXTURE_PRIOR = PriorSpec(a1=2.0, b1=4.0, a2=4.0, b2=4.0, beta_l=1.0, beta_r=5.0)
COMPARISON = [LossSpec.gq(-2.0), LossSpec.entropy(-1.0), LossSpec.linex(-0.5)]
QUICK = dict(node_counts=(120, 160), rtol=1e-3)


def _fixture():
    return apply(sample_many(TRUTH, np.random.default_rng(2024), 10), CensorScheme(0.1))


class GridTests(unittest.TestCase):
    def test_posterior_mean_identity(self):
        grid = PosteriorGrid.build(_fixture(), FIXTURE_PRIOR, 60)
        gq = grid.report(LossSpec.gq(1.0))
        ent = grid.report(LossSpec.entropy(-1.0))
        for name in ("eta0", "eta1", "beta"):
            self.assertAlmostEqual(gq.estimate_of(name), ent.estimate_of(name), delta=1e-6 * gq.estimate_of(name))

    def test_boxes_cover_prior_and_data(self):
        s = _fixture()
        boxes = default_boxes(s, FIXTURE_PRIOR)
        self.assertEqual(boxes["beta"], (1.0, 5.0))
        self.assertLess(boxes["eta0"][0], np.log(s.times.min()))
        self.assertGreater(boxes["eta1"][1], np.log(s.times.max()))
        shrunk = locate_mass(s, FIXTURE_PRIOR)
        for name in ("eta0", "eta1"):
            self.assertGreaterEqual(shrunk[name][0], boxes[name][0])
            self.assertLessEqual(shrunk[name][1], boxes[name][1])

    def test_tight_prior_dominates_one_observation(self):
        prior = PriorSpec(a1=200.0, b1=400.0, a2=400.0, b2=400.0, beta_l=1.9, beta_r=2.1)
        report = quadrature_oracle(CensoredSample.uncensored([1.0]), prior, LossSpec.gq(1.0), **QUICK)
        self.assertAlmostEqual(report.estimate_of("eta0"), 2.0, delta=0.1)
        self.assertAlmostEqual(report.estimate_of("eta1"), 1.0, delta=0.05)
        self.assertAlmostEqual(report.estimate_of("beta"), 2.0, delta=0.1)

    def test_large_censored_time_raises_scale_estimate(self):
        s = _fixture()
        longer = s.appended(Observation(3.0 * float(s.times.max()), Event.CENSORED))
        before = quadrature_oracle(s, FIXTURE_PRIOR, LossSpec.gq(1.0), **QUICK)
        after = quadrature_oracle(longer, FIXTURE_PRIOR, LossSpec.gq(1.0), **QUICK)
        self.assertGreater(after.estimate_of("eta0"), before.estimate_of("eta0"))

    def test_refinement_failure_is_reported(self):
        with self.assertRaises(ConvergenceError):
            quadrature_oracle(_fixture(), FIXTURE_PRIOR, LossSpec.gq(1.0), node_counts=(6, 8), rtol=1e-14)
        with self.assertRaises(ValueError):
            quadrature_oracle(_fixture(), FIXTURE_PRIOR, LossSpec.gq(1.0), node_counts=(200,))

    def test_matches_mcmc(self):
        s = _fixture()
        oracle = quadrature_reports(s, FIXTURE_PRIOR, COMPARISON)
        draws = mh_sample(s, FIXTURE_PRIOR, MhConfig(seed=5), keep_chain=False)
        for loss, exact in zip(COMPARISON, oracle):
            sampled = estimate(draws, loss)
            for name in ("eta0", "eta1", "beta"):
                want = exact.estimate_of(name)
                self.assertAlmostEqual(sampled.estimate_of(name), want, delta=0.02 * want,
                                       msg=f"{loss.label} {name}")


if __name__ == "__main__":
    unittest.main()
