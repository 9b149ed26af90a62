import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock
import sys

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from config import COMPARISON_LOSSES, SWEEP_LOSSES, WORKERS_ENV, StudyConfig, default_workers

REPO_CONFIG = Path(__file__).resolve().parents[2] / "config"


class ConfigTests(unittest.TestCase):
    def test_from_json_file(self):
        payload = {
            "sizes": [20],
            "censor_fractions": [0.2],
            "replications": 50,
            "master_seed": 3,
            "eta0_interval": [1, 300],
        }
        with tempfile.TemporaryDirectory() as td:
            fp = Path(td) / "cfg.json"
            fp.write_text(json.dumps(payload))
            cfg = StudyConfig.from_file(str(fp))
            self.assertEqual(cfg.sizes, [20])
            self.assertEqual(cfg.replications, 50)
            self.assertEqual(cfg.eta0_interval, (1.0, 300.0))
            self.assertEqual(cfg.comparison_losses, COMPARISON_LOSSES)

    def test_from_toml_study_table(self):
        with tempfile.TemporaryDirectory() as td:
            fp = Path(td) / "cfg.toml"
            fp.write_text('[study]\nsizes = [10]\ncensor_fractions = [0.1]\nmh_draws = 800\nmh_burn_in = 200\n')
            cfg = StudyConfig.from_file(str(fp))
            self.assertEqual(cfg.sizes, [10])
            self.assertEqual(cfg.mh_config(5).n_draws, 800)
            self.assertEqual(cfg.mh_config(5).seed, 5)

    def test_unknown_keys_are_reported(self):
        with tempfile.TemporaryDirectory() as td:
            fp = Path(td) / "cfg.json"
            fp.write_text(json.dumps({"sizes": [10], "years": [2024]}))
            with self.assertLogs("config", level="WARNING"):
                StudyConfig.from_file(str(fp))

    def test_unsupported_suffix(self):
        with tempfile.TemporaryDirectory() as td:
            fp = Path(td) / "cfg.yaml"
            fp.write_text("sizes: [10]")
            with self.assertRaises(ValueError):
                StudyConfig.from_file(str(fp))
        with self.assertRaises(FileNotFoundError):
            StudyConfig.from_file("does-not-exist.json")

    def test_invalid_values(self):
        cfg = StudyConfig(sizes=[1])
        with self.assertRaises(ValueError):
            cfg.validate()
        with self.assertRaises(ValueError):
            StudyConfig(losses=["gq:abc"]).validate()
        with self.assertRaises(ValueError):
            StudyConfig(eta1_interval=(5.0, 1.0)).validate()
        with self.assertRaises(ValueError):
            StudyConfig(sizes=[2], censor_fractions=[0.75]).validate()

    def test_cells_cover_the_grid(self):
        cells = StudyConfig().cells()
        self.assertEqual([(c.n, c.censor.percent) for c in cells],
                         [(10, 10), (20, 10), (30, 10), (10, 20), (20, 20), (30, 20)])
        self.assertEqual(cells[0].cell_name, "10_10")
        self.assertEqual(len(cells[0].losses), len(SWEEP_LOSSES))
        self.assertEqual(cells[0].prior.beta_l, 1.0)

    def test_overrides_skip_none(self):
        cfg = StudyConfig.smoke_test().with_overrides(replications=None, master_seed=9)
        self.assertEqual(cfg.replications, 6)
        self.assertEqual(cfg.master_seed, 9)

    def test_workers_from_environment(self):
        with mock.patch.dict(os.environ, {WORKERS_ENV: "3"}):
            self.assertEqual(default_workers(), 3)
            self.assertEqual(StudyConfig().workers, 3)
        with mock.patch.dict(os.environ, {WORKERS_ENV: "many"}):
            self.assertEqual(default_workers(), 1)

    def test_shipped_configs_load(self):
        full = StudyConfig.from_file(str(REPO_CONFIG / "study.toml"))
        self.assertEqual(full.sizes, [10, 20, 30])
        self.assertEqual(len(full.losses), 18)
        quick = StudyConfig.from_file(str(REPO_CONFIG / "study.json"))
        self.assertEqual(quick.output_dir, "output_quick")


if __name__ == "__main__":
    unittest.main()
