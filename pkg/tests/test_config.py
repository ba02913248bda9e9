import os
import tempfile
from datetime import date
from pathlib import Path
from unittest import TestCase

from spread_market.config import CONFIG_ENV, ConfigError, RunConfig, config_path, load_config

MINIMAL = 'cases = "c.csv"\ngeo = "g.csv"\nprices = "p.csv"\ntrends = "t.csv"\nseed = 3\n'


class TestLoadConfig(TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.folder = Path(self._tmp.name)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def write(self, text: str, name: str = "config.toml") -> Path:
        path = self.folder / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_environment_config(self):
        self.assertEqual(Path(os.environ[CONFIG_ENV]), config_path())
        config = load_config()
        self.assertEqual(0, config.seed)
        self.assertEqual(20, config.ap_window)
        self.assertTrue(config.cases.is_absolute())
        self.assertEqual("tests", config.cases.parent.parent.name)
        self.assertTrue(config.output_dir.is_dir())

    def test_defaults_and_relative_paths(self):
        config = load_config(self.write(MINIMAL))
        self.assertEqual(self.folder / "c.csv", config.cases)
        self.assertEqual(self.folder / "output", config.output_dir)
        self.assertEqual((5, 5, 100.0), (config.gamma, config.lambda_, config.delta))
        self.assertEqual((1, 2, 3, 4, 5, 6), config.horizons)
        self.assertEqual(date(2020, 3, 1), config.split_date)
        self.assertIsNone(config.covid_totals)
        self.assertListEqual(["cases", "geo", "prices", "trends"], list(config.input_paths))

    def test_overrides(self):
        path = self.write(MINIMAL + "gamma = 4\n")
        out = self.folder / "elsewhere"
        config = load_config(path, {"gamma": 9, "lambda": 7, "delta": None, "horizons": "3,1,1", "output_dir": out})
        self.assertEqual(9, config.gamma)
        self.assertEqual(7, config.lambda_)
        self.assertEqual(100.0, config.delta)
        self.assertEqual((1, 3), config.horizons)
        self.assertEqual(out, config.output_dir)
        self.assertTrue(out.is_dir())

    def test_invalid_values(self):
        for extra in (
            "gamma = 0\n",
            "delta = -1.0\n",
            'models = ["P0", "P7"]\n',
            "z_window = 1\n",
            'start_date = "2020-06-01"\n',
            'case_basis = "weekly"\n',
            "causality_alpha = 1.5\n",
            "horizons = []\n",
            "unknown_key = 1\n",
        ):
            with self.subTest(extra=extra), self.assertRaises(ConfigError):
                load_config(self.write(MINIMAL + extra))

    def test_seed_is_required(self):
        with self.assertRaises(ConfigError):
            load_config(self.write(MINIMAL.replace("seed = 3\n", "")))

    def test_nested_table(self):
        with self.assertRaises(ConfigError) as context:
            load_config(self.write(MINIMAL + "[network]\ngamma = 5\n"))
        self.assertIn("network", str(context.exception))

    def test_invalid_toml(self):
        with self.assertRaises(ConfigError):
            load_config(self.write("cases = \n"))

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError) as context:
            load_config(self.folder / "absent.toml")
        self.assertIn(CONFIG_ENV, str(context.exception))


class TestRunConfig(TestCase):
    def setUp(self) -> None:
        self.config = RunConfig(cases="c.csv", geo="g.csv", prices="p.csv", trends="t.csv", seed=1, models="P3,P0,P3")

    def test_immutable(self):
        with self.assertRaises(TypeError):
            self.config.gamma = 3

    def test_models_deduplicated(self):
        self.assertEqual(("P3", "P0"), self.config.models)

    def test_snapshot(self):
        snapshot = self.config.snapshot()
        self.assertEqual(5, snapshot["lambda"])
        self.assertEqual("c.csv", snapshot["cases"])
        self.assertEqual("2020-03-01", snapshot["split_date"])
        self.assertEqual(("P3", "P0"), snapshot["models"])
        with self.assertRaises(TypeError):
            snapshot["seed"] = 2
