import tempfile
import unittest
from pathlib import Path

import pandas as pd
from click.testing import CliRunner

from spread_market.scripts.cli import cli
from spread_market.synthetic import SYNTHETIC_FILES, write_synthetic_bundle


class TestLaunch(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls._tmp = tempfile.TemporaryDirectory()
        cls.folder = Path(cls._tmp.name)
        cls.config_file = str(write_synthetic_bundle(cls.folder / "bundle", seed=2))
        cls.runner = CliRunner()
        cls.out = cls.folder / "out"
        cls.result = cls.runner.invoke(cli, ["run", "-c", cls.config_file, "--out", str(cls.out)])

    @classmethod
    def tearDownClass(cls) -> None:
        cls._tmp.cleanup()

    def invoke(self, *args):
        return self.runner.invoke(cli, list(args))

    def test_run(self):
        self.assertEqual(0, self.result.exit_code, self.result.output)
        self.assertIn("spread_market v", self.result.output)
        self.assertIn(f"Artifacts written to {self.out}", self.result.output)
        for name in ("motifs.csv", "causality.csv", "forecast.csv", "egarch.csv", "manifest.json"):
            self.assertTrue((self.out / name).is_file(), name)

    def test_granger_flag(self):
        out = self.folder / "granger"
        result = self.invoke("network", "-c", self.config_file, "--out", str(out))
        self.assertEqual(0, result.exit_code, result.output)
        result = self.invoke("motifs", "-c", self.config_file, "--out", str(out))
        self.assertEqual(0, result.exit_code, result.output)
        result = self.invoke("granger", "-c", self.config_file, "--out", str(out), "--max-lag", "2")
        self.assertEqual(0, result.exit_code, result.output)
        causality = pd.read_csv(out / "causality.csv")
        self.assertListEqual([1, 2], sorted(causality["lag"].unique()))

    def test_forecast_models(self):
        out = self.folder / "forecast"
        self.invoke("network", "-c", self.config_file, "--out", str(out))
        self.invoke("motifs", "-c", self.config_file, "--out", str(out))
        result = self.invoke("forecast", "-c", self.config_file, "--out", str(out), "--models", "P0,P3",
                             "--horizons", "1")
        self.assertEqual(0, result.exit_code, result.output)
        self.assertListEqual(["P0", "P3"], pd.read_csv(out / "forecast.csv")["model"].tolist())

        result = self.invoke("forecast", "-c", self.config_file, "--out", str(out), "--models", "P0,P9")
        self.assertEqual(2, result.exit_code)
        self.assertIn("config error", result.output)

    def test_missing_upstream(self):
        result = self.invoke("motifs", "-c", self.config_file, "--out", str(self.folder / "fresh"))
        self.assertEqual(3, result.exit_code)
        self.assertIn("stage motifs failed", result.output)

    def test_config_errors(self):
        result = self.invoke("run", "-c", self.config_file, "--gamma", "0")
        self.assertEqual(2, result.exit_code)
        self.assertIn("config error", result.output)
        result = self.invoke("run", "-c", str(self.folder / "absent.toml"))
        self.assertEqual(2, result.exit_code)


class TestInit(unittest.TestCase):
    def test_init_default(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(cli, ["init"])
            self.assertEqual(0, result.exit_code, result.output)
            self.assertTrue(Path("config.toml").is_file())
            result = runner.invoke(cli, ["init"])
            self.assertIsInstance(result.exception, FileExistsError)

    def test_init_synthetic_then_bad_geo(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(cli, ["init", "--synthetic", "--seed", "3"])
            self.assertEqual(0, result.exit_code, result.output)
            self.assertIn("Done", result.output)
            for name in SYNTHETIC_FILES.values():
                self.assertTrue(Path(name).is_file(), name)

            Path(SYNTHETIC_FILES["geo"]).unlink()
            result = runner.invoke(cli, ["run", "-c", "config.toml"])
            self.assertEqual(3, result.exit_code)
            self.assertIn("stage ingest failed", result.output)
