import json
import shutil
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np
import pandas as pd

from spread_market.config import load_config
from spread_market.ingest import COVID_VARIABLES
from spread_market.logger import LoggingType, read_log_file
from spread_market.pipeline import (
    BaseStage,
    MissingUpstream,
    StageError,
    add_stage,
    exit_code_for,
    get_all_stages,
    run_pipeline,
)
from spread_market.pipeline.manifest import MANIFEST, RUN_LOG
from spread_market.synthetic import SYNTHETIC_FILES, write_synthetic_bundle

STAGES = ["ingest", "network", "motifs", "transform", "correlate", "granger", "forecast", "egarch"]
#: 8 Covid totals, 12 spread variables and 3 search queries
N_COVARIATES = 23
GROUP_SIZES = {"covid": 8, "spread": 12, "search": 3}
EXPECTED_ARTIFACTS = {
    "network_features.csv",
    "motifs.csv",
    "series.csv",
    "correlations.csv",
    "correlation_summary.csv",
    "causality.csv",
    "causality_layout.csv",
    "forecast.csv",
    "egarch.csv",
    "egarch_model0.csv",
    "egarch_modelX.csv",
}
EXPECTED_ARTIFACTS |= {f"predictions_h{h}.csv" for h in range(1, 7)}
EXPECTED_ARTIFACTS |= {f"correlations_{g}.csv" for g in GROUP_SIZES} | {f"correlations_{g}_vol.csv" for g in GROUP_SIZES}
EXPECTED_ARTIFACTS |= {f"causality_{g}.csv" for g in GROUP_SIZES} | {f"causality_layout_{g}.csv" for g in GROUP_SIZES}


class PipelineTestCase(TestCase):
    """Writes one synthetic bundle and runs every stage on it once."""

    @classmethod
    def setUpClass(cls) -> None:
        cls._tmp = tempfile.TemporaryDirectory()
        cls.folder = Path(cls._tmp.name)
        cls.config_file = write_synthetic_bundle(cls.folder / "bundle", seed=0)
        cls.config = cls.load(output_dir=cls.folder / "first")
        cls.manifest = run_pipeline(cls.config)

    @classmethod
    def tearDownClass(cls) -> None:
        cls._tmp.cleanup()

    @classmethod
    def load(cls, **overrides):
        return load_config(cls.config_file, overrides)

    def output(self, name: str) -> Path:
        return self.config.output_dir / name


class TestRegistry(TestCase):
    def test_order(self):
        self.assertListEqual(STAGES, list(get_all_stages()))

    def test_duplicate_name(self):
        class Again(BaseStage):
            name = "network"

            def run(self):
                return {}

        with self.assertRaises(KeyError):
            add_stage(Again)

    def test_exit_codes(self):
        self.assertEqual(3, exit_code_for(MissingUpstream("motifs", Path("network_features.csv"))))
        self.assertEqual(4, exit_code_for(ArithmeticError("overflow")))


class TestFullRun(PipelineTestCase):
    def test_stages_completed(self):
        self.assertListEqual(STAGES, [s.name for s in self.manifest.stages])
        self.assertTrue(all(s.status == "COMPLETED" for s in self.manifest.stages))
        self.assertEqual(0, self.manifest.exit_code)

    def test_artifacts(self):
        artifacts = set(self.manifest.artifacts)
        self.assertTrue(EXPECTED_ARTIFACTS <= artifacts)
        self.assertTrue(any(a.startswith("graphs/") and a.endswith(".nodes") for a in artifacts))
        self.assertNotIn(MANIFEST, artifacts)
        self.assertNotIn(RUN_LOG, artifacts)

        manifest = json.loads(self.output(MANIFEST).read_text())
        self.assertEqual(self.manifest.artifacts, manifest["artifacts"])
        self.assertSetEqual(set(SYNTHETIC_FILES), set(manifest["inputs"]))
        self.assertEqual(0, manifest["config"]["seed"])

    def test_row_counts(self):
        rows = self.manifest.rows
        self.assertEqual(rows["network_features.csv"], rows["motifs.csv"])
        self.assertEqual(N_COVARIATES * 8 * 2, rows["correlations.csv"])
        self.assertEqual(4 * 2 * 8, rows["correlation_summary.csv"])
        self.assertEqual(N_COVARIATES * 7 * 2, rows["causality.csv"])
        self.assertEqual(N_COVARIATES, rows["causality_layout.csv"])
        for group, size in GROUP_SIZES.items():
            self.assertEqual(size * 8, rows[f"correlations_{group}.csv"], group)
            self.assertEqual(size * 8, rows[f"correlations_{group}_vol.csv"], group)
            self.assertEqual(size * 7 * 2, rows[f"causality_{group}.csv"], group)
            self.assertEqual(size, rows[f"causality_layout_{group}.csv"], group)
        self.assertEqual(5 * 6, rows["forecast.csv"])
        self.assertEqual(5 + 8 + 3, rows["egarch.csv"])

    def test_tables(self):
        series = pd.read_csv(self.output("series.csv"))
        self.assertListEqual(["date", "price", "AP", "ret", "Vol"], list(series.columns[:5]))
        self.assertListEqual(list(COVID_VARIABLES), list(series.columns[5 : 5 + len(COVID_VARIABLES)]))
        self.assertEqual(N_COVARIATES + 5, len(series.columns))
        self.assertTrue(series["AP"].notna().all())

        forecast = pd.read_csv(self.output("forecast.csv"))
        self.assertListEqual(["model", "horizon", "rmse", "delta"], list(forecast.columns))
        self.assertTrue((forecast.loc[forecast["model"] == "P0", "delta"] == 0.0).all())

        headers = {
            "correlations.csv": "variable,lag,target,rho,p",
            "correlation_summary.csv": "group,target,lag,n,min,q1,median,q3,max",
            "causality.csv": "variable,lag,target,F,p,flag",
            "causality_layout.csv": "variable,1,2,3,4,5,6,7",
            "correlations_covid.csv": "variable,lag,rho,p",
            "correlations_spread_vol.csv": "variable,lag,rho,p",
            "causality_search.csv": "variable,lag,target,F,p,flag",
            "causality_layout_spread.csv": "variable,1,2,3,4,5,6,7",
            "forecast.csv": "model,horizon,rmse,delta",
            "predictions_h1.csv": "date,observed,predicted,model",
            "egarch.csv": "parameter,model0_coef,model0_t,modelX_coef,modelX_t",
            "egarch_model0.csv": "date,ret,sigma",
            "network_features.csv": "date,V,E,GC",
            "motifs.csv": "date,V,E,GC,T1,T2,M1,M2,M3,M4,M5,M6,TotM",
        }
        for name, header in headers.items():
            self.assertEqual(header, self.output(name).read_text().splitlines()[0], name)

        causality = pd.read_csv(self.output("causality.csv"))
        self.assertSetEqual({"AP", "Vol"}, set(causality["target"]))

        correlations = pd.read_csv(self.output("correlations.csv"))
        self.assertSetEqual({"AP", "Vol"}, set(correlations["target"]))
        covid = pd.read_csv(self.output("correlations_covid.csv"))
        self.assertListEqual(list(COVID_VARIABLES), list(dict.fromkeys(covid["variable"])))
        search_vol = pd.read_csv(self.output("correlations_search_vol.csv"))
        expected = correlations[(correlations["target"] == "Vol") & correlations["variable"].isin(search_vol["variable"])]
        np.testing.assert_allclose(expected["rho"].to_numpy(), search_vol["rho"].to_numpy())

        motifs = pd.read_csv(self.output("motifs.csv"))
        features = pd.read_csv(self.output("network_features.csv"))
        self.assertListEqual(features["E"].tolist(), motifs["E"].tolist())

    def test_network_not_saturated(self):
        features = pd.read_csv(self.output("network_features.csv"))
        late = features[features["date"] >= self.config.split_date.isoformat()]
        self.assertGreater(late["V"].nunique(), 1)
        self.assertGreater(late["E"].nunique(), 1)

        series = pd.read_csv(self.output("series.csv"))
        after = series[series["date"] >= self.config.split_date.isoformat()]
        for name in ("V", "E", "GC", "TotM"):
            self.assertTrue(after[name].notna().any(), name)

        forecast = pd.read_csv(self.output("forecast.csv"))
        self.assertListEqual(["P0", "P1", "P2", "P3", "P4"], list(dict.fromkeys(forecast["model"])))
        self.assertTrue(forecast["rmse"].notna().all())

    def test_run_log(self):
        records = read_log_file(self.output(RUN_LOG))
        stage_records = [r for r in records if r["type"] == LoggingType.STAGE.name]
        self.assertEqual(2 * len(STAGES), len(stage_records))
        self.assertEqual("COMPLETED", stage_records[-1]["log_data"]["status"])

    def test_rerun_is_identical(self):
        config = self.load(output_dir=self.folder / "second")
        manifest = run_pipeline(config)
        self.assertDictEqual(self.manifest.artifacts, manifest.artifacts)


class TestStageSubsets(PipelineTestCase):
    def test_motifs_from_dumps(self):
        config = self.load(output_dir=self.folder / "split")
        run_pipeline(config, ["network"])
        manifest = run_pipeline(config, ["motifs"])
        self.assertListEqual(["motifs"], [s.name for s in manifest.stages])
        self.assertEqual(self.manifest.artifacts["motifs.csv"], manifest.artifacts["motifs.csv"])

    def test_missing_upstream(self):
        config = self.load(output_dir=self.folder / "empty")
        with self.assertRaises(StageError) as context:
            run_pipeline(config, ["granger"])
        self.assertEqual(3, context.exception.exit_code)
        self.assertIn("stage granger failed", str(context.exception))
        self.assertIn("motifs.csv", str(context.exception))
        manifest = json.loads((config.output_dir / MANIFEST).read_text())
        self.assertEqual(3, manifest["exit_code"])
        self.assertEqual("FAILED", manifest["stages"][0]["status"])

    def test_max_lag_override(self):
        config = self.load(output_dir=self.folder / "lag3", max_lag=3)
        shutil.copy(self.output("motifs.csv"), config.output_dir / "motifs.csv")
        manifest = run_pipeline(config, ["granger", "correlate"])
        self.assertListEqual(["correlate", "granger"], [s.name for s in manifest.stages])
        self.assertEqual(N_COVARIATES * 3 * 2, manifest.rows["causality.csv"])
        self.assertEqual(N_COVARIATES * 4 * 2, manifest.rows["correlations.csv"])
        self.assertEqual(GROUP_SIZES["spread"] * 3 * 2, manifest.rows["causality_spread.csv"])

    def test_forecast_models(self):
        config = self.load(output_dir=self.folder / "models", models="P0,P3", horizons="1,2")
        shutil.copy(self.output("motifs.csv"), config.output_dir / "motifs.csv")
        run_pipeline(config, ["forecast"])
        forecast = pd.read_csv(config.output_dir / "forecast.csv")
        self.assertListEqual(["P0", "P3", "P0", "P3"], forecast["model"].tolist())
        self.assertListEqual([1, 1, 2, 2], forecast["horizon"].tolist())

    def test_unknown_stage(self):
        with self.assertRaises(KeyError):
            run_pipeline(self.config, ["plot"])


class TestBadInputs(TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.folder = Path(self._tmp.name)
        self.config_file = write_synthetic_bundle(self.folder, seed=1)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def test_missing_geo(self):
        (self.folder / SYNTHETIC_FILES["geo"]).unlink()
        config = load_config(self.config_file)
        with self.assertRaises(StageError) as context:
            run_pipeline(config)
        self.assertEqual(3, context.exception.exit_code)
        self.assertTrue(str(context.exception).startswith("stage ingest failed"))

    def test_malformed_cases(self):
        path = self.folder / SYNTHETIC_FILES["cases"]
        lines = path.read_text().splitlines()
        lines[5] = lines[5].replace("2020-", "20-", 1)
        path.write_text("\n".join(lines) + "\n")
        config = load_config(self.config_file)
        with self.assertRaises(StageError) as context:
            run_pipeline(config, ["network"])
        self.assertEqual(3, context.exception.exit_code)
        self.assertIn("stage ingest failed", str(context.exception))
        self.assertEqual(6, context.exception.__cause__.line)
        self.assertIn("line 6", str(context.exception))
