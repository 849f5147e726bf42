import unittest
import sys
import os
import io
import json
import logging
import tempfile
from contextlib import redirect_stdout
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd

# Add parent directory to path to import modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import cli
from model import NORMAL, ModelParams, sr_minimum
from semiclassical import damped_critical_values


class CliCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)
        patcher = patch('cli.setup_logging')
        self.mock_logging = patcher.start()
        self.addCleanup(patcher.stop)

    def tearDown(self):
        self.tmp.cleanup()

    def run_cli(self, *argv):
        buffer = io.StringIO()
        with redirect_stdout(buffer):
            code = cli.main(list(argv) + ["--out", str(self.out)])
        return code, buffer.getvalue()

    def load(self, name):
        with open(self.out / name) as f:
            return json.load(f)


class TestConfig(unittest.TestCase):
    def test_preset_merges_over_defaults(self):
        config = cli.resolve_config("bare")
        self.assertEqual(config["model"]["g"], 0.46)
        self.assertEqual(config["output"]["prefix"], "bare")
        self.assertEqual(config["oracle"]["n_c"], 8)
        self.assertIsNone(config["model"]["n_atoms"])

    def test_figure_presets(self):
        for name, kind in (("fig2", "bare"), ("fig3", "adhoc")):
            with self.subTest(preset=name):
                config = cli.resolve_config(name)
                self.assertEqual(config["dissipator"]["kind"], kind)
                self.assertEqual(config["output"]["prefix"], name)
                self.assertEqual(config["model"], cli.resolve_config(kind)["model"])
                self.assertEqual(config["model"]["g"], 0.46)

    def test_overrides(self):
        config = cli.resolve_config("bare", overrides=["model.g=0.5", "dissipator.kind=adhoc",
                                                       "solver.t_end=10"], seed=7, out_dir="elsewhere")
        self.assertEqual(config["model"]["g"], 0.5)
        self.assertEqual(config["dissipator"]["kind"], "adhoc")
        self.assertEqual(config["solver"]["t_end"], 10)
        self.assertEqual(config["seed"], 7)
        self.assertEqual(config["output"]["dir"], "elsewhere")
        self.assertEqual(cli.resolve_config("bare")["model"]["g"], 0.46)

    def test_bad_inputs(self):
        with self.assertRaises(cli.ConfigError):
            cli.resolve_config("no-such-preset")
        with self.assertRaises(cli.ConfigError):
            cli.resolve_config(overrides=["nosuch.key=1"])
        with self.assertRaises(cli.ConfigError):
            cli.resolve_config(overrides=["model.g"])
        with self.assertRaises(cli.ConfigError):
            cli.resolve_config(overrides=["initial.sigma=-1"])
        with self.assertRaises(cli.ConfigError):
            cli.resolve_config(config_path="/nonexistent/edm.json")

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.json"
            path.write_text(json.dumps({"model": {"g": 0.7}, "extra": {}}))
            with self.assertRaises(cli.ConfigError):
                cli.resolve_config(config_path=str(path))
            path.write_text(json.dumps({"model": {"g": 0.7}}))
            self.assertEqual(cli.resolve_config("bare", config_path=str(path))["model"]["g"], 0.7)

    def test_repo_config_matches_defaults(self):
        with open(cli.ROOT_DIR / "edm_config.json") as f:
            repo_config = json.load(f)
        self.assertEqual(set(repo_config), set(cli.DEFAULT_CONFIG))
        self.assertEqual(repo_config["model"], cli.DEFAULT_CONFIG["model"])

    def test_initial_state_modes(self):
        config = cli.resolve_config("bare")
        params = cli.model_params(config)
        exact = cli.build_initial_state(cli.resolve_config("bare", overrides=["initial.mode=minimum"]),
                                        params, np.random.default_rng(0))
        np.testing.assert_array_equal(exact, sr_minimum(params).state.as_array())
        first = cli.build_initial_state(config, params, np.random.default_rng(3))
        second = cli.build_initial_state(config, params, np.random.default_rng(3))
        np.testing.assert_array_equal(first, second)
        self.assertLess(np.max(np.abs(first - exact)), 0.01)
        normal = cli.build_initial_state(config, params.with_changes(g=0.3), np.random.default_rng(0))
        self.assertAlmostEqual(normal[4], 1.0, delta=0.01)
        explicit = cli.resolve_config("bare", overrides=["initial.mode=explicit",
                                                         "initial.state=[0, 0, 0, 0.1]"])
        with self.assertRaises(cli.ConfigError):
            cli.build_initial_state(explicit, params, np.random.default_rng(0))

    def test_setup_logging_writes_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            cli.setup_logging(Path(tmp), "debug")
            logging.info("edm logging check")
            root = logging.getLogger()
            for handler in list(root.handlers):
                handler.close()
                root.removeHandler(handler)
            text = (Path(tmp) / cli.LOG_FILE).read_text()
        self.assertIn("INFO - edm logging check", text)


class TestSimulate(CliCase):
    def test_bare_run(self):
        code, out = self.run_cli("simulate", "--preset", "bare")
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn("✅", out)
        summary = self.load("bare_summary.json")
        self.assertEqual(summary["target"], "bare fixed point")
        self.assertAlmostEqual(summary["final_energy"], -0.2, delta=1e-4)
        self.assertGreater(summary["final_energy"], summary["e_sr"])
        self.assertIsNotNone(summary["converged_at"])
        self.assertEqual(summary["config"]["model"]["g"], 0.46)

        frame = cli.read_csv(self.out / "bare_trajectory.csv")
        self.assertEqual(list(frame.columns), ["t", "q", "p", "sx", "sy", "sz", "energy"])
        self.assertEqual(frame["t"].iloc[-1], 2500.0)
        with open(self.out / "bare_energy.csv") as f:
            self.assertEqual(f.readline().strip(), "t,energy")
        plain = pd.read_csv(self.out / "bare_energy.csv")
        self.assertEqual(len(plain), len(frame))
        with open(cli.config_sidecar(self.out / "bare_energy.csv")) as f:
            self.assertEqual(json.load(f)["output"]["prefix"], "bare")

    def test_inline_config_comment(self):
        code, _ = self.run_cli("simulate", "--preset", "bare", "--set", "solver.t_end=20",
                               "--set", "output.csv_config_comment=true")
        self.assertEqual(code, cli.EXIT_OK)
        with open(self.out / "bare_energy.csv") as f:
            header = f.readline()
        self.assertTrue(header.startswith("# config: "))
        self.assertTrue(json.loads(header[len("# config: "):])["output"]["csv_config_comment"])
        self.assertFalse(cli.config_sidecar(self.out / "bare_energy.csv").exists())
        self.assertEqual(list(cli.read_csv(self.out / "bare_energy.csv").columns), ["t", "energy"])

    def test_rotated_dissipators_reach_minimum(self):
        for preset in ("adhoc", "dressed"):
            with self.subTest(preset=preset):
                code, _ = self.run_cli("simulate", "--preset", preset, "--set", "solver.record_stride=1000")
                self.assertEqual(code, cli.EXIT_OK)
                summary = self.load(f"{preset}_summary.json")
                self.assertEqual(summary["target"], "superradiant minimum")
                self.assertAlmostEqual(summary["final_energy"], summary["e_sr"], delta=1e-6)

    def test_same_seed_same_output(self):
        names = ["seeded_trajectory.csv", "seeded_trajectory.config.json", "seeded_energy.csv",
                 "seeded_energy.config.json", "seeded_summary.json"]
        runs = []
        for seed in ("5", "5", "6"):
            code, _ = self.run_cli("simulate", "--preset", "bare", "--seed", seed,
                                   "--set", "solver.t_end=50", "--set", "output.prefix=seeded")
            self.assertEqual(code, cli.EXIT_OK)
            runs.append({name: (self.out / name).read_bytes() for name in names})
        for name in names:
            self.assertEqual(runs[0][name], runs[1][name], name)
        self.assertNotEqual(runs[0]["seeded_trajectory.csv"], runs[2]["seeded_trajectory.csv"])

    def test_exit_codes(self):
        code, _ = self.run_cli("simulate", "--preset", "adhoc", "--set", "model.g=0.3")
        self.assertEqual(code, cli.EXIT_PHASE)
        code, _ = self.run_cli("simulate", "--preset", "bare", "--set", "model.omega=-1")
        self.assertEqual(code, cli.EXIT_CONFIG)
        code, _ = self.run_cli("simulate", "--preset", "bare", "--set", "dissipator.kind=lab")
        self.assertEqual(code, cli.EXIT_CONFIG)
        code, _ = self.run_cli("simulate", "--preset", "bare", "--set", "initial.mode=explicit",
                               "--set", "initial.state=[NaN, 0, 0, 0, 1]")
        self.assertEqual(code, cli.EXIT_NUMERIC)

    def test_config_errors_exit_before_logging(self):
        with patch('sys.stderr', new_callable=io.StringIO) as err:
            code, _ = self.run_cli("simulate", "--preset", "no-such-preset")
        self.assertEqual(code, cli.EXIT_CONFIG)
        self.assertIn("❌", err.getvalue())
        self.mock_logging.assert_not_called()


class TestAnalysisCommands(CliCase):
    def test_diagonalize_check(self):
        code, out = self.run_cli("diagonalize", "--preset", "bare", "--check")
        self.assertEqual(code, cli.EXIT_OK)
        report = self.load("bare_diag.json")
        self.assertAlmostEqual(report["eps1"] ** 2, 0.00459011, places=7)
        checks = report["checks"]
        self.assertLess(checks["normalization"], 1e-10)
        self.assertLess(checks["round_trip"], 1e-10)
        self.assertLess(checks["table_vs_generic"], 1e-10)
        self.assertLess(checks["closed_vs_full"], 1e-8)
        self.assertLess(checks["closed_vs_linearized"], 1e-5)
        self.assertIn("coefficients", json.loads(out[out.index("{"):]))

    def test_diagonalize_normal_phase(self):
        code, _ = self.run_cli("diagonalize", "--preset", "bare", "--set", "model.g=0.3")
        self.assertEqual(code, cli.EXIT_PHASE)

    def test_diagonalize_zero_zeeman(self):
        with self.assertLogs(level="ERROR") as logs:
            code, _ = self.run_cli("diagonalize", "--preset", "fig2", "--set", "model.e_z=0")
        self.assertEqual(code, cli.EXIT_PHASE)
        self.assertIn("degenerate superradiant frame", "\n".join(logs.output))

    def test_fig3_preset_runs(self):
        code, _ = self.run_cli("simulate", "--preset", "fig3", "--set", "solver.record_stride=1000")
        self.assertEqual(code, cli.EXIT_OK)
        summary = self.load("fig3_summary.json")
        self.assertAlmostEqual(summary["final_energy"], summary["e_sr"], delta=1e-6)

    def test_fixed_points(self):
        code, _ = self.run_cli("fixed-points", "--preset", "bare")
        self.assertEqual(code, cli.EXIT_OK)
        report = self.load("bare_fixed_points.json")
        self.assertEqual(len(report["fixed_points"]), 3)
        for row in report["fixed_points"]:
            self.assertAlmostEqual(row["energy"], -0.2, places=12)
            self.assertAlmostEqual(row["refined_energy"], -0.2, places=10)
            self.assertLess(row["residual"], 1e-12)
        self.assertAlmostEqual(report["g_c_damped"], 0.449534, places=6)
        self.assertEqual(len(report["sr_minima"]), 2)

    def test_small_sweep(self):
        code, _ = self.run_cli("sweep", "--preset", "sweep", "--set", "sweep.g_points=5",
                               "--set", "sweep.eps_points=3", "--set", "sweep.workers=1")
        self.assertEqual(code, cli.EXIT_OK)
        frame = cli.read_csv(self.out / "sweep_sweep.csv")
        self.assertEqual(len(frame), 15)
        self.assertTrue((frame.loc[frame["eps"] > 0, "phase"] == NORMAL).all())
        model = cli.resolve_config("sweep")["model"]
        for _, row in frame[frame["eps"] < 0].iterrows():
            params = ModelParams.from_dict(dict(model, g=row["g"], eps=row["eps"]))
            self.assertAlmostEqual(row["g_c_damped"], damped_critical_values(params)[0], places=12)

    def test_oracle_preset(self):
        code, _ = self.run_cli("oracle", "--preset", "oracle")
        self.assertEqual(code, cli.EXIT_OK)
        report = self.load("oracle_oracle.json")
        self.assertGreaterEqual(report["fidelity"], 0.999)
        self.assertLess(report["residuals"]["trace_error"], 1e-9)
        self.assertGreater(report["rates"][1], report["rates"][0])

    def test_oracle_truncation_exit(self):
        code, _ = self.run_cli("oracle", "--preset", "oracle", "--set", "oracle.n_c=3",
                               "--set", "oracle.n_b=3", "--set", "oracle.edge_threshold=1e-12")
        self.assertEqual(code, cli.EXIT_TRUNCATION)


if __name__ == '__main__':
    unittest.main()
