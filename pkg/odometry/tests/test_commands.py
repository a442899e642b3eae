# odometry/tests/test_commands.py
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase

SCENARIO_YAML = """\
name: cli_loop
seed: 5
duration: 30.0
path: {kind: loop, radius: 39.79}
error_budget: {}
"""

SUITE_YAML = """\
name: cli_suite
seeds: [0]
algorithms: [tdcp, pseudorange]
base_scenario:
  duration: 30.0
scenarios:
  - name: cli_loop
evaluation: {sections: 1, section_length: 15.0, align_span: 5.0}
"""


def _call(name, **options):
    out = StringIO()
    call_command(name, stdout=out, stderr=StringIO(), **options)
    return out.getvalue()


class CommandTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls._tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls._tmp.name)
        cls.config = cls.root / "scenario.yaml"
        cls.config.write_text(SCENARIO_YAML)
        cls.data = cls.root / "sim"
        _call("simulate", config=str(cls.config), out_dir=str(cls.data))

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()
        super().tearDownClass()

    def inputs(self):
        return dict(obs=str(self.data / "observations.obs"), nav=str(self.data / "navigation.nav"))


class SimulateCommandTests(CommandTestCase):
    def test_writes_every_product(self):
        for name in ("observations.obs", "navigation.nav", "truth.csv", "rel_pose.csv"):
            with self.subTest(file=name):
                self.assertTrue((self.data / name).is_file())

    def test_same_seed_same_bytes(self):
        again = self.root / "again"
        output = _call("simulate", config=str(self.config), out_dir=str(again))
        self.assertIn("Wrote", output)
        for name in ("observations.obs", "navigation.nav", "truth.csv", "rel_pose.csv"):
            with self.subTest(file=name):
                self.assertEqual((self.data / name).read_bytes(), (again / name).read_bytes())

    def test_seed_override_changes_the_noise(self):
        other = self.root / "other_seed"
        _call("simulate", config=str(self.config), out_dir=str(other), seed=6)
        self.assertNotEqual((self.data / "observations.obs").read_bytes(),
                            (other / "observations.obs").read_bytes())

    def test_missing_config(self):
        with self.assertRaises(CommandError) as ctx:
            _call("simulate", config=str(self.root / "missing.yaml"), out_dir=str(self.root / "x"))
        self.assertTrue(str(ctx.exception).startswith("configuration: cannot read configuration file"))


class EstimateCommandTests(CommandTestCase):
    def test_trajectory_and_diagnostics(self):
        out = self.root / "est" / "tdcp.csv"
        output = _call("estimate", out=str(out), **self.inputs())
        self.assertIn("Estimated 31 epochs", output)
        trajectory = pd.read_csv(out)
        self.assertEqual(len(trajectory), 31)
        self.assertIn("qw", trajectory.columns)
        diagnostics = pd.read_csv(out.with_name("tdcp_diagnostics.csv"))
        self.assertEqual(diagnostics.loc[0, "termination"], "initial")
        self.assertEqual(len(diagnostics), 31)

    def test_reruns_are_byte_identical(self):
        a, b = self.root / "rerun_a.csv", self.root / "rerun_b.csv"
        _call("estimate", out=str(a), topology="dense", window=5.0, **self.inputs())
        _call("estimate", out=str(b), topology="dense", window=5.0, **self.inputs())
        self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_with_relative_poses(self):
        out = self.root / "relpose_factors.csv"
        _call("estimate", out=str(out), rel_pose=str(self.data / "rel_pose.csv"), **self.inputs())
        self.assertTrue(out.is_file())

    def test_unreadable_observations(self):
        with self.assertRaises(CommandError) as ctx:
            _call("estimate", obs=str(self.root / "none.obs"), nav=str(self.data / "navigation.nav"),
                  out=str(self.root / "none.csv"))
        self.assertTrue(str(ctx.exception).startswith("rinex: cannot read"))


class BaselineCommandTests(CommandTestCase):
    def test_every_method(self):
        for method in ("pseudorange", "doppler", "relpose"):
            with self.subTest(method=method):
                out = self.root / f"{method}.csv"
                output = _call("baseline", method=method, out=str(out),
                               rel_pose=str(self.data / "rel_pose.csv"), **self.inputs())
                self.assertIn(f"{method} trajectory", output)
                self.assertEqual(len(pd.read_csv(out)), 31)

    def test_relpose_needs_a_file(self):
        with self.assertRaises(CommandError) as ctx:
            _call("baseline", method="relpose", out=str(self.root / "r.csv"), **self.inputs())
        self.assertEqual(str(ctx.exception), "baseline: the relpose method needs a relative-pose CSV")


class EvalCommandTests(CommandTestCase):
    def test_sections_and_summary(self):
        estimate = self.root / "eval_tdcp.csv"
        _call("estimate", out=str(estimate), **self.inputs())
        report = self.root / "report" / "drift.csv"
        output = _call("eval", estimate=str(estimate), truth=str(self.data / "truth.csv"), out=str(report),
                       sections=1, length=15.0, align=5.0)
        self.assertIn("1 sections", output)
        self.assertEqual(len(pd.read_csv(report)), 1)
        self.assertTrue((self.root / "report" / "drift_curves.csv").is_file())
        summary = pd.read_csv(self.root / "report" / "drift_summary.csv")
        self.assertIn("final_error_m", summary.columns)

    def test_path_too_short(self):
        estimate = self.root / "short_tdcp.csv"
        _call("estimate", out=str(estimate), **self.inputs())
        with self.assertRaises(CommandError) as ctx:
            _call("eval", estimate=str(estimate), truth=str(self.data / "truth.csv"),
                  out=str(self.root / "short.csv"))
        self.assertTrue(str(ctx.exception).startswith("evaluation: truth path too short"))


class ExperimentCommandTests(CommandTestCase):
    def test_suite_without_persisting(self):
        suite = self.root / "suite.yaml"
        suite.write_text(SUITE_YAML)
        out = self.root / "suite_out"
        output = _call("experiment", suite=str(suite), out_dir=str(out), no_persist=True)
        self.assertIn("2 runs over 1 case(s)", output)
        summary = pd.read_csv(out / "summary.csv")
        self.assertEqual(sorted(summary["algorithm"]), ["pseudorange", "tdcp"])
        self.assertTrue((out / "cli_loop_error_curves.svg").is_file())
