"""
Unit tests for the command line entry point
"""

import json
import math
import os
import tempfile
import unittest

import pandas as pd

from main import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main, parse_vector


class TestCommandLine(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name: str) -> str:
        return os.path.join(self.tmp.name, name)

    def config(self, **values) -> str:
        path = self.path("config.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(values, f)
        return path

    def test_parse_vector(self):
        self.assertEqual(parse_vector("1,-1, 0.5"), [1.0, -1.0, 0.5])

    def test_usage_errors(self):
        self.assertEqual(main([]), EXIT_USAGE)
        self.assertEqual(main(["--help"]), EXIT_OK)
        self.assertEqual(main(["verify", "--config", self.path("missing.json")]), EXIT_USAGE)
        self.assertEqual(main(["verify", "--config", self.config(n=2, chi=0)]), EXIT_USAGE)
        self.assertEqual(main(["verify", "--config", self.config(n=9)]), EXIT_USAGE)

    def test_bad_evolve_arguments(self):
        cfg = self.config(n=2)
        out = self.path("t.csv")
        self.assertEqual(main(["evolve", "--config", cfg, "--observable", "Q(1)", "--out", out]), EXIT_USAGE)
        self.assertEqual(main(["evolve", "--config", cfg, "--observable", "K(1)", "--out", out]), EXIT_USAGE)
        self.assertEqual(main(["evolve", "--config", cfg, "--q=1,-1", "--out", out]), EXIT_USAGE)
        self.assertEqual(main(["evolve", "--config", cfg, "--q=-1,1", "--p=0,0", "--out", out]), EXIT_USAGE)
        self.assertFalse(os.path.exists(out))

    def test_rejected_observable_lists_valid_ids(self):
        argv = ["evolve", "--config", self.config(n=2), "--observable", "K(1)", "--out", self.path("t.csv")]
        with self.assertLogs(level="ERROR") as logs:
            self.assertEqual(main(argv), EXIT_USAGE)
        self.assertTrue(any("C(2,1)" in line and "K(2)" in line for line in logs.output))

    def test_verify(self):
        out = self.path("report.json")
        self.assertEqual(main(["verify", "--config", self.config(n=2), "--samples", "3", "--out", out]), EXIT_OK)
        with open(out, encoding="utf-8") as f:
            report = json.load(f)
        self.assertTrue(report["passed"])
        self.assertEqual(report["config"]["samples"], 3)

    def test_verify_literal_reports_kappa(self):
        out = self.path("report.json")
        argv = ["verify", "--config", self.config(n=2), "--samples", "3", "--convention", "literal", "--jobs", "2", "--out", out]
        self.assertEqual(main(argv), EXIT_OK)
        with open(out, encoding="utf-8") as f:
            text = f.read()
        self.assertIn("kappa=2.0", text)
        self.assertAlmostEqual(json.loads(text)["kappa"]["kappa"], 2.0, delta=1e-8)

    def test_calibrate(self):
        out = self.path("kappa.json")
        self.assertEqual(main(["calibrate", "--config", self.config(n=2), "--samples", "10", "--out", out]), EXIT_OK)
        with open(out, encoding="utf-8") as f:
            self.assertAlmostEqual(json.load(f)["kappa"], 1.0, delta=1e-8)

    def test_evolve_free_particle(self):
        out = self.path("trajectory.csv")
        argv = ["evolve", "--config", self.config(n=1), "--observable", "I(1)", "--q=0", "--p=0.5",
                "--t-end", "4", "--n-out", "5", "--out", out]
        self.assertEqual(main(argv), EXIT_OK)
        frame = pd.read_csv(out)
        self.assertEqual(len(frame), 5)
        for t, q in zip(frame["t"], frame["q_1"]):
            self.assertAlmostEqual(q, math.exp(0.5) * t, places=8)

    def test_scatter(self):
        out = self.path("scattering.json")
        argv = ["scatter", "--config", self.config(n=1), "--q=0", "--p=0.5", "--t-end", "10", "--out", out]
        self.assertEqual(main(argv), EXIT_OK)
        with open(out, encoding="utf-8") as f:
            result = json.load(f)
        self.assertAlmostEqual(result["p_plus"][0], 0.5, places=8)
        self.assertTrue(result["passed"])

    def test_scatter_short_horizon(self):
        out = self.path("scattering.json")
        argv = ["scatter", "--config", self.config(n=2), "--q=1,-1", "--p=0.4,-0.4", "--t-end", "5", "--out", out]
        self.assertEqual(main(argv), EXIT_FAILED)
        with open(out, encoding="utf-8") as f:
            self.assertIn("error", json.load(f))


if __name__ == '__main__':
    unittest.main()
