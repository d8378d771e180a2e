"""End-to-end runs at the default configuration. Run with: pytest -m slow"""

import json

import numpy as np
import pytest

from main import EXIT_OK, main
from modules.synthetic import COMMON_MIN, CROSS_MAX, UNIQUE_MIN, SyntheticConfig, run_synthetic

SEEDS = [0, 1, 2]

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def synthetic_reports():
    return [run_synthetic(SyntheticConfig(seed=s)) for s in SEEDS]


@pytest.fixture(scope="module")
def mixed_reports():
    return [run_synthetic(SyntheticConfig(seed=s, mix=True)) for s in SEEDS]


def _median(reports, key):
    return float(np.median([r.alignments[key] for r in reports]))


def _separates(reports):
    return (min(_median(reports, "c_v1"), _median(reports, "c_v2")) >= COMMON_MIN
            and min(_median(reports, "u1"), _median(reports, "u2")) >= UNIQUE_MIN
            and max(_median(reports, "u1_vs_c"), _median(reports, "u2_vs_c")) <= CROSS_MAX)


class TestSyntheticBenchmark:

    def test_common_and_unique_separate(self, synthetic_reports):
        assert _separates(synthetic_reports)

    def test_loss_decreases(self, synthetic_reports):
        for report in synthetic_reports:
            assert report.curves["loss"]["last"] < report.curves["loss"]["first"], report.seed

    def test_consensus_converges(self, synthetic_reports):
        for report in synthetic_reports:
            curve = report.curves["cmse_2"]
            assert curve["last"] <= 0.2 * curve["first"], report.seed

    def test_dependence_between_common_and_unique_falls(self, synthetic_reports):
        for report in synthetic_reports:
            for key in ("tc", "hsic_1", "hsic_2"):
                curve = report.curves[key]
                assert curve["last"] <= 0.5 * curve["first"], (report.seed, key)

    def test_separation_survives_invertible_mixing(self, synthetic_reports, mixed_reports):
        assert _separates(mixed_reports) == _separates(synthetic_reports)

    def test_no_recovered_signal_collapses(self, synthetic_reports, mixed_reports):
        for report in [*synthetic_reports, *mixed_reports]:
            for column in ("c_hat_v1", "c_hat_v2", "u1_hat", "u2_hat"):
                assert report.signals[column].std() > 1e-8, (report.seed, column)
            assert min(report.alignments["u1"], report.alignments["u2"]) >= 0.5, report.seed


class TestMiniaturePipeline:

    def _train(self, tmp_path, capsys, manifest, name):
        out_dir = tmp_path / name
        assert main(["train", "--manifest", manifest, "--out-dir", str(out_dir)]) == EXIT_OK
        return out_dir, json.loads(capsys.readouterr().out)

    def test_accuracy_and_reproducibility(self, tmp_path, capsys):
        assert main(["make-example", "--out-dir", str(tmp_path / "data")]) == EXIT_OK
        manifest = json.loads(capsys.readouterr().out)["manifest"]

        first, payload = self._train(tmp_path, capsys, manifest, "a")
        second, _ = self._train(tmp_path, capsys, manifest, "b")

        assert payload["test"]["accuracy"] >= 0.9
        for name in ("checkpoint.json", "epoch_metrics.csv", "heldout_metrics.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
