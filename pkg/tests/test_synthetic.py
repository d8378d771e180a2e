import json

import numpy as np
import pytest

from modules import synthetic
from modules.errors import ContractError
from modules.synthetic import SyntheticConfig, alignment, generate, linear_cca, mix_views, run_synthetic, signals_at


class TestGenerator:

    def test_signals_at_zero(self):
        c, u1, u2 = signals_at(0.0)
        assert (float(c), float(u1), float(u2)) == (0.0, 1.0, 1.0)

    def test_signals_at_quarter(self):
        c, u1, u2 = signals_at(0.25)
        assert float(c) == pytest.approx(1.0, abs=1e-15)
        assert float(u1) == pytest.approx(np.cos(np.pi ** 2 / 4))
        assert float(u2) == pytest.approx(np.cos(np.sqrt(5.0) * np.pi / 4))

    def test_shapes_and_range(self):
        views, truth = generate(seed=0, n=50)
        assert [v.shape for v in views] == [(50, 20), (50, 20)]
        assert truth.f1.shape == (2, 20)
        assert np.all((truth.t >= -1.0) & (truth.t <= 1.0))
        assert np.all(np.abs(truth.noise) <= 0.02)

    def test_views_follow_generating_formula(self):
        views, truth = generate(seed=3, n=10)
        expected = np.column_stack([truth.c_true, truth.u1_true]) @ truth.f1 + truth.noise[:, None]
        np.testing.assert_allclose(views[0], expected, atol=1e-14)

    def test_deterministic(self):
        (a, _), (b, _) = generate(seed=5, n=30), generate(seed=5, n=30)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_too_few_samples(self):
        with pytest.raises(ContractError):
            generate(seed=0, n=1)

    def test_mixing_keeps_rank(self):
        views, _ = generate(seed=2, n=40)
        mixed = mix_views(views, seed=2)
        assert mixed[0].shape == views[0].shape
        assert np.linalg.matrix_rank(mixed[0]) == np.linalg.matrix_rank(views[0])
        assert not np.allclose(mixed[0], views[0])


class TestAlignment:

    def test_identical(self):
        x = np.linspace(-1, 1, 10)
        assert alignment(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_affine_and_sign_flip(self):
        x = np.linspace(-1, 1, 10)
        assert alignment(-3.0 * x + 2.0, x) == pytest.approx(1.0, abs=1e-12)

    def test_independent_noise_is_small(self):
        gen = np.random.default_rng(0)
        assert alignment(gen.normal(size=2000), gen.normal(size=2000)) < 0.3

    def test_constant_recovered_scores_zero(self):
        assert alignment(np.ones(5), np.arange(5.0)) == 0.0

    def test_errors(self):
        with pytest.raises(ContractError):
            alignment([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(ContractError):
            alignment(np.arange(4.0), np.ones(4))
        with pytest.raises(ContractError):
            alignment(np.arange(4.0), np.arange(5.0))


class TestLinearCca:

    def test_identical_views_fully_correlated(self, rng):
        x = rng.normal(size=(50, 3))
        result = linear_cca(x, x, k=3)
        np.testing.assert_allclose(result.correlations, 1.0, atol=1e-6)

    def test_independent_views(self, rng):
        result = linear_cca(rng.normal(size=(200, 3)), rng.normal(size=(200, 3)), k=3)
        assert result.correlations[0] < 0.35

    def test_correlations_sorted_and_bounded(self, rng):
        x = rng.normal(size=(80, 4))
        y = x[:, :2] + 0.5 * rng.normal(size=(80, 2))
        corr = linear_cca(x, y, k=2).correlations
        assert np.all(np.diff(corr) <= 0)
        assert np.all((corr >= 0) & (corr <= 1))

    def test_projections_shape(self, rng):
        result = linear_cca(rng.normal(size=(30, 4)), rng.normal(size=(30, 5)), k=2)
        assert result.x_projections.shape == (30, 2)
        assert result.y_projections.shape == (30, 2)

    def test_needs_more_samples_than_features(self, rng):
        with pytest.raises(ContractError):
            linear_cca(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), k=1)

    def test_k_out_of_range(self, rng):
        with pytest.raises(ContractError):
            linear_cca(rng.normal(size=(20, 2)), rng.normal(size=(20, 3)), k=3)


class TestRunSynthetic:

    def test_short_run_writes_outputs(self, tmp_path):
        report = run_synthetic(SyntheticConfig(seed=0, n=60, epochs=2), out_dir=str(tmp_path))

        assert (tmp_path / "synthetic_signals.csv").exists()
        payload = json.loads((tmp_path / "synthetic_report.json").read_text())
        assert set(payload["checks"]) == {"common_v1", "common_v2", "unique_1", "unique_2", "cross_1", "cross_2"}
        assert payload["passed"] == report.passed()

        assert len(report.history) == 2
        assert np.all(np.diff(report.signals["t"].to_numpy()) >= 0)
        assert {"c_hat_v1", "c_hat_v2", "u1_hat", "u2_hat"} <= set(report.signals.columns)
        for value in [*report.alignments.values(), *report.cca_alignments.values()]:
            assert 0.0 <= value <= 1.0

    def test_training_is_unsupervised_with_scalar_latents(self):
        cfg = SyntheticConfig().train_config()
        assert cfg.use_labels is False
        assert (cfg.common_dim, cfg.unique_dim) == (1, 1)

    def test_training_uses_fixed_kernel_width(self):
        assert SyntheticConfig().train_config().bandwidth == 1.0
        assert SyntheticConfig(bandwidth="median").train_config().bandwidth == "median"

    def test_thresholds(self):
        assert (synthetic.COMMON_MIN, synthetic.UNIQUE_MIN, synthetic.CROSS_MAX) == (0.95, 0.85, 0.35)
