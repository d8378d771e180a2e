import numpy as np
import pytest

from modules import info_estimators as info
from modules import tensor_core as tc
from modules.errors import ContractError, DimensionError


def _gram(rng, n=8, d=3):
    x = rng.normal(size=(n, d))
    return info.gaussian_gram(x, info.median_bandwidth(x))


class TestNormalizedGram:

    def test_gaussian_gram_has_unit_trace(self, rng):
        g = _gram(rng)
        assert np.trace(g.a) == pytest.approx(1.0, abs=1e-12)
        assert g.n == 8

    def test_rejects_wrong_trace(self):
        with pytest.raises(ContractError):
            info.NormalizedGram(np.eye(3))

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractError):
            info.NormalizedGram(np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_from_kernel(self):
        g = info.NormalizedGram.from_kernel(np.ones((4, 4)))
        np.testing.assert_allclose(g.a, np.ones((4, 4)) / 4)


class TestKernelConfig:

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -2.0, float("inf")])
    def test_invalid_alpha(self, alpha):
        with pytest.raises(ContractError):
            info.KernelConfig(alpha=alpha)

    def test_fixed_bandwidth(self):
        assert info.KernelConfig(bandwidth="0.5").bandwidth == 0.5
        with pytest.raises(ContractError):
            info.KernelConfig(bandwidth=-1.0)


class TestMedianBandwidth:

    def test_two_points(self):
        assert info.median_bandwidth([[0.0], [3.0]]) == pytest.approx(3.0)

    def test_coincident_points_fall_back(self):
        assert info.median_bandwidth(np.zeros((4, 2))) == 1.0

    def test_single_sample(self):
        with pytest.raises(ContractError):
            info.median_bandwidth(np.zeros((1, 2)))


class TestRenyiEntropy:

    @pytest.mark.parametrize("n", [2, 4, 16, 64])
    @pytest.mark.parametrize("alpha", [0.5, 1.01, 2.0])
    def test_uniform_spectrum_is_log2_n(self, n, alpha):
        assert info.renyi_entropy(np.eye(n) / n, alpha) == pytest.approx(np.log2(n), abs=1e-9)

    @pytest.mark.parametrize("n", [2, 4, 16, 64])
    @pytest.mark.parametrize("alpha", [0.5, 1.01, 2.0])
    def test_rank_one_is_zero(self, n, alpha):
        assert info.renyi_entropy(np.ones((n, n)) / n, alpha) == pytest.approx(0.0, abs=1e-9)

    def test_three_points_order_two(self):
        x = np.array([[0.0], [1.0], [2.0]])
        k = np.exp(-np.square(x - x.T) / 2.0)
        a = k / 3.0
        expected = -np.log2(np.sum(a ** 2))
        h = info.renyi_entropy(info.gaussian_gram(x, 1.0), 2.0)
        assert h == pytest.approx(expected, abs=1e-12)
        assert h == pytest.approx(0.99739, abs=1e-5)

    def test_permutation_invariant(self, rng):
        x = rng.normal(size=(10, 3))
        perm = rng.permutation(10)
        h1 = info.renyi_entropy(info.gaussian_gram(x, 1.0))
        h2 = info.renyi_entropy(info.gaussian_gram(x[perm], 1.0))
        assert abs(h1 - h2) <= 1e-10

    def test_bounded_by_log2_n(self, rng):
        h = info.renyi_entropy(_gram(rng, n=12))
        assert 0.0 <= h <= np.log2(12) + 1e-9

    def test_differentiable_input_returns_node(self, rng):
        a = tc.parameter(_gram(rng).a)
        out = info.renyi_entropy(a, 2.0)
        assert isinstance(out, tc.TapeNode)
        assert out.shape == (1, 1)

    @pytest.mark.parametrize("alpha", [1.01, 2.0])
    def test_gradient_wrt_samples(self, rng, alpha):
        x = tc.parameter(rng.normal(size=(8, 5)))
        err = tc.grad_check(lambda: info.renyi_entropy(info.gram_node(x, 2.0), alpha), [x])
        assert err <= 1e-4

    def test_gram_node_matches_numpy_gram(self, rng):
        x = rng.normal(size=(6, 2))
        np.testing.assert_allclose(info.gram_node(tc.constant(x), 1.3).value,
                                   info.gaussian_gram(x, 1.3).a, atol=1e-14)


class TestJointEntropyAndTC:

    def test_joint_with_rank_one_is_marginal(self, rng):
        g = _gram(rng)
        j = np.ones((8, 8)) / 8
        assert info.joint_entropy([g, j]) == pytest.approx(info.renyi_entropy(g), abs=1e-9)

    def test_tc_argument_order_symmetry(self, rng):
        grams = [_gram(rng) for _ in range(3)]
        t1 = info.total_correlation(grams)
        t2 = info.total_correlation(grams[::-1])
        t3 = info.total_correlation([grams[1], grams[0], grams[2]])
        assert abs(t1 - t2) <= 1e-12
        assert abs(t1 - t3) <= 1e-12

    def test_tc_nonnegative(self, rng):
        for _ in range(5):
            assert info.total_correlation([_gram(rng) for _ in range(3)]) >= -1e-8

    def test_tc_of_identical_variables_is_positive(self, rng):
        x = rng.normal(size=(8, 2))
        g = info.gaussian_gram(x, 1.0)
        assert info.total_correlation([g, g]) > 0.0

    def test_tc_permutation_invariant(self, rng):
        xs = [rng.normal(size=(9, 2)) for _ in range(3)]
        perm = rng.permutation(9)
        t1 = info.total_correlation([info.gaussian_gram(x, 1.0) for x in xs])
        t2 = info.total_correlation([info.gaussian_gram(x[perm], 1.0) for x in xs])
        assert abs(t1 - t2) <= 1e-10

    def test_mutual_information_is_two_variable_tc(self, rng):
        a, b = _gram(rng), _gram(rng)
        assert info.mutual_information(a, b) == pytest.approx(info.total_correlation([a, b]), abs=1e-15)

    def test_tc_gradient_wrt_all_representations(self, rng):
        xs = [tc.parameter(rng.normal(size=(8, 5))) for _ in range(3)]
        err = tc.grad_check(lambda: info.total_correlation([info.gram_node(x, 2.5) for x in xs]), xs)
        assert err <= 1e-4

    def test_needs_two_grams(self, rng):
        with pytest.raises(ContractError):
            info.total_correlation([_gram(rng)])

    def test_size_mismatch(self, rng):
        with pytest.raises(DimensionError):
            info.joint_entropy([_gram(rng, n=5), _gram(rng, n=6)])

    def test_sample_wrappers(self, rng):
        x = rng.normal(size=(10, 2))
        h, sigma = info.entropy_of_samples(x, info.KernelConfig(alpha=2.0))
        assert sigma == pytest.approx(info.median_bandwidth(x))
        assert h == pytest.approx(info.renyi_entropy(info.gaussian_gram(x, sigma), 2.0))
        tc_value = info.total_correlation_of_samples([x, x[:, :1]])
        assert np.isfinite(tc_value)


class TestHsic:

    def test_two_points(self):
        x = np.array([[0.0], [1.0]])
        a = (1.0 - np.exp(-0.5)) / 2.0
        assert info.hsic(x, x) == pytest.approx(4 * a * a, abs=1e-14)

    def test_constant_is_zero(self, rng):
        assert info.hsic(rng.normal(size=(20, 2)), np.ones((20, 1))) == pytest.approx(0.0, abs=1e-14)

    def test_permutation_invariant(self, rng):
        x = rng.normal(size=(15, 2))
        y = x[:, :1] ** 2 + 0.1 * rng.normal(size=(15, 1))
        perm = rng.permutation(15)
        assert abs(info.hsic(x, y) - info.hsic(x[perm], y[perm])) <= 1e-10

    def test_dependent_exceeds_independent(self, rng):
        x = rng.normal(size=(200, 1))
        assert info.hsic(x, np.sin(2 * x)) > info.hsic(x, rng.normal(size=(200, 1)))

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            info.hsic(np.zeros((3, 1)), np.zeros((4, 1)))


class TestDiscreteOracle:

    @staticmethod
    def _random_probs(rng, shape):
        p = rng.uniform(0.05, 1.0, size=shape)
        return p / p.sum()

    def test_uniform_four_valued_common_part(self):
        p = info.DiscretePmf.product((["C"], np.full(4, 0.25)), (["U1"], [0.5, 0.5]), (["U2"], [0.3, 0.7]))
        assert info.discrete_mi(p, ["C", "U1"], ["C", "U2"]) == pytest.approx(2.0, abs=1e-12)

    def test_binary_common_part(self):
        p = info.DiscretePmf.product((["C"], [0.5, 0.5]), (["U1"], [0.2, 0.8]), (["U2"], [0.5, 0.5]))
        assert info.discrete_mi(p, ["C", "U1"], ["C", "U2"]) == pytest.approx(1.0, abs=1e-12)

    def test_decomposition_over_random_constructions(self, rng):
        for _ in range(20):
            kc, k1, k2 = rng.integers(2, 5, size=3)
            p = info.DiscretePmf.product(
                (["C"], self._random_probs(rng, kc)),
                (["U1", "U2"], self._random_probs(rng, (k1, k2))),
            )
            lhs = info.discrete_mi(p, ["C", "U1"], ["C", "U2"])
            rhs = info.discrete_entropy(p, ["C"]) + info.discrete_mi(p, ["U1"], ["U2"])
            assert abs(lhs - rhs) <= 1e-12

    def test_invalid_pmf(self):
        with pytest.raises(ContractError):
            info.DiscretePmf(np.array([0.5, 0.6]), ("A",))
        with pytest.raises(ContractError):
            info.DiscretePmf(np.array([1.5, -0.5]), ("A",))
