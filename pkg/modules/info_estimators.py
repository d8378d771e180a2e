"""
CUMI Toolkit — Information Estimators
Matrix-based Renyi alpha-order entropy, joint entropy and total correlation
on trace-normalized Gaussian Gram matrices, HSIC for evaluation, and an
exact Shannon oracle over small discrete distributions.

All entropies are in bits.
"""

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist

import config
from modules import tensor_core as tc
from modules.errors import ContractError, DimensionError, NumericError
from modules.tensor_core import TapeNode

logger = logging.getLogger(__name__)


def _as_samples(x) -> np.ndarray:
    """N x d float matrix; a 1-D input is N samples of one feature."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"expected an N x d sample matrix, got shape {arr.shape}")
    return arr


# ============================================================================
# TYPES
# ============================================================================

@dataclass
class NormalizedGram:
    """Symmetric PSD kernel matrix with unit trace."""
    a: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise DimensionError(f"Gram matrix must be square, got {self.a.shape}")
        if abs(np.trace(self.a) - 1.0) > 1e-10:
            raise ContractError(f"Gram matrix trace is {np.trace(self.a):.12f}, expected 1")
        if np.max(np.abs(self.a - self.a.T)) > 1e-10:
            raise ContractError("Gram matrix is not symmetric")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @classmethod
    def from_kernel(cls, k: np.ndarray) -> "NormalizedGram":
        k = np.asarray(k, dtype=np.float64)
        return cls(k / np.trace(k))


@dataclass
class KernelConfig:
    """Entropy order and Gaussian bandwidth rule ("median" or a fixed sigma)."""
    alpha: float = config.ALPHA
    bandwidth: Union[str, float] = "median"

    def __post_init__(self):
        check_alpha(self.alpha)
        self.bandwidth = parse_bandwidth(self.bandwidth)

    def sigma_for(self, x) -> float:
        if self.bandwidth == "median":
            return median_bandwidth(x)
        return float(self.bandwidth)


def check_alpha(alpha: float):
    if not (alpha > 0.0 and alpha != 1.0 and np.isfinite(alpha)):
        raise ContractError(f"alpha must lie in (0,1) or (1,inf), got {alpha} (use 1.01 for near-Shannon)")


def parse_bandwidth(value: Union[str, float]) -> Union[str, float]:
    if isinstance(value, str):
        if value.strip().lower() == "median":
            return "median"
        try:
            value = float(value)
        except ValueError:
            raise ContractError(f"bandwidth must be 'median' or a positive number, got '{value}'")
    if not (value > 0.0 and np.isfinite(value)):
        raise ContractError(f"fixed bandwidth must be positive, got {value}")
    return float(value)


# ============================================================================
# KERNELS
# ============================================================================

def median_bandwidth(x) -> float:
    """Median pairwise Euclidean distance; 1.0 when that median is 0."""
    x = _as_samples(x)
    if x.shape[0] < 2:
        raise ContractError(f"median bandwidth needs at least 2 samples, got {x.shape[0]}")
    sigma = float(np.median(pdist(x)))
    if sigma == 0.0:
        logger.warning("Median pairwise distance is 0; bandwidth falls back to 1.0")
        return 1.0
    return sigma


def gaussian_kernel(x, sigma: float) -> np.ndarray:
    """Unnormalized Gaussian Gram matrix (unit diagonal)."""
    x = _as_samples(x)
    if not np.all(np.isfinite(x)):
        raise NumericError("kernel input contains non-finite values")
    if not sigma > 0.0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    sq = np.sum(x * x, axis=1)
    d = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    np.fill_diagonal(d, 0.0)
    return np.exp(-d / (2.0 * sigma * sigma))


def gaussian_gram(x, sigma: float) -> NormalizedGram:
    k = gaussian_kernel(x, sigma)
    k = (k + k.T) / 2.0
    return NormalizedGram(k / np.trace(k))


def gram_node(x: TapeNode, sigma: float) -> TapeNode:
    """Differentiable trace-normalized Gaussian Gram of the rows of x."""
    if not sigma > 0.0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    k = tc.exp(tc.scale(tc.sq_dists(x), -1.0 / (2.0 * sigma * sigma)))
    return tc.divide_by_trace(k)


# ============================================================================
# MATRIX-BASED RENYI FUNCTIONALS
# ============================================================================

GramLike = Union[NormalizedGram, TapeNode, np.ndarray]


def _to_node(a: GramLike) -> TapeNode:
    if isinstance(a, TapeNode):
        return a
    if isinstance(a, NormalizedGram):
        return tc.constant(a.a)
    return tc.constant(a)


def _result(node: TapeNode, differentiable: bool):
    return node if differentiable else node.item()


def _entropy_node(a: TapeNode, alpha: float) -> TapeNode:
    power = tc.spectral_scalar(a, _renyi_power(alpha))
    return tc.scale(tc.log2(power), 1.0 / (1.0 - alpha))


def _renyi_power(alpha: float) -> tc.SpectralFunction:
    # eigenvalues at the clamp floor are treated as zero in the value;
    # the derivative is still evaluated at the clamped eigenvalue
    base = tc.spectral_power(alpha)
    floor = config.EIG_CLAMP
    return tc.SpectralFunction(
        name=base.name,
        fn=lambda lam: np.where(lam > floor, lam, 0.0) ** alpha,
        derivative=base.derivative,
    )


def renyi_entropy(a: GramLike, alpha: float = config.ALPHA):
    """
    H_alpha(A) = log2(sum_m lambda_m(A)^alpha) / (1 - alpha).

    Args:
        a: unit-trace Gram matrix (NormalizedGram, array or TapeNode)
        alpha: entropy order, alpha > 0 and alpha != 1

    Returns:
        float bits, or a 1x1 TapeNode when `a` is a TapeNode
    """
    check_alpha(alpha)
    return _result(_entropy_node(_to_node(a), alpha), isinstance(a, TapeNode))


def _check_grams(grams: Sequence[GramLike]):
    if len(grams) < 2:
        raise ContractError(f"need at least 2 Gram matrices, got {len(grams)}")
    sizes = {_to_node(g).shape for g in grams}
    if len(sizes) != 1:
        raise DimensionError(f"Gram matrices differ in size: {sorted(sizes)}")


def _joint_node(nodes: Sequence[TapeNode]) -> TapeNode:
    return tc.divide_by_trace(reduce(tc.hadamard, nodes))


def joint_entropy(grams: Sequence[GramLike], alpha: float = config.ALPHA):
    """H_alpha of the trace-normalized Hadamard product of the Grams."""
    check_alpha(alpha)
    _check_grams(grams)
    nodes = [_to_node(g) for g in grams]
    differentiable = any(isinstance(g, TapeNode) for g in grams)
    return _result(_entropy_node(_joint_node(nodes), alpha), differentiable)


def total_correlation(grams: Sequence[GramLike], alpha: float = config.ALPHA):
    """sum_i H_alpha(A_i) - H_alpha(A_1 o ... o A_v)."""
    check_alpha(alpha)
    _check_grams(grams)
    nodes = [_to_node(g) for g in grams]
    differentiable = any(isinstance(g, TapeNode) for g in grams)
    marginals = reduce(tc.add, [_entropy_node(n, alpha) for n in nodes])
    joint = _entropy_node(_joint_node(nodes), alpha)
    return _result(tc.sub(marginals, joint), differentiable)


def mutual_information(a: GramLike, b: GramLike, alpha: float = config.ALPHA):
    """Two-variable total correlation H(a) + H(b) - H(a, b)."""
    return total_correlation([a, b], alpha)


def entropy_of_samples(x, kernel: Optional[KernelConfig] = None) -> Tuple[float, float]:
    """Entropy of a sample matrix and the bandwidth used."""
    kernel = kernel or KernelConfig()
    sigma = kernel.sigma_for(x)
    return renyi_entropy(gaussian_gram(x, sigma), kernel.alpha), sigma


def total_correlation_of_samples(xs: Sequence, kernel: Optional[KernelConfig] = None) -> float:
    kernel = kernel or KernelConfig()
    grams = [gaussian_gram(x, kernel.sigma_for(x)) for x in xs]
    return total_correlation(grams, kernel.alpha)


# ============================================================================
# HSIC (evaluation only)
# ============================================================================

def hsic(x, y, sigma_x: Optional[float] = None, sigma_y: Optional[float] = None) -> float:
    """
    Biased HSIC: tr(K_x H K_y H) / (N - 1)^2 with unit-diagonal Gaussian
    kernels. Bandwidths default to the median heuristic.
    """
    x = _as_samples(x)
    y = _as_samples(y)
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"hsic: {x.shape[0]} vs {y.shape[0]} samples")
    n = x.shape[0]
    if n < 2:
        raise ContractError("hsic needs at least 2 samples")
    kx = gaussian_kernel(x, sigma_x if sigma_x is not None else median_bandwidth(x))
    ky = gaussian_kernel(y, sigma_y if sigma_y is not None else median_bandwidth(y))
    kxc = kx - kx.mean(axis=0, keepdims=True) - kx.mean(axis=1, keepdims=True) + kx.mean()
    kyc = ky - ky.mean(axis=0, keepdims=True) - ky.mean(axis=1, keepdims=True) + ky.mean()
    # tr(A B) for symmetric A, B is the entrywise inner product
    return float(np.sum(kxc * kyc) / (n - 1) ** 2)


# ============================================================================
# DISCRETE SHANNON ORACLE
# ============================================================================

@dataclass
class DiscretePmf:
    """Joint probabilities over a finite grid, one array axis per variable."""
    probs: np.ndarray
    axes: Tuple[str, ...]

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.axes = tuple(self.axes)
        if self.probs.ndim != len(self.axes):
            raise ContractError(f"{self.probs.ndim}-D probabilities but {len(self.axes)} axis labels")
        if len(set(self.axes)) != len(self.axes):
            raise ContractError(f"duplicate axis labels {self.axes}")
        if np.any(self.probs < 0.0):
            raise ContractError("probabilities must be non-negative")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ContractError(f"probabilities sum to {self.probs.sum():.15f}, expected 1")

    @classmethod
    def product(cls, *factors: Tuple[Sequence[str], np.ndarray]) -> "DiscretePmf":
        """Independent combination of (axes, probs) factors."""
        axes: Tuple[str, ...] = ()
        probs = np.ones(())
        for factor_axes, factor_probs in factors:
            axes += tuple(factor_axes)
            probs = np.multiply.outer(probs, np.asarray(factor_probs, dtype=np.float64))
        return cls(probs, axes)

    def marginal(self, axes: Sequence[str]) -> np.ndarray:
        unknown = set(axes) - set(self.axes)
        if unknown:
            raise ContractError(f"unknown axes {sorted(unknown)}")
        drop = tuple(i for i, name in enumerate(self.axes) if name not in axes)
        return self.probs.sum(axis=drop)


def discrete_entropy(p: DiscretePmf, axes: Sequence[str]) -> float:
    """Shannon entropy in bits of the marginal over `axes`."""
    m = p.marginal(axes).reshape(-1)
    m = m[m > 0.0]
    return float(-np.sum(m * np.log2(m)))


def discrete_mi(p: DiscretePmf, axes_a: Sequence[str], axes_b: Sequence[str]) -> float:
    """I(A; B) = H(A) + H(B) - H(A, B); shared axes count once in the joint."""
    union = list(dict.fromkeys(list(axes_a) + list(axes_b)))
    return discrete_entropy(p, axes_a) + discrete_entropy(p, axes_b) - discrete_entropy(p, union)
