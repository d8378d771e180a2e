"""
CUMI Toolkit — Tensor Core
Reverse-mode automatic differentiation over dense float64 matrices.

Every value is a 2-D numpy array (scalars are 1x1). Operations build a
graph of TapeNode objects; backward() walks it in reverse topological
order. The spectral rule differentiates sums of functions of the
eigenvalues of a symmetric matrix, which is all the Renyi entropy needs.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

import config
from modules.errors import ContractError, DimensionError, NumericError

logger = logging.getLogger(__name__)

LN2 = float(np.log(2.0))


def as_matrix(value) -> np.ndarray:
    """Copy `value` into a contiguous float64 matrix (scalars become 1x1)."""
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got {arr.ndim}-D input of shape {arr.shape}")
    return np.ascontiguousarray(arr)


# ============================================================================
# TAPE NODE
# ============================================================================

class TapeNode:
    """A value in the autodiff graph plus its gradient accumulator."""

    __slots__ = ("value", "grad", "op", "parents", "_backward", "name")

    def __init__(self, value, op: str = "leaf", parents: Sequence["TapeNode"] = (),
                 backward: Optional[Callable] = None, name: Optional[str] = None):
        self.value = as_matrix(value)
        self.grad = np.zeros_like(self.value)
        self.op = op
        self.parents = tuple(parents)
        self._backward = backward
        self.name = name

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 node, got {self.value.shape}")
        return float(self.value[0, 0])

    def __add__(self, other: "TapeNode") -> "TapeNode":
        return elementwise(self, other, "add")

    def __sub__(self, other: "TapeNode") -> "TapeNode":
        return elementwise(self, other, "sub")

    def __mul__(self, other) -> "TapeNode":
        if isinstance(other, TapeNode):
            return elementwise(self, other, "hadamard")
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "TapeNode":
        return scale(self, -1.0)

    def __matmul__(self, other: "TapeNode") -> "TapeNode":
        return matmul(self, other)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"TapeNode({self.op}{label}, shape={self.shape})"


def parameter(value, name: Optional[str] = None) -> TapeNode:
    """A trainable leaf."""
    return TapeNode(value, op="param", name=name)


def constant(value, name: Optional[str] = None) -> TapeNode:
    """A data leaf; it still receives a gradient, nothing reads it."""
    return TapeNode(value, op="const", name=name)


def _node(value: np.ndarray, op: str, parents: Sequence[TapeNode], backward: Callable) -> TapeNode:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"operation '{op}' produced non-finite values")
    return TapeNode(value, op=op, parents=parents, backward=backward)


def _require_same_shape(a: TapeNode, b: TapeNode, op: str):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ============================================================================
# LINEAR ALGEBRA OPS
# ============================================================================

def matmul(a: TapeNode, b: TapeNode) -> TapeNode:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: {a.shape} x {b.shape} (inner dimensions differ)")
    av, bv = a.value, b.value

    def _backward(g):
        return g @ bv.T, av.T @ g

    return _node(av @ bv, "matmul", (a, b), _backward)


def elementwise(a: TapeNode, b: TapeNode, kind: str) -> TapeNode:
    """add, sub or hadamard of two equally shaped nodes."""
    _require_same_shape(a, b, kind)
    av, bv = a.value, b.value
    if kind == "add":
        return _node(av + bv, kind, (a, b), lambda g: (g, g))
    if kind == "sub":
        return _node(av - bv, kind, (a, b), lambda g: (g, -g))
    if kind == "hadamard":
        return _node(av * bv, kind, (a, b), lambda g: (g * bv, g * av))
    raise ContractError(f"unknown elementwise kind '{kind}'")


def add(a: TapeNode, b: TapeNode) -> TapeNode:
    return elementwise(a, b, "add")


def sub(a: TapeNode, b: TapeNode) -> TapeNode:
    return elementwise(a, b, "sub")


def hadamard(a: TapeNode, b: TapeNode) -> TapeNode:
    return elementwise(a, b, "hadamard")


def relu(a: TapeNode) -> TapeNode:
    # subgradient at 0 is 0
    mask = a.value > 0.0
    return _node(np.where(mask, a.value, 0.0), "relu", (a,), lambda g: (g * mask,))


def transpose(a: TapeNode) -> TapeNode:
    return _node(a.value.T, "transpose", (a,), lambda g: (g.T,))


def add_bias(x: TapeNode, b: TapeNode) -> TapeNode:
    """Add the 1 x d row vector `b` to every row of the N x d node `x`."""
    if b.shape != (1, x.shape[1]):
        raise DimensionError(f"add_bias: bias {b.shape} does not fit rows of width {x.shape[1]}")

    def _backward(g):
        return g, g.sum(axis=0, keepdims=True)

    return _node(x.value + b.value, "add_bias", (x, b), _backward)


def scale(a: TapeNode, c: float) -> TapeNode:
    return _node(c * a.value, "scale", (a,), lambda g: (c * g,))


def sum_all(a: TapeNode) -> TapeNode:
    shape = a.shape
    return _node(np.array([[a.value.sum()]]), "sum", (a,),
                 lambda g: (np.full(shape, g[0, 0]),))


def mean_all(a: TapeNode) -> TapeNode:
    shape = a.shape
    size = a.value.size
    return _node(np.array([[a.value.sum() / size]]), "mean", (a,),
                 lambda g: (np.full(shape, g[0, 0] / size),))


def log2(a: TapeNode) -> TapeNode:
    if np.any(a.value <= 0.0):
        raise NumericError("log2 of a non-positive value")
    av = a.value
    return _node(np.log2(av), "log2", (a,), lambda g: (g / (av * LN2),))


def exp(a: TapeNode) -> TapeNode:
    out = np.exp(a.value)
    return _node(out, "exp", (a,), lambda g: (g * out,))


def concat_cols(nodes: Sequence[TapeNode]) -> TapeNode:
    """Column-wise concatenation [n_1 | n_2 | ...]."""
    if not nodes:
        raise ContractError("concat_cols needs at least one node")
    rows = nodes[0].shape[0]
    for n in nodes:
        if n.shape[0] != rows:
            raise DimensionError(f"concat_cols: row counts differ ({rows} vs {n.shape[0]})")
    offsets = np.cumsum([0] + [n.shape[1] for n in nodes])

    def _backward(g):
        return tuple(g[:, offsets[k]:offsets[k + 1]] for k in range(len(nodes)))

    return _node(np.hstack([n.value for n in nodes]), "concat_cols", tuple(nodes), _backward)


def sq_dists(x: TapeNode) -> TapeNode:
    """Pairwise squared Euclidean distances between the rows of `x`."""
    xv = x.value
    sq = np.sum(xv * xv, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (xv @ xv.T)
    d = np.maximum(d, 0.0)
    np.fill_diagonal(d, 0.0)

    def _backward(g):
        s = g + g.T
        return (2.0 * (s.sum(axis=1)[:, None] * xv - s @ xv),)

    return _node(d, "sq_dists", (x,), _backward)


def divide_by_trace(a: TapeNode) -> TapeNode:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"divide_by_trace needs a square matrix, got {a.shape}")
    av = a.value
    tr = float(np.trace(av))
    if not tr > 0.0:
        raise NumericError(f"cannot normalize by trace {tr}")
    n = av.shape[0]

    def _backward(g):
        return (g / tr - (np.sum(g * av) / (tr * tr)) * np.eye(n),)

    return _node(av / tr, "divide_by_trace", (a,), _backward)


def softmax_cross_entropy(logits: TapeNode, labels: np.ndarray) -> TapeNode:
    """Mean softmax cross-entropy (natural log) against integer labels."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, k = logits.shape
    if labels.shape[0] != n:
        raise DimensionError(f"softmax_cross_entropy: {n} logit rows but {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ContractError(f"labels must lie in [0, {k})")
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()
    probs = np.exp(log_probs)

    def _backward(g):
        d = probs.copy()
        d[rows, labels] -= 1.0
        return (d * (g[0, 0] / n),)

    return _node(np.array([[loss]]), "softmax_ce", (logits,), _backward)


# ============================================================================
# SYMMETRIC EIGENDECOMPOSITION
# ============================================================================

@dataclass
class EigenPair:
    """Eigenvalues in descending order and orthonormal eigenvectors as columns."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T


def _jacobi_eig(sym: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations until the off-diagonal norm vanishes."""
    a = sym.copy()
    n = a.shape[0]
    v = np.eye(n)
    tol = config.JACOBI_TOL * max(1.0, float(np.linalg.norm(a)))

    for sweep in range(config.JACOBI_MAX_SWEEPS + 1):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol:
            return np.diag(a).copy(), v
        if sweep == config.JACOBI_MAX_SWEEPS:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    sign = 1.0 if theta >= 0.0 else -1.0
                    t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    raise NumericError(
        f"Jacobi eigensolver did not converge after {config.JACOBI_MAX_SWEEPS} sweeps "
        f"(off-diagonal norm {off:.3e})"
    )


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component of every column positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nonzero = np.flatnonzero(np.abs(col) > 1e-12)
        if nonzero.size and col[nonzero[0]] < 0.0:
            out[:, j] = -col
    return out


def sym_eig(a, method: Optional[str] = None) -> EigenPair:
    """
    Eigendecomposition of the symmetric part (A + A^T) / 2 of `a`.

    Args:
        a: square matrix
        method: "jacobi" or "lapack"; defaults to config.EIG_SOLVER

    Returns:
        EigenPair with descending eigenvalues and sign-normalized eigenvectors
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"sym_eig needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("sym_eig input contains non-finite values")
    sym = (a + a.T) / 2.0

    method = method or config.EIG_SOLVER
    if method == "jacobi":
        values, vectors = _jacobi_eig(sym)
    elif method == "lapack":
        values, vectors = np.linalg.eigh(sym)
    else:
        raise ContractError(f"unknown eigen solver '{method}'")

    order = np.argsort(-values, kind="stable")
    return EigenPair(eigenvalues=values[order], eigenvectors=_fix_signs(vectors[:, order]))


# ============================================================================
# SPECTRAL SCALAR FUNCTIONS
# ============================================================================

@dataclass(frozen=True)
class SpectralFunction:
    """f applied to each eigenvalue, with its derivative."""
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    clamp: bool = True


def spectral_power(alpha: float) -> SpectralFunction:
    return SpectralFunction(
        name=f"power({alpha})",
        fn=lambda lam: lam ** alpha,
        derivative=lambda lam: alpha * lam ** (alpha - 1.0),
    )


SPECTRAL_IDENTITY = SpectralFunction(
    name="identity",
    fn=lambda lam: lam,
    derivative=lambda lam: np.ones_like(lam),
    clamp=False,
)


def spectral_scalar(a: TapeNode, f: SpectralFunction, method: Optional[str] = None) -> TapeNode:
    """
    sum_m f(lambda_m(A)) as a 1x1 node.

    Gradient is U diag(f'(lambda)) U^T, which stays valid when eigenvalues
    repeat. Power functions see eigenvalues clamped at config.EIG_CLAMP.
    """
    pair = sym_eig(a.value, method)
    lam = np.maximum(pair.eigenvalues, config.EIG_CLAMP) if f.clamp else pair.eigenvalues
    u = pair.eigenvectors

    def _backward(g):
        d = f.derivative(lam)
        bad = np.flatnonzero(~np.isfinite(d))
        if bad.size:
            k = int(bad[0])
            raise NumericError(f"derivative of {f.name} undefined at eigenvalue index {k} (value {lam[k]:.3e})")
        return (((u * d) @ u.T) * g[0, 0],)

    return _node(np.array([[float(np.sum(f.fn(lam)))]]), f"spectral[{f.name}]", (a,), _backward)


# ============================================================================
# BACKWARD PASS
# ============================================================================

def _topological_order(root: TapeNode) -> List[TapeNode]:
    """Nodes reachable from root, parents before children."""
    order: List[TapeNode] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: TapeNode):
    """
    Accumulate d(loss)/d(leaf) into every reachable leaf's grad.

    Intermediate gradients are reset on each call; leaf gradients are not,
    so repeated calls accumulate until zero_grad().
    """
    if loss.shape != (1, 1):
        raise ContractError(f"backward needs a scalar (1x1) loss, got {loss.shape}")

    order = _topological_order(loss)
    for node in order:
        if not node.is_leaf:
            node.grad = np.zeros_like(node.value)
    if loss.is_leaf:
        loss.grad += 1.0
    else:
        loss.grad = np.ones_like(loss.value)

    for node in reversed(order):
        if node._backward is None:
            continue
        for parent, parent_grad in zip(node.parents, node._backward(node.grad)):
            if parent_grad is not None:
                parent.grad += parent_grad


def zero_grad(params: Sequence[TapeNode]):
    for p in params:
        p.grad = np.zeros_like(p.value)


def grad_check(loss_builder: Callable[[], TapeNode], params: Sequence[TapeNode], eps: float = 1e-5) -> float:
    """
    Compare analytic gradients with central differences.

    Args:
        loss_builder: zero-argument callable rebuilding the loss from params
        params: leaves to perturb in place
        eps: finite-difference step

    Returns:
        max over all entries of |analytic - fd| / max(1, |fd|)
    """
    zero_grad(params)
    backward(loss_builder())
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for p, grad in zip(params, analytic):
        for idx in np.ndindex(p.value.shape):
            original = p.value[idx]
            p.value[idx] = original + eps
            up = loss_builder().item()
            p.value[idx] = original - eps
            down = loss_builder().item()
            p.value[idx] = original
            fd = (up - down) / (2.0 * eps)
            worst = max(worst, abs(grad[idx] - fd) / max(1.0, abs(fd)))

    zero_grad(params)
    logger.debug(f"grad_check over {len(params)} params: max relative error {worst:.3e}")
    return worst
