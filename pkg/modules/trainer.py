"""
CUMI Toolkit — Training
The combined objective

    CE(Y, Y_hat) + sum_i MSE(X_i, X_hat_i) - beta * H(C) + gamma * TC(C, U_1, ..., U_v)

its plain-SGD loop with uniformly drawn donor views, and the per-epoch
diagnostics: consensus MSE, TC, HSIC and classification metrics.
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from sklearn.metrics import accuracy_score, precision_recall_fscore_support

import config
from modules import info_estimators as info
from modules import tensor_core as tc
from modules.cumi_model import CumiModel, ViewSpec, init_model
from modules.data_io import MultiViewBatch, MultiViewDataset
from modules.errors import ContractError, NumericError
from modules.tensor_core import TapeNode

logger = logging.getLogger(__name__)

REFERENCE_VIEW = 0  # C used for evaluation comes from view 1


# ============================================================================
# CONFIG & METRIC TYPES
# ============================================================================

@dataclass
class TrainConfig:
    alpha: float = config.ALPHA
    beta: float = config.BETA
    gamma: float = config.GAMMA
    lr: float = config.LEARNING_RATE
    epochs: int = config.EPOCHS
    batch_size: int = config.BATCH_SIZE
    seed: int = config.SEED
    bandwidth: Union[str, float] = config.BANDWIDTH
    donor_policy: str = "uniform_per_batch"
    use_labels: bool = True
    common_dim: Optional[int] = None
    unique_dim: Optional[int] = None
    diag_sample_cap: int = config.DIAG_SAMPLE_CAP
    fixed_donor: Optional[int] = None

    def __post_init__(self):
        info.check_alpha(self.alpha)
        self.bandwidth = info.parse_bandwidth(self.bandwidth)
        if self.lr < 0.0:
            raise ContractError(f"lr must be non-negative, got {self.lr}")
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if self.beta < 0.0 or self.gamma < 0.0:
            raise ContractError(f"beta and gamma must be non-negative, got {self.beta}, {self.gamma}")
        if self.batch_size < 2:
            raise ContractError(f"batch_size must be >= 2 (Gram matrices need 2 samples), got {self.batch_size}")
        if self.donor_policy != "uniform_per_batch":
            raise ContractError(f"unknown donor policy '{self.donor_policy}'")
        if self.diag_sample_cap < 2:
            raise ContractError("diag_sample_cap must be >= 2")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float

    @classmethod
    def empty(cls) -> "ClassificationMetrics":
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass
class IndependenceReport:
    h_c: float
    tc: float
    hsic: List[float]


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    ce: float
    mse: List[float]
    h_c: float
    tc: float
    hsic: List[float]
    consensus_mse: List[float]
    accuracy: float
    precision: float
    recall: float
    f1: float
    heldout: Optional[ClassificationMetrics] = None
    seconds: float = 0.0

    def row(self) -> Dict[str, float]:
        """One CSV row keyed by metrics_header()."""
        out: Dict[str, float] = {"epoch": self.epoch, "ce": self.ce}
        out.update({f"mse_{i + 1}": m for i, m in enumerate(self.mse)})
        out.update({"h_c": self.h_c, "tc": self.tc})
        out.update({f"hsic_{i + 1}": h for i, h in enumerate(self.hsic)})
        out.update({f"cmse_{i + 1}": c for i, c in enumerate(self.consensus_mse)})
        out.update({"acc": self.accuracy, "prec": self.precision, "rec": self.recall, "f1": self.f1})
        return out


def metrics_header(n_views: int) -> List[str]:
    views = range(1, n_views + 1)
    return (["epoch", "ce"] + [f"mse_{i}" for i in views] + ["h_c", "tc"]
            + [f"hsic_{i}" for i in views] + [f"cmse_{i}" for i in views]
            + ["acc", "prec", "rec", "f1"])


# ============================================================================
# OBJECTIVE
# ============================================================================

def mse(x, x_hat) -> TapeNode:
    """Mean over all entries of (x - x_hat)^2."""
    x = x if isinstance(x, TapeNode) else tc.constant(x)
    x_hat = x_hat if isinstance(x_hat, TapeNode) else tc.constant(x_hat)
    diff = tc.sub(x, x_hat)
    return tc.mean_all(tc.hadamard(diff, diff))


def bandwidth_for(values: np.ndarray, cfg: TrainConfig) -> float:
    """Kernel width from detached values; no gradient flows through it."""
    if cfg.bandwidth == "median":
        return info.median_bandwidth(values)
    return float(cfg.bandwidth)


@dataclass
class LossTerms:
    total: TapeNode
    ce: float
    mse: List[float]
    h_c: Optional[float]
    tc: Optional[float]


def compute_loss_terms(model: CumiModel, batch: MultiViewBatch, donor: int, cfg: TrainConfig) -> LossTerms:
    if batch.n_samples < 2:
        raise ContractError(f"a minibatch needs at least 2 samples, got {batch.n_samples}")

    out = model.forward(batch, donor)
    terms: List[TapeNode] = []

    ce_value = 0.0
    if cfg.use_labels and batch.labels is not None:
        ce = tc.softmax_cross_entropy(out.logits, batch.labels)
        ce_value = ce.item()
        terms.append(ce)

    mse_nodes = [mse(x, x_hat) for x, x_hat in zip(batch.views, out.reconstructions)]
    terms.extend(mse_nodes)

    h_c_value = tc_value = None
    if cfg.beta > 0.0 or cfg.gamma > 0.0:
        c = out.latents.c
        a_c = info.gram_node(c, bandwidth_for(c.value, cfg))
        if cfg.beta > 0.0:
            h_c = info.renyi_entropy(a_c, cfg.alpha)
            h_c_value = h_c.item()
            terms.append(tc.scale(h_c, -cfg.beta))
        if cfg.gamma > 0.0:
            a_u = [info.gram_node(u, bandwidth_for(u.value, cfg)) for u in out.latents.u]
            total_corr = info.total_correlation([a_c, *a_u], cfg.alpha)
            tc_value = total_corr.item()
            terms.append(tc.scale(total_corr, cfg.gamma))

    total = terms[0]
    for term in terms[1:]:
        total = tc.add(total, term)
    return LossTerms(total=total, ce=ce_value, mse=[m.item() for m in mse_nodes], h_c=h_c_value, tc=tc_value)


def compute_loss(model: CumiModel, batch: MultiViewBatch, donor: int, cfg: TrainConfig) -> TapeNode:
    """Scalar objective for one minibatch with C taken from `donor`."""
    return compute_loss_terms(model, batch, donor, cfg).total


# ============================================================================
# EVALUATION & DIAGNOSTICS
# ============================================================================

def classification_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> ClassificationMetrics:
    """Accuracy plus macro precision/recall/F1; 0/0 counts as 0."""
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, average="macro", zero_division=0)
    return ClassificationMetrics(
        accuracy=float(accuracy_score(y_true, y_pred)),
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
    )


def predict(model: CumiModel, dataset: MultiViewDataset) -> np.ndarray:
    out = model.forward(dataset.as_batch(), REFERENCE_VIEW)
    return np.argmax(out.logits.value, axis=1)


def evaluate(model: CumiModel, dataset: MultiViewDataset) -> ClassificationMetrics:
    if dataset.labels is None:
        raise ContractError("evaluate needs labels")
    return classification_metrics(dataset.labels, predict(model, dataset))


def consensus_mse(model: CumiModel, dataset: MultiViewDataset) -> List[float]:
    """MSE(C, C^(i)) for every view, with C from view 1's common encoder."""
    commons = [c.value for c in model.encode_all_common(dataset.as_batch())]
    reference = commons[REFERENCE_VIEW]
    return [float(np.mean((reference - c) ** 2)) for c in commons]


def diagnostic_subset(dataset: MultiViewDataset, cap: int, seed: int) -> MultiViewDataset:
    """At most `cap` rows, chosen once per seed."""
    if dataset.n_samples <= cap:
        return dataset
    rng = np.random.default_rng([seed, 1])
    return dataset.subset(np.sort(rng.choice(dataset.n_samples, size=cap, replace=False)))


def independence_curves(model: CumiModel, dataset: MultiViewDataset, cfg: TrainConfig) -> IndependenceReport:
    """H(C), TC(C, U_1, ..., U_v) and HSIC(C, U_i) on up to cfg.diag_sample_cap samples."""
    sample = diagnostic_subset(dataset, cfg.diag_sample_cap, cfg.seed)
    out = model.forward(sample.as_batch(), REFERENCE_VIEW)
    c = out.latents.c.value
    us = [u.value for u in out.latents.u]

    sigma_c = bandwidth_for(c, cfg)
    a_c = info.gaussian_gram(c, sigma_c)
    grams = [a_c] + [info.gaussian_gram(u, bandwidth_for(u, cfg)) for u in us]
    return IndependenceReport(
        h_c=info.renyi_entropy(a_c, cfg.alpha),
        tc=info.total_correlation(grams, cfg.alpha),
        hsic=[info.hsic(c, u, sigma_c, bandwidth_for(u, cfg)) for u in us],
    )


# ============================================================================
# SGD LOOP
# ============================================================================

class Trainer:
    """Runs the SGD loop over one model and records EpochMetrics."""

    def __init__(self, model: CumiModel, dataset: MultiViewDataset, cfg: TrainConfig):
        if dataset.n_views != model.n_views:
            raise ContractError(f"dataset has {dataset.n_views} views, model has {model.n_views}")
        self.model = model
        self.cfg = cfg
        self.train_set = dataset.train_split()
        self.test_set = dataset.test_split()
        if self.train_set.n_samples < 2:
            raise ContractError("training split needs at least 2 samples")
        if cfg.fixed_donor is not None:
            model._check_view(cfg.fixed_donor)
        self.diag_set = diagnostic_subset(self.train_set, cfg.diag_sample_cap, cfg.seed)
        self.supervised = cfg.use_labels and self.train_set.labels is not None
        self.rng = np.random.default_rng(cfg.seed)
        self.history: List[EpochMetrics] = []

    def _draw_donor(self) -> int:
        if self.cfg.fixed_donor is not None:
            return self.cfg.fixed_donor
        return int(self.rng.integers(self.model.n_views))

    def step(self, batch: MultiViewBatch, donor: int) -> LossTerms:
        """One SGD update w <- w - lr * g."""
        params = self.model.parameters()
        terms = compute_loss_terms(self.model, batch, donor, self.cfg)
        tc.zero_grad(params)
        tc.backward(terms.total)
        for p in params:
            p.value -= self.cfg.lr * p.grad
        return terms

    def run_epoch(self, epoch: int) -> EpochMetrics:
        started = time.perf_counter()
        losses = []
        for b, batch in enumerate(self.train_set.batches(self.cfg.batch_size, self.rng)):
            donor = self._draw_donor()
            try:
                terms = self.step(batch, donor)
            except NumericError as e:
                raise NumericError(f"training diverged: {e}", epoch=epoch, batch=b) from e
            loss = terms.total.item()
            if not np.isfinite(loss):
                raise NumericError("training diverged: non-finite loss", epoch=epoch, batch=b)
            losses.append(loss)

        metrics = self.measure(epoch, float(np.mean(losses)) if losses else float("nan"))
        metrics.seconds = time.perf_counter() - started
        return metrics

    def measure(self, epoch: int, loss: float) -> EpochMetrics:
        full = self.train_set.as_batch()
        out = self.model.forward(full, REFERENCE_VIEW)
        mses = [mse(x, x_hat).item() for x, x_hat in zip(full.views, out.reconstructions)]

        ce = 0.0
        scores = ClassificationMetrics.empty()
        if self.supervised:
            ce = tc.softmax_cross_entropy(out.logits, full.labels).item()
            scores = classification_metrics(full.labels, np.argmax(out.logits.value, axis=1))

        independence = independence_curves(self.model, self.diag_set, self.cfg)
        heldout = None
        if self.test_set is not None and self.test_set.labels is not None and self.supervised:
            heldout = evaluate(self.model, self.test_set)

        return EpochMetrics(
            epoch=epoch,
            loss=loss,
            ce=ce,
            mse=mses,
            h_c=independence.h_c,
            tc=independence.tc,
            hsic=independence.hsic,
            consensus_mse=consensus_mse(self.model, self.diag_set),
            accuracy=scores.accuracy,
            precision=scores.precision,
            recall=scores.recall,
            f1=scores.f1,
            heldout=heldout,
        )

    def run(self) -> List[EpochMetrics]:
        logger.info(
            f"Training {self.model.n_views}-view model on {self.train_set.n_samples} samples: "
            f"epochs={self.cfg.epochs} batch={self.cfg.batch_size} lr={self.cfg.lr} "
            f"beta={self.cfg.beta} gamma={self.cfg.gamma} alpha={self.cfg.alpha}"
        )
        for epoch in range(1, self.cfg.epochs + 1):
            metrics = self.run_epoch(epoch)
            self.history.append(metrics)
            logger.info(
                f"epoch {epoch}/{self.cfg.epochs} loss={metrics.loss:.5f} tc={metrics.tc:.4f} "
                f"h_c={metrics.h_c:.4f} acc={metrics.accuracy:.3f} ({metrics.seconds:.2f}s)"
            )
        return self.history


def train(model: CumiModel, dataset: MultiViewDataset, cfg: TrainConfig) -> Tuple[CumiModel, List[EpochMetrics]]:
    """Train in place; returns the model and one EpochMetrics per epoch."""
    history = Trainer(model, dataset, cfg).run()
    return model, history


def fit(dataset: MultiViewDataset, cfg: TrainConfig) -> Tuple[CumiModel, List[EpochMetrics]]:
    """Build a fresh model sized for `dataset` and train it."""
    model = init_model([ViewSpec(d=d, index=i) for i, d in enumerate(dataset.dims)], dataset.n_classes,
                       cfg.seed, common_dim=cfg.common_dim, unique_dim=cfg.unique_dim)
    return train(model, dataset, cfg)
