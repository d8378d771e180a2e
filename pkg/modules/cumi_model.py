"""
CUMI Toolkit — CUMI Network
Per-view common encoders, unique encoders and decoders, plus a classifier
over the concatenated latent Z = [C | U_1 | ... | U_v].

Widths for a view of dimension d and n classes:
    common encoder  d -> 1.2d -> 0.5d -> 10n
    unique encoder  d -> 1.2d -> 0.5d -> 5n
    decoder         15n -> d -> 2.4d -> d
    classifier      (5v + 10)n -> n
Fractional widths round half-up. Hidden layers use ReLU, final layers are
linear. View indices are 0-based.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from modules import tensor_core as tc
from modules.data_io import MultiViewBatch
from modules.errors import ContractError, DimensionError
from modules.tensor_core import TapeNode

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "cumi-checkpoint"
CHECKPOINT_VERSION = 1

# seed streams per component role, shared by all views
_ROLE_COMMON, _ROLE_UNIQUE, _ROLE_DECODER, _ROLE_CLASSIFIER = range(4)


def round_half_up(x: float) -> int:
    return max(1, int(math.floor(x + 0.5)))


# ============================================================================
# TYPES
# ============================================================================

@dataclass
class ViewSpec:
    d: int
    index: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ContractError(f"view {self.index} needs d >= 1, got {self.d}")


@dataclass
class LatentBatch:
    c: TapeNode
    u: List[TapeNode]
    donor: int


@dataclass
class ForwardResult:
    latents: LatentBatch
    reconstructions: List[TapeNode]
    z: TapeNode
    logits: TapeNode


class DenseLayer:
    """Affine map x W + b."""

    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator, name: str):
        limit = math.sqrt(6.0 / fan_in)
        self.weight = tc.parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out)), name=f"{name}.weight")
        self.bias = tc.parameter(np.zeros((1, fan_out)), name=f"{name}.bias")

    def __call__(self, x: TapeNode) -> TapeNode:
        return tc.add_bias(tc.matmul(x, self.weight), self.bias)

    def parameters(self) -> List[TapeNode]:
        return [self.weight, self.bias]


class MLP:
    """Stack of DenseLayers, ReLU between them, linear output."""

    def __init__(self, widths: Sequence[int], seed_key: Sequence[int], name: str):
        self.widths = list(widths)
        rng = np.random.default_rng(list(seed_key))
        self.layers = [
            DenseLayer(self.widths[k], self.widths[k + 1], rng, f"{name}.{k}")
            for k in range(len(self.widths) - 1)
        ]

    def __call__(self, x: TapeNode) -> TapeNode:
        if x.shape[1] != self.widths[0]:
            raise DimensionError(f"input width {x.shape[1]} does not match layer width {self.widths[0]}")
        h = x
        for k, layer in enumerate(self.layers):
            h = layer(h)
            if k < len(self.layers) - 1:
                h = tc.relu(h)
        return h

    def parameters(self) -> List[TapeNode]:
        return [p for layer in self.layers for p in layer.parameters()]


def _as_node(x: Union[np.ndarray, TapeNode]) -> TapeNode:
    return x if isinstance(x, TapeNode) else tc.constant(x)


# ============================================================================
# MODEL
# ============================================================================

class CumiModel:
    """All learnable parameters of the common/unique multi-view network."""

    def __init__(self, views: Sequence[ViewSpec], n_classes: int, seed: int,
                 common_dim: Optional[int] = None, unique_dim: Optional[int] = None):
        if not views:
            raise ContractError("CumiModel needs at least one view")
        if n_classes < 2:
            raise ContractError(f"n_classes must be >= 2, got {n_classes}")
        self.views = [ViewSpec(d=v.d, index=i) for i, v in enumerate(views)]
        self.n_classes = n_classes
        self.seed = seed
        self.common_dim = common_dim or 10 * n_classes
        self.unique_dim = unique_dim or 5 * n_classes

        self.common_encoders: List[MLP] = []
        self.unique_encoders: List[MLP] = []
        self.decoders: List[MLP] = []
        for i, view in enumerate(self.views):
            d = view.d
            hidden = [round_half_up(1.2 * d), round_half_up(0.5 * d)]
            self.common_encoders.append(
                MLP([d, *hidden, self.common_dim], (seed, _ROLE_COMMON, d), f"view{i}.common"))
            self.unique_encoders.append(
                MLP([d, *hidden, self.unique_dim], (seed, _ROLE_UNIQUE, d), f"view{i}.unique"))
            self.decoders.append(
                MLP([self.common_dim + self.unique_dim, d, round_half_up(2.4 * d), d],
                    (seed, _ROLE_DECODER, d), f"view{i}.decoder"))

        rng = np.random.default_rng([seed, _ROLE_CLASSIFIER])
        self.classifier = DenseLayer(self.latent_dim, n_classes, rng, "classifier")
        logger.debug(f"CumiModel built: {self.n_views} views, latent width {self.latent_dim}")

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def latent_dim(self) -> int:
        return self.common_dim + self.n_views * self.unique_dim

    def _check_view(self, i: int):
        if not 0 <= i < self.n_views:
            raise ContractError(f"view index {i} outside [0, {self.n_views})")

    # ── Encoders / decoders ──

    def encode_common(self, i: int, x) -> TapeNode:
        self._check_view(i)
        return self.common_encoders[i](_as_node(x))

    def encode_unique(self, i: int, x) -> TapeNode:
        self._check_view(i)
        return self.unique_encoders[i](_as_node(x))

    def decode(self, i: int, c: TapeNode, u: TapeNode) -> TapeNode:
        """Reconstruct view i from [c | u] (common first, then unique)."""
        self._check_view(i)
        if c.shape[1] != self.common_dim or u.shape[1] != self.unique_dim:
            raise DimensionError(
                f"decoder {i} expects widths ({self.common_dim}, {self.unique_dim}), "
                f"got ({c.shape[1]}, {u.shape[1]})"
            )
        return self.decoders[i](tc.concat_cols([c, u]))

    def classify(self, z: TapeNode) -> TapeNode:
        return self.classifier(z)

    def forward(self, batch: MultiViewBatch, donor: int) -> ForwardResult:
        """
        Shared-C forward pass: C comes from the donor view's common encoder
        and feeds every decoder and the classifier.
        """
        self._check_view(donor)
        if len(batch.views) != self.n_views:
            raise DimensionError(f"batch has {len(batch.views)} views, model has {self.n_views}")
        c = self.encode_common(donor, batch.views[donor])
        u = [self.encode_unique(i, x) for i, x in enumerate(batch.views)]
        reconstructions = [self.decode(i, c, u_i) for i, u_i in enumerate(u)]
        z = tc.concat_cols([c, *u])
        return ForwardResult(
            latents=LatentBatch(c=c, u=u, donor=donor),
            reconstructions=reconstructions,
            z=z,
            logits=self.classify(z),
        )

    def encode_all_common(self, batch: MultiViewBatch) -> List[TapeNode]:
        """C^(i) from every view's own common encoder."""
        return [self.encode_common(i, x) for i, x in enumerate(batch.views)]

    # ── Parameters ──

    def named_parameters(self) -> List[Tuple[str, TapeNode]]:
        params = []
        for group in (self.common_encoders, self.unique_encoders, self.decoders):
            for mlp in group:
                params.extend((p.name, p) for p in mlp.parameters())
        params.extend((p.name, p) for p in self.classifier.parameters())
        return params

    def parameters(self) -> List[TapeNode]:
        return [p for _, p in self.named_parameters()]

    def state(self) -> Dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.named_parameters()}

    def load_state(self, state: Dict[str, np.ndarray]):
        for name, p in self.named_parameters():
            if name not in state:
                raise ContractError(f"state is missing tensor '{name}'")
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.value.shape:
                raise DimensionError(f"tensor '{name}' has shape {value.shape}, expected {p.value.shape}")
            p.value = value.copy()
            p.grad = np.zeros_like(p.value)

    def metadata(self) -> Dict:
        return {
            "views": [v.d for v in self.views],
            "n_classes": self.n_classes,
            "n_views": self.n_views,
            "seed": self.seed,
            "common_dim": self.common_dim,
            "unique_dim": self.unique_dim,
        }

    def copy(self) -> "CumiModel":
        clone = CumiModel(self.views, self.n_classes, self.seed, self.common_dim, self.unique_dim)
        clone.load_state(self.state())
        return clone

    # ── Checkpoints ──

    def save(self, path: str):
        """JSON checkpoint; float repr round-trips so loading is bit-exact."""
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "metadata": self.metadata(),
            "tensors": {
                name: {"shape": list(p.value.shape), "data": p.value.reshape(-1).tolist()}
                for name, p in self.named_parameters()
            },
        }
        with open(path, "w") as f:
            json.dump(payload, f)
        logger.info(f"Checkpoint saved: {path}")


def init_model(views: Sequence[ViewSpec], n_classes: int, seed: int,
               common_dim: Optional[int] = None, unique_dim: Optional[int] = None) -> CumiModel:
    """Glorot-uniform weights, zero biases; deterministic for a seed."""
    return CumiModel(views, n_classes, seed, common_dim, unique_dim)


def load_model(path: str) -> CumiModel:
    with open(path, "r") as f:
        payload = json.load(f)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ContractError(f"{path} is not a CUMI checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ContractError(f"unsupported checkpoint version {payload.get('version')}")
    meta = payload["metadata"]
    model = CumiModel(
        [ViewSpec(d=d, index=i) for i, d in enumerate(meta["views"])],
        n_classes=meta["n_classes"],
        seed=meta["seed"],
        common_dim=meta["common_dim"],
        unique_dim=meta["unique_dim"],
    )
    state = {
        name: np.array(t["data"], dtype=np.float64).reshape(t["shape"])
        for name, t in payload["tensors"].items()
    }
    model.load_state(state)
    return model
