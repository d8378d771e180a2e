"""
CUMI Toolkit — Hyperparameter Sweep & Ablation
Grid sweeps over (beta, gamma, seed) and (common_dim, unique_dim, seed)
cells with per-cell failure isolation, and the full-vs-TC-free timing
comparison.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from itertools import product
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

import config
from modules.data_io import MultiViewDataset, prepare
from modules.errors import CumiError, ContractError
from modules.report_generator import ReportGenerator
from modules.trainer import TrainConfig, evaluate, fit

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["status", "accuracy", "precision", "recall", "f1", "final_loss", "seconds", "error"]


@dataclass(frozen=True)
class SweepCell:
    beta: float
    gamma: float
    seed: int


@dataclass(frozen=True)
class DimsCell:
    common_dim: int
    unique_dim: int
    seed: int


Cell = Union[SweepCell, DimsCell]


def cell_keys(cell_type) -> List[str]:
    """Grid columns of a cell type, without the seed."""
    return [f.name for f in fields(cell_type) if f.name != "seed"]


def run_columns(cell_type) -> List[str]:
    return [*cell_keys(cell_type), "seed", *RESULT_COLUMNS]


def _check_grids(*grids: Sequence):
    if not all(grids):
        raise ContractError("sweep grids and seed list must be nonempty")


def sweep_cells(beta_grid: Sequence[float], gamma_grid: Sequence[float], seeds: Sequence[int]) -> List[SweepCell]:
    """Cells ordered lexicographically by (beta, gamma), then seed."""
    _check_grids(beta_grid, gamma_grid, seeds)
    return [SweepCell(b, g, s) for b, g, s in product(sorted(set(beta_grid)), sorted(set(gamma_grid)), seeds)]


def dims_cells(common_dims: Sequence[int], unique_dims: Sequence[int], seeds: Sequence[int]) -> List[DimsCell]:
    """Cells ordered lexicographically by (common_dim, unique_dim), then seed."""
    _check_grids(common_dims, unique_dims, seeds)
    if min(common_dims) < 1 or min(unique_dims) < 1:
        raise ContractError("latent widths in a structure sweep must be >= 1")
    return [DimsCell(int(c), int(u), s)
            for c, u, s in product(sorted(set(common_dims)), sorted(set(unique_dims)), seeds)]


def run_cell(dataset: MultiViewDataset, base: TrainConfig, cell: Cell) -> Dict:
    """
    Train and evaluate one cell; failures are returned as a row, never raised.

    The cell's grid values override `base`, and the dataset is split and
    standardized with the cell's seed.
    """
    row = {**asdict(cell), "status": "ok", "accuracy": None, "precision": None, "recall": None,
           "f1": None, "final_loss": None, "seconds": None, "error": ""}
    started = time.perf_counter()
    try:
        cfg = replace(base, **asdict(cell))
        prepared = prepare(dataset, cell.seed)
        model, history = fit(prepared, cfg)
        test_set = prepared.test_split() or prepared.train_split()
        scores = evaluate(model, test_set)
        row.update({
            "accuracy": scores.accuracy,
            "precision": scores.precision,
            "recall": scores.recall,
            "f1": scores.f1,
            "final_loss": history[-1].loss,
        })
    except CumiError as e:
        row.update({"status": "failed", "error": f"{type(e).__name__}: {e}"})
        logger.warning(f"Sweep cell {asdict(cell)} failed: {e}")
    row["seconds"] = time.perf_counter() - started
    return row


@dataclass
class SweepResult:
    runs: pd.DataFrame
    aggregate: pd.DataFrame

    @property
    def all_failed(self) -> bool:
        return bool((self.runs["status"] != "ok").all())


def _run_cells(dataset: MultiViewDataset, base: TrainConfig, cells: List[Cell],
               workers: Optional[int]) -> SweepResult:
    if dataset.labels is None:
        raise ContractError("a sweep needs a labelled dataset")
    workers = max(1, min(workers or config.CUMI_THREADS, config.CUMI_THREADS, len(cells)))
    cell_type = type(cells[0])

    if workers == 1:
        rows = [run_cell(dataset, base, cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, [dataset] * len(cells), [base] * len(cells), cells))

    runs = pd.DataFrame(rows, columns=run_columns(cell_type))
    aggregate = ReportGenerator.aggregate_runs(runs, cell_keys(cell_type), value="accuracy")
    failed = int((runs["status"] != "ok").sum())
    if failed:
        logger.warning(f"Sweep finished with {failed}/{len(cells)} failed cells")
    else:
        logger.info(f"Sweep finished: {len(cells)} cells ok")
    return SweepResult(runs=runs, aggregate=aggregate)


def run_sweep(dataset: MultiViewDataset, base: TrainConfig, beta_grid: Sequence[float],
              gamma_grid: Sequence[float], seeds: Sequence[int], workers: Optional[int] = None) -> SweepResult:
    """
    One training run per (beta, gamma, seed) cell.

    Args:
        dataset: labelled dataset (unsplit; each cell splits with its seed)
        base: config shared by every cell
        workers: process count, capped by CUMI_THREADS; 1 runs serially

    Returns:
        SweepResult with per-run rows and mean/std accuracy per (beta, gamma)
    """
    cells = sweep_cells(beta_grid, gamma_grid, seeds)
    logger.info(f"Sweep: {len(cells)} cells over {len(set(beta_grid))} betas x "
                f"{len(set(gamma_grid))} gammas x {len(seeds)} seeds")
    return _run_cells(dataset, base, cells, workers)


def run_dims_sweep(dataset: MultiViewDataset, base: TrainConfig, common_dims: Sequence[int],
                   unique_dims: Sequence[int], seeds: Sequence[int], workers: Optional[int] = None) -> SweepResult:
    """
    Model-structure sweep: one run per (common_dim, unique_dim, seed) cell at
    the beta and gamma of `base`, aggregated per latent-width pair.
    """
    cells = dims_cells(common_dims, unique_dims, seeds)
    logger.info(f"Structure sweep: {len(cells)} cells over {len(set(common_dims))} common x "
                f"{len(set(unique_dims))} unique widths x {len(seeds)} seeds")
    return _run_cells(dataset, base, cells, workers)


# ============================================================================
# ABLATION — full objective vs. TC-free variant
# ============================================================================

ABLATION_COLUMNS = ["variant", "beta", "gamma", "seed", "epochs", "seconds", "seconds_per_epoch",
                    "accuracy", "precision", "recall", "f1", "final_loss"]


def run_ablation(dataset: MultiViewDataset, cfg: TrainConfig) -> pd.DataFrame:
    """
    Train the full objective and the gamma = 0 variant on the same prepared
    data and seed; report wall time and held-out classification metrics.
    """
    prepared = prepare(dataset, cfg.seed)
    test_set = prepared.test_split() or prepared.train_split()
    rows = []
    for variant, variant_cfg in (("full", cfg), ("tc_free", replace(cfg, gamma=0.0))):
        started = time.perf_counter()
        model, history = fit(prepared, variant_cfg)
        seconds = time.perf_counter() - started
        scores = evaluate(model, test_set)
        rows.append({
            "variant": variant,
            "beta": variant_cfg.beta,
            "gamma": variant_cfg.gamma,
            "seed": variant_cfg.seed,
            "epochs": variant_cfg.epochs,
            "seconds": seconds,
            "seconds_per_epoch": seconds / variant_cfg.epochs,
            "accuracy": scores.accuracy,
            "precision": scores.precision,
            "recall": scores.recall,
            "f1": scores.f1,
            "final_loss": history[-1].loss,
        })
        logger.info(f"Ablation '{variant}': {seconds:.2f}s, accuracy {scores.accuracy:.3f}")
    return pd.DataFrame(rows, columns=ABLATION_COLUMNS)
