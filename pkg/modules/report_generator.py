"""
CUMI Toolkit — Report Generator
Writes plot-ready CSV curves, JSON reports and the RunRecord that lets any
command be reproduced from its output directory.
"""

import json
import logging
import os
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

import config
from modules.trainer import EpochMetrics, metrics_header

logger = logging.getLogger(__name__)

HELDOUT_HEADER = ["epoch", "acc", "prec", "rec", "f1"]


def _jsonable(value: Any):
    """json.dump fallback for numpy scalars and arrays."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunRecord:
    """Everything needed to rerun a command: config, defaults, outputs."""
    command: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    version: str = config.VERSION
    started_at: str = field(default_factory=utc_now)
    finished_at: Optional[str] = None
    outputs: List[str] = field(default_factory=list)
    defaults: Dict[str, Any] = field(default_factory=lambda: {
        "eig_solver": config.EIG_SOLVER,
        "eig_clamp": config.EIG_CLAMP,
        "jacobi_tol": config.JACOBI_TOL,
        "jacobi_max_sweeps": config.JACOBI_MAX_SWEEPS,
        "threads": config.CUMI_THREADS,
        "test_fraction": config.TEST_FRACTION,
        "diag_sample_cap": config.DIAG_SAMPLE_CAP,
        "init": "glorot-uniform weights, zero biases, per-role seeded streams",
        "optimizer": "plain SGD",
        "donor_policy": "uniform_per_batch",
        "curves": "per epoch on the training split",
        "evaluation_donor": "view 1",
    })
    environment: Dict[str, str] = field(default_factory=lambda: {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
    })

    def add_output(self, path: str):
        if path not in self.outputs:
            self.outputs.append(path)

    def write(self, out_dir: str) -> str:
        """Finish the record and write run_record.json (listed in its own outputs)."""
        path = os.path.join(out_dir, "run_record.json")
        self.add_output(path)
        self.finished_at = utc_now()
        ReportGenerator.write_json(asdict(self), path)
        return path


class ReportGenerator:
    """CSV/JSON writers for curves, metrics and run records."""

    @staticmethod
    def write_json(payload: Dict, path: str) -> str:
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, default=_jsonable)
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def write_csv(frame: pd.DataFrame, path: str) -> str:
        frame.to_csv(path, index=False)
        logger.info(f"Wrote {path} ({len(frame)} rows)")
        return path

    @staticmethod
    def epoch_frame(history: List[EpochMetrics], n_views: int) -> pd.DataFrame:
        """One row per epoch in the fixed metrics header order."""
        return pd.DataFrame([m.row() for m in history], columns=metrics_header(n_views))

    @staticmethod
    def heldout_frame(history: List[EpochMetrics]) -> pd.DataFrame:
        rows = [
            {"epoch": m.epoch, "acc": m.heldout.accuracy, "prec": m.heldout.precision,
             "rec": m.heldout.recall, "f1": m.heldout.f1}
            for m in history if m.heldout is not None
        ]
        return pd.DataFrame(rows, columns=HELDOUT_HEADER)

    @classmethod
    def write_epoch_metrics(cls, history: List[EpochMetrics], n_views: int, path: str) -> str:
        return cls.write_csv(cls.epoch_frame(history, n_views), path)

    @classmethod
    def write_heldout_metrics(cls, history: List[EpochMetrics], path: str) -> str:
        return cls.write_csv(cls.heldout_frame(history), path)

    @classmethod
    def write_signals_csv(cls, signals: pd.DataFrame, path: str) -> str:
        return cls.write_csv(signals, path)

    @staticmethod
    def aggregate_runs(runs: pd.DataFrame, keys: List[str], value: str = "accuracy") -> pd.DataFrame:
        """
        Mean and std of `value` per key cell, over successful runs.

        Args:
            runs: one row per run with the key columns, `value` and `status`
            keys: grouping columns, also the sort order

        Returns:
            DataFrame with keys, n_runs, n_failed, mean_<value>, std_<value>
        """
        rows = []
        for cell, group in runs.groupby(keys, sort=True):
            cell = cell if isinstance(cell, tuple) else (cell,)
            ok = group[group["status"] == "ok"][value].to_numpy(dtype=np.float64)
            row = dict(zip(keys, cell))
            row.update({
                "n_runs": int(ok.size),
                "n_failed": int(len(group) - ok.size),
                f"mean_{value}": float(ok.mean()) if ok.size else float("nan"),
                f"std_{value}": float(ok.std()) if ok.size else float("nan"),
            })
            rows.append(row)
        return pd.DataFrame(rows, columns=[*keys, "n_runs", "n_failed", f"mean_{value}", f"std_{value}"])
