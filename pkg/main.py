"""
CUMI Toolkit — Command-Line Entry Point

Commands:
1. synth         Synthetic two-view benchmark (signals, report, curves)
2. train         Train on a manifest dataset, evaluate on the held-out split
3. entropy       Matrix-based Renyi entropy of one CSV
4. sweep         (beta, gamma, seed) or (common_dim, unique_dim, seed) grid,
                 mean/std accuracy per cell
5. ablate        Full objective vs. TC-free variant (time and accuracy)
6. make-example  Write the bundled miniature dataset

Results go to stdout as JSON; logs go to stderr.
Exit codes: 0 ok, 2 input/validation error, 3 numeric error.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from typing import Callable, Dict, List, Optional

import config  # first: applies CUMI_THREADS before numpy loads

import numpy as np
from pythonjsonlogger import jsonlogger

from modules import data_io
from modules.errors import CumiError, NumericError
from modules.excel_generator import ExcelReportGenerator
from modules.info_estimators import KernelConfig, entropy_of_samples
from modules.report_generator import ReportGenerator, RunRecord
from modules.sweep import run_ablation, run_dims_sweep, run_sweep
from modules.synthetic import SyntheticConfig, run_synthetic
from modules.trainer import TrainConfig, evaluate, fit

logger = logging.getLogger("cumi")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"


def setup_logging(level: str = config.LOG_LEVEL, fmt: str = config.LOG_FORMAT):
    """Root logger to stderr, plain text or one JSON object per line."""
    handler = logging.StreamHandler(sys.stderr)
    if fmt == "json":
        handler.setFormatter(jsonlogger.JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level.upper())


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _records(frame) -> List[Dict]:
    """DataFrame rows as JSON-safe dicts (NaN becomes null)."""
    return json.loads(frame.to_json(orient="records"))


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        bandwidth=args.sigma if args.sigma is not None else config.BANDWIDTH,
        common_dim=args.common_dim,
        unique_dim=args.unique_dim,
    )


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_synth(args) -> Dict:
    """Synthetic benchmark: signals CSV, report JSON, epoch metrics, RunRecord."""
    settings = SyntheticConfig(
        seed=args.seed,
        n=args.samples,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch,
        beta=args.beta,
        gamma=args.gamma,
        alpha=args.alpha,
        bandwidth=args.bandwidth,
        mix=args.mix,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    record = RunRecord(command="synth", config={**settings.to_dict(), **settings.train_config().to_dict()},
                       seed=settings.seed)

    report = run_synthetic(settings, args.out_dir)
    record.add_output(os.path.join(args.out_dir, "synthetic_signals.csv"))
    record.add_output(os.path.join(args.out_dir, "synthetic_report.json"))
    record.add_output(ReportGenerator.write_epoch_metrics(
        report.history, 2, os.path.join(args.out_dir, "epoch_metrics.csv")))
    record.write(args.out_dir)

    return {
        "alignments": report.alignments,
        "cca_alignments": report.cca_alignments,
        "passed": report.passed(),
        "outputs": record.outputs,
    }


def cmd_train(args) -> Dict:
    """Train on a manifest, evaluate held-out; checkpoint + metrics + RunRecord."""
    cfg = _train_config(args)
    dataset = data_io.load_prepared(args.manifest, cfg.seed, args.test_fraction)
    os.makedirs(args.out_dir, exist_ok=True)
    record = RunRecord(command="train",
                       config={**cfg.to_dict(), "manifest": os.path.abspath(args.manifest),
                               "test_fraction": args.test_fraction},
                       seed=cfg.seed)

    model, history = fit(dataset, cfg)

    checkpoint = os.path.join(args.out_dir, "checkpoint.json")
    model.save(checkpoint)
    record.add_output(checkpoint)
    record.add_output(ReportGenerator.write_epoch_metrics(
        history, dataset.n_views, os.path.join(args.out_dir, "epoch_metrics.csv")))

    result: Dict = {"epochs": len(history), "final_loss": history[-1].loss}
    test_set = dataset.test_split()
    if test_set is not None and test_set.labels is not None:
        record.add_output(ReportGenerator.write_heldout_metrics(
            history, os.path.join(args.out_dir, "heldout_metrics.csv")))
        result["test"] = asdict(evaluate(model, test_set))
    record.write(args.out_dir)
    result["outputs"] = record.outputs
    return result


def cmd_entropy(args) -> Dict:
    """H_alpha of one sample matrix, in bits, with the bandwidth used."""
    x = data_io.read_matrix(args.csv, args.delimiter, args.header)
    bandwidth = "median" if args.sigma is None else args.sigma
    h, sigma = entropy_of_samples(x, KernelConfig(alpha=args.alpha, bandwidth=bandwidth))
    return {
        "entropy_bits": h,
        "bandwidth": sigma,
        "bandwidth_mode": "median" if args.sigma is None else "fixed",
        "alpha": args.alpha,
        "n_samples": int(x.shape[0]),
    }


def _cell_failure_exit(runs) -> int:
    errors = runs["error"].astype(str)
    return EXIT_NUMERIC if errors.str.startswith("NumericError").all() else EXIT_INPUT


def cmd_sweep(args) -> Dict:
    """
    Grid sweep; aggregate CSV, per-run CSV, workbook and RunRecord.

    Any latent-width grid switches from the (beta, gamma) grid to the
    model-structure grid at fixed --beta/--gamma.
    """
    base = _train_config(args)
    dataset = data_io.load(data_io.DatasetManifest.from_json(args.manifest))
    os.makedirs(args.out_dir, exist_ok=True)

    structure = args.structure or args.common_dim_grid is not None or args.unique_dim_grid is not None
    if structure:
        common_dims = args.common_dim_grid or list(config.STRUCTURE_GRID)
        unique_dims = args.unique_dim_grid or list(config.STRUCTURE_GRID)
        grids = {"common_dim_grid": common_dims, "unique_dim_grid": unique_dims}
    else:
        grids = {"beta_grid": args.beta_grid, "gamma_grid": args.gamma_grid}
    record = RunRecord(command="sweep",
                       config={**base.to_dict(), "manifest": os.path.abspath(args.manifest),
                               **grids, "seeds": args.seeds},
                       seed=None)

    if structure:
        result = run_dims_sweep(dataset, base, common_dims, unique_dims, args.seeds, workers=args.workers)
    else:
        result = run_sweep(dataset, base, args.beta_grid, args.gamma_grid, args.seeds, workers=args.workers)
    record.add_output(ReportGenerator.write_csv(result.aggregate, os.path.join(args.out_dir, "sweep_aggregate.csv")))
    record.add_output(ReportGenerator.write_csv(result.runs, os.path.join(args.out_dir, "sweep_runs.csv")))
    workbook = ExcelReportGenerator(args.out_dir).generate_sweep_workbook(result.aggregate, result.runs)
    if workbook:
        record.add_output(workbook)
    record.write(args.out_dir)

    payload = {
        "cells": len(result.runs),
        "failed": int((result.runs["status"] != "ok").sum()),
        "aggregate": _records(result.aggregate),
        "outputs": record.outputs,
    }
    if result.all_failed:
        payload["exit_code"] = _cell_failure_exit(result.runs)
    return payload


def cmd_ablate(args) -> Dict:
    """Full vs. gamma = 0 comparison; ablation CSV, workbook and RunRecord."""
    cfg = _train_config(args)
    dataset = data_io.load(data_io.DatasetManifest.from_json(args.manifest))
    os.makedirs(args.out_dir, exist_ok=True)
    record = RunRecord(command="ablate", config={**cfg.to_dict(), "manifest": os.path.abspath(args.manifest)},
                       seed=cfg.seed)

    table = run_ablation(dataset, cfg)
    record.add_output(ReportGenerator.write_csv(table, os.path.join(args.out_dir, "ablation.csv")))
    workbook = ExcelReportGenerator(args.out_dir).generate_ablation_workbook(table)
    if workbook:
        record.add_output(workbook)
    record.write(args.out_dir)
    return {"ablation": _records(table), "outputs": record.outputs}


def cmd_make_example(args) -> Dict:
    """Miniature 2-view, 3-class dataset plus manifest."""
    manifest = data_io.write_miniature_dataset(args.out_dir, args.seed)
    return {"manifest": manifest}


# ============================================================================
# ARGUMENTS
# ============================================================================

def _add_train_flags(p: argparse.ArgumentParser, synthetic: bool = False):
    p.add_argument("--alpha", type=float, default=config.ALPHA, help="entropy order (>0, != 1)")
    p.add_argument("--beta", type=float, default=config.SYNTH_BETA if synthetic else config.BETA)
    p.add_argument("--gamma", type=float, default=config.SYNTH_GAMMA if synthetic else config.GAMMA)
    p.add_argument("--lr", type=float, default=config.SYNTH_LR if synthetic else config.LEARNING_RATE)
    p.add_argument("--batch", type=int, default=config.SYNTH_BATCH_SIZE if synthetic else config.BATCH_SIZE)
    p.add_argument("--epochs", type=int, default=config.SYNTH_EPOCHS if synthetic else config.EPOCHS)
    p.add_argument("--seed", type=int, default=config.SEED)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cumi", description="Common and unique information toolkit")
    parser.add_argument("--log-level", default=config.LOG_LEVEL)
    parser.add_argument("--log-format", choices=["text", "json"], default=config.LOG_FORMAT)
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthetic two-view benchmark")
    _add_train_flags(p, synthetic=True)
    p.add_argument("--samples", type=int, default=config.SYNTH_SAMPLES)
    p.add_argument("--bandwidth", default=config.SYNTH_BANDWIDTH, help="kernel width, or 'median'")
    p.add_argument("--mix", action="store_true", help="pre-mix each view with a random invertible matrix")
    p.add_argument("--out-dir", default=os.path.join(config.OUTPUT_DIR, "synth"))
    p.set_defaults(handler=cmd_synth)

    for name, handler, help_text in (
        ("train", cmd_train, "train on a manifest dataset"),
        ("sweep", cmd_sweep, "grid sweep over beta/gamma or latent widths, and seeds"),
        ("ablate", cmd_ablate, "full objective vs. TC-free variant"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True)
        _add_train_flags(p)
        p.add_argument("--sigma", type=float, default=None, help="fixed kernel bandwidth (default: median)")
        p.add_argument("--common-dim", type=int, default=None)
        p.add_argument("--unique-dim", type=int, default=None)
        p.add_argument("--out-dir", default=os.path.join(config.OUTPUT_DIR, name))
        p.set_defaults(handler=handler)
        if name == "train":
            p.add_argument("--test-fraction", type=float, default=config.TEST_FRACTION)
        if name == "sweep":
            p.add_argument("--beta-grid", type=_float_list, default=list(config.SWEEP_GRID))
            p.add_argument("--gamma-grid", type=_float_list, default=list(config.SWEEP_GRID))
            p.add_argument("--common-dim-grid", type=_int_list, default=None)
            p.add_argument("--unique-dim-grid", type=_int_list, default=None)
            p.add_argument("--structure", action="store_true",
                           help="sweep latent widths over the default grid instead of beta/gamma")
            p.add_argument("--seeds", type=_int_list, default=[config.SEED])
            p.add_argument("--workers", type=int, default=None, help="process count (capped by CUMI_THREADS)")

    p = sub.add_parser("entropy", help="Renyi entropy of a CSV sample matrix")
    p.add_argument("--csv", required=True)
    p.add_argument("--alpha", type=float, default=config.ALPHA)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--sigma", type=float, default=None)
    group.add_argument("--median", action="store_true", help="median-heuristic bandwidth (default)")
    p.add_argument("--delimiter", default=config.CSV_DELIMITER)
    p.add_argument("--header", action="store_true", help="first row is a header")
    p.set_defaults(handler=cmd_entropy)

    p = sub.add_parser("make-example", help="write the miniature example dataset")
    p.add_argument("--out-dir", default=os.path.join(config.OUTPUT_DIR, "example"))
    p.add_argument("--seed", type=int, default=config.SEED)
    p.set_defaults(handler=cmd_make_example)

    return parser


# ============================================================================
# ENTRY POINT
# ============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_format)
    handler: Callable[..., Dict] = args.handler

    try:
        result = handler(args)
    except NumericError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_NUMERIC
    except (CumiError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_INPUT

    exit_code = result.pop("exit_code", EXIT_OK)
    print(json.dumps(result, default=_jsonable))
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
