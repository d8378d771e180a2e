"""
CUMI Toolkit — Excel Summary Generator
Writes sweep and ablation results to a formatted workbook for review
alongside the CSV files.
"""

import logging
import math
import os
from typing import List, Optional

import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

logger = logging.getLogger(__name__)

HEADER_FILL = PatternFill("solid", fgColor="1F4E79")
HEADER_FONT = Font(name="Arial", bold=True, color="FFFFFF", size=10)
DATA_FONT = Font(name="Arial", size=10)
BEST_FILL = PatternFill("solid", fgColor="E2EFDA")
FAILED_FILL = PatternFill("solid", fgColor="FCE4EC")

MIN_COL_WIDTH = 10
MAX_COL_WIDTH = 40

THIN_BORDER = Border(
    left=Side(style="thin", color="D9D9D9"),
    right=Side(style="thin", color="D9D9D9"),
    top=Side(style="thin", color="D9D9D9"),
    bottom=Side(style="thin", color="D9D9D9"),
)


class ExcelReportGenerator:
    """Formats result tables into .xlsx sheets."""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        os.makedirs(output_dir, exist_ok=True)

    def generate_sweep_workbook(self, aggregate: pd.DataFrame, runs: pd.DataFrame,
                                filename: str = "sweep_summary.xlsx") -> Optional[str]:
        """
        Two sheets: per-cell aggregate (best mean accuracy highlighted) and
        per-run results (failed runs highlighted).

        Returns:
            File path of the workbook, or None on error
        """
        try:
            wb = Workbook()
            ws = wb.active
            ws.title = "Aggregate"
            best = None
            if "mean_accuracy" in aggregate and aggregate["mean_accuracy"].notna().any():
                best = int(aggregate["mean_accuracy"].fillna(-math.inf).to_numpy().argmax())
            self._write_table(ws, aggregate, highlight_rows=[best] if best is not None else [], fill=BEST_FILL)

            ws_runs = wb.create_sheet("Runs")
            failed = [i for i, s in enumerate(runs.get("status", [])) if s != "ok"]
            self._write_table(ws_runs, runs, highlight_rows=failed, fill=FAILED_FILL)

            filepath = os.path.join(self.output_dir, filename)
            wb.save(filepath)
            logger.info(f"Sweep workbook saved: {filepath} ({len(aggregate)} cells, {len(runs)} runs)")
            return filepath

        except Exception as e:
            logger.error(f"Error generating sweep workbook: {e}")
            return None

    def generate_ablation_workbook(self, ablation: pd.DataFrame,
                                   filename: str = "ablation.xlsx") -> Optional[str]:
        """One sheet comparing the full objective with the TC-free variant."""
        try:
            wb = Workbook()
            ws = wb.active
            ws.title = "Ablation"
            self._write_table(ws, ablation)

            filepath = os.path.join(self.output_dir, filename)
            wb.save(filepath)
            logger.info(f"Ablation workbook saved: {filepath}")
            return filepath

        except Exception as e:
            logger.error(f"Error generating ablation workbook: {e}")
            return None

    def _write_table(self, ws, frame: pd.DataFrame, highlight_rows: Optional[List[int]] = None,
                     fill: Optional[PatternFill] = None):
        headers = [str(c) for c in frame.columns]
        self._write_headers(ws, headers)
        highlight = set(highlight_rows or [])

        for i, record in enumerate(frame.itertuples(index=False)):
            row = i + 2
            for col, val in enumerate(record, start=1):
                cell = ws.cell(row=row, column=col, value=self._cell_value(val))
                cell.font = DATA_FONT
                cell.border = THIN_BORDER
                cell.alignment = Alignment(vertical="top")
                if i in highlight and fill is not None:
                    cell.fill = fill

        self._auto_filter(ws, len(headers), len(frame) + 1)

    def _write_headers(self, ws, headers: List[str]):
        """Write header row with formatting."""
        for col, header in enumerate(headers, start=1):
            cell = ws.cell(row=1, column=col, value=header)
            cell.font = HEADER_FONT
            cell.fill = HEADER_FILL
            cell.alignment = Alignment(horizontal="center", vertical="center", wrap_text=True)
            cell.border = THIN_BORDER
            width = min(max(len(header) + 4, MIN_COL_WIDTH), MAX_COL_WIDTH)
            ws.column_dimensions[get_column_letter(col)].width = width

        ws.row_dimensions[1].height = 30
        ws.freeze_panes = "A2"

    def _auto_filter(self, ws, n_cols: int, last_row: int):
        """Add auto-filter to header row."""
        if last_row >= 2 and n_cols >= 1:
            ws.auto_filter.ref = f"A1:{get_column_letter(n_cols)}{last_row}"

    @staticmethod
    def _cell_value(val):
        # openpyxl rejects numpy scalars and writes NaN as a broken number
        if hasattr(val, "item"):
            val = val.item()
        if isinstance(val, float) and math.isnan(val):
            return None
        return val
