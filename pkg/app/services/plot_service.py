"""
Deterministic SVG line plots of trajectory and loss tables
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from app.utils.errors import ConfigValidationError  # noqa: E402

logger = logging.getLogger(__name__)

# fixed salt and no date keep the SVG byte-identical between runs
SVG_RC = {"svg.hashsalt": "forkpinn", "svg.fonttype": "path", "path.simplify": False}
LINESTYLES = ["-", "--", ":", "-."]


class PlotService:
    """Service class for rendering tables as figures."""

    @staticmethod
    def x_column(frame: pd.DataFrame) -> str:
        for name in ("t", "epoch"):
            if name in frame.columns:
                return name
        return frame.columns[0]

    @staticmethod
    def check_columns(tables: Sequence[Tuple[str, pd.DataFrame]], columns: Sequence[str]) -> None:
        if not columns:
            raise ConfigValidationError("No columns requested for plotting")
        for label, frame in tables:
            missing = [c for c in columns if c not in frame.columns]
            if missing:
                available = ", ".join(str(c) for c in frame.columns)
                raise ConfigValidationError(
                    f"{label}: missing column(s) {', '.join(missing)}; available: {available}")

    @staticmethod
    def line_plot(tables: Sequence[Tuple[str, pd.DataFrame]], columns: Sequence[str], output,
                  logy: bool = False, title: Optional[str] = None) -> Path:
        """One curve per (table, column); several tables overlay on the same axes."""
        PlotService.check_columns(tables, columns)
        output = Path(output)
        with plt.rc_context(SVG_RC):
            fig, ax = plt.subplots(figsize=(6.4, 4.0))
            try:
                x_label = None
                for k, (label, frame) in enumerate(tables):
                    x_label = PlotService.x_column(frame)
                    for column in columns:
                        name = f"{label}: {column}" if len(tables) > 1 else column
                        ax.plot(frame[x_label].to_numpy(), frame[column].to_numpy(),
                                linestyle=LINESTYLES[k % len(LINESTYLES)], label=name)
                if logy:
                    ax.set_yscale("log")
                ax.set_xlabel(x_label or "")
                if title:
                    ax.set_title(title)
                ax.legend()
                fig.tight_layout()
                fig.savefig(output, format="svg", metadata={"Date": None})
            except OSError as e:
                raise ConfigValidationError(f"Cannot write plot {output}: {e}")
            finally:
                plt.close(fig)
        logger.debug("wrote %s", output)
        return output
