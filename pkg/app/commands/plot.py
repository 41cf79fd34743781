"""
plot: SVG line plots of trajectory or loss tables
"""

import argparse
from pathlib import Path
from typing import Any, Dict, List

from app.services.plot_service import PlotService
from app.services.storage import StorageService
from app.utils.reports import success_report


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("plot", help="render CSV columns as an SVG line plot")
    parser.add_argument("files", nargs="+", help="CSV tables; several files are overlaid")
    parser.add_argument("--columns", default="", help="comma-separated column names")
    parser.add_argument("--output", required=True, help="SVG file to write")
    parser.add_argument("--logy", action="store_true", help="logarithmic y axis (loss curves)")
    parser.add_argument("--title", help="figure title")
    parser.set_defaults(func=run, command="plot")


def table_labels(paths: List[Path]) -> List[str]:
    """File stems, prefixed with the parent directory when stems collide."""
    stems = [p.stem for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{p.parent.name}/{p.stem}" for p in paths]


def plot(files: List[str], columns: List[str], output, logy: bool = False, title=None) -> Dict[str, Any]:
    paths = [Path(f) for f in files]
    tables = list(zip(table_labels(paths), [StorageService.read_table(p) for p in paths]))
    out = PlotService.line_plot(tables, columns, output, logy=logy, title=title)
    return success_report({"output": out, "curves": len(tables) * len(columns)}, "Plot written")


def run(args: argparse.Namespace) -> Dict[str, Any]:
    columns = [c.strip() for c in args.columns.split(",") if c.strip()]
    report = plot(args.files, columns, args.output, logy=args.logy, title=args.title)
    print(f"✅ Wrote {args.output}")
    return report
