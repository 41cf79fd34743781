"""
Fan-out of one command over several configs or bath frequencies
"""

import argparse
import copy
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.utils.errors import ConfigValidationError, ForkPINNError
from app.utils.reports import error_report, success_report
from config.settings import config

logger = logging.getLogger(__name__)


def parse_gammas(text: Optional[str]) -> List[float]:
    if not text:
        return []
    try:
        gammas = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigValidationError(f"--sweep-gamma expects comma-separated numbers, got '{text}'")
    if not gammas or any(g <= 0 for g in gammas):
        raise ConfigValidationError("--sweep-gamma needs positive values")
    return gammas


def expand_jobs(args: argparse.Namespace) -> List[argparse.Namespace]:
    """One namespace per (config, gamma) pair, each with its own output directory."""
    base_out = Path(args.out or config.OUTPUT_DIR)
    paths = args.config or [None]
    gammas = parse_gammas(args.sweep_gamma) or [None]

    jobs = []
    for path in paths:
        for gamma in gammas:
            job = copy.copy(args)
            job.sweep = False
            job.sweep_gamma = None
            job.config = [path] if path else []
            job.override = list(args.override)
            parts = [Path(path).stem] if path else [args.command]
            if gamma is not None:
                job.override.append(f"system.gamma={gamma}")
                parts.append(f"gamma_{gamma:g}")
            job.out = str(base_out / "_".join(parts))
            jobs.append(job)
    return jobs


def run_job(job: argparse.Namespace) -> Dict[str, Any]:
    try:
        return job.func(job)
    except ForkPINNError as e:
        return error_report(str(e), type(e).__name__, e.exit_code)


def run_sweep(args: argparse.Namespace) -> Dict[str, Any]:
    jobs = expand_jobs(args)
    print(f"🚀 Sweeping {len(jobs)} {args.command} job(s) over {config.SWEEP_WORKERS} worker(s)")
    with ProcessPoolExecutor(max_workers=max(1, config.SWEEP_WORKERS)) as pool:
        reports = list(pool.map(run_job, jobs))

    failed = [r for r in reports if not r["success"]]
    for job, report in zip(jobs, reports):
        status = "✅" if report["success"] else "❌"
        print(f"{status} {job.out}: {report['message']}")
    if failed:
        worst = max(r.get("exit_code", 2) for r in failed)
        report = error_report(f"{len(failed)} of {len(jobs)} sweep jobs failed", "SweepFailed", worst)
        report["data"] = {"jobs": reports}
        return report
    return success_report({"jobs": reports}, f"{len(jobs)} sweep jobs finished")
