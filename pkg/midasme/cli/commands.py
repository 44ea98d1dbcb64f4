"""
CLI commands: simulate, diagnose and fit
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence

import pandas as pd

from midasme.cli.run_config import RunConfig, expand_grid
from midasme.services.design_service import MeVariances, align_mixed
from midasme.services.diagnostics_service import (
    coverage_check,
    naive_gradient_limit,
    plim_checks,
    plim_rate,
)
from midasme.services.estimation_service import CORRECTED, NAIVE, fit_corrected, fit_naive
from midasme.services.monte_carlo_service import MetricsRow, run_grid
from midasme.services.response_formatter import FLOAT_FORMAT, ResponseFormatter
from midasme.services.series_loader import SeriesLoader

logger = logging.getLogger(__name__)


def _write_frame(frame: pd.DataFrame, path: Path) -> None:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    logger.info(f"Wrote {len(frame)} rows to {path}")


def write_metrics_csv(rows: Sequence[MetricsRow], path) -> None:
    """
    Write metrics rows with the fixed header and 6 significant digits

    Args:
        rows: Non-empty list of MetricsRow
        path: Output file
    """
    if not rows:
        raise ValueError("no metrics rows to write")
    _write_frame(ResponseFormatter.metrics_frame(rows), Path(path))


def run_simulate(cfg: RunConfig) -> List[MetricsRow]:
    """Run the grid and write metrics plus figure data into out_dir"""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    grid = expand_grid(cfg)
    logger.info(f"Simulating {len(grid)} scenarios x {cfg.reps} replications on {cfg.n_threads} worker(s)")
    rows = run_grid(grid, threads=cfg.n_threads, bootstrap=cfg.bootstrap)

    write_metrics_csv(rows, out_dir / "metrics.csv")
    _write_frame(ResponseFormatter.figure_frame(rows, "T"), out_dir / "figdata_vs_T.csv")
    _write_frame(ResponseFormatter.figure_frame(rows, "jmax"), out_dir / "figdata_vs_jmax.csv")
    if cfg.bootstrap > 0:
        _write_frame(ResponseFormatter.metrics_se_frame(rows), out_dir / "metrics_se.csv")
    return rows


def run_diagnose(cfg: RunConfig) -> Dict[str, List[Dict[str, Any]]]:
    """
    Large-sample checks for every grid scenario

    Writes diagnostics_gradient.csv, diagnostics_plims.csv and
    diagnostics_coverage.csv into out_dir.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    gradient_rows: List[Dict[str, Any]] = []
    plim_rows: List[Dict[str, Any]] = []
    coverage_rows: List[Dict[str, Any]] = []

    for sc in expand_grid(cfg):
        params = sc.dgp_params()
        label = {
            "jmax": sc.jmax,
            "theta": sc.theta2,
            "sigma_u2": sc.sigma_u2,
            "sigma_v2": sc.sigma_v2,
        }
        logger.info(f"Diagnostics for [{sc.scenario_id}]")

        gradient = naive_gradient_limit(params, cfg.t_large, seed=sc.master_seed)
        gradient_rows += ResponseFormatter.gradient_frame(label, gradient)

        plims = plim_checks(params, cfg.t_large, seed=sc.master_seed)
        rate = None
        if cfg.rate_seeds > 0:
            seeds = [sc.master_seed + k for k in range(cfg.rate_seeds)]
            rate = plim_rate(params, cfg.t_large, seeds=seeds)
        plim_rows += ResponseFormatter.plim_frame(label, plims, rate)

        for estimator, method in ((CORRECTED, cfg.covariance), (NAIVE, cfg.covariance)):
            report = coverage_check(
                params, sc.reps, seed=sc.master_seed, estimator=estimator, method=method,
                search=sc.search, threads=cfg.n_threads,
            )
            coverage_rows += ResponseFormatter.coverage_frame(label, report)

    outputs = {
        "diagnostics_gradient.csv": gradient_rows,
        "diagnostics_plims.csv": plim_rows,
        "diagnostics_coverage.csv": coverage_rows,
    }
    for name, records in outputs.items():
        _write_frame(pd.DataFrame.from_records(records), out_dir / name)
    return outputs


def fit_csv(low_path: str, high_path: str, cfg: RunConfig) -> str:
    """
    Fit both estimators to CSV data and return the printed report

    Args:
        low_path: `period,value` file
        high_path: `period,subperiod,value` file
        cfg: Fit options (p, jmax, sigma_u2, sigma_v2, search, covariance)

    Returns:
        Report text
    """
    series, info = SeriesLoader.load_mixed(low_path, high_path)
    ds = align_mixed(series, cfg.p, cfg.jmax[0])
    me = MeVariances(sigma_u2=cfg.sigma_u2[0], sigma_v2=cfg.sigma_v2[0])

    corrected = fit_corrected(ds, me, cfg.search, covariance=cfg.covariance)
    naive = fit_naive(ds, cfg.search, covariance=cfg.covariance)
    if corrected.clamped_variance:
        logger.warning("Corrected error variance was floored; sigma_u2/sigma_v2 may be too large for this sample")
    return ResponseFormatter.format_fit_report(corrected, naive, info, ds.n_dropped)


def run_fit(cfg: RunConfig) -> str:
    return fit_csv(cfg.low_csv, cfg.high_csv, cfg)
