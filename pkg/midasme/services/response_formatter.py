"""
Response formatter to turn fits, metrics and diagnostics into tables and reports
"""
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from midasme.services.diagnostics_service import CoverageReport, GradientReport, PlimRateReport, PlimReport
from midasme.services.estimation_service import FitResult
from midasme.services.monte_carlo_service import MetricsRow

METRICS_HEADER = [
    "T", "jmax", "theta", "sigma_u2", "sigma_v2", "estimator",
    "NMedB", "trMedSEM", "medB_theta", "medB_sigma2",
    "clamp_rate", "failure_rate", "reps", "seed",
]

METRIC_COLUMNS = {
    "nmedb": "NMedB",
    "trmedsem": "trMedSEM",
    "medb_theta": "medB_theta",
    "medb_sigma2": "medB_sigma2",
}

FLOAT_FORMAT = "%.6g"


class ResponseFormatter:
    """Formats estimation and simulation results into standardized tables"""

    @staticmethod
    def metrics_frame(rows: Sequence[MetricsRow]) -> pd.DataFrame:
        """One line per (scenario, estimator) with the metrics CSV header"""
        records = []
        for row in rows:
            record = {
                "T": row.T,
                "jmax": row.jmax,
                "theta": row.theta,
                "sigma_u2": row.sigma_u2,
                "sigma_v2": row.sigma_v2,
                "estimator": row.estimator,
                "clamp_rate": row.clamp_rate,
                "failure_rate": row.failure_rate,
                "reps": row.reps,
                "seed": row.seed,
            }
            for attr, column in METRIC_COLUMNS.items():
                record[column] = getattr(row, attr)
            records.append(record)
        return pd.DataFrame.from_records(records, columns=METRICS_HEADER)

    @staticmethod
    def metrics_se_frame(rows: Sequence[MetricsRow]) -> pd.DataFrame:
        """Bootstrap Monte Carlo standard errors of each metric"""
        columns = ["T", "jmax", "theta", "sigma_u2", "sigma_v2", "estimator"] + [
            f"{c}_se" for c in METRIC_COLUMNS.values()
        ]
        records = []
        for row in rows:
            record = {c: getattr(row, c) for c in ("T", "jmax", "theta", "sigma_u2", "sigma_v2", "estimator")}
            for attr, column in METRIC_COLUMNS.items():
                record[f"{column}_se"] = row.standard_errors.get(attr, np.nan)
            records.append(record)
        return pd.DataFrame.from_records(records, columns=columns)

    @staticmethod
    def figure_frame(rows: Sequence[MetricsRow], axis: str) -> pd.DataFrame:
        """
        Metrics arranged along one grid axis

        Args:
            rows: Metrics rows of a grid run
            axis: "T" or "jmax", the axis that varies fastest

        Returns:
            DataFrame sorted so each curve is a contiguous block
        """
        frame = ResponseFormatter.metrics_frame(rows)
        fixed = [c for c in ("jmax", "T") if c != axis]
        keys = ["estimator", "sigma_u2", "sigma_v2", "theta"] + fixed + [axis]
        columns = keys + list(METRIC_COLUMNS.values())
        return frame[columns].sort_values(keys, kind="mergesort").reset_index(drop=True)

    @staticmethod
    def gradient_frame(label: Dict[str, Any], report: GradientReport) -> List[Dict[str, Any]]:
        records = []
        for c in report.components:
            records.append({
                **label,
                "T": report.T,
                "component": c.name,
                "empirical": c.empirical,
                "predicted": c.predicted,
                "std_error": c.std_error,
                "z": c.z_score,
                "passed": report.passed,
            })
        return records

    @staticmethod
    def plim_frame(label: Dict[str, Any], report: PlimReport,
                   rate: Optional[PlimRateReport] = None) -> List[Dict[str, Any]]:
        records = []
        for check in report.checks:
            records.append({
                **label,
                "T": report.T,
                "check": check.name,
                "abs_deviation": check.abs_deviation,
                "rel_deviation": check.rel_deviation,
                "max_z": check.max_z,
                "rate_ratio": rate.ratio.get(check.name, np.nan) if rate else np.nan,
                "passed": check.passed,
            })
        return records

    @staticmethod
    def coverage_frame(label: Dict[str, Any], report: CoverageReport) -> List[Dict[str, Any]]:
        return [
            {
                **label,
                "T": report.T,
                "estimator": report.estimator,
                "method": report.method,
                "coordinate": name,
                "coverage": rate,
                "n_used": report.n_used,
                "failures": report.failures,
            }
            for name, rate in zip(report.coordinates, report.coverage)
        ]

    @staticmethod
    def _format_fit(fit: FitResult) -> List[str]:
        names = ["a"] + [f"rho{j}" for j in range(1, fit.p + 1)] + ["b", "theta", "sigma_eps2"]
        errors = fit.standard_errors
        lines = [f"[{fit.estimator}] objective={fit.objective:.10g}"
                 + ("  (variance floored)" if fit.clamped_variance else "")]
        for i, (name, value) in enumerate(zip(names, fit.gamma)):
            se = f"{errors[i]:.6g}" if errors is not None else "n/a"
            lines.append(f"  {name:<11s} {value:>14.6g}   se {se}")
        return lines

    @staticmethod
    def format_fit_report(
        corrected: FitResult,
        naive: FitResult,
        info: Dict[str, Any],
        n_dropped: int = 0,
    ) -> str:
        """
        Human readable fit report printed in fit mode

        Args:
            corrected: Corrected-score fit
            naive: Naive fit on the same design
            info: Ingestion metadata
            n_dropped: Rows short of T-p because the high-frequency lags reach
                before the first observation

        Returns:
            Multi-line report
        """
        lines = [
            "ADL-MIDAS fit",
            f"  data      {info.get('low_path', '?')} / {info.get('high_path', '?')}",
            f"  periods   {corrected.n_periods} (m={info.get('m', '?')}), "
            f"rows used {corrected.n_rows} of T-p={corrected.n_periods - corrected.p}, "
            f"dropped {n_dropped} for high-frequency history",
            f"  p={corrected.p}  jmax={corrected.jmax}  "
            f"sigma_u2={corrected.me.sigma_u2:g}  sigma_v2={corrected.me.sigma_v2:g}",
            f"  covariance {corrected.covariance_method or 'none'}",
            "",
        ]
        lines += ResponseFormatter._format_fit(corrected)
        lines.append("")
        lines += ResponseFormatter._format_fit(naive)
        lines.append("")
        lines.append("Lag weights c(j; theta_hat)")
        lines.append("  j   corrected     naive")
        for j, (wc, wn) in enumerate(zip(corrected.weights.weights, naive.weights.weights)):
            lines.append(f"  {j:<3d} {wc:<12.6f} {wn:.6f}")
        return "\n".join(lines) + "\n"
