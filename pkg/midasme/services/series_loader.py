"""
Mixed-frequency CSV ingestion
Reads a low-frequency `period,value` file and a high-frequency
`period,subperiod,value` file into a MixedSeries, and writes them back
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from midasme.core.exceptions import (
    MalformedCsvError,
    MissingValueError,
    PeriodMismatchError,
    RaggedSubperiodsError,
)
from midasme.services.design_service import MixedSeries

logger = logging.getLogger(__name__)

LOW_COLUMNS = ["period", "value"]
HIGH_COLUMNS = ["period", "subperiod", "value"]
MISSING_TOKENS = {"", "na", "nan", "null", "none"}

# header is line 1
FIRST_DATA_LINE = 2


class SeriesLoader:
    """Loads and saves the CSV representation of a MixedSeries"""

    @staticmethod
    def _read(path: str, columns: List[str]) -> pd.DataFrame:
        file_path = Path(path)
        try:
            df = pd.read_csv(file_path, dtype=str, keep_default_na=False, skipinitialspace=True)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise MalformedCsvError(str(e).strip(), path) from e

        df.columns = [str(c).strip().lower() for c in df.columns]
        missing = [c for c in columns if c not in df.columns]
        if missing:
            raise MalformedCsvError(f"missing column(s) {', '.join(missing)}; expected {','.join(columns)}", path)
        if df.empty:
            raise MalformedCsvError("no data rows", path)
        return df[columns]

    @staticmethod
    def _parse_values(df: pd.DataFrame, path: str) -> np.ndarray:
        values = np.empty(len(df))
        for i, raw in enumerate(df["value"].tolist()):
            text = str(raw).strip()
            row = i + FIRST_DATA_LINE
            if text.lower() in MISSING_TOKENS:
                raise MissingValueError("missing value", path, row)
            try:
                values[i] = float(text)
            except ValueError:
                raise MalformedCsvError(f"non-numeric value '{text}'", path, row)
            if not np.isfinite(values[i]):
                raise MissingValueError(f"non-finite value '{text}'", path, row)
        return values

    @staticmethod
    def load_low_frequency(path: str) -> Tuple[List[str], np.ndarray]:
        """
        Read a `period,value` file

        Returns:
            (period labels in file order, values)
        """
        df = SeriesLoader._read(path, LOW_COLUMNS)
        periods = [str(p).strip() for p in df["period"].tolist()]
        seen: Dict[str, int] = {}
        for i, label in enumerate(periods):
            if label in seen:
                raise PeriodMismatchError(f"period '{label}' repeated", path, i + FIRST_DATA_LINE)
            seen[label] = i
        return periods, SeriesLoader._parse_values(df, path)

    @staticmethod
    def load_high_frequency(path: str) -> Tuple[List[str], np.ndarray, int]:
        """
        Read a `period,subperiod,value` file

        Every period must carry the same set of subperiods. Values are
        ordered by period (first appearance) then subperiod.

        Returns:
            (period labels, values of length m * periods, m)
        """
        df = SeriesLoader._read(path, HIGH_COLUMNS)
        values = SeriesLoader._parse_values(df, path)
        periods = [str(p).strip() for p in df["period"].tolist()]

        subperiods = np.empty(len(df), dtype=int)
        for i, raw in enumerate(df["subperiod"].tolist()):
            try:
                subperiods[i] = int(str(raw).strip())
            except ValueError:
                raise MalformedCsvError(f"subperiod '{raw}' is not an integer", path, i + FIRST_DATA_LINE)

        order: List[str] = []
        rows_by_period: Dict[str, List[int]] = {}
        for i, label in enumerate(periods):
            if label not in rows_by_period:
                order.append(label)
                rows_by_period[label] = []
            rows_by_period[label].append(i)

        reference = None
        ordered_values: List[np.ndarray] = []
        for label in order:
            rows = rows_by_period[label]
            subs = subperiods[rows]
            if len(set(subs.tolist())) != len(subs):
                raise RaggedSubperiodsError(f"period '{label}' repeats a subperiod", path,
                                            rows[0] + FIRST_DATA_LINE)
            key = sorted(subs.tolist())
            if reference is None:
                reference = key
            elif key != reference:
                raise RaggedSubperiodsError(
                    f"period '{label}' has subperiods {key}, expected {reference}", path,
                    rows[0] + FIRST_DATA_LINE,
                )
            ranks = np.argsort(subs, kind="stable")
            ordered_values.append(values[rows][ranks])

        m = len(reference)
        return order, np.concatenate(ordered_values), m

    @staticmethod
    def load_mixed(low_path: str, high_path: str) -> Tuple[MixedSeries, Dict[str, Any]]:
        """
        Load both files and check that they cover the same periods

        Args:
            low_path: `period,value` CSV
            high_path: `period,subperiod,value` CSV

        Returns:
            (MixedSeries, ingestion info)
        """
        low_periods, y = SeriesLoader.load_low_frequency(low_path)
        high_periods, x, m = SeriesLoader.load_high_frequency(high_path)

        if low_periods != high_periods:
            low_set, high_set = set(low_periods), set(high_periods)
            only_low = [p for p in low_periods if p not in high_set]
            only_high = [p for p in high_periods if p not in low_set]
            if only_low or only_high:
                detail = f"only in low-frequency file: {only_low[:5]}; only in high-frequency file: {only_high[:5]}"
            else:
                detail = "periods appear in a different order"
            raise PeriodMismatchError(detail, f"{low_path} / {high_path}")

        info = {
            "low_path": str(low_path),
            "high_path": str(high_path),
            "periods": len(low_periods),
            "m": m,
            "first_period": low_periods[0],
            "last_period": low_periods[-1],
        }
        logger.info(f"Loaded {info['periods']} periods with m={m} from {low_path} and {high_path}")
        return MixedSeries(y_obs=y, x_obs=x, m=m), info

    @staticmethod
    def save_mixed(series: MixedSeries, low_path: str, high_path: str) -> None:
        """Write a MixedSeries as the two CSV files load_mixed reads"""
        T, m = series.n_periods, series.m
        periods = np.arange(1, T + 1)
        pd.DataFrame({"period": periods, "value": series.y_obs}).to_csv(
            low_path, index=False, lineterminator="\n"
        )
        pd.DataFrame({
            "period": np.repeat(periods, m),
            "subperiod": np.tile(np.arange(1, m + 1), T),
            "value": series.x_obs,
        }).to_csv(high_path, index=False, lineterminator="\n")
        logger.info(f"Wrote {T} periods to {low_path} and {high_path}")
