"""
Result tables, summaries and the files a run writes.
"""

from __future__ import annotations

import logging
import os
import platform
from abc import ABC, abstractmethod
from typing import Any, Sequence

import numpy as np
import pandas as pd
import yaml

import pycontamination
from pycontamination.utils import canonical_yaml, config_hash, format_number

logger = logging.getLogger(__name__)

KEY_COLUMNS = ["scenario", "fraction", "n_attackers"]
# columns that identify a row rather than measure something
ID_COLUMNS = [*KEY_COLUMNS, "repetition", "n_parties", "budget", "local_party", "loo_flagged_party"]
FORMATS = ("csv", "yaml")


class ResultFrame(ABC):
    def __init__(self, df: pd.DataFrame) -> None:
        self.df = df

    @abstractmethod
    def get_name(self) -> str:
        """
        Get the name of the table.

        Returns:
            str: The name, also used as the file stem.
        """
        pass

    @abstractmethod
    def get_columns_to_check(self) -> list[str]:
        """
        Get the metric columns of this table.

        Returns
            List of columns to check.
        """
        pass

    def get_df(self) -> pd.DataFrame:
        return self.df

    def log_dataframe(self) -> None:
        """
        Just print the dataframe in DEBUG level
        """
        logger.debug(f"{self.get_name()}:\n{self.df}")

    def log_dataframe_info(self) -> pd.DataFrame:
        """
        Log count, missing values and mean of every metric column in INFO level

        Returns
            Dataframe containing the results.
        """
        self.log_dataframe()
        results = {"column": [], "num_values": [], "num_missing": [], "mean": []}
        for column in self.get_columns_to_check():
            if column not in self.df.columns:
                logger.info(f"{column} not found in columns")
                continue
            values = pd.to_numeric(self.df[column], errors="coerce")
            results["column"].append(column)
            results["num_values"].append(int(values.notna().sum()))
            results["num_missing"].append(int(values.isna().sum()))
            results["mean"].append(values.mean())
        result_df = pd.DataFrame(results).set_index("column")
        logger.info(f"{self.get_name()} stats:\n{result_df}")
        return result_df

    def to_text_frame(self) -> pd.DataFrame:
        """Every cell printed the way it is written to disk"""
        return self.df.astype(object).map(format_number)

    def write_csv(self, out_dir: str) -> str:
        path = os.path.join(out_dir, f"{self.get_name()}.csv")
        try:
            self.to_text_frame().to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
        except OSError as e:
            raise OSError(f"cannot write results to '{path}': {e}") from e
        return path


class DetailResults(ResultFrame):
    """One row per (scenario, repetition)."""

    def __init__(self, rows: Sequence[dict[str, Any]]) -> None:
        if not rows:
            raise ValueError("no result rows to emit")
        columns: list[str] = []
        for row in rows:
            columns.extend(c for c in row if c not in columns)
        columns = [c for c in columns if c != "notes"] + ["notes"]
        super().__init__(pd.DataFrame(list(rows), columns=columns))

    def get_name(self) -> str:
        return "results"

    def get_columns_to_check(self) -> list[str]:
        return metric_columns(self.df)

    def write_yaml(self, out_dir: str) -> str:
        path = os.path.join(out_dir, f"{self.get_name()}.yaml")
        records = []
        for row in self.df.to_dict(orient="records"):
            records.append({k: _yaml_value(v) for k, v in row.items()})
        try:
            with open(path, "w", encoding="utf-8") as f:
                yaml.safe_dump(records, f, sort_keys=False)
        except OSError as e:
            raise OSError(f"cannot write results to '{path}': {e}") from e
        return path


class SummaryResults(ResultFrame):
    """Mean, min and max of every metric per scenario."""

    def __init__(self, detail: DetailResults) -> None:
        super().__init__(summarize(detail.get_df()))

    def get_name(self) -> str:
        return "summary"

    def get_columns_to_check(self) -> list[str]:
        return [c for c in self.df.columns if c.endswith("_mean")]


def _yaml_value(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return None if np.isnan(value) else float(format_number(value))
    return value


def metric_columns(df: pd.DataFrame) -> list[str]:
    return [
        c
        for c in df.columns
        if c not in ID_COLUMNS and pd.api.types.is_numeric_dtype(df[c]) and not pd.api.types.is_bool_dtype(df[c])
    ]


def summarize(df: pd.DataFrame) -> pd.DataFrame:
    """Aggregate repetitions: one row per scenario with metric_mean/min/max columns."""
    grouped = df.groupby(KEY_COLUMNS, sort=True)
    summary = grouped.size().rename("repetitions").to_frame()
    if "notes" in df.columns:
        if "multi_party_validation_accuracy" in df.columns:
            failed = df["multi_party_validation_accuracy"].isna()
        else:
            failed = pd.Series(True, index=df.index)
        summary["failed"] = failed.groupby([df[c] for c in KEY_COLUMNS]).sum().astype(int)
    for column in metric_columns(df):
        stats = grouped[column].agg(["mean", "min", "max"])
        for stat in ("mean", "min", "max"):
            summary[f"{column}_{stat}"] = stats[stat]
    return summary.reset_index()


def emit(rows: Sequence[dict[str, Any]], out_dir: str, fmt: str = "csv") -> dict[str, str]:
    """Write results.csv and summary.csv (plus results.yaml for the yaml format)."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    detail = DetailResults(rows)
    summary = SummaryResults(detail)
    detail.log_dataframe_info()
    summary.log_dataframe()
    paths = {"results": detail.write_csv(out_dir), "summary": summary.write_csv(out_dir)}
    if fmt == "yaml":
        paths["results_yaml"] = detail.write_yaml(out_dir)
    return paths


def read_results(path: str) -> pd.DataFrame:
    """Read an emitted results or summary CSV back."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Results file '{path}' does not exist.")
    return pd.read_csv(path).fillna({"notes": "", "released": ""})


def write_timings(outputs: Sequence[Any], out_dir: str) -> str:
    """Wall-clock seconds per scenario-repetition; kept apart so results.csv is reproducible."""
    path = os.path.join(out_dir, "timings.csv")
    df = pd.DataFrame(
        {
            "scenario": [o.scenario for o in outputs],
            "repetition": [o.repetition for o in outputs],
            "seconds": [o.seconds for o in outputs],
        }
    )
    try:
        df.astype(object).map(format_number).to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise OSError(f"cannot write timings to '{path}': {e}") from e
    return path


def versions() -> dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "pyyaml": yaml.__version__,
        "pycontamination": pycontamination.__version__,
    }


def write_manifest(cfg: Any, outputs: Sequence[Any], out_dir: str) -> str:
    """Config hash, master seed, derived seeds and package versions."""
    path = os.path.join(out_dir, "manifest.yaml")
    manifest = {
        "config_sha256": config_hash(cfg.config),
        "master_seed": cfg.seed,
        "seeds": [
            {"scenario": o.scenario, "repetition": o.repetition, "seed": str(o.seed)} for o in outputs
        ],
        "versions": versions(),
        "config": yaml.safe_load(canonical_yaml(cfg.config)),
    }
    try:
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(manifest, f, sort_keys=False)
    except OSError as e:
        raise OSError(f"cannot write manifest to '{path}': {e}") from e
    return path
