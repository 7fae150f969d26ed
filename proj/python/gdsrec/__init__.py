"""Python interface to the gdsrec engine."""

import csv
from pathlib import Path

from ._core import (
    ConfigError,
    DataError,
    Dataset,
    DivergenceError,
    Model,
    __version__,
    config_keys,
    default_config,
    difference_level,
    prepare,
    ranking_metrics,
    rating_metrics,
    run_command,
    synthetic,
)


def write_synthetic(directory, **kwargs):
    """Writes ratings.csv and trust.csv from the synthetic generator and returns their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ratings, trust = synthetic(**kwargs)
    rpath, tpath = directory / "ratings.csv", directory / "trust.csv"
    with open(rpath, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["userid", "productid", "rating"])
        w.writerows(ratings)
    with open(tpath, "w", newline="") as f:
        csv.writer(f).writerows(trust)
    return rpath, tpath


__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "DivergenceError",
    "Model",
    "__version__",
    "config_keys",
    "default_config",
    "difference_level",
    "prepare",
    "ranking_metrics",
    "rating_metrics",
    "run_command",
    "synthetic",
    "write_synthetic",
]
