from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable

from pandas import DataFrame
from xarray import Dataset

from .namers import RunPath
from .utils import write_to_local_storage

HISTORY_COLUMNS = ["iter", "pair_index", "residual_norm", "rayleigh_quotient"]
LOG_COLUMNS = ["run_id", "row", "column", "seed", "status", "iterations", "wall_time", "error"]


class Writer(ABC):
    """The base abstract class for writing."""

    @abstractmethod
    def write(self, data, item_id) -> str | list[str]:
        pass


def history_frame(history: Dataset) -> DataFrame:
    """One row per pair per iteration, ordered by iteration then pair."""
    if "pair_index" not in history.dims:
        return history.to_dataframe().reset_index()
    frame = (
        history[["residual_norm", "rayleigh_quotient"]].to_dataframe().reset_index()
    )
    return frame[HISTORY_COLUMNS]


def emit_history(result, path: str | Path) -> str:
    """Write the iteration history of a result (or a bare history Dataset) as
    CSV. Floats are written in shortest round-trip form."""
    history = result if isinstance(result, Dataset) else result.history
    write_to_local_storage(history_frame(history), path)
    return str(path)


def run_log_frame(records: list) -> DataFrame:
    """One line per run with its status, for a quick look at a sweep."""
    return DataFrame([record.to_dict() for record in records], columns=LOG_COLUMNS)


class RunWriter(Writer):
    """Writes the history CSV and the result JSON of one run."""

    def __init__(
        self,
        itempath: RunPath,
        write_history: bool = True,
        write_function: Callable = write_to_local_storage,
        **kwargs,
    ):
        self._itempath = itempath
        self._write_history = write_history
        self._write_function = write_function
        self._kwargs = kwargs

    def write(self, result, item_id) -> list[str]:
        paths = []
        if self._write_history:
            path = self._itempath.history_path(item_id)
            self._write_function(history_frame(result.history), path, **self._kwargs)
            paths.append(path)

        path = self._itempath.result_path(item_id)
        self._write_function(result.summary(), path, **self._kwargs)
        paths.append(path)
        return paths


class SummaryJsonWriter(Writer):
    def __init__(
        self,
        itempath: RunPath,
        write_function: Callable = write_to_local_storage,
        **kwargs,
    ):
        self._itempath = itempath
        self._write_function = write_function
        self._kwargs = kwargs

    def write(self, summary: dict, item_id=None) -> str:
        path = self._itempath.summary_path()
        self._write_function(summary, path, **self._kwargs)
        return path
