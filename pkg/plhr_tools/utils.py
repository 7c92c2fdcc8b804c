import json
import platform
from importlib.metadata import PackageNotFoundError, version
from logging import INFO, Formatter, Logger, StreamHandler, getLogger
from pathlib import Path
from typing import Dict, Union

import numpy as np
from pandas import DataFrame

# Relative size below which an eigenvalue of a shifted matrix is pseudo-inverted
PINV_THRESHOLD = 1e-12


def get_logger(prefix: str, name: str) -> Logger:
    """Set up a simple logger"""
    console = StreamHandler()
    time_format = "%Y-%m-%d %H:%M:%S"
    console.setFormatter(
        Formatter(
            fmt=f"%(asctime)s %(levelname)s ({prefix}):  %(message)s",
            datefmt=time_format,
        )
    )

    log = getLogger(name)
    if not log.handlers:
        log.addHandler(console)
    log.setLevel(INFO)
    return log


def environment_stamp() -> dict:
    """Versions of the interpreter and the numerical stack, for run reports."""

    def _version(package: str) -> str | None:
        try:
            return version(package)
        except PackageNotFoundError:
            return None

    return dict(
        python=platform.python_version(),
        platform=platform.platform(),
        numpy=np.__version__,
        scipy=_version("scipy"),
        xarray=_version("xarray"),
        pandas=_version("pandas"),
        plhr_tools=_version("plhr-tools"),
    )


def initial_block(n: int, k: int, seed: int, dtype=np.float64) -> np.ndarray:
    """Seeded standard Gaussian starting block of shape (n, k)."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, k)).astype(dtype)


def column_norms(X: np.ndarray) -> np.ndarray:
    return np.linalg.norm(X, axis=0)


def check_finite(X: np.ndarray, name: str = "input") -> None:
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")


def to_jsonable(value):
    """Recursively convert numpy containers and scalars into plain python."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_to_local_storage(
    d: Union[DataFrame, Dict, str],
    path: Union[str, Path],
    write_args: Dict = dict(),
    overwrite: bool = True,
) -> None:
    if isinstance(path, str):
        path = Path(path)

    # Create the target folder if it doesn't exist
    path.parent.mkdir(parents=True, exist_ok=True)

    if path.exists() and not overwrite:
        return

    if isinstance(d, DataFrame):
        d.to_csv(path, index=False, **write_args)
    elif isinstance(d, dict):
        with open(path, "w") as dst:
            dst.write(json.dumps(to_jsonable(d), indent=4, **write_args))
    elif isinstance(d, str):
        with open(path, "w") as dst:
            dst.write(d)
    else:
        raise ValueError("You can only write a pandas DataFrame, a dict, or string")
