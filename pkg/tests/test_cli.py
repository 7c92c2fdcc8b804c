import json

import numpy as np
import pytest

from plhr_tools.cli import EXIT_CONVERGED, EXIT_PARTIAL, EXIT_USAGE, main
from plhr_tools.operators import fd_laplacian_spectrum

SMALL_SOLVE = [
    "solve", "--problem", "fd", "--omega", "4", "--sigma", "100.3",
    "--solver", "plhr", "--prec", "dense_abs", "--tol", "1e-8",
]


def test_no_arguments():
    assert main([]) == EXIT_USAGE


def test_unknown_flag():
    assert main(["solve", "--bogus"]) == EXIT_USAGE


def test_help():
    assert main(["--help"]) == EXIT_CONVERGED


def test_spectrum(capsys):
    code = main(["spectrum", "--problem", "fd", "--omega", "7", "--near", "400", "--count", "10"])
    assert code == EXIT_CONVERGED
    printed = [float(line) for line in capsys.readouterr().out.splitlines()]
    expected = fd_laplacian_spectrum(7).nearest(400.0, 10)
    assert np.array_equal(printed, expected)


def test_solve(capsys, tmp_path):
    code = main(SMALL_SOLVE + ["--out", str(tmp_path)])
    assert code == EXIT_CONVERGED
    out = capsys.readouterr().out
    assert "plhr/dense_abs/t_harmonic" in out
    summary_path = out.splitlines()[-1].split(" ", 1)[1]
    with open(summary_path) as src:
        assert json.load(src)["converged"]


def test_solve_not_converged(tmp_path):
    code = main(SMALL_SOLVE + ["--maxit", "0", "--out", str(tmp_path)])
    assert code == EXIT_PARTIAL


def test_solve_config_file_with_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(dict(
        problem="fd", omega=4, sigma=100.3, solver="bgd", preconditioner="dense_abs",
        k=2, maxit=1000,
    )))
    code = main(["solve", "--config", str(path), "--maxit", "0", "--out", str(tmp_path)])
    assert code == EXIT_PARTIAL


def test_solve_configuration_error(tmp_path):
    code = main(["solve", "--problem", "fe", "--prec", "av_mg", "--out", str(tmp_path)])
    assert code == EXIT_USAGE


def test_matrix_market_spectrum_needs_a_file():
    assert main(["spectrum", "--problem", "matrix-market", "--near", "1"]) == EXIT_USAGE


@pytest.mark.slow
def test_bench_table3(tmp_path):
    code = main(["bench", "table3", "--seeds", "0", "--omega", "6", "7", "--out", str(tmp_path)])
    assert code == EXIT_CONVERGED
