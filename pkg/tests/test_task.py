from logging import getLogger

import pytest

from plhr_tools.exceptions import NoResultError
from plhr_tools.loaders import FdLoader
from plhr_tools.namers import RunPath
from plhr_tools.processors import EigenProcessor, Processor
from plhr_tools.task import MultiSolveTask, SolveTask
from plhr_tools.writers import RunWriter, Writer

SIGMA = 50.3


class FailingProcessor(Processor):
    def process(self, pencil, seed):
        raise ArithmeticError(f"seed {seed} failed")


class EmptyProcessor(Processor):
    def process(self, pencil, seed):
        return None


class NullWriter(Writer):
    def write(self, data, item_id):
        return []


@pytest.fixture()
def processor():
    return EigenProcessor(
        "bplhr_real",
        dict(sigma=SIGMA, k=2, tol=1e-8, maxit=200),
        dict(name="dense_abs", sigma=SIGMA),
    )


def test_solve_task(processor, tmp_path):
    writer = RunWriter(RunPath("unit", folder=str(tmp_path)))
    record = SolveTask(("row", "50.3", 0), 0, FdLoader(3), processor, writer).run()
    assert record.converged
    assert record.run_id == "row/50.3/0"
    assert len(record.values) == 2
    assert len(record.paths) == 2
    assert record.to_dict()["iterations"] == record.iterations


def test_processor_error_is_logged_and_raised(caplog):
    task = SolveTask(("row", "col", 0), 0, FdLoader(3), FailingProcessor(), NullWriter(), getLogger("unit"))
    with pytest.raises(ArithmeticError):
        task.run()
    assert "processor error" in caplog.text


def test_missing_result():
    task = SolveTask(("row", "col", 0), 0, FdLoader(3), EmptyProcessor(), NullWriter())
    with pytest.raises(NoResultError):
        task.run()


def test_multi_task_records_errors():
    tasks = [
        SolveTask(("row", "col", seed), seed, FdLoader(3), FailingProcessor(), NullWriter())
        for seed in range(3)
    ]
    records = MultiSolveTask(tasks, fail_on_error=False).run()
    assert [record.status for record in records] == ["error"] * 3
    assert records[1].error == "ArithmeticError: seed 1 failed"


def test_multi_task_fails_fast():
    task = SolveTask(("row", "col", 0), 0, FdLoader(3), FailingProcessor(), NullWriter())
    with pytest.raises(ArithmeticError):
        MultiSolveTask([task]).run()


def test_parallel_records_keep_task_order(processor):
    loader = FdLoader(3)
    tasks = [
        SolveTask(("row", "col", seed), seed, loader, processor, NullWriter())
        for seed in range(4)
    ]
    serial = MultiSolveTask(tasks).run()
    parallel = MultiSolveTask(tasks, jobs=3).run()
    assert [r.seed for r in parallel] == [0, 1, 2, 3]
    assert [r.values for r in parallel] == [r.values for r in serial]
    assert [r.iterations for r in parallel] == [r.iterations for r in serial]
