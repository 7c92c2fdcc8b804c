from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from logging import Logger, getLogger
from time import perf_counter

import numpy as np
from tqdm import tqdm

from .exceptions import NoResultError
from .loaders import Loader
from .processors import Processor
from .writers import Writer

TaskID = tuple


@dataclass
class RunRecord:
    """Outcome of one (row, column, seed) run, kept small enough for JSON."""

    run_id: str
    row: str
    column: str
    seed: int
    status: str
    iterations: int | None = None
    values: list[float] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    paths: list[str] = field(default_factory=list)
    error: str = ""
    result: object = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return dict(
            run_id=self.run_id,
            row=self.row,
            column=self.column,
            seed=self.seed,
            status=self.status,
            iterations=self.iterations,
            values=self.values,
            residual_norms=self.residual_norms,
            wall_time=self.wall_time,
            paths=self.paths,
            error=self.error,
        )


class Task(ABC):
    def __init__(
        self,
        task_id: TaskID,
        loader: Loader,
        processor: Processor,
        writer: Writer,
        logger: Logger,
    ):
        self.id = task_id
        self.loader = loader
        self.processor = processor
        self.writer = writer
        self.logger = logger

    @abstractmethod
    def run(self):
        pass


class SolveTask(Task):
    """Load the pencil, solve for one seed and write the run's files, logging
    failures by the stage they happened in."""

    def __init__(
        self,
        id: TaskID,
        seed: int,
        loader: Loader,
        processor: Processor,
        writer: Writer,
        logger: Logger = getLogger(),
    ):
        super().__init__(id, loader, processor, writer, logger)
        self.seed = seed

    @property
    def run_id(self) -> str:
        return "/".join(str(part) for part in self.id)

    def run(self) -> RunRecord:
        start = perf_counter()
        try:
            pencil = self.loader.load()
        except Exception as e:
            self.logger.error([self.run_id, "load error", e])
            raise e

        try:
            result = self.processor.process(pencil, self.seed)
        except Exception as e:
            self.logger.error([self.run_id, "processor error", e])
            raise e

        if result is None:
            self.logger.error([self.run_id, "no output from processor"])
            raise NoResultError()
        wall_time = perf_counter() - start

        try:
            paths = self.writer.write(result, self.id)
        except Exception as e:
            self.logger.error([self.run_id, "write error", e])
            raise e

        self.logger.info([self.run_id, "complete", paths])
        summary = result.summary()
        return RunRecord(
            run_id=self.run_id,
            row=str(self.id[0]),
            column=str(self.id[1]),
            seed=self.seed,
            status=result.status,
            iterations=result.iterations,
            values=np.atleast_1d(summary["values"]).tolist(),
            residual_norms=np.atleast_1d(summary["residual_norms"]).tolist(),
            wall_time=wall_time,
            paths=list(paths),
            result=result,
        )


class MultiSolveTask:
    """Runs independent solve tasks, optionally on a thread pool. Records come
    back in task order whatever the number of jobs."""

    def __init__(
        self,
        tasks: list[SolveTask],
        logger: Logger = getLogger(),
        fail_on_error: bool = True,
        jobs: int = 1,
        progress: bool = False,
    ):
        self.tasks = tasks
        self.logger = logger
        self.fail_on_error = fail_on_error
        self.jobs = jobs
        self.progress = progress

    def _run_one(self, task: SolveTask) -> RunRecord:
        try:
            return task.run()
        except Exception as e:
            if self.fail_on_error:
                raise e
            self.logger.error([task.run_id, "error", [], e])
            return RunRecord(
                run_id=task.run_id,
                row=str(task.id[0]),
                column=str(task.id[1]),
                seed=task.seed,
                status="error",
                error=f"{type(e).__name__}: {e}",
            )

    def run(self) -> list[RunRecord]:
        with tqdm(total=len(self.tasks), disable=not self.progress) as bar:
            if self.jobs == 1:
                records = []
                for task in self.tasks:
                    records.append(self._run_one(task))
                    bar.update()
                return records

            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                futures = [executor.submit(self._run_one, task) for task in self.tasks]
                records = []
                for future in futures:
                    records.append(future.result())
                    bar.update()
                return records
