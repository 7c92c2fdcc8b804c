from abc import ABC, abstractmethod


class ItemPath(ABC):
    def __init__(self) -> None:
        pass

    @abstractmethod
    def path(self) -> str:
        return ""


class RunPath(ItemPath):
    """Output locations of one experiment.

    Runs are identified by (row, column, seed) style ids, laid out as
    `{folder}/{experiment}/{version}/{row}/{column}/{seed}/`.
    """

    def __init__(
        self,
        experiment: str,
        version: str = "0.1.0",
        folder: str | None = None,
        zero_pad_numbers: bool = True,
    ):
        self.experiment = experiment
        self.version = version.replace(".", "-")
        self.folder = folder
        self.zero_pad_numbers = zero_pad_numbers
        self._folder_prefix = (
            f"{self.experiment}/{self.version}"
            if self.folder is None
            else f"{self.folder}/{self.experiment}/{self.version}"
        )

    def _format_item_id(
        self, item_id: list[str | int] | tuple[str | int] | str, join_str="/"
    ) -> str:
        """Zero pads to 3 characters anything numeric-like and joins list/tuple
        items with `join_str`. A string is a single part. Slashes inside a part
        become dashes."""
        item_parts = item_id if isinstance(item_id, list | tuple) else [item_id]
        item_parts = [
            str(i).zfill(3) if str(i).isnumeric() and self.zero_pad_numbers else str(i)
            for i in item_parts
        ]
        return join_str.join(part.replace("/", "-") for part in item_parts)

    def _folder(self, item_id) -> str:
        return f"{self._folder_prefix}/{self._format_item_id(item_id)}"

    def basename(self, item_id) -> str:
        return f"{self.experiment}_{self._format_item_id(item_id, join_str='_')}"

    def path(self, item_id, asset_name=None, ext=".csv") -> str:
        return (
            f"{self._folder(item_id)}/{self.basename(item_id)}_{asset_name}{ext}"
            if asset_name is not None
            else f"{self._folder(item_id)}/{self.basename(item_id)}{ext}"
        )

    def history_path(self, item_id) -> str:
        return self.path(item_id, "history", ".csv")

    def result_path(self, item_id) -> str:
        return self.path(item_id, "result", ".json")

    def summary_path(self) -> str:
        return f"{self._folder_prefix}/{self.experiment}_summary.json"

    def log_path(self) -> str:
        return f"{self._folder_prefix}/logs/{self.experiment}_log.csv"
