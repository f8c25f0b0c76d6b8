"""
Result file writing: CSV tables and JSON summaries, written atomically.
"""
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# Configuration
FLOAT_FORMAT = "%.10g"


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


class ResultWriter:
    """
    Writes result files into one output directory.

    Every file is written to a temporary sibling first and renamed into
    place, so readers never see a partial file.
    """

    def __init__(self, out_dir: Path):
        """
        Initialize the writer.

        Args:
            out_dir: Directory where result files will be saved
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name: str, table: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> Path:
        """
        Save a table as CSV with a header row and '.' decimals.

        Args:
            name: File name inside the output directory
            table: Data to write
            columns: Optional column subset (and order)

        Returns:
            Path of the written file
        """
        if columns is not None:
            table = table.loc[:, list(columns)]
        text = table.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        path = self._save(name, text)
        logger.info("CSV saved: %s (%d rows)", path, len(table))
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n"
        path = self._save(name, text)
        logger.info("JSON saved: %s", path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self._save(name, text)

    def _save(self, name: str, text: str) -> Path:
        """
        Atomically write text to ``out_dir / name``.

        Raises:
            OSError: If the file cannot be written
        """
        target = self.out_dir / name
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, target)
        except Exception as e:
            logger.error("Failed to save %s: %s", target, str(e))
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return target


def get_result_writer(out_dir: Path) -> ResultWriter:
    """
    Factory function to get a ResultWriter instance.

    Args:
        out_dir: Directory where result files will be saved

    Returns:
        ResultWriter instance
    """
    return ResultWriter(out_dir)
