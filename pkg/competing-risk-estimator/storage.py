"""
Storage module for samples, chains and study tables.

- Sample CSV (`time,event`) read with line-numbered diagnostics
- Table CSV via pandas, numbers at 6 significant digits
- JSON summaries
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from model import CensoredSample, Event, Observation

logger = logging.getLogger(__name__)

SAMPLE_HEADER = ["time", "event"]
FLOAT_FORMAT = "%.6g"

PathLike = Union[str, Path]


class SampleFormatError(ValueError):
    """Malformed sample file; `line` is 1-based (0 when the file as a whole is at fault)."""

    def __init__(self, path: PathLike, line: int, message: str):
        self.path = str(path)
        self.line = line
        location = f"{self.path}:{line}" if line else self.path
        super().__init__(f"{location}: {message}")


def format_number(value: float) -> str:
    return FLOAT_FORMAT % value


def read_sample_csv(path: PathLike) -> CensoredSample:
    """Parse a `time,event` CSV; event is 1 for a failure, 0 for a censored unit."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Sample file not found: {path}")
    observations: List[Observation] = []
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise SampleFormatError(path, 1, "file is empty")
        if [h.strip().lower() for h in header] != SAMPLE_HEADER:
            raise SampleFormatError(path, 1, f"expected header 'time,event', got {','.join(header)!r}")
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise SampleFormatError(path, line, f"expected 2 fields, got {len(row)}")
            try:
                time = float(row[0])
            except ValueError:
                raise SampleFormatError(path, line, f"time {row[0]!r} is not a number") from None
            if not math.isfinite(time) or time < 0:
                raise SampleFormatError(path, line, f"time must be finite and >= 0, got {row[0]!r}")
            flag = row[1].strip()
            if flag not in ("0", "1"):
                raise SampleFormatError(path, line, f"event must be 0 or 1, got {row[1]!r}")
            observations.append(Observation(time, Event(int(flag))))
    if not observations:
        raise SampleFormatError(path, 0, "no observations")
    if not any(o.is_failure for o in observations):
        raise SampleFormatError(path, 0, "sample has no failure (event=1) rows")
    times = [o.time for o in observations]
    events = [int(o.event) for o in observations]
    return CensoredSample.from_arrays(times, events)


def write_sample_csv(path: PathLike, sample: CensoredSample) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SAMPLE_HEADER)
        for obs in sample.observations:
            writer.writerow([format_number(obs.time), int(obs.event)])
    logger.info(f"Wrote {len(sample)} observations to {path}")
    return path


def write_table_csv(path: PathLike, table: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


class Storage:
    """
    Output directory handler for study runs.

    Files are named after the study and the `{n}_{censor_pct}` cell; nothing
    time-dependent goes into them, so identical runs give identical bytes.
    """

    def __init__(self, output_dir: str = "output"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _get_file_path(self, filename: str) -> Path:
        return self.output_dir / filename

    def reset_files(self, filenames: Optional[List[str]] = None) -> None:
        """Remove output files; all regular files when `filenames` is None."""
        if filenames is None:
            targets = [p for p in self.output_dir.iterdir() if p.is_file()]
        else:
            targets = [self._get_file_path(name) for name in filenames]
        for path in targets:
            if path.exists() and path.is_file():
                path.unlink()

    def write_json(self, filename: str, data: Any) -> Path:
        filepath = self._get_file_path(filename)
        with open(filepath, "w") as f:
            json.dump(data, f, indent=2, default=str)
        logger.info(f"Wrote JSON to {filepath}")
        return filepath

    def write_table(self, filename: str, table: pd.DataFrame) -> Path:
        filepath = write_table_csv(self._get_file_path(filename), table)
        logger.info(f"Wrote {len(table)} rows to {filepath}")
        return filepath

    def write_study(self, result: Any) -> Dict[str, Path]:
        """
        Write every table of a StudyResult plus its JSON summary.

        Tables are `{study}_{table}_{cell}.csv`, or `{study}_{cell}.csv` for the table
        named after the study. The summary holds no timestamp, so reruns are byte-identical.
        """
        cell = result.config.cell_name
        written: Dict[str, Path] = {}
        for name, table in result.tables.items():
            stem = result.study if name == result.study else f"{result.study}_{name}"
            written[name] = self.write_table(f"{stem}_{cell}.csv", table)
        summary = result.to_json()
        summary["files"] = {name: p.name for name, p in written.items()}
        written["summary"] = self.write_json(f"{result.study}_{cell}_summary.json", summary)
        return written
