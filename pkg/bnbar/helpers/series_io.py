from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .errors import SeriesFormatError

PathLike = Union[str, Path]


def _fmt(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _looks_numeric(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _parse_count(tok: str, line: int) -> int:
    s = tok.strip()
    if not s:
        raise SeriesFormatError("missing value", line=line)
    try:
        v = int(s)
    except ValueError:
        raise SeriesFormatError(f"not an integer count: {s!r}", line=line) from None
    if v < 0:
        raise SeriesFormatError(f"negative count: {v}", line=line)
    return v


def parse_series(text: str) -> np.ndarray:
    """
    Parse a count series.

    Accepted shapes:
      - header containing a `y` column (`t,y`, `t,y,lambda`, ...), one row per t
      - headerless, one integer per line
    Lines starting with '#' and blank lines are skipped.
    """
    y: List[int] = []
    y_col: Optional[int] = None
    n_cols: Optional[int] = None
    seen_first = False

    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if row[0].lstrip().startswith("#"):
            continue

        if not seen_first:
            seen_first = True
            names = [c.strip().lower() for c in row]
            if not _looks_numeric(names[0]):
                if "y" not in names:
                    raise SeriesFormatError(f"header must contain a 'y' column, got {row!r}", line=line_no)
                y_col = names.index("y")
                n_cols = len(names)
                continue
            if len(row) != 1:
                raise SeriesFormatError("headerless series must have a single column", line=line_no)
            y_col, n_cols = 0, 1

        if len(row) != n_cols:
            raise SeriesFormatError(f"expected {n_cols} column(s), got {len(row)}", line=line_no)
        y.append(_parse_count(row[y_col], line_no))

    if not y:
        raise SeriesFormatError("series is empty")
    return np.asarray(y, dtype=np.int64)


def read_series(path: PathLike) -> np.ndarray:
    return parse_series(Path(path).read_text(encoding="utf-8"))


def config_line(config: Dict[str, Any]) -> str:
    return "# config: " + json.dumps(config, sort_keys=True)


def write_table_csv(
    path: PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: Optional[Dict[str, Any]] = None,
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        if config is not None:
            f.write(config_line(config) + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_series_csv(
    path: PathLike,
    y: Sequence[int],
    lam: Optional[Sequence[float]] = None,
    lam_name: str = "lambda",
    config: Optional[Dict[str, Any]] = None,
) -> None:
    if lam is None:
        write_table_csv(path, ["t", "y"], ((t, int(v)) for t, v in enumerate(y)), config)
        return
    if len(lam) != len(y):
        raise ValueError("y and lambda must have equal length")
    rows = ((t, int(v), float(l)) for t, (v, l) in enumerate(zip(y, lam)))
    write_table_csv(path, ["t", "y", lam_name], rows, config)


def write_json(path: PathLike, obj: Dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
