"""
Read-count matrices on disk.

One CSV per matrix: header row of sample ids, first column of locus ids, one row per locus.
Errors name the offending data row and sample column (both 1-based).
"""
import logging
import os
import re
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from src.errors import CountsParseError, EmptyInputError, HeaderMismatchError
from src.model import ReadCountData

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
_FIELDS_PATTERN = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def read_matrix(path: str) -> pd.DataFrame:
    """Raw string cells, index = locus ids, columns = sample ids."""
    if not os.path.exists(path):
        raise CountsParseError("file does not exist", path)
    try:
        frame = pd.read_csv(path, dtype=str, index_col=0, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise EmptyInputError("file is empty", path)
    except pd.errors.ParserError as e:
        match = _FIELDS_PATTERN.search(str(e))
        if match:
            expected, line, seen = (int(g) for g in match.groups())
            raise CountsParseError(f"ragged row: expected {expected - 1} samples, saw {seen - 1}", path, row=line - 1)
        raise CountsParseError(f"cannot parse: {e}", path)
    if frame.shape[0] == 0 or frame.shape[1] == 0:
        raise EmptyInputError("file has no loci or no samples", path)
    return frame


def _parse_counts(frame: pd.DataFrame, path: str) -> np.ndarray:
    values = np.empty(frame.shape, dtype=float)
    for i, row in enumerate(frame.itertuples(index=False), start=1):
        for j, cell in enumerate(row, start=1):
            if cell is None or (isinstance(cell, float) and np.isnan(cell)):
                raise CountsParseError("ragged row: missing value", path, row=i, column=j)
            text = str(cell).strip()
            try:
                value = float(text)
            except ValueError:
                raise CountsParseError(f"not a number: {text!r}", path, row=i, column=j)
            if not np.isfinite(value) or value < 0:
                raise CountsParseError(f"counts must be nonnegative, got {text}", path, row=i, column=j)
            if value != np.floor(value):
                raise CountsParseError(f"counts must be integers, got {text}", path, row=i, column=j)
            values[i - 1, j - 1] = value
    return values


def load_counts(path_N: str, path_n: str) -> ReadCountData:
    """Loads and cross-validates the total and variant read matrices."""
    frame_N = read_matrix(path_N)
    frame_n = read_matrix(path_n)
    if list(frame_N.columns) != list(frame_n.columns):
        raise HeaderMismatchError("sample headers differ from those of " + path_N, path_n)
    if list(frame_N.index) != list(frame_n.index):
        raise HeaderMismatchError("locus ids differ from those of " + path_N, path_n)
    N = _parse_counts(frame_N, path_N)
    n = _parse_counts(frame_n, path_n)
    excess = np.argwhere(n > N)
    if excess.size:
        s, t = excess[0]
        raise CountsParseError(f"variant reads {n[s, t]:g} exceed total reads {N[s, t]:g}",
                               path_n, row=int(s) + 1, column=int(t) + 1)
    logger.info("loaded %d loci x %d samples from %s", N.shape[0], N.shape[1], path_N)
    return ReadCountData(N=N, n=n, locus_ids=[str(i) for i in frame_N.index],
                         sample_ids=[str(c) for c in frame_N.columns])


def write_matrix(path: str, values: np.ndarray, row_ids: Sequence[str], column_ids: Sequence[str],
                 index_label: str = "locus", float_format: Optional[str] = FLOAT_FORMAT) -> None:
    frame = pd.DataFrame(np.asarray(values), index=list(row_ids), columns=list(column_ids))
    frame.to_csv(path, index_label=index_label, float_format=float_format, lineterminator="\n")


def write_counts(data: ReadCountData, out_dir: str) -> List[str]:
    """Writes N.csv and n.csv in the format load_counts reads."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, "N.csv"), os.path.join(out_dir, "n.csv")]
    write_matrix(paths[0], data.N.astype(np.int64), data.locus_ids, data.sample_ids)
    write_matrix(paths[1], data.n.astype(np.int64), data.locus_ids, data.sample_ids)
    return paths


def read_numeric(path: str) -> pd.DataFrame:
    """A previously written matrix as floats."""
    return read_matrix(path).astype(float)
