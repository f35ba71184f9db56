from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from model.dims import INDICATOR_NAMES
from utility.errors import VNValidationError, VNValueError

SURVEY_YEARS: Tuple[int, ...] = (2007, 2015, 2020)
ANCHOR_COLUMNS: List[str] = ["district", "district_id", "indicator_id", "year", "value"]

# Reported gaps are truncated to this many entries
_MAX_LISTED_GAPS = 10


@dataclass
class AnchorTable:
    """Survey values per district, indicator and survey year.

    Attributes:
        districts: District names, position = district index
        values: Percentages of shape (D, N, len(SURVEY_YEARS))
    """

    districts: List[str]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (len(self.districts), len(INDICATOR_NAMES), len(SURVEY_YEARS))
        if self.values.shape != expected:
            raise VNValueError(f"AnchorTable values must have shape {expected}, got {self.values.shape}")
        if np.any(~np.isfinite(self.values)) or np.any((self.values < 0) | (self.values > 100)):
            raise VNValueError("AnchorTable values must lie in [0, 100]")

    @property
    def district_count(self) -> int:
        return len(self.districts)

    @property
    def record_count(self) -> int:
        return int(self.values.size)

    def records(self) -> List[Tuple[str, int, int, int, float]]:
        """(district, district_id, indicator_id, year, value) in file order."""
        rows = []
        for d, name in enumerate(self.districts):
            for i in range(len(INDICATOR_NAMES)):
                for y, year in enumerate(SURVEY_YEARS):
                    rows.append((name, d, i, year, float(self.values[d, i, y])))
        return rows


def _integer_column(frame: pd.DataFrame, column: str, path: str) -> pd.Series:
    parsed = pd.to_numeric(frame[column], errors="coerce")
    bad = parsed.isna() | (parsed != parsed.round())
    if bad.any():
        first = int(np.flatnonzero(bad.to_numpy())[0])
        raise VNValidationError(
            f"{column} must be an integer, got {frame[column].iloc[first]!r}",
            path,
            first + 2,
        )
    return parsed.astype(np.int64)


def load_anchors(path: Union[str, Path]) -> AnchorTable:
    """Read and validate an anchor CSV.

    Row numbers in error messages are file line numbers (the header is line 1).

    Args:
        path: CSV with header ``district,district_id,indicator_id,year,value``

    Returns:
        Complete AnchorTable, districts indexed by ``district_id``

    Raises:
        VNValidationError: On a malformed header, unparsable or out-of-range
            field, duplicate or missing (district, indicator, year) triple
    """
    path_str = str(path)
    if not Path(path).is_file():
        raise VNValidationError("anchor file does not exist", path_str)
    try:
        frame = pd.read_csv(
            path, dtype=str, keep_default_na=False, encoding="utf-8", skipinitialspace=True
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise VNValidationError(f"cannot parse anchor file: {e}", path_str)

    if list(frame.columns) != ANCHOR_COLUMNS:
        raise VNValidationError(
            f"header must be {','.join(ANCHOR_COLUMNS)}, got {','.join(frame.columns)}",
            path_str,
            1,
        )
    if frame.empty:
        raise VNValidationError("anchor file has no records", path_str)

    district_ids = _integer_column(frame, "district_id", path_str)
    indicator_ids = _integer_column(frame, "indicator_id", path_str)
    years = _integer_column(frame, "year", path_str)
    values = pd.to_numeric(frame["value"], errors="coerce")
    names = frame["district"].str.strip()

    for row in range(len(frame)):
        line = row + 2
        value = values.iloc[row]
        if not names.iloc[row]:
            raise VNValidationError("empty district name", path_str, line)
        if pd.isna(value) or not np.isfinite(value):
            raise VNValidationError(f"value {frame['value'].iloc[row]!r} is not a number", path_str, line)
        if not 0.0 <= value <= 100.0:
            raise VNValidationError(f"value {value} outside [0, 100]", path_str, line)
        if not 0 <= indicator_ids.iloc[row] < len(INDICATOR_NAMES):
            raise VNValidationError(
                f"indicator_id {indicator_ids.iloc[row]} outside [0, {len(INDICATOR_NAMES)})",
                path_str,
                line,
            )
        if years.iloc[row] not in SURVEY_YEARS:
            raise VNValidationError(f"year {years.iloc[row]} is not one of {SURVEY_YEARS}", path_str, line)
        if district_ids.iloc[row] < 0:
            raise VNValidationError(f"district_id {district_ids.iloc[row]} is negative", path_str, line)

    keys = pd.DataFrame({"d": district_ids, "i": indicator_ids, "y": years})
    duplicated = keys.duplicated().to_numpy()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated)[0])
        raise VNValidationError(
            f"duplicate record for district_id={district_ids.iloc[row]}, "
            f"indicator_id={indicator_ids.iloc[row]}, year={years.iloc[row]}",
            path_str,
            row + 2,
        )

    district_names: dict = {}
    for row in range(len(frame)):
        d, name = int(district_ids.iloc[row]), names.iloc[row]
        if district_names.setdefault(d, name) != name:
            raise VNValidationError(
                f"district_id {d} is named both {district_names[d]!r} and {name!r}",
                path_str,
                row + 2,
            )
    if len(set(district_names.values())) != len(district_names):
        raise VNValidationError("the same district name is used with two district_id values", path_str)
    district_count = max(district_names) + 1
    missing_ids = sorted(set(range(district_count)) - set(district_names))
    if missing_ids:
        raise VNValidationError(f"district_id values are not contiguous, missing {missing_ids}", path_str)

    table = np.full((district_count, len(INDICATOR_NAMES), len(SURVEY_YEARS)), np.nan)
    year_slot = {year: k for k, year in enumerate(SURVEY_YEARS)}
    for row in range(len(frame)):
        table[district_ids.iloc[row], indicator_ids.iloc[row], year_slot[int(years.iloc[row])]] = values.iloc[row]

    gaps = np.argwhere(np.isnan(table))
    if gaps.size:
        listed = [
            f"({district_names[int(d)]}, {INDICATOR_NAMES[int(i)]}, {SURVEY_YEARS[int(y)]})"
            for d, i, y in gaps[:_MAX_LISTED_GAPS]
        ]
        more = f" and {len(gaps) - _MAX_LISTED_GAPS} more" if len(gaps) > _MAX_LISTED_GAPS else ""
        raise VNValidationError(f"missing anchor records: {', '.join(listed)}{more}", path_str)

    return AnchorTable([district_names[d] for d in range(district_count)], table)
