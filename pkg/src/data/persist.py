import json
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from data.normalize import NormStats
from data.panel import ANCHOR_MONTHS, MONTHS, Panel
from utility.errors import VNValidationError

PANEL_FORMAT = "vnsde-panel/1"
PANEL_COLUMNS = ["district_id", "month", "indicator_id", "value"]
PANEL_CSV = "panel.csv"
PANEL_SIDECAR = "panel.json"


def panel_paths(path: Union[str, Path]) -> Tuple[Path, Path]:
    """The panel CSV and its sidecar, given either the CSV or its directory."""
    path = Path(path)
    csv_path = path / PANEL_CSV if path.is_dir() else path
    return csv_path, csv_path.with_suffix(".json")


def write_panel(panel: Panel, stats: NormStats, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    """Write ``panel.csv`` (long format) and its ``panel.json`` sidecar.

    Floats are written with 17 significant digits so reading them back gives
    the same float64 values.

    Returns:
        Paths of the CSV and the sidecar
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, sidecar_path = out / PANEL_CSV, out / PANEL_SIDECAR

    d, t, i = np.indices(panel.values.shape)
    frame = pd.DataFrame(
        {
            "district_id": d.ravel(),
            "month": t.ravel(),
            "indicator_id": i.ravel(),
            "value": panel.values.ravel(),
        }
    )
    frame.to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")

    sidecar = {
        "format": PANEL_FORMAT,
        "seed": panel.seed,
        "sigma": panel.sigma,
        "month0": panel.month0,
        "months": MONTHS,
        "anchor_months": list(ANCHOR_MONTHS),
        "districts": panel.districts,
        "indicators": panel.indicators,
        "clip_count": panel.clip_count,
        "norm_stats": stats.to_dict(),
        "panel_hash": panel.panel_hash(),
    }
    with open(sidecar_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, sidecar_path


def read_panel(path: Union[str, Path]) -> Tuple[Panel, NormStats]:
    """Load a panel written by ``write_panel``.

    Args:
        path: The panel CSV or the directory holding it

    Raises:
        VNValidationError: If either file is missing or malformed, or the values
            do not hash to the sidecar's ``panel_hash``
    """
    csv_path, sidecar_path = panel_paths(path)
    for required in (csv_path, sidecar_path):
        if not required.is_file():
            raise VNValidationError("panel file does not exist", str(required))
    try:
        with open(sidecar_path, "r", encoding="utf-8") as f:
            sidecar = json.load(f)
    except json.JSONDecodeError as e:
        raise VNValidationError(f"sidecar is not valid JSON: {e}", str(sidecar_path))
    if sidecar.get("format") != PANEL_FORMAT:
        raise VNValidationError(
            f"unsupported panel format {sidecar.get('format')!r}", str(sidecar_path)
        )

    frame = pd.read_csv(csv_path, float_precision="round_trip")
    if list(frame.columns) != PANEL_COLUMNS:
        raise VNValidationError(
            f"header must be {','.join(PANEL_COLUMNS)}", str(csv_path), 1
        )
    for column in PANEL_COLUMNS:
        kinds = "iu" if column != "value" else "iuf"
        if frame[column].dtype.kind not in kinds:
            raise VNValidationError(f"column {column} has non-numeric entries", str(csv_path))
    districts = list(sidecar["districts"])
    indicators = list(sidecar["indicators"])
    shape = (len(districts), int(sidecar["months"]), len(indicators))
    if len(frame) != shape[0] * shape[1] * shape[2]:
        raise VNValidationError(
            f"expected {shape[0] * shape[1] * shape[2]} rows, got {len(frame)}", str(csv_path)
        )
    values = np.full(shape, np.nan)
    ids = frame[["district_id", "month", "indicator_id"]].to_numpy()
    for axis, size in enumerate(shape):
        bad = (ids[:, axis] < 0) | (ids[:, axis] >= size)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise VNValidationError(
                f"{PANEL_COLUMNS[axis]} {ids[row, axis]} out of range", str(csv_path), row + 2
            )
    values[ids[:, 0], ids[:, 1], ids[:, 2]] = frame["value"].to_numpy(dtype=np.float64)
    if np.isnan(values).any():
        raise VNValidationError("panel has missing or duplicate cells", str(csv_path))

    panel = Panel(
        values,
        districts,
        seed=int(sidecar["seed"]),
        sigma=float(sidecar["sigma"]),
        clip_count=int(sidecar["clip_count"]),
        month0=str(sidecar["month0"]),
        indicators=indicators,
    )
    if panel.panel_hash() != sidecar["panel_hash"]:
        raise VNValidationError("panel values do not match the sidecar hash", str(csv_path))
    return panel, NormStats.from_dict(sidecar["norm_stats"])
