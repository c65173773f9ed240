"""Plain-text CSV datasets: one observation per row, d numeric columns."""

import numpy as np

from .mixture import validate_data


def write_dataset_csv(path, data: np.ndarray, header: bool = False) -> None:
    """Write a dataset; float values use the shortest exact representation."""
    data = validate_data(data)
    lines = []
    if header:
        lines.append(",".join(f"x{k}" for k in range(1, data.shape[1] + 1)))
    for row in data:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset_csv(path) -> np.ndarray:
    """Read a dataset, skipping a header row when the first line is not numeric."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    try:
        [float(v) for v in lines[0].split(",")]
    except ValueError:
        lines = lines[1:]
        if not lines:
            raise ValueError(f"{path}: header but no data rows") from None
    rows = []
    width = None
    for i, line in enumerate(lines):
        values = [float(v) for v in line.split(",")]
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ValueError(f"{path}: row {i + 1} has {len(values)} columns, expected {width}")
        rows.append(values)
    return validate_data(np.array(rows))
