"""CSV persistence for radial profiles.

Format: header ``r,<name>[,<name>...]``, one node per line, decimal point,
no thousands separators.  Values are printed with 17 significant digits so
that doubles round-trip exactly.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import GridError
from .radial import RadialGrid


def write_profile_csv(path: str | Path, grid: RadialGrid,
                      columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[name], dtype=float) for name in names]
    for name, arr in zip(names, arrays):
        if arr.shape != grid.nodes.shape:
            raise GridError(f"column {name!r} does not match the grid")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("r," + ",".join(names) + "\n")
        for i, r in enumerate(grid.nodes):
            row = [f"{r:.17g}"] + [f"{arr[i]:.17g}" for arr in arrays]
            fh.write(",".join(row) + "\n")


def _detect_kind(nodes: np.ndarray) -> str:
    d = np.diff(nodes)
    if np.all(np.abs(d - d[0]) <= 1e-6 * abs(d[0])):
        return "uniform"
    ratios = nodes[1:] / nodes[:-1]
    if np.all(np.abs(ratios - ratios[0]) <= 1e-6 * abs(ratios[0])):
        return "geometric"
    raise GridError("nodes are neither uniform nor geometric")


def read_profile_csv(path: str | Path) -> tuple[RadialGrid, dict[str, np.ndarray]]:
    """Read a profile CSV back into a grid and named value columns."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "r":
            raise GridError(f"{path}: first column must be 'r'")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise GridError(f"{path}: column count does not match header")
    nodes = data[:, 0]
    grid = RadialGrid(nodes=nodes, kind=_detect_kind(nodes))
    columns = {name: data[:, j + 1] for j, name in enumerate(header[1:])}
    return grid, columns
