"""Readers for solver output directories.

The solver writes snapshot and intensity tables with explicit index
columns, so the loaders here scatter rows by index instead of trusting
row order.  Every reader returns the source path alongside the data so
the figure writers can checksum exactly what they consumed.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class PlotError(Exception):
    """Input directory is missing or malformed for the requested figure."""


_SNAP_RE = re.compile(r"^snapshot_(.+)\.csv$")
_INTENSITY_RE = re.compile(r"^intensity_(.+)\.csv$")


@dataclass(frozen=True)
class Snapshot:
    """One phase-space snapshot: values[i, j, n] with its coordinate axes."""

    tag: str                 # "k400", "steady", ...
    step: int | None         # parsed from a "k<N>" tag, else None
    path: Path
    x1: np.ndarray
    x2: np.ndarray
    theta: np.ndarray
    values: np.ndarray       # (M1+1, M2+1, M)


@dataclass(frozen=True)
class IntensityMap:
    """One direction-integrated intensity table: phi[i, j]."""

    tag: str
    step: int | None
    path: Path
    x1: np.ndarray
    x2: np.ndarray
    phi: np.ndarray          # (M1+1, M2+1)


def sha256_of(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def inputs_digest(paths) -> str:
    """'name=sha256' pairs for each consumed file, sorted by name."""
    items = sorted((Path(p).name, sha256_of(p)) for p in paths)
    return "; ".join(f"{name}={digest}" for name, digest in items)


def read_manifest(indir: Path, required: bool = False) -> dict | None:
    path = Path(indir) / "manifest.json"
    if not path.exists():
        if required:
            raise PlotError(f"{indir}: no manifest.json")
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise PlotError(f"{path}: not valid JSON: {exc}")


def _step_of(tag: str) -> int | None:
    if tag.startswith("k") and tag[1:].isdigit():
        return int(tag[1:])
    return None


def _tagged_files(indir: Path, pattern: re.Pattern) -> list:
    indir = Path(indir)
    if not indir.is_dir():
        raise PlotError(f"{indir}: not a directory")
    found = []
    for path in indir.iterdir():
        m = pattern.match(path.name)
        if m:
            found.append((m.group(1), path))
    # numbered snapshots in time order, then named ones (e.g. "steady")
    found.sort(key=lambda tp: (_step_of(tp[0]) is None,
                               _step_of(tp[0]) or 0, tp[0]))
    return found


def _table(path: Path, n_cols: int, what: str) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        raise PlotError(f"{path.name}: no data rows")
    if data.shape[1] != n_cols:
        raise PlotError(f"{path.name}: expected {n_cols} columns "
                        f"({what}), got {data.shape[1]}")
    return data


def _load_snapshot(tag: str, path: Path) -> Snapshot:
    data = _table(path, 7, "a 2D snapshot: i,j,n,x1,x2,theta,I")
    i = data[:, 0].astype(np.intp)
    j = data[:, 1].astype(np.intp)
    n = data[:, 2].astype(np.intp)
    n1, n2, nd = i.max() + 1, j.max() + 1, n.max() + 1
    if data.shape[0] != n1 * n2 * nd:
        raise PlotError(f"{path.name}: {data.shape[0]} rows do not cover "
                        f"the {n1}x{n2}x{nd} index grid")
    values = np.zeros((n1, n2, nd))
    values[i, j, n] = data[:, 6]
    x1 = np.zeros(n1)
    x2 = np.zeros(n2)
    theta = np.zeros(nd)
    x1[i] = data[:, 3]
    x2[j] = data[:, 4]
    theta[n] = data[:, 5]
    return Snapshot(tag, _step_of(tag), path, x1, x2, theta, values)


def _load_intensity(tag: str, path: Path) -> IntensityMap:
    data = _table(path, 5, "an intensity map: i,j,x1,x2,phi_total")
    i = data[:, 0].astype(np.intp)
    j = data[:, 1].astype(np.intp)
    n1, n2 = i.max() + 1, j.max() + 1
    if data.shape[0] != n1 * n2:
        raise PlotError(f"{path.name}: {data.shape[0]} rows do not cover "
                        f"the {n1}x{n2} index grid")
    phi = np.zeros((n1, n2))
    phi[i, j] = data[:, 4]
    x1 = np.zeros(n1)
    x2 = np.zeros(n2)
    x1[i] = data[:, 2]
    x2[j] = data[:, 3]
    return IntensityMap(tag, _step_of(tag), path, x1, x2, phi)


def load_snapshots(indir: Path) -> list:
    files = _tagged_files(indir, _SNAP_RE)
    if not files:
        raise PlotError(f"{indir}: no snapshot_*.csv files")
    snaps = [_load_snapshot(tag, path) for tag, path in files]
    shapes = {s.values.shape for s in snaps}
    if len(shapes) > 1:
        raise PlotError(f"{indir}: snapshots disagree on grid shape: "
                        f"{sorted(shapes)}")
    return snaps


def load_intensities(indir: Path) -> list:
    files = _tagged_files(indir, _INTENSITY_RE)
    if not files:
        raise PlotError(f"{indir}: no intensity_*.csv files")
    maps = [_load_intensity(tag, path) for tag, path in files]
    shapes = {m.phi.shape for m in maps}
    if len(shapes) > 1:
        raise PlotError(f"{indir}: intensity maps disagree on grid shape: "
                        f"{sorted(shapes)}")
    return maps


def load_residuals(indir: Path):
    """Return (iteration indices, residual values, path)."""
    path = Path(indir) / "residuals.csv"
    if not path.exists():
        raise PlotError(f"{indir}: no residuals.csv (needs a steady-run "
                        f"output directory)")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        raise PlotError(f"{path.name}: no data rows")
    if data.shape[1] != 2:
        raise PlotError(f"{path.name}: expected 2 columns "
                        f"(iteration,residual), got {data.shape[1]}")
    return data[:, 0].astype(np.intp), data[:, 1], path
