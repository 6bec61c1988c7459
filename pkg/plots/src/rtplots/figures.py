"""Figure writers.

Each writer consumes one solver output directory, draws with
matplotlib, and emits both a PNG and an SVG whose metadata carries
'name=sha256' pairs for every input file used.  Panel layout follows
the solver's default snapshot cadence: four snapshot times give a 2x2
grid, other counts keep two columns and grow rows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import ceil
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.colors import LogNorm

from .inputs import (PlotError, inputs_digest, load_intensities,
                     load_residuals, load_snapshots, read_manifest)

_KINDS = ("polar", "contour", "decay")


@dataclass(frozen=True)
class PlotSpec:
    """What to draw and from where.

    points apply to polar figures only; log_levels to contour figures.
    """

    indir: Path
    outdir: Path
    kind: str
    points: tuple = field(default=())
    log_levels: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; "
                            f"expected one of {_KINDS}")
        object.__setattr__(self, "indir", Path(self.indir))
        object.__setattr__(self, "outdir", Path(self.outdir))
        pts = []
        for p in self.points:
            i, j = p
            pts.append((int(i), int(j)))
        object.__setattr__(self, "points", tuple(pts))


def _panels(n: int, subplot_kw=None):
    import matplotlib.pyplot as plt
    ncols = 1 if n == 1 else 2
    nrows = ceil(n / ncols)
    fig, axes = plt.subplots(nrows, ncols, squeeze=False,
                             subplot_kw=subplot_kw,
                             figsize=(4.2 * ncols, 3.6 * nrows),
                             layout="constrained")
    flat = list(axes.ravel())
    for ax in flat[n:]:
        ax.set_visible(False)
    return fig, flat[:n]


def _save(fig, outdir: Path, stem: str, digest: str) -> list:
    import matplotlib.pyplot as plt
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    png = outdir / f"{stem}.png"
    svg = outdir / f"{stem}.svg"
    fig.savefig(png, dpi=150, metadata={"input-sha256": digest})
    # keep SVG text as text so the embedded digest stays searchable
    with mpl.rc_context({"svg.fonttype": "none"}):
        fig.savefig(svg, metadata={"Description": f"input-sha256: {digest}"})
    plt.close(fig)
    return [png, svg]


def _panel_title(tag: str, step, dt) -> str:
    if step is not None and dt:
        return f"t = {step * dt:g}"
    if step is not None:
        return f"step {step}"
    return tag


def _grid_dt(manifest) -> float | None:
    if manifest is None:
        return None
    dt = manifest.get("grid", {}).get("dt")
    return float(dt) if isinstance(dt, (int, float)) else None


def plot_polar(spec: PlotSpec) -> list:
    """One figure per selected spatial node: I against direction angle,
    one polar panel per snapshot time.

    Points outside the grid are listed and skipped with a warning; with
    no valid point left this is an error.  When no points are selected
    the central node is used.
    """
    snaps = load_snapshots(spec.indir)
    manifest = read_manifest(spec.indir)
    dt = _grid_dt(manifest)
    n1, n2, _ = snaps[0].values.shape

    points = spec.points or (((n1 - 1) // 2, (n2 - 1) // 2),)
    valid, missing = [], []
    for i, j in points:
        (valid if 0 <= i < n1 and 0 <= j < n2 else missing).append((i, j))
    if missing:
        listed = ", ".join(f"({i},{j})" for i, j in missing)
        warnings.warn(f"skipping points outside the {n1}x{n2} node grid: "
                      f"{listed}")
    if not valid:
        raise PlotError("no selected point lies inside the grid")

    consumed = [s.path for s in snaps]
    if manifest is not None:
        consumed.append(Path(spec.indir) / "manifest.json")
    digest = inputs_digest(consumed)

    written = []
    for i, j in valid:
        fig, axes = _panels(len(snaps), subplot_kw={"projection": "polar"})
        for ax, snap in zip(axes, snaps):
            r = snap.values[i, j, :]
            ang = np.append(snap.theta, snap.theta[0] + 2.0 * np.pi)
            ax.plot(ang, np.append(r, r[0]), lw=1.2)
            ax.set_rmin(0.0)
            if float(r.max(initial=0.0)) == 0.0:
                ax.set_rmax(1.0)   # keep the zero trace visible
            ax.set_title(_panel_title(snap.tag, snap.step, dt), fontsize=10)
            ax.tick_params(labelsize=7)
        fig.suptitle(f"direction distribution at node (i={i}, j={j})")
        written += _save(fig, spec.outdir, f"polar_i{i}_j{j}", digest)
    return written


def _blank_panel(ax, note: str):
    ax.text(0.5, 0.5, note, ha="center", va="center",
            transform=ax.transAxes, fontsize=11, color="0.35")
    ax.set_xticks([])
    ax.set_yticks([])


def plot_contour(spec: PlotSpec) -> list:
    """One contour panel of integrated intensity per snapshot time.

    log_levels switches to logarithmically spaced levels over the
    positive values.  An all-zero map (or, with log levels, a map with
    no positive entry) produces a labelled blank panel rather than an
    error.
    """
    import matplotlib.pyplot as plt
    maps = load_intensities(spec.indir)
    manifest = read_manifest(spec.indir)
    dt = _grid_dt(manifest)

    fig, axes = _panels(len(maps))
    for ax, m in zip(axes, maps):
        ax.set_title(_panel_title(m.tag, m.step, dt), fontsize=10)
        Z = m.phi.T    # rows correspond to x2
        vmin, vmax = float(Z.min()), float(Z.max())
        if vmax == vmin:
            if vmax == 0.0:
                _blank_panel(ax, "all values zero")
                continue
            # constant field: one degenerate level band
            pad = 1e-9 * max(abs(vmax), 1.0)
            cs = ax.contourf(m.x1, m.x2, Z, levels=[vmax - pad, vmax + pad])
            fig.colorbar(cs, ax=ax, shrink=0.85, ticks=[vmax])
        elif spec.log_levels:
            pos = Z[Z > 0]
            if pos.size == 0:
                _blank_panel(ax, "no positive values")
                continue
            lo = max(float(pos.min()), vmax * 1e-12)
            if lo >= vmax:
                lo = vmax / 10.0
            levels = np.geomspace(lo, vmax, 10)
            Zm = np.ma.masked_less_equal(Z, 0.0)
            cs = ax.contourf(m.x1, m.x2, Zm, levels=levels,
                             norm=LogNorm(vmin=lo, vmax=vmax), extend="min")
            ax.contour(m.x1, m.x2, Zm, levels=levels, colors="k",
                       linewidths=0.4)
            fig.colorbar(cs, ax=ax, shrink=0.85)
        else:
            cs = ax.contourf(m.x1, m.x2, Z, levels=10)
            ax.contour(m.x1, m.x2, Z, levels=cs.levels, colors="k",
                       linewidths=0.4)
            fig.colorbar(cs, ax=ax, shrink=0.85)
        ax.set_aspect("equal")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    fig.suptitle("integrated intensity")

    consumed = [m.path for m in maps]
    if manifest is not None:
        consumed.append(Path(spec.indir) / "manifest.json")
    return _save(fig, spec.outdir, "contour", inputs_digest(consumed))


def fit_decay_ratio(residuals) -> float:
    """Least-squares per-step ratio of a residual series.

    Fits ln r against the iteration index over the strictly positive
    entries and returns exp(slope); a constant series gives exactly 1.
    """
    r = np.asarray(residuals, dtype=float)
    if r.ndim != 1:
        raise PlotError("residual series must be one-dimensional")
    k = np.arange(r.size, dtype=float)
    keep = r > 0.0
    if int(keep.sum()) < 2:
        raise PlotError("need at least two positive residuals to fit a "
                        "per-step ratio")
    slope = np.polyfit(k[keep], np.log(r[keep]), 1)[0]
    return float(np.exp(slope))


def plot_decay(spec: PlotSpec):
    """Semi-log residual history of a stationary solve.

    Crosses show the successive differences from residuals.csv.  When
    the manifest records a steady solve with its contraction rate the
    figure adds the geometric reference slope and the derived bound on
    the distance to the steady state (tail sum of the remaining
    residuals plus the final error bound); without one, only the
    successive differences are drawn.

    Returns (written paths, fitted per-step ratio).
    """
    manifest = read_manifest(spec.indir, required=True)
    k, r, res_path = load_residuals(spec.indir)

    steady = manifest.get("steady") or {}
    rho = steady.get("rho")
    rho = float(rho) if isinstance(rho, (int, float)) else None

    ratio = fit_decay_ratio(r)
    if ratio >= 1.0 - 1e-12:
        warnings.warn(f"residual series does not decay: fitted per-step "
                      f"ratio {ratio:.6g}")

    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6.4, 4.8), layout="constrained")
    pos = r > 0
    ax.semilogy(k[pos], r[pos], "x", ms=4, color="tab:blue",
                label="successive difference")

    if rho is not None:
        eb = steady.get("error_bound")
        if not isinstance(eb, (int, float)):
            eb = r[-1] * rho / (1.0 - rho) if rho < 1.0 else 0.0
        # distance to the steady state is at most the residuals still to
        # come plus the final error bound
        suffix = np.cumsum(r[::-1])[::-1]
        dist = (suffix - r) + float(eb)
        keep = dist > 0
        ax.semilogy(k[keep], dist[keep], "+", ms=5, color="tab:red",
                    label="distance-to-steady bound")
        if 0.0 < rho < 1.0 and r[0] > 0:
            ref = r[0] * rho ** (k - k[0])
            ax.semilogy(k, ref, "--", color="0.4", lw=1.0,
                        label=f"geometric reference, ratio {rho:.6g}")

    ax.text(0.03, 0.05, f"fitted per-step ratio = {ratio:.6f}",
            transform=ax.transAxes, fontsize=10,
            bbox={"boxstyle": "round", "fc": "white", "ec": "0.6"})
    ax.set_xlabel("iteration")
    ax.set_ylabel("sup-norm difference")
    ax.legend(loc="upper right", fontsize=9)
    ax.set_title("fixed-point residual decay")

    digest = inputs_digest([res_path, Path(spec.indir) / "manifest.json"])
    return _save(fig, spec.outdir, "decay", digest), ratio
