"""Figure rendering for the report path of the command-line surface.

Every function takes finished domain objects and a target path, draws one
PNG, and returns the path.  Figures are built on explicit
:class:`matplotlib.figure.Figure` instances (no pyplot state, no backend
selection) and saved without writer metadata, so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .bifurcations import BifurcationEvent, SliceGraph
from .contours import ContourSet
from .kernels import KernelParams, sample_kernel_grid, transfer
from .spectral import FieldGrid
from .trees import ScaleTree, TreeNode

__all__ = [
    "kernel_figure",
    "field_figure",
    "contour_figure",
    "tree_figure",
    "scan_figure",
]

_KIND_MARKERS = {"Birth": "^", "Death": "v", "Merge": "D", "Split": "s"}


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", dpi=150, metadata={"Software": None})
    return path


def kernel_figure(
    params: KernelParams,
    rhos: tuple[float, ...],
    x0: float,
    dx: float,
    n: int,
    path: str | Path,
) -> Path:
    """Draw kernel profiles and their transfer magnitudes.

    Left panel: K(x, rho) sampled on the given x grid for each rho.
    Right panel: |transfer| over frequency at the matching sigma = 1/rho.
    """
    x = x0 + dx * np.arange(n)
    omega = np.linspace(0.0, math.pi / dx / 4.0, 512)
    fig = Figure(figsize=(9.0, 3.6))
    ax_k, ax_t = fig.subplots(1, 2)
    for rho in rhos:
        profile = sample_kernel_grid(params, rho, x0, dx, n)
        ax_k.plot(x, profile, lw=1.0, label=f"rho = {rho:g}")
        ax_t.plot(omega, np.abs(transfer(params, omega, 1.0 / rho)), lw=1.0)
    ax_k.set_xlabel("x")
    ax_k.set_ylabel("K(x, rho)")
    ax_k.legend(fontsize=8)
    ax_t.set_xlabel("omega")
    ax_t.set_ylabel("|transfer|")
    title = f"kernel p = {params.p:g}, alpha = {params.alpha:g}, beta = {params.beta:g}"
    fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    return _save(fig, path)


def field_figure(grid: FieldGrid, path: str | Path) -> Path:
    """Heat-map a derivative-order field over the (x, sigma) half plane."""
    x = grid.x0 + grid.dx * np.arange(grid.values.shape[1])
    fig = Figure(figsize=(7.0, 4.2))
    ax = fig.subplots()
    mesh = ax.pcolormesh(x, grid.sigma_grid, grid.values, shading="auto",
                         cmap="RdBu_r")
    fig.colorbar(mesh, ax=ax, label=f"order-{grid.k} field")
    ax.set_xlabel("x")
    ax.set_ylabel("sigma")
    fig.tight_layout()
    return _save(fig, path)


def contour_figure(
    contours: ContourSet,
    grid: FieldGrid | None,
    path: str | Path,
) -> Path:
    """Draw level curves, optionally over the field they were traced on.

    Closed components are solid, lines dashed, window-truncated pieces
    dotted gray.
    """
    fig = Figure(figsize=(7.0, 4.2))
    ax = fig.subplots()
    if grid is not None:
        x = grid.x0 + grid.dx * np.arange(grid.values.shape[1])
        ax.pcolormesh(x, grid.sigma_grid, grid.values, shading="auto",
                      cmap="RdBu_r", alpha=0.35)
    styles = {
        "Closed": dict(color="C0", ls="-"),
        "Line": dict(color="C1", ls="--"),
        "TruncatedAtWindow": dict(color="0.5", ls=":"),
    }
    seen: set[str] = set()
    for curve in contours.curves:
        style = styles[curve.kind]
        label = curve.kind if curve.kind not in seen else None
        seen.add(curve.kind)
        ax.plot(curve.vertices[:, 0], curve.vertices[:, 1], lw=1.2,
                label=label, **style)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("x")
    ax.set_ylabel("sigma")
    ax.set_title(f"level c = {contours.level:.6g} (k = {contours.k})",
                 fontsize=10)
    if seen:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def _draw_node(ax, node: TreeNode, parent_top: float, y_cap: float) -> None:
    lo, hi = node.interval
    mid = 0.5 * (lo + hi)
    if node.kind == "line":
        ax.plot([mid, mid], [0.0, y_cap], color="C1", ls="--", lw=1.0)
        return
    top = min(node.top_sigma, y_cap)
    ax.plot([lo, hi], [top, top], color="C0", lw=1.4)
    ax.plot([lo, lo], [0.0, top], color="C0", lw=0.7, alpha=0.6)
    ax.plot([hi, hi], [0.0, top], color="C0", lw=0.7, alpha=0.6)
    for child in node.children:
        _draw_node(ax, child, top, y_cap)


def tree_figure(tree: ScaleTree, path: str | Path) -> Path:
    """Draw the nesting structure: one bracket per arch at its top sigma.

    Each arch becomes a horizontal bar across its axis interval at the
    height where the arch closes; vertical whiskers drop to the axis.
    Lines are dashed rays.  Nesting is visible as bars inside bars.
    """
    tops = []

    def collect(node: TreeNode) -> None:
        if node.kind == "arch" and math.isfinite(node.top_sigma):
            tops.append(node.top_sigma)
        for child in node.children:
            collect(child)

    collect(tree.root)
    y_cap = 1.25 * max(tops) if tops else 1.0
    fig = Figure(figsize=(7.0, 3.6))
    ax = fig.subplots()
    for child in tree.root.children:
        _draw_node(ax, child, y_cap, y_cap)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("x")
    ax.set_ylabel("sigma at arch top")
    ax.set_ylim(-0.05 * y_cap, y_cap)
    fig.tight_layout()
    return _save(fig, path)


def scan_figure(
    graph: SliceGraph,
    events: tuple[BifurcationEvent, ...],
    path: str | Path,
) -> Path:
    """Draw component lifetimes across the scan with events marked.

    Each slice component is a vertical bar (its axis interval) at its
    parameter value; tracking edges join bar midpoints; events appear as
    kind-coded markers at their refined parameter and x location.
    """
    fig = Figure(figsize=(7.6, 4.2))
    ax = fig.subplots()
    mids = {}
    for param, row in zip(graph.params, graph.slices):
        for comp in row:
            lo, hi = comp.interval
            ax.plot([param, param], [lo, hi], color="C0", lw=2.0,
                    solid_capstyle="butt")
            mids[comp.component_id] = (param, 0.5 * (lo + hi))
    for a, b in graph.edges:
        if a in mids and b in mids:
            (pa, ma), (pb, mb) = mids[a], mids[b]
            ax.plot([pa, pb], [ma, mb], color="C0", lw=0.6, alpha=0.5)
    seen: set[str] = set()
    for event in events:
        marker = _KIND_MARKERS.get(event.kind, "o")
        label = event.kind if event.kind not in seen else None
        seen.add(event.kind)
        ax.plot([event.param_value], [event.location[0]], marker=marker,
                color="C3", ms=7.0, ls="none", label=label)
    ax.set_xlabel(f"scan parameter ({graph.axis})")
    ax.set_ylabel("x interval")
    if seen:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
