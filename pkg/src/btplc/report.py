"""Figure rendering for run reports: node timelines and the axis profile."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.colors import ListedColormap

from .cyclic import ExecState, Trace

_STATE_ORDER = [
    ExecState.IDLE,
    ExecState.BUSY,
    ExecState.DONE,
    ExecState.ERROR,
    ExecState.ABORTING,
    ExecState.ABORTED,
]
_STATE_COLORS = ["#d9d9d9", "#4c78a8", "#59a14f", "#e15759", "#f1a13b", "#9c755f"]


def render_node_timeline(trace: Trace, path: Path) -> Path:
    """One row per node, one column per cycle, colored by execution state."""
    if not trace.records:
        raise ValueError("empty trace")
    node_ids = [nid for nid, _ in trace.records[0].states]
    index = {s: i for i, s in enumerate(_STATE_ORDER)}
    grid = [
        [index[dict(rec.states)[nid]] for rec in trace.records] for nid in node_ids
    ]
    fig, ax = plt.subplots(figsize=(max(6, len(trace.records) / 25), 0.5 * len(node_ids) + 1.5))
    ax.imshow(
        grid,
        aspect="auto",
        interpolation="nearest",
        cmap=ListedColormap(_STATE_COLORS),
        vmin=0,
        vmax=len(_STATE_ORDER) - 1,
    )
    ax.set_yticks(range(len(node_ids)))
    ax.set_yticklabels(node_ids)
    ax.set_xlabel("cycle")
    ax.set_title("node execution states")
    handles = [
        plt.Rectangle((0, 0), 1, 1, color=c) for c in _STATE_COLORS
    ]
    ax.legend(
        handles,
        [s.value for s in _STATE_ORDER],
        loc="upper right",
        fontsize="x-small",
        ncols=3,
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_axis_profile(trace: Trace, path: Path) -> Path | None:
    """Axis position over cycles, with state changes marked. None if no telemetry."""
    cycles = [rec.cycle for rec in trace.records if rec.axis is not None]
    if not cycles:
        return None
    positions = [rec.axis[1] for rec in trace.records if rec.axis is not None]
    states = [rec.axis[0] for rec in trace.records if rec.axis is not None]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(cycles, positions, color="#4c78a8", lw=1.5, label="position [mm]")
    last = None
    for c, s in zip(cycles, states):
        if s != last:
            ax.axvline(c, color="#bbbbbb", lw=0.6)
            ax.annotate(
                s,
                (c, ax.get_ylim()[1]),
                rotation=90,
                fontsize="x-small",
                va="top",
                ha="right",
            )
            last = s
    ax.set_xlabel("cycle")
    ax.set_ylabel("position [mm]")
    ax.set_title("axis profile")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_run_figures(trace: Trace, out_dir: Path, stem: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [render_node_timeline(trace, out_dir / f"{stem}_nodes.png")]
    axis_fig = render_axis_profile(trace, out_dir / f"{stem}_axis.png")
    if axis_fig is not None:
        written.append(axis_fig)
    return written
