"""Figure rendering from simulation result tables.

Figures are rendered with matplotlib to SVG with a fixed hash salt and no
date metadata, so identical inputs produce byte-identical files. Each
figure id maps to one layout over the delimited results produced by the
simulate command.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import InvalidParameterError  # noqa: E402

FIGURE_IDS = ("fig4", "fig5", "fig6", "fig7", "fig8")

_REQUIRED_COLUMNS = {
    "fig4": ("mode", "interference_db", "total_ms"),
    "fig5": ("mode", "split", "total_wh", "leakage"),
    "fig6": ("mode", "split", "interference_db", "tx_wh"),
    "fig7": ("mode", "split", "compute_wh", "tx_wh"),
    "fig8": ("path", "timestamp_ms", "total_ms", "mode"),
}

_NUMERIC = {
    "split",
    "timestamp_ms",
    "interference_db",
    "uplink_mbps",
    "estimated_mbps",
    "head_ms",
    "codec_ms",
    "tx_ms",
    "path_ms",
    "tail_ms",
    "total_ms",
    "compute_wh",
    "tx_wh",
    "total_wh",
    "leakage",
    "degraded",
}


class MissingColumnError(InvalidParameterError):
    pass


class UnknownFigureError(InvalidParameterError):
    pass


def load_results_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for raw in reader:
        row = {}
        for k, v in raw.items():
            if k is None:
                continue
            row[k] = float(v) if k in _NUMERIC and v not in ("", None) else v
        rows.append(row)
    return rows


def _require_columns(rows: list[dict], figure: str) -> None:
    if not rows:
        raise InvalidParameterError("results table is empty")
    missing = [c for c in _REQUIRED_COLUMNS[figure] if c not in rows[0]]
    if missing:
        raise MissingColumnError(f"{figure} needs missing column(s): {', '.join(missing)}")


def _mean(vals: list[float]) -> float:
    return sum(vals) / len(vals)


def _fixed_modes(rows: list[dict]) -> list[str]:
    return sorted({r["mode"] for r in rows if r["mode"].startswith("fixed-")})


def _mode_label(mode: str) -> str:
    table = {"fixed-0": "local", "fixed-5": "server-only"}
    if mode in table:
        return table[mode]
    if mode.startswith("fixed-"):
        return f"split-{mode.split('-')[1]}"
    return mode


def _new_figure(width: float = 7.0, height: float = 4.2):
    plt.rcParams["svg.hashsalt"] = "splitedge"
    return plt.subplots(figsize=(width, height), dpi=100)


def _save(fig, out_path: str | Path) -> None:
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _fig4(rows: list[dict], out_path: str | Path) -> None:
    """Grouped bars: per-frame delay by split mode and interference level."""
    modes = _fixed_modes(rows)
    levels = sorted({r["interference_db"] for r in rows})
    acc: dict[tuple, list[float]] = defaultdict(list)
    for r in rows:
        if r["mode"] in modes:
            acc[(r["mode"], r["interference_db"])].append(r["total_ms"])
    fig, ax = _new_figure()
    width = 0.8 / len(levels)
    for j, level in enumerate(levels):
        xs = [i + j * width for i in range(len(modes))]
        ys = [_mean(acc[(m, level)]) if acc[(m, level)] else 0.0 for m in modes]
        ax.bar(xs, ys, width=width, label=f"{level:g} dB")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(modes))])
    ax.set_xticklabels([_mode_label(m) for m in modes])
    ax.set_ylabel("E2E delay (ms)")
    ax.set_xlabel("execution mode")
    ax.legend(title="interference", fontsize=8)
    ax.set_title("Per-frame delay by split mode and interference")
    _save(fig, out_path)


def _fig5(rows: list[dict], out_path: str | Path) -> None:
    """Bars: device energy per split; line: leakage on the right axis."""
    modes = _fixed_modes(rows)
    energy = {m: _mean([r["total_wh"] for r in rows if r["mode"] == m]) for m in modes}
    leak = {m: _mean([r["leakage"] for r in rows if r["mode"] == m]) for m in modes}
    fig, ax = _new_figure()
    xs = list(range(len(modes)))
    ax.bar(xs, [energy[m] for m in modes], width=0.6, color="#4878d0")
    ax.set_ylabel("device energy (Wh/frame)")
    ax.set_xticks(xs)
    ax.set_xticklabels([_mode_label(m) for m in modes])
    ax2 = ax.twinx()
    ax2.plot(xs, [leak[m] for m in modes], "o-", color="#d65f5f", label="leakage")
    ax2.set_ylabel("privacy leakage")
    ax2.set_ylim(-0.05, 1.05)
    ax.set_title("Device energy and privacy leakage per split mode")
    _save(fig, out_path)


def _fig6(rows: list[dict], out_path: str | Path) -> None:
    """Grouped bars: transmission energy per split and interference level."""
    modes = [m for m in _fixed_modes(rows) if m != "fixed-0"]
    levels = sorted({r["interference_db"] for r in rows})
    acc: dict[tuple, list[float]] = defaultdict(list)
    for r in rows:
        if r["mode"] in modes:
            acc[(r["mode"], r["interference_db"])].append(r["tx_wh"])
    fig, ax = _new_figure()
    width = 0.8 / len(levels)
    for j, level in enumerate(levels):
        xs = [i + j * width for i in range(len(modes))]
        ys = [_mean(acc[(m, level)]) if acc[(m, level)] else 0.0 for m in modes]
        ax.bar(xs, ys, width=width, label=f"{level:g} dB")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(modes))])
    ax.set_xticklabels([_mode_label(m) for m in modes])
    ax.set_ylabel("transmission energy (Wh/frame)")
    ax.set_xlabel("execution mode")
    ax.legend(title="interference", fontsize=8)
    ax.set_title("Device transmission energy by interference level")
    _save(fig, out_path)


def _fig7(rows: list[dict], out_path: str | Path) -> None:
    """Dual-axis bars: inference energy (left) vs transmission energy (right)."""
    modes = _fixed_modes(rows)
    compute = {m: _mean([r["compute_wh"] for r in rows if r["mode"] == m]) for m in modes}
    tx = {m: _mean([r["tx_wh"] for r in rows if r["mode"] == m]) for m in modes}
    fig, ax = _new_figure()
    xs = list(range(len(modes)))
    ax.bar([x - 0.2 for x in xs], [compute[m] for m in modes], width=0.4, color="#4878d0", label="inference")
    ax.set_ylabel("inference energy (Wh/frame)")
    ax.set_xticks(xs)
    ax.set_xticklabels([_mode_label(m) for m in modes])
    ax2 = ax.twinx()
    ax2.bar([x + 0.2 for x in xs], [tx[m] for m in modes], width=0.4, color="#ee854a", label="transmission")
    ax2.set_ylabel("transmission energy (Wh/frame)")
    h1, l1 = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(h1 + h2, l1 + l2, fontsize=8)
    ax.set_title("Inference vs transmission energy per split mode")
    _save(fig, out_path)


def _moving_average(vals: list[float], window: int) -> list[float]:
    out = []
    for i in range(len(vals)):
        lo = max(0, i - window + 1)
        out.append(_mean(vals[lo : i + 1]))
    return out


def _fig8(rows: list[dict], out_path: str | Path, window: int = 10) -> None:
    """Delay time series for the two user-plane paths with moving averages."""
    paths = sorted({r["path"] for r in rows})
    if len(paths) < 2:
        raise InvalidParameterError("fig8 needs results for both user-plane paths")
    by_path_mode: dict[tuple, int] = defaultdict(int)
    for r in rows:
        by_path_mode[(r["path"], r["mode"])] += 1
    common = sorted(
        m for m in {k[1] for k in by_path_mode} if all((p, m) in by_path_mode for p in paths)
    )
    if not common:
        raise InvalidParameterError("fig8 needs one mode present for every path")
    mode = "adaptive" if "adaptive" in common else common[0]
    fig, ax = _new_figure()
    colors = {"cupf": "#4878d0", "dupf": "#ee854a"}
    for p in paths:
        series = sorted(
            ((r["timestamp_ms"], r["total_ms"]) for r in rows if r["path"] == p and r["mode"] == mode),
        )
        ts = [s[0] for s in series]
        ys = [s[1] for s in series]
        color = colors.get(p, None)
        ax.plot(ts, ys, alpha=0.35, color=color, label=f"{p} raw")
        ax.plot(ts, _moving_average(ys, window), "--", color=color, label=f"{p} moving avg")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("E2E delay (ms)")
    ax.legend(fontsize=8)
    ax.set_title(f"Delay over time by user-plane path ({_mode_label(mode)})")
    _save(fig, out_path)


_RENDERERS = {"fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7, "fig8": _fig8}


def render_figure(rows: list[dict], figure: str, out_path: str | Path) -> None:
    if figure not in _RENDERERS:
        raise UnknownFigureError(f"unknown figure id {figure!r}, expected one of {FIGURE_IDS}")
    _require_columns(rows, figure)
    _RENDERERS[figure](rows, out_path)
