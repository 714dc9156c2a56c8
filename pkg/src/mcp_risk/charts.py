"""SVG charts for the report tables. Output is deterministic for fixed input."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigError  # noqa: E402
from .report import FIGURES, find_report_files, read_report_file  # noqa: E402

RC = {
    "svg.hashsalt": "mcp-risk",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 9,
}


def cell_label(value: float | None) -> str:
    """Integer percent for a heat-grid cell, halves rounded up; blank when undefined."""
    if value is None:
        return ""
    return str(int(math.floor(float(value) + 0.5)))


def _f(v) -> float | None:
    if v is None or v == "":
        return None
    return float(v)


def _bar(rows, ax):
    labels = [f"CWE-{r['cwe_id']}" for r in rows]
    ax.bar(labels, [int(r["findings"]) for r in rows], color="#4c72b0")
    ax.set_ylabel("findings")
    ax.tick_params(axis="x", labelrotation=90)
    ax2 = ax.twinx()
    ax2.plot(labels, [_f(r["risk_index"]) or 0.0 for r in rows], "o", color="#c44e52")
    ax2.set_ylabel("risk index")
    ax2.set_ylim(0, 105)
    ax.set_title("CWE frequency and risk index")


def _scatter(rows, ax):
    x = [int(r["n_findings"]) for r in rows]
    y = [_f(r["rms"]) for r in rows]
    c = [_f(r["normalized"]) for r in rows]
    pts = ax.scatter(x, y, c=c, cmap="viridis", vmin=0, vmax=100)
    ax.set_xscale("log")
    ax.set_xlabel("findings (N)")
    ax.set_ylabel("RMS severity")
    ax.figure.colorbar(pts, ax=ax, label="normalized score")
    ax.set_title("Repository findings vs severity")


def _grouped(rows, ax):
    labels = [r["surface"] for r in rows]
    xs = range(len(labels))
    ax.bar([i - 0.2 for i in xs], [_f(r["finding_share"]) for r in rows], 0.4, label="findings %")
    ax.bar([i + 0.2 for i in xs], [_f(r["exposure_share"]) for r in rows], 0.4, label="exposure %")
    ax.set_xticks(list(xs), labels)
    ax.set_ylabel("percent")
    ax.legend()
    ax.set_title("Threat-surface shares")


def _hist(rows, ax):
    ax.bar([r["band"] for r in rows], [int(r["count"]) for r in rows], color="#55a868")
    ax.set_ylabel("repositories")
    ax.set_title("Risk bands")


def _heat(rows, ax):
    cols = [k for k in rows[0] if k != "given"]
    grid = [[_f(r[c]) for c in cols] for r in rows]
    shown = [[math.nan if v is None else v for v in row] for row in grid]
    ax.imshow(shown, cmap="Reds", vmin=0, vmax=100)
    ax.set_xticks(range(len(cols)), cols)
    ax.set_yticks(range(len(rows)), [r["given"] for r in rows])
    ax.set_xlabel("also has")
    ax.set_ylabel("given")
    for i, row in enumerate(grid):
        for j, v in enumerate(row):
            ax.text(j, i, cell_label(v), ha="center", va="center")
    ax.set_title("Conditional co-occurrence (%)")


_DRAW = {"fig4": _bar, "fig5": _scatter, "fig7": _grouped, "fig8": _hist, "fig9": _heat}


def render_charts(report_files: str | Path | Iterable[str | Path] | Mapping[str, Path],
                  out_dir: str | Path) -> list[Path]:
    """Draw one SVG per report file.

    ``report_files`` is the directory written by ``emit_report``, a mapping of
    figure key to path, or an iterable of paths named as ``emit_report`` names them.
    """
    if isinstance(report_files, (str, Path)):
        files = find_report_files(report_files)
    elif isinstance(report_files, Mapping):
        files = {k: Path(v) for k, v in report_files.items()}
    else:
        stems = {v: k for k, v in FIGURES.items()}
        files = {}
        for p in map(Path, report_files):
            key = stems.get(p.stem)
            if key is None:
                raise ValueError(f"not a report file: {p}")
            files[key] = p
    for key in FIGURES:
        if key not in files or not Path(files[key]).is_file():
            raise ConfigError(f"missing report file: {files.get(key, FIGURES[key])}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(RC):
        for key in FIGURES:
            rows = read_report_file(files[key])
            fig, ax = plt.subplots(figsize=(7, 4.5))
            if rows:
                _DRAW[key](rows, ax)
            else:
                ax.set_axis_off()
            fig.tight_layout()
            path = out / f"{FIGURES[key]}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written
