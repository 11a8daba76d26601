"""Series extraction and rendering for scheduler-sweep figures.

The input is the sweep CSV produced by the experiment harness: one row per
simulation replicate keyed by ``(lambda2, scheduler)``, plus analytic
prediction rows under the ``proposed_analytic`` pseudo-scheduler whose
simulation cells are empty.  Figures are pure views of that file: rows are
grouped by scheduler, replicate values averaged per grid point, and nothing
is recomputed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "ANALYTIC_NAME",
    "FIGURES",
    "FigureError",
    "FigureSpec",
    "Series",
    "extract_series",
    "read_rows",
    "render",
]

FIGURES = ("utility", "jitter1", "jitter2")

# pseudo-scheduler carrying closed-form predictions for the proposed policy
ANALYTIC_NAME = "proposed_analytic"

_VALUE_COLUMN = {"utility": "logV", "jitter1": "var_l1", "jitter2": "var_l2"}
_Y_LABEL = {
    "utility": "log system utility",
    "jitter1": "class-1 delay variance",
    "jitter2": "class-2 delay variance",
}
_TITLE = {
    "utility": "System utility vs class-2 load",
    "jitter1": "Class-1 delay variance vs class-2 load",
    "jitter2": "Class-2 delay variance vs class-2 load",
}


class FigureError(ValueError):
    """Raised for unusable input: bad figure id, malformed or empty CSV."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: which CSV, which figure, where to write it."""

    csv_path: Path
    figure: str
    out_path: Path

    def __post_init__(self) -> None:
        if self.figure not in FIGURES:
            raise FigureError(
                f"unknown figure {self.figure!r}; expected one of {', '.join(FIGURES)}"
            )


@dataclass(frozen=True)
class Series:
    """One plotted curve: a labeled (x, y) sequence sorted by x."""

    label: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    analytic: bool = False


def read_rows(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    """Header and data rows of a sweep CSV; empty input is an error."""
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None:
                raise FigureError(f"empty CSV: {path}")
            fieldnames = list(reader.fieldnames)
            rows = list(reader)
    except OSError as exc:
        raise FigureError(f"cannot read CSV {path}: {exc}") from exc
    if not rows:
        raise FigureError(f"CSV has no data rows: {path}")
    return fieldnames, rows


def extract_series(
    fieldnames: list[str], rows: list[dict[str, str]], figure: str
) -> list[Series]:
    """Group rows by scheduler and average replicates per grid point.

    Rows whose value cell is empty (analytic rows on jitter figures, for
    example) are skipped.  The analytic series, when present, is returned
    last so it draws on top of its simulated counterpart.
    """
    if figure not in FIGURES:
        raise FigureError(
            f"unknown figure {figure!r}; expected one of {', '.join(FIGURES)}"
        )
    value_col = _VALUE_COLUMN[figure]
    for col in ("lambda2", "scheduler", value_col):
        if col not in fieldnames:
            raise FigureError(f"missing column {col!r} in sweep CSV")
    include_analytic = figure == "utility"
    order: list[str] = []
    sums: dict[str, dict[float, float]] = {}
    counts: dict[str, dict[float, int]] = {}
    for row in rows:
        name = row["scheduler"]
        raw = row[value_col]
        if raw == "" or (name == ANALYTIC_NAME and not include_analytic):
            continue
        try:
            x = float(row["lambda2"])
            y = float(raw)
        except ValueError as exc:
            raise FigureError(
                f"non-numeric cell in columns lambda2/{value_col}: {exc}"
            ) from exc
        if name not in sums:
            order.append(name)
            sums[name] = {}
            counts[name] = {}
        sums[name][x] = sums[name].get(x, 0.0) + y
        counts[name][x] = counts[name].get(x, 0) + 1
    if not order:
        raise FigureError(f"column {value_col!r} has no values to plot")
    series = []
    for name in order:
        if name == ANALYTIC_NAME:
            continue
        xs = tuple(sorted(sums[name]))
        series.append(
            Series(
                label=name,
                x=xs,
                y=tuple(sums[name][x] / counts[name][x] for x in xs),
            )
        )
    if ANALYTIC_NAME in sums:
        xs = tuple(sorted(sums[ANALYTIC_NAME]))
        series.append(
            Series(
                label="proposed (analytic)",
                x=xs,
                y=tuple(sums[ANALYTIC_NAME][x] / counts[ANALYTIC_NAME][x] for x in xs),
                analytic=True,
            )
        )
    return series


def render(spec: FigureSpec) -> Path:
    """Render one figure to ``spec.out_path`` and return that path."""
    fieldnames, rows = read_rows(spec.csv_path)
    series = extract_series(fieldnames, rows, spec.figure)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for s in series:
        if s.analytic:
            ax.plot(s.x, s.y, linestyle="--", color="black", label=s.label)
        else:
            ax.plot(s.x, s.y, marker="o", markersize=3, label=s.label)
    ax.set_xlabel("class-2 arrival rate (packets/s)")
    ax.set_ylabel(_Y_LABEL[spec.figure])
    ax.set_title(_TITLE[spec.figure])
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    plt.close(fig)
    return spec.out_path
