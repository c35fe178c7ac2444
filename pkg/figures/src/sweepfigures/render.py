"""Render sweep CSVs as relative-revenue line charts.

Input files follow the softprice sweep schema (comment row, then
``sweep_param,sweep_value,regime,revenue,user_welfare,overall_welfare,
p1_pre,p1_post,p2,p_s,relative_revenue``). The chart plots
``relative_revenue`` against the swept parameter, one line per pricing
regime, with the BuyOnly baseline constant at 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

REQUIRED_COLUMNS = ("sweep_param", "sweep_value", "regime", "relative_revenue")

#: Fixed per-regime styling so a regime looks the same in every figure.
REGIME_STYLES = {
    "BuyOnly": {"color": "#444444", "linestyle": "--", "marker": "s"},
    "SubOnly": {"color": "#d62728", "linestyle": "-", "marker": "o"},
    "Both": {"color": "#1f77b4", "linestyle": "-", "marker": "^"},
    "BothGivenBuy": {"color": "#2ca02c", "linestyle": "-.", "marker": "v"},
}


class SchemaError(ValueError):
    """The CSV does not match the sweep schema."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: Path
    param_label: str
    out_path: Path
    styles: dict = field(default_factory=lambda: REGIME_STYLES)


def load_sweep_rows(path: Path) -> list[dict]:
    """Parse a sweep CSV, skipping provenance comment rows."""
    with open(path, newline="") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise SchemaError(f"{path}: empty file, nothing to plot")
    missing = [col for col in REQUIRED_COLUMNS if col not in reader.fieldnames]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    rows = []
    for row in reader:
        if row["relative_revenue"] in (None, "", "NA"):
            continue
        rows.append(
            {
                "sweep_value": float(row["sweep_value"]),
                "regime": row["regime"],
                "relative_revenue": float(row["relative_revenue"]),
            }
        )
    if not rows:
        raise SchemaError(f"{path}: no plottable rows")
    return rows


def render_sweep(spec: FigureSpec) -> Path:
    """Write the line chart; output format follows the file extension."""
    rows = load_sweep_rows(spec.csv_path)
    regimes = sorted({r["regime"] for r in rows}, key=lambda name: list(REGIME_STYLES).index(name)
                     if name in REGIME_STYLES else len(REGIME_STYLES))
    values = sorted({r["sweep_value"] for r in rows})
    if len(values) < 2:
        raise SchemaError(f"{spec.csv_path}: need at least 2 sweep values, got {len(values)}")

    plt.rcParams["svg.hashsalt"] = "sweepfigures"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for regime in regimes:
        series = sorted(((r["sweep_value"], r["relative_revenue"]) for r in rows if r["regime"] == regime))
        xs, ys = zip(*series)
        ax.plot(xs, ys, label=regime, markersize=4.5, **spec.styles.get(regime, {}))
    ax.axhline(1.0, color="#bbbbbb", linewidth=0.8, zorder=0)
    ax.set_xlabel(spec.param_label)
    ax.set_ylabel("revenue relative to BuyOnly")
    ax.legend(frameon=False)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, metadata=_stable_metadata(spec.out_path))
    plt.close(fig)
    return spec.out_path


def _stable_metadata(path: Path) -> dict | None:
    # keep identical inputs producing identical bytes
    suffix = path.suffix.lower()
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None}
    return None
