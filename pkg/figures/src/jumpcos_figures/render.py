"""Render figures from jumpcos experiment CSV outputs.

Each CSV schema emitted by the pricing CLI maps to one figure layout:
smile curves per model, Bermudan exercise-date curves, density overlays,
log-scale error decay, and the timing bar chart.  The scenario label is
read from the JSON sidecar written next to each CSV and embedded in the
title.  No numerical work happens here.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


class SchemaError(ValueError):
    """The CSV does not match any known figure schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One rendering job: input CSV, figure kind, output image path."""

    csv_path: Path
    kind: str
    out_path: Path


# figure kind -> (required columns, renderer name)
SCHEMAS = {
    "smile": ["axis_value", "model", "price", "implied_vol"],
    "bermudan": ["exercise_dates", "model", "price", "implied_vol"],
    "density": ["log_price", "model", "density"],
    "dcos-error": ["n_terms", "distribution", "abs_error"],
    "bench": ["model", "mean_seconds", "speedup_vs_hh"],
}

MODEL_STYLE = {
    "hqh": dict(color="tab:blue", marker="o"),
    "hh": dict(color="tab:red", marker="s"),
    "bates": dict(color="tab:green", marker="^"),
    "heston": dict(color="tab:gray", marker="d"),
}


def load_rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        rows = list(reader)
    if not header:
        raise SchemaError(f"{path}: empty file, no header row")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return header, rows


def detect_kind(header):
    for kind, columns in SCHEMAS.items():
        if set(columns) <= set(header):
            return kind
    raise SchemaError(f"header {header} matches no known schema")


def sidecar_label(csv_path):
    side = Path(csv_path).with_suffix(".json")
    if not side.exists():
        return None
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError:
        return None
    label = meta.get("scenario")
    return None if label in (None, "", "-") else label


def _grouped(rows, key):
    groups = {}
    for row in rows:
        groups.setdefault(row[key], []).append(row)
    return groups


def _style(model):
    return MODEL_STYLE.get(model, dict(marker="x"))


def _title(base, label):
    return f"{base} (scenario {label})" if label else base


def render(spec):
    """Render one figure; returns the output path.

    Raises SchemaError when the CSV lacks the columns of the requested
    kind; empty files fail before any figure is opened.
    """
    header, rows = load_rows(spec.csv_path)
    missing = [c for c in SCHEMAS[spec.kind] if c not in header]
    if missing:
        raise SchemaError(f"{spec.csv_path}: missing columns {missing} for {spec.kind}")
    label = sidecar_label(spec.csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    try:
        _RENDERERS[spec.kind](ax, rows, label)
        fig.tight_layout()
        fig.savefig(spec.out_path, dpi=130)
    finally:
        plt.close(fig)
    return spec.out_path


def _render_smile(ax, rows, label):
    for model, group in _grouped(rows, "model").items():
        pts = [(float(r["axis_value"]), float(r["implied_vol"]))
               for r in group if r["implied_vol"] != ""]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                label=model, markersize=3.5, **_style(model))
    ax.set_xlabel("axis value")
    ax.set_ylabel("implied volatility")
    ax.legend()
    ax.set_title(_title("Implied volatility sweep", label))


def _render_bermudan(ax, rows, label):
    for model, group in _grouped(rows, "model").items():
        pts = sorted((int(r["exercise_dates"]), float(r["implied_vol"])) for r in group)
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                label=model, markersize=4, **_style(model))
    ax.set_xlabel("exercise dates")
    ax.set_ylabel("implied volatility")
    ax.legend()
    ax.set_title(_title("Bermudan exercise-date curve", label))


def _render_density(ax, rows, label):
    for model, group in _grouped(rows, "model").items():
        pts = sorted((float(r["log_price"]), float(r["density"])) for r in group)
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                label=model, marker="", **{k: v for k, v in _style(model).items()
                                           if k != "marker"})
    ax.set_xlabel("log price")
    ax.set_ylabel("density")
    ax.legend()
    ax.set_title(_title("Log-price density", label))


def _render_dcos_error(ax, rows, label):
    for dist, group in _grouped(rows, "distribution").items():
        pts = sorted((int(r["n_terms"]), float(r["abs_error"])) for r in group)
        pts = [p for p in pts if p[1] > 0.0]
        ax.loglog([p[0] for p in pts], [p[1] for p in pts],
                  label=dist, marker="o", markersize=4)
    ax.set_xlabel("expansion terms")
    ax.set_ylabel("absolute error")
    ax.legend()
    ax.set_title(_title("Discrete-recovery error decay", label))


def _render_bench(ax, rows, label):
    models = [r["model"] for r in rows]
    times = [float(r["mean_seconds"]) for r in rows]
    bars = ax.bar(models, times,
                  color=[_style(m).get("color", "tab:gray") for m in models])
    for bar, row in zip(bars, rows):
        ax.annotate(f"x{float(row['speedup_vs_hh']):.1f}",
                    (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=9)
    ax.set_ylabel("mean grid time (s)")
    ax.set_title(_title("European-grid timing", label))


_RENDERERS = {
    "smile": _render_smile,
    "bermudan": _render_bermudan,
    "density": _render_density,
    "dcos-error": _render_dcos_error,
    "bench": _render_bench,
}


def build_specs(paths, kind, outdir):
    specs = []
    for path in paths:
        path = Path(path)
        header, _ = load_rows(path)
        resolved = kind or detect_kind(header)
        out = (Path(outdir) if outdir else path.parent) / (path.stem + ".png")
        specs.append(FigureSpec(csv_path=path, kind=resolved, out_path=out))
    return specs


def main(argv=None):
    parser = argparse.ArgumentParser(prog="jumpcos-figures",
                                     description="Render jumpcos CSV outputs")
    parser.add_argument("csv", nargs="+", help="experiment CSV files")
    parser.add_argument("--kind", choices=sorted(SCHEMAS), default=None,
                        help="override schema detection")
    parser.add_argument("--outdir", default=None)
    args = parser.parse_args(argv)
    try:
        specs = build_specs(args.csv, args.kind, args.outdir)
        for spec in specs:
            out = render(spec)
            print(f"wrote {out}")
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
