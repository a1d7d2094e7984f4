"""Result reporting: mean +/- std tables and the error-versus-size plot.

Statistics are recomputed from the per-repeat values stored in each record,
so the table is trustworthy even if a record's cached summary fields drift.
Error bars are labeled explicitly as +/-1 sample standard deviation.
"""

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

TABLE_COLUMNS = (
    "task", "architecture", "layers", "nodes", "total", "repeats", "mean_error", "std_error",
    "fingerprint",
)


def sample_std(values) -> float:
    """Unbiased sample standard deviation; 0 for fewer than two values."""
    vals = [float(v) for v in values]
    if len(vals) < 2:
        return 0.0
    mean = sum(vals) / len(vals)
    return math.sqrt(sum((v - mean) ** 2 for v in vals) / (len(vals) - 1))


def load_record(path: str) -> dict:
    """Read a record.json (or the directory containing one)."""
    p = Path(path)
    if p.is_dir():
        p = p / "record.json"
    try:
        with open(p, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read record {str(p)!r}: {exc}") from None


def _record_row(record: dict) -> dict:
    cfg = record["config"]
    errors = [rep["error_rate"] for rep in record["repeats"]]
    layers = int(cfg["n_layers"])
    nodes = int(cfg["nodes_per_layer"])
    return {
        "task": cfg["task"],
        "architecture": cfg["architecture"],
        "layers": layers,
        "nodes": nodes,
        "total": layers * nodes,
        "repeats": len(errors),
        "mean_error": sum(errors) / len(errors),
        "std_error": sample_std(errors),
        "fingerprint": record["fingerprint"],
    }


def summary_table(records: list[dict]) -> str:
    """Aligned text table, one row per record, errors as mean +/- 1 sd."""
    if not records:
        raise ValueError("no records to report")
    rows = [_record_row(r) for r in records]
    rows.sort(key=lambda r: (r["task"], r["architecture"], r["total"]))
    rendered = [
        {
            **{k: str(row[k]) for k in ("task", "architecture", "layers", "nodes",
                                        "total", "repeats", "fingerprint")},
            "mean_error": f"{row['mean_error']:.6f}",
            "std_error": f"{row['std_error']:.6f}",
        }
        for row in rows
    ]
    widths = {c: max(len(c), *(len(r[c]) for r in rendered)) for c in TABLE_COLUMNS}
    header = "  ".join(c.ljust(widths[c]) for c in TABLE_COLUMNS)
    rule = "  ".join("-" * widths[c] for c in TABLE_COLUMNS)
    body = ["  ".join(r[c].ljust(widths[c]) for c in TABLE_COLUMNS) for r in rendered]
    return "\n".join([header, rule, *body]) + "\n"


def plot_records(records: list[dict], path: str):
    """Error rate versus total nodes (L x N), one series per architecture,
    written as SVG."""
    if not records:
        raise ValueError("no records to plot")
    rows = [_record_row(r) for r in records]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for arch in sorted({r["architecture"] for r in rows}):
        series = sorted((r for r in rows if r["architecture"] == arch), key=lambda r: r["total"])
        ax.errorbar(
            [r["total"] for r in series],
            [r["mean_error"] for r in series],
            yerr=[r["std_error"] for r in series],
            marker="o", capsize=3, label=arch,
        )
    ax.set_xlabel("total nodes (L x N)")
    ax.set_ylabel("error rate")
    ax.set_title("error rate vs reservoir size (bars: +/- 1 sd)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def write_report(record_paths: list[str], out_dir: str) -> tuple[str, str]:
    """Load records, write table.txt and errors.svg; returns both paths."""
    records = [load_record(p) for p in record_paths]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = summary_table(records)
    table_path = out / "table.txt"
    table_path.write_text(table, encoding="utf-8")
    plot_path = out / "errors.svg"
    plot_records(records, str(plot_path))
    return str(table_path), str(plot_path)
