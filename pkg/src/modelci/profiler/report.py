"""Result export: CSV (one row per cell) and comparison figures.

The figures group the indicators by (device, backend, protocol) series
against batch size, which is the report users read when picking a
deployment configuration.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from modelci.profiler.types import ProfilingResult

CSV_COLUMNS = [
    "variant_id", "device", "backend", "protocol", "batch_size",
    "peak_throughput", "p50_latency_ms", "p95_latency_ms", "p99_latency_ms",
    "memory_bytes", "utilization", "measured_at", "raw_sample_count",
    "degraded", "resource_scope",
]


def results_to_csv(results: list[ProfilingResult]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for result in sorted(results, key=lambda r: (r.device, r.backend, r.protocol,
                                                 r.batch_size)):
        row = result.to_doc()
        writer.writerow({k: ("" if row[k] is None else row[k]) for k in CSV_COLUMNS})
    return buf.getvalue()


def _series(results: list[ProfilingResult]) -> dict[tuple[str, str, str], list[ProfilingResult]]:
    groups: dict[tuple[str, str, str], list[ProfilingResult]] = {}
    for r in results:
        groups.setdefault((r.device, r.backend, r.protocol), []).append(r)
    for rs in groups.values():
        rs.sort(key=lambda r: r.batch_size)
    return groups


def render_report(results: list[ProfilingResult], out_dir: str | Path,
                  title: str = "") -> list[Path]:
    """Write results.csv plus one figure per indicator family; returns the
    written paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "results.csv"]
    written[0].write_text(results_to_csv(results))
    if not results:
        return written

    groups = _series(results)

    def label(key: tuple[str, str, str]) -> str:
        return f"{key[0]} / {key[1]} / {key[2]}"

    def new_axes(ylabel: str, suffix: str):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        ax.set_xlabel("batch size")
        ax.set_ylabel(ylabel)
        ax.set_xscale("log", base=2)
        ax.grid(True, alpha=0.3)
        if title:
            ax.set_title(f"{title} — {suffix}")
        return fig, ax

    fig, ax = new_axes("peak throughput (samples/s)", "throughput")
    for key, rs in sorted(groups.items()):
        ax.plot([r.batch_size for r in rs], [r.peak_throughput for r in rs],
                marker="o", label=label(key))
    ax.legend(fontsize=8)
    path = out / "throughput.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = new_axes("latency (ms)", "latency percentiles")
    for key, rs in sorted(groups.items()):
        batches = [r.batch_size for r in rs]
        for pname, style in (("p50_latency_ms", "-"), ("p95_latency_ms", "--"),
                             ("p99_latency_ms", ":")):
            ax.plot(batches, [getattr(r, pname) for r in rs], style, marker=".",
                    label=f"{label(key)} {pname[:3]}")
    ax.legend(fontsize=7)
    path = out / "latency.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    for attr, fname, ylabel in (
        ("memory_bytes", "memory.png", "peak memory (bytes)"),
        ("utilization", "utilization.png", "mean utilization (fraction)"),
    ):
        fig, ax = new_axes(ylabel, attr.replace("_", " "))
        plotted = False
        for key, rs in sorted(groups.items()):
            points = [(r.batch_size, getattr(r, attr)) for r in rs
                      if getattr(r, attr) is not None]
            if points:
                ax.plot([p[0] for p in points], [p[1] for p in points],
                        marker="o", label=label(key))
                plotted = True
        if plotted:
            ax.legend(fontsize=8)
            path = out / fname
            fig.savefig(path, dpi=120, bbox_inches="tight")
            written.append(path)
        plt.close(fig)

    return written
