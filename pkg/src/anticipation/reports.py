"""Writers for metric tables, target dumps, and analysis outputs.

CSV layouts mirror the usual results tables: one row per method, wMAE and
pMAE columns per instrument plus the mean over instruments.  Analysis
writers emit one CSV per analysis.  Plot helpers render SVG scatter/box
figures and import matplotlib lazily, so the package works without it.
"""

from __future__ import annotations

import csv
import json
from typing import Mapping, Optional, Sequence

import numpy as np

from .analysis import FilterCurve, PccResult, TpFpResult, TriggerResult
from .labels import AnticipationTargets
from .metrics import MetricsReport


def _cell(value: float) -> str:
    return "" if value is None or (isinstance(value, float) and np.isnan(value)) else f"{value:.6f}"


def write_metrics_table(reports: Mapping[str, MetricsReport], csv_path: str,
                        json_path: Optional[str] = None) -> None:
    """One row per method; per-instrument and mean wMAE/pMAE columns."""
    if not reports:
        raise ValueError("no reports to write")
    first = next(iter(reports.values()))
    names = first.names
    header = ["method", "horizon"]
    for name in names:
        header += [f"wmae_{name}", f"pmae_{name}"]
    header += ["wmae_mean", "pmae_mean", "wmae_instruments", "pmae_instruments"]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for method, report in reports.items():
            row = [method, f"{report.horizon:g}"]
            for j in range(len(names)):
                row += [_cell(float(report.wmae[j])), _cell(float(report.pmae[j]))]
            row += [
                _cell(report.mean_wmae), _cell(report.mean_pmae),
                str(report.wmae_count), str(report.pmae_count),
            ]
            writer.writerow(row)
    if json_path is not None:
        payload = {method: report.to_dict() for method, report in reports.items()}
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")


def write_targets_csv(targets: AnticipationTargets, path: str,
                      names: Optional[Sequence[str]] = None) -> None:
    names = list(names) if names else [f"inst_{j}" for j in range(targets.n_instruments)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame"] + [f"r_{n}" for n in names] + [f"c_{n}" for n in names])
        for i in range(targets.n_frames):
            writer.writerow(
                [i]
                + [repr(float(v)) for v in targets.remaining[i]]
                + [int(v) for v in targets.classes[i]]
            )


def write_pcc_csv(results: Sequence[PccResult], path: str,
                  names: Optional[Sequence[str]] = None) -> None:
    names = list(names) if names else [f"inst_{j}" for j in range(len(results))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instrument", "pcc", "count", "reason"])
        for name, res in zip(names, results):
            writer.writerow([name, _cell(res.value), res.count, res.reason or ""])


def write_filter_csv(curves: Sequence[FilterCurve], path: str,
                     names: Optional[Sequence[str]] = None) -> None:
    names = list(names) if names else [f"inst_{j}" for j in range(len(curves))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instrument", "percentile", "pmae", "count"])
        for name, curve in zip(names, curves):
            for q, v, c in zip(curve.percentiles, curve.pmae, curve.counts):
                writer.writerow([name, f"{q:g}", _cell(float(v)), int(c)])


def write_tpfp_csv(results: Sequence[TpFpResult], path: str,
                   names: Optional[Sequence[str]] = None) -> None:
    names = list(names) if names else [f"inst_{j}" for j in range(len(results))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "instrument", "group", "count", "median_epistemic", "median_aleatoric",
        ])
        for name, res in zip(names, results):
            for group, stats in (("tp", res.tp), ("fp", res.fp)):
                writer.writerow([
                    name, group, stats.count,
                    _cell(stats.median_epistemic), _cell(stats.median_aleatoric),
                ])


def write_trigger_csv(result: TriggerResult, path: str,
                      names: Optional[Sequence[str]] = None) -> None:
    def label(idx: int) -> str:
        return names[idx] if names else f"inst_{idx}"

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "target", "trigger", "condition", "reg_count", "cls_count",
            "median_reg_epistemic", "median_cls_epistemic", "median_cls_aleatoric",
        ])
        for cond in (result.visible, result.hidden):
            writer.writerow([
                label(result.target), label(result.trigger),
                "visible" if cond.visible else "hidden",
                cond.reg_count, cond.cls_count,
                _cell(cond.median_reg_epistemic),
                _cell(cond.median_cls_epistemic),
                _cell(cond.median_cls_aleatoric),
            ])


# ---------------------------------------------------------------------------
# Optional SVG plots (presentation only; analyses are read from the CSVs)
# ---------------------------------------------------------------------------

def _matplotlib():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        return plt
    except ImportError as exc:
        raise RuntimeError(
            "plot emission requires matplotlib (install the 'plots' extra)"
        ) from exc


def plot_error_uncertainty(errors: np.ndarray, variances: np.ndarray, path: str,
                           title: str = "") -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.scatter(variances, errors, s=6, alpha=0.4)
    if errors.size >= 2 and np.ptp(variances) > 0:
        slope, intercept = np.polyfit(variances, errors, 1)
        xs = np.linspace(variances.min(), variances.max(), 32)
        ax.plot(xs, slope * xs + intercept, color="black", linewidth=1)
    ax.set_xlabel("epistemic variance (min$^2$)")
    ax.set_ylabel("|error| (min)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_filter_curves(curves: Sequence[FilterCurve], path: str,
                       names: Optional[Sequence[str]] = None) -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(4, 3))
    for j, curve in enumerate(curves):
        label = names[j] if names else f"inst_{j}"
        ax.plot(curve.percentiles, curve.pmae, marker="o", markersize=3, label=label)
    ax.set_xlabel("retained percentile (least uncertain)")
    ax.set_ylabel("pMAE (min)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_trigger_box(result: TriggerResult, path: str, quantity: str = "cls_aleatoric") -> None:
    plt = _matplotlib()
    data = [getattr(result.visible, quantity), getattr(result.hidden, quantity)]
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.boxplot([d if d.size else [0.0] for d in data], tick_labels=["trigger visible", "not visible"])
    ax.set_ylabel(quantity.replace("_", " "))
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
