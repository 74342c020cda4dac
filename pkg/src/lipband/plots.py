"""Optional SVG charts drawn from the CSVs an experiment just wrote."""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path


def _read(path: Path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _lines(path: Path, key: str, x: str, y: str, out: Path, title: str, logx: bool = False) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = defaultdict(lambda: ([], []))
    for row in _read(path):
        xs, ys = series[row[key]]
        xs.append(float(row[x]))
        ys.append(float(row[y]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (xs, ys) in sorted(series.items()):
        ax.plot(xs, ys, label=name)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out


def render(res, out: Path) -> list:
    """Draw whatever the experiment produced; returns the SVG paths."""
    made = []
    names = {p.name: p for p in res.files}
    if "risk_mean_regret.csv" in names:
        made.append(_lines(names["risk_mean_regret.csv"], "policy", "t", "mean_regret",
                           out / "risk_mean_regret.svg", "mean regret", logx=True))
    if "estimator_traces.csv" in names:
        made.append(_lines(names["estimator_traces.csv"], "estimator", "M_prime", "value",
                           out / "estimator_traces.svg", "estimates of L"))
    return made
