#!/usr/bin/env python3
"""Render the CSV outputs of the experiment runner as PNG figures.

Reads results/{bias_table,observational,counterfactual,zeta_summary}.csv
and writes trajectory, bias-decay and sensitivity-trend plots next to
them.  Plotting is a convenience layer only; nothing downstream depends
on the images.  Requires matplotlib.
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib is required for plotting: pip install matplotlib", file=sys.stderr)
    sys.exit(1)


def read_rows(path: Path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_trajectories(results: Path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
    for ax, name, title in (
        (axes[0], "observational.csv", "observed (Y, W)"),
        (axes[1], "counterfactual.csv", "counterfactual Y under the schedule"),
    ):
        by_unit = defaultdict(lambda: ([], [], []))
        for row in read_rows(results / name):
            t, y, w = by_unit[row["unit"]]
            t.append(float(row["t"]))
            y.append(float(row["Y"]))
            w.append(float(row["W"]))
        for unit, (t, y, w) in by_unit.items():
            ax.plot(t, y, lw=1.0, alpha=0.8)
            if name == "observational.csv":
                ax.plot(t, w, lw=0.8, alpha=0.5, ls="--")
        ax.set_title(title)
        ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(results / "trajectories.png", dpi=150)
    print(results / "trajectories.png")


def plot_bias_decay(results: Path) -> None:
    rows = read_rows(results / "bias_table.csv")
    cells = defaultdict(lambda: ([], []))
    for row in rows:
        key = (row["beta11"], row["beta21"], row["beta12"])
        js, ds = cells[key]
        js.append(int(row["J"]))
        ds.append(abs(float(row["delta"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for (b11, b21, b12), (js, ds) in sorted(cells.items()):
        order = sorted(range(len(js)), key=js.__getitem__)
        ax.loglog(
            [js[i] for i in order],
            [max(d, 1e-16) for d in (ds[i] for i in order)],
            lw=0.9,
            alpha=0.6,
        )
    ax.set_xlabel("J")
    ax.set_ylabel("|bias|")
    ax.set_title("identification bias vs measurement count")
    fig.tight_layout()
    fig.savefig(results / "bias_decay.png", dpi=150)
    print(results / "bias_decay.png")


def plot_zeta_trend(results: Path) -> None:
    rows = read_rows(results / "zeta_summary.csv")
    by_b12 = defaultdict(lambda: ([], []))
    for row in rows:
        if row["median_zeta"] == "undefined":
            continue
        js, zs = by_b12[row["beta12"]]
        js.append(int(row["J"]))
        zs.append(float(row["median_zeta"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for b12, (js, zs) in sorted(by_b12.items(), key=lambda kv: float(kv[0])):
        order = sorted(range(len(js)), key=js.__getitem__)
        ax.plot([js[i] for i in order], [zs[i] for i in order], marker="o", label=f"b12={b12}")
    ax.set_xlabel("J")
    ax.set_ylabel("median sensitivity ratio")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(results / "zeta_trend.png", dpi=150)
    print(results / "zeta_trend.png")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--results", type=Path, default=Path("results"))
    args = parser.parse_args(argv)
    made_any = False
    for plot, needs in (
        (plot_trajectories, ("observational.csv", "counterfactual.csv")),
        (plot_bias_decay, ("bias_table.csv",)),
        (plot_zeta_trend, ("zeta_summary.csv",)),
    ):
        if all((args.results / name).exists() for name in needs):
            plot(args.results)
            made_any = True
        else:
            print(f"skipping {plot.__name__}: missing {needs}", file=sys.stderr)
    return 0 if made_any else 1


if __name__ == "__main__":
    sys.exit(main())
