#!/usr/bin/env python3
"""Plot objective-gap traces written by `rapsa run`.

    python scripts/plot_traces.py out/desk_replica            # every B*_mean.csv
    python scripts/plot_traces.py a.csv b.csv --x features    # explicit files

Produces gap-vs-iteration and gap-vs-features-processed figures on log axes.
"""

import argparse
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_trace(path):
    cols = {"t": [], "features_processed": [], "objective_gap": []}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            for k in cols:
                cols[k].append(float(row[k]))
    return cols


def collect(inputs):
    files = []
    for p in map(pathlib.Path, inputs):
        if p.is_dir():
            files.extend(sorted((p / "traces").glob("B*_mean.csv")) or sorted(p.glob("*.csv")))
        else:
            files.append(p)
    return files


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("inputs", nargs="+", help="run directories or trace CSV files")
    ap.add_argument("--x", choices=["t", "features", "both"], default="both")
    ap.add_argument("--out", default=None, help="output PNG prefix (default: first input)")
    args = ap.parse_args()

    files = collect(args.inputs)
    if not files:
        raise SystemExit("no trace files found")
    axes = {"t": [("t", "iteration t")], "features": [("features_processed", "features processed")]}
    axes["both"] = axes["t"] + axes["features"]
    prefix = pathlib.Path(args.out) if args.out else pathlib.Path(args.inputs[0]).with_suffix("")
    traces = [(f.stem, read_trace(f)) for f in files]
    for key, label in axes[args.x]:
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, tr in traces:
            pts = [(x, g) for x, g in zip(tr[key], tr["objective_gap"]) if x > 0 and g > 0]
            if pts:
                ax.loglog(*zip(*pts), label=name)
        ax.set_xlabel(label)
        ax.set_ylabel("F(x) - F*")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize="small")
        fig.tight_layout()
        out = f"{prefix}_{key}.png"
        fig.savefig(out, dpi=150)
        print(out)


if __name__ == "__main__":
    main()
