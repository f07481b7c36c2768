#!/usr/bin/env python3
"""Rate-distortion plots from an `rjip sweep` CSV.

    scripts/plot_rd.py results.csv                 # corpus averages -> rd_average.png
    scripts/plot_rd.py results.csv --image kodim20 # one image -> rd_kodim20.png
    scripts/plot_rd.py results.csv --check         # parse and validate only

Plotting needs matplotlib; --check uses only the standard library.
"""

import argparse
import csv
import sys
from collections import defaultdict

COLUMNS = [
    "image", "mode", "ratio_requested", "ratio_achieved", "mse", "encode_s",
    "h_y", "q_y", "h_c", "q_c", "f", "k", "distinct_colours",
]
FLOATS = {"ratio_requested", "ratio_achieved", "mse", "encode_s", "h_y", "h_c", "f"}
INTS = {"q_y", "q_c", "k", "distinct_colours"}
MODES = ("rgb", "lp", "vector")


def parse(path):
    """Rows as dicts with typed values; empty cells become None."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        rows = []
        for line, raw in enumerate(reader, start=2):
            row = {}
            for key, value in raw.items():
                if value == "":
                    row[key] = None
                elif key in FLOATS:
                    row[key] = float(value)
                elif key in INTS:
                    row[key] = int(value)
                else:
                    row[key] = value
            if row["mode"] not in MODES:
                raise ValueError(f"line {line}: unknown mode {row['mode']!r}")
            if row["mse"] is None or row["mse"] < 0:
                raise ValueError(f"line {line}: bad mse")
            rows.append(row)
    return rows


def curves(rows, image):
    out = defaultdict(list)
    for row in rows:
        if row["image"] == image:
            out[row["mode"]].append((row["ratio_requested"], row["mse"]))
    return {mode: sorted(points) for mode, points in out.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv")
    ap.add_argument("--image", default="average")
    ap.add_argument("--out")
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()

    rows = parse(args.csv)
    if args.check:
        print(f"{len(rows)} rows ok")
        return 0
    data = curves(rows, args.image)
    if not data:
        print(f"no rows for image {args.image!r}", file=sys.stderr)
        return 1

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = {"rgb": "scalar RGB", "lp": "luma preference", "vector": "vector quantised"}
    fig, ax = plt.subplots(figsize=(6, 4))
    for mode in MODES:
        if mode in data:
            xs, ys = zip(*data[mode])
            ax.plot(xs, ys, marker="o", label=labels[mode])
    ax.set_xlabel("compression ratio")
    ax.set_ylabel("MSE")
    ax.set_title(args.image)
    ax.legend()
    ax.grid(alpha=0.3)
    out = args.out or f"rd_{args.image}.png"
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
