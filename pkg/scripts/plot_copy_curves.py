#!/usr/bin/env python3
"""Plot recall-accuracy curves from the copy-task metric traces.

Reads the CSVs written by run_copy_experiments.py and draws one panel per
blank gap, QLSTM solid / LSTM dashed, one line per seed.  Needs matplotlib
(pre-installed in most scientific Python setups; not a package dependency).
"""

import argparse
import re
import sys
from collections import defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from qrnn.io import read_metrics

FILE_RE = re.compile(r"copy_gap(\d+)_(qlstm|lstm)_seed(\d+)(_long)?\.csv")


def load_runs(results_dir, include_long):
    runs = defaultdict(list)
    for path in sorted(results_dir.glob("copy_gap*.csv")):
        m = FILE_RE.fullmatch(path.name)
        if m is None:
            continue
        gap, kind, seed, long_tag = (int(m[1]), m[2], int(m[3]), bool(m[4]))
        if long_tag and not include_long:
            continue
        runs[gap].append((kind, seed, long_tag, read_metrics(path)))
    return runs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--results", type=Path, default=Path("results"))
    parser.add_argument("--out", type=Path, default=Path("results/copy_curves.png"))
    parser.add_argument("--long", action="store_true",
                        help="include the extended-horizon traces")
    args = parser.parse_args(argv)

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("error: matplotlib is required for plotting", file=sys.stderr)
        return 1

    runs = load_runs(args.results, args.long)
    if not runs:
        print(f"error: no copy_gap*.csv traces under {args.results}",
              file=sys.stderr)
        return 1

    fig, axes = plt.subplots(1, len(runs), figsize=(6 * len(runs), 4),
                             squeeze=False)
    colors = {"qlstm": "tab:blue", "lstm": "tab:orange"}
    for ax, gap in zip(axes[0], sorted(runs)):
        for kind, seed, long_tag, records in runs[gap]:
            ax.plot([r.epoch for r in records],
                    [r.accuracy_recall for r in records],
                    color=colors[kind],
                    linestyle="-" if kind == "qlstm" else "--",
                    alpha=0.4 if long_tag else 0.9,
                    linewidth=1.0,
                    label=f"{kind} seed {seed}" + (" (long)" if long_tag else ""))
        ax.axhline(1 / 9, color="grey", linewidth=0.8, linestyle=":",
                   label="chance")
        ax.set_title(f"copy task, blank gap {gap}")
        ax.set_xlabel("epoch")
        ax.set_ylabel("recall accuracy")
        ax.set_ylim(0.0, 1.05)
        ax.legend(fontsize=7)
    fig.tight_layout()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
