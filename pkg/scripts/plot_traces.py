"""Plot epoch curves from a ``varchen run`` output directory.

Reads every ``<run>_seed<S>_epochs.csv`` (columns: epoch, full_loss,
full_grad_norm, val_metric) and draws full-gradient norm per epoch on a log
axis, one line per file. Needs the optional ``plot`` extra (matplotlib).

    python3 scripts/plot_traces.py runs/ -o grad.png
"""
import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", type=Path)
    ap.add_argument("-o", "--output", type=Path, default=Path("grad_norm.png"))
    ap.add_argument("--column", default="full_grad_norm", choices=["full_loss", "full_grad_norm"])
    args = ap.parse_args(argv)

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in sorted(args.outdir.glob("*_epochs.csv")):
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        ax.plot([int(r["epoch"]) for r in rows], [float(r[args.column]) for r in rows],
                label=path.name.removesuffix("_epochs.csv"))
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel(args.column)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)


if __name__ == "__main__":
    main()
