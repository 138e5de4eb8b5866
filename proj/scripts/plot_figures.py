"""Render the CSV output of `sdpass simulate` and `sdpass sweep` as PNG plots.

    python scripts/plot_figures.py --run run1/ --sweep sweep_out/sweep.csv --out plots/

Either input may be omitted. A run directory is compared against the
continuous loop; a sweep table gives RMSE against delta, one line per order.
"""

import argparse
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {key: [float(r[key]) for r in rows] for key in rows[0]}


def plot_run(run_dir, out_dir):
    sampled = read_columns(run_dir / "sampled.csv")
    continuous = read_columns(run_dir / "continuous.csv")
    dense = run_dir / "sampled_dense.csv"

    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    for ax, key in zip(axes[:2], ("q", "p")):
        if dense.exists():
            d = read_columns(dense)
            ax.plot(d["t"], d[key], color="tab:blue", lw=0.8, label="sampled (intersample)")
        ax.plot(sampled["t"], sampled[key], "o", color="tab:blue", ms=3, label="sampled")
        ax.plot(continuous["t"], continuous[key], "--", color="tab:orange", label="continuous")
        ax.set_ylabel(key)
    axes[0].legend()
    axes[2].step(sampled["t"], sampled["u"], where="post", label="sampled u")
    axes[2].plot(continuous["t"], continuous["u"], "--", label="continuous u")
    axes[2].set_ylabel("u")
    axes[2].set_xlabel("t")
    axes[2].legend()
    fig.tight_layout()
    fig.savefig(out_dir / "trajectory.png", dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(sampled["t"], sampled["Hd"], "o-", ms=3, label="sampled")
    ax.semilogy(continuous["t"], continuous["Hd"], "--", label="continuous")
    ax.set_xlabel("t")
    ax.set_ylabel("H_d")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "storage.png", dpi=150)
    plt.close(fig)


def plot_sweep(sweep_csv, out_dir):
    table = read_columns(sweep_csv)
    by_order = {}
    for delta, order, rmse in zip(table["delta"], table["p"], table["rmse"]):
        by_order.setdefault(order, []).append((delta, rmse))

    fig, ax = plt.subplots(figsize=(7, 4))
    for order, points in sorted(by_order.items()):
        points.sort()
        ax.semilogy([d for d, _ in points], [e for _, e in points], "o-", ms=3, label=f"p = {order:g}")
    ax.set_xlabel("delta")
    ax.set_ylabel("RMSE of H_d against the continuous loop")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "sweep.png", dpi=150)
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--run", type=pathlib.Path, help="directory written by `sdpass simulate --out`")
    parser.add_argument("--sweep", type=pathlib.Path, help="sweep.csv written by `sdpass sweep --out`")
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("."), help="where to write PNGs")
    args = parser.parse_args()
    if args.run is None and args.sweep is None:
        parser.error("give --run and/or --sweep")
    args.out.mkdir(parents=True, exist_ok=True)
    if args.run is not None:
        plot_run(args.run, args.out)
    if args.sweep is not None:
        plot_sweep(args.sweep, args.out)


if __name__ == "__main__":
    main()
