"""Train a 2-d Karate model and plot positions coloured by club, with g as arrows.

    python scripts/plot_karate.py --out runs/karate_plot --seed 0
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from madlearn import cli  # noqa: E402
from madlearn.data import karate, read_embeddings  # noqa: E402


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/karate_plot")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=200)
    args = parser.parse_args()
    out = Path(args.out)
    code = cli.main(
        ["export-embeddings", "--dataset", "karate", "--dim", "2", "--seed", str(args.seed),
         "--epochs", str(args.epochs), "--out", str(out)]
    )
    if code:
        raise SystemExit(code)
    emb = read_embeddings(out / "embeddings.csv")
    pos, grad = emb["pos"][0], emb["grad"][0]
    graph = karate()
    fig, ax = plt.subplots(figsize=(6, 6))
    for u, v in graph.edges:
        ax.plot(*pos[[u, v]].T, color="0.85", lw=0.6, zorder=0)
    colors = np.where(graph.labels == 0, "tab:blue", "tab:orange")
    ax.scatter(pos[:, 0], pos[:, 1], c=colors, s=60, zorder=2)
    ax.quiver(pos[:, 0], pos[:, 1], grad[:, 0], grad[:, 1], color="tab:red", width=0.004, zorder=1)
    for i, (x, y) in enumerate(pos):
        ax.annotate(str(i), (x, y), fontsize=7, ha="center", va="center", zorder=3)
    ax.set_aspect("equal")
    ax.set_title("Karate club: positions (dots) and differentials (arrows)")
    fig.tight_layout()
    fig.savefig(out / "karate.png", dpi=150)
    print(f"wrote {out / 'karate.png'}")


if __name__ == "__main__":
    main()
