"""Run both ablation grids on SBM and print final Hits@20 and curve areas.

    python scripts/ablation_report.py --seeds 1,2,3 --epochs 25 --out runs/ablation
"""

import argparse
import json
from pathlib import Path

from madlearn.ablation import run_ablation
from madlearn.config import MadConfig, TrainConfig
from madlearn.data import builtin_graph, make_link_dataset


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", default="1,2,3")
    parser.add_argument("--epochs", type=int, default=25)
    parser.add_argument("--dataset", default="sbm", choices=["sbm", "karate"])
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default="runs/ablation")
    args = parser.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    datasets = {s: make_link_dataset(builtin_graph(args.dataset, s), s, name=args.dataset) for s in seeds}
    train = TrainConfig(epochs=args.epochs, eval_every=1)
    for grid in ("fig3a", "fig3b"):
        res = run_ablation(grid, datasets, MadConfig(), train, jobs=args.jobs)
        res.write_csv(out / f"{grid}.csv")
        (out / f"{grid}_summary.json").write_text(json.dumps(res.summary(), indent=2, sort_keys=True))
        print(f"== {grid} (final Hits@20 / area)")
        print("seed  " + "  ".join(f"{c:>14}" for c in res.columns))
        for s in res.seeds:
            cells = [f"{res.final(s, c):.3f}/{res.area(s, c):5.2f}" for c in res.columns]
            print(f"{s:<5} " + "  ".join(f"{c:>14}" for c in cells))


if __name__ == "__main__":
    main()
