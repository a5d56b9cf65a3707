"""Ablation grids: memory/differential switches and aggregator choices.

Each cell trains one model; both reference modes are evaluated from the
same run, so a variant contributes two columns, e.g. ``mad(R)`` and
``mad(N)``.
"""

from __future__ import annotations

import csv
import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import MadConfig, TrainConfig
from .data import LinkDataset
from .link import LinkModel
from .memory import AdjacencyMemory
from .trainer import fit

MODE_TAG = {"random": "R", "dynamic": "N"}

GRIDS = {
    "fig3a": [("mad", {"ablation": "mad"}), ("nograd", {"ablation": "nograd"}), ("nomem", {"ablation": "nomem"})],
    "fig3b": [
        ("mean", {"aggregator": "mean"}),
        ("softmin", {"aggregator": "softmin"}),
        ("sentinel", {"aggregator": "sentinel"}),
    ],
}


@dataclass
class AblationResult:
    """``curves[(seed, column)]`` is the Hits@k curve over evaluated epochs."""

    columns: list[str]
    epochs: list[int]
    curves: dict[tuple[int, str], list[float]]
    split: str

    def final(self, seed: int, column: str) -> float:
        return self.curves[(seed, column)][-1]

    def area(self, seed: int, column: str) -> float:
        """Trapezoidal area under the Hits@k curve, per evaluated epoch."""
        y = np.asarray(self.curves[(seed, column)])
        if len(y) == 1:
            return float(y[0])
        return float(np.sum((y[1:] + y[:-1]) / 2.0))

    @property
    def seeds(self) -> list[int]:
        return sorted({s for s, _ in self.curves})

    def to_rows(self) -> list[dict]:
        rows = []
        for seed in self.seeds:
            for i, epoch in enumerate(self.epochs):
                row = {"seed": seed, "epoch": epoch}
                row.update({c: self.curves[(seed, c)][i] for c in self.columns})
                rows.append(row)
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, ["seed", "epoch", *self.columns], lineterminator="\n")
            writer.writeheader()
            for row in self.to_rows():
                writer.writerow({k: (repr(float(v)) if k in self.columns else v) for k, v in row.items()})

    def summary(self) -> dict:
        return {
            "split": self.split,
            "final": {str(s): {c: self.final(s, c) for c in self.columns} for s in self.seeds},
            "area": {str(s): {c: self.area(s, c) for c in self.columns} for s in self.seeds},
        }


def run_cell(dataset: LinkDataset, mad: MadConfig, train: TrainConfig):
    model = LinkModel(dataset.full.n_nodes, AdjacencyMemory.from_graph(dataset.train), mad, dataset.full.directed)
    return fit(model, dataset.train, train, dataset.splits)


def run_ablation(
    grid,
    datasets: dict[int, LinkDataset],
    mad: MadConfig,
    train: TrainConfig,
    split: str = "test",
    jobs: int = 1,
) -> AblationResult:
    """Train every grid variant on every seed's dataset.

    ``grid`` is a name from ``GRIDS`` or a list of ``(label, overrides)``
    pairs applied to ``mad``. Seeds are the keys of ``datasets``; model
    initialisation and training use the same seed.
    """
    variants = GRIDS[grid] if isinstance(grid, str) else list(grid)
    tasks = []
    for seed, ds in sorted(datasets.items()):
        for label, overrides in variants:
            cfg = dataclasses.replace(mad, seed=seed, **overrides)
            tcfg = dataclasses.replace(train, seed=seed)
            tasks.append((seed, label, ds, cfg, tcfg))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            runs = list(pool.map(lambda t: run_cell(t[2], t[3], t[4]), tasks))
    else:
        runs = [run_cell(t[2], t[3], t[4]) for t in tasks]
    columns = [f"{label}({MODE_TAG[m]})" for label, _ in variants for m in ("random", "dynamic")]
    curves = {}
    epochs = None
    for (seed, label, *_), reports in zip(tasks, runs):
        evaluated = [r for r in reports if r.hits]
        epochs = [r.epoch for r in evaluated]
        for mode in ("random", "dynamic"):
            curves[(seed, f"{label}({MODE_TAG[mode]})")] = [r.hits[split][mode] for r in evaluated]
    return AblationResult(columns, epochs or [], curves, split)
