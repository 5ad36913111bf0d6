"""Baselines, the PU/SMOTE ablation grid and embedding export."""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .metrics import METRIC_NAMES, MetricsReport, compute_metrics, pairwise_auc, rank_auc  # noqa: F401
from .synth_data import Dataset
from .training import RepeatedReport, TrainConfig, TrainedModel, dataset_graph, run_repeated, train

VARIANTS = ("wo_both", "wo_smote", "wo_pu", "full")
VARIANT_LABELS = {
    "wo_both": "w/o (SMOTE & PU)",
    "wo_smote": "w/o SMOTE",
    "wo_pu": "w/o PU",
    "full": "w/ (PU & SMOTE)",
}


@dataclass(frozen=True)
class AblationSpec:
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown ablation variant {self.variant!r}")

    def overrides(self, base: TrainConfig) -> dict:
        pu = self.variant in ("full", "wo_smote")
        smote = self.variant in ("full", "wo_pu")
        pu_mode = base.loss_mode if base.loss_mode != "ce" else "nnpu"
        return {
            "loss_mode": pu_mode if pu else "ce",
            "smote_enabled": smote,
        }

    def resolve(self, base: TrainConfig) -> TrainConfig:
        return dataclasses.replace(base, model="attention", **self.overrides(base))


def _baseline_config(config: TrainConfig, model: str) -> TrainConfig:
    # non-PU baselines: cross-entropy with unlabeled as negative, no oversampling
    return dataclasses.replace(config, model=model, loss_mode="ce", smote_enabled=False)


def baseline_mlp(dataset: Dataset, config: TrainConfig) -> MetricsReport:
    return train(dataset, _baseline_config(config, "none")).evaluate(dataset)


def baseline_mean_gnn(dataset: Dataset, config: TrainConfig) -> MetricsReport:
    return train(dataset, _baseline_config(config, "mean")).evaluate(dataset)


def run_baselines(dataset: Dataset, config: TrainConfig) -> dict[str, RepeatedReport]:
    return {
        "mlp": run_repeated(dataset, _baseline_config(config, "none")),
        "mean_gnn": run_repeated(dataset, _baseline_config(config, "mean")),
    }


@dataclass
class AblationResult:
    reports: dict[str, RepeatedReport]

    def table(self) -> dict[str, dict[str, float]]:
        return {v: self.reports[v].mean() for v in VARIANTS if v in self.reports}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variant"] + [f"{m}_mean" for m in METRIC_NAMES] + [f"{m}_std" for m in METRIC_NAMES])
            for v, rep in self.reports.items():
                mean, std = rep.mean(), rep.std()
                w.writerow([v] + [f"{mean[m]:.6f}" for m in METRIC_NAMES] + [f"{std[m]:.6f}" for m in METRIC_NAMES])

    def plot(self, path: str | Path) -> None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        variants = [v for v in VARIANTS if v in self.reports]
        fig, axes = plt.subplots(1, len(METRIC_NAMES), figsize=(4 * len(METRIC_NAMES), 3.5))
        for ax, m in zip(axes, METRIC_NAMES):
            means = [self.reports[v].mean()[m] for v in variants]
            stds = [self.reports[v].std()[m] for v in variants]
            ax.bar(range(len(variants)), means, yerr=stds, color=["#bbbbbb", "#8fb3d9", "#d9a88f", "#5a9e6f"][: len(variants)])
            ax.set_xticks(range(len(variants)))
            ax.set_xticklabels([VARIANT_LABELS[v] for v in variants], rotation=30, ha="right", fontsize=8)
            ax.set_title(m.upper())
            ax.set_ylim(0, 1)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def run_ablation_grid(dataset: Dataset, base_config: TrainConfig, variants=VARIANTS) -> AblationResult:
    return AblationResult({v: run_repeated(dataset, AblationSpec(v).resolve(base_config)) for v in variants})


@torch.no_grad()
def export_embeddings_for_projection(
    trained: TrainedModel,
    dataset: Dataset,
    stage: str = "both",
    players: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Embeddings of ``players`` at the given stage and their true labels.

    ``behavior`` is the encoder output, ``graph`` the bidirectional graph
    representation alone, ``both`` their concatenation (graph first).
    """
    if stage not in ("behavior", "graph", "both"):
        raise ValueError(f"unknown stage {stage!r}")
    players = np.arange(dataset.num_players) if players is None else np.asarray(players)
    model = trained.model
    model.eval()
    x = model.encoder(torch.as_tensor(dataset.sequences))
    if stage == "behavior":
        emb = x
    else:
        g = model.scorer.graph_embedding(dataset_graph(dataset), x)
        emb = g if stage == "graph" else torch.cat([g, x], dim=1)
    return emb[torch.as_tensor(players)].double().numpy(), dataset.labels[players].copy()


def save_embeddings(path: str | Path, embeddings: np.ndarray, labels: np.ndarray, players: np.ndarray) -> None:
    """Tab-separated: ``player_id  label  e0 e1 ...`` with a header row."""
    with open(path, "w") as fh:
        fh.write("player_id\tlabel\t" + "\t".join(f"e{j}" for j in range(embeddings.shape[1])) + "\n")
        for pid, lab, row in zip(players, labels, embeddings):
            fh.write(f"{int(pid)}\t{int(lab)}\t" + "\t".join(repr(float(v)) for v in row) + "\n")
