"""End-to-end training: encoder -> (GraphSMOTE) -> graph scorer -> PU risk.

Training is full-graph.  In the default inductive mode the model is fit on
the subgraph induced by train players and evaluated on the full graph.
Everything random (init, dropout, SMOTE draws, negative sampling) comes from
generators seeded by the run seed.
"""
from __future__ import annotations

import copy
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch
from torch import nn

from .behavior_encoder import BehaviorEncoder
from .config import ConfigError
from .graph_layers import Graph, GraphScorer
from .metrics import METRIC_NAMES, MetricsReport, compute_metrics, f1_score
from .oversampling import LinkGeneratorParams, draw_smote, train_link_generator, wire_synthetic_nodes
from .pu_loss import cross_entropy_loss, estimate_risk
from .synth_data import FRAUD, LABELED, TEST, TRAIN, VALIDATION, Dataset

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "pugnn-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    d: int = 64
    fx: int = 128
    attention_blocks: int = 5
    project_qkv: bool = True
    gnn_layers: int = 2
    hidden: int = 64
    model: str = "attention"  # attention | mean | none (MLP on behaviour only)
    aggregate: str = "neighbor"  # neighbor | self (literal source-index update)
    dropout: float = 0.1
    lr: float = 0.005
    weight_decay: float = 0.0
    batch_size: int = 0  # 0 = full graph
    max_epochs: int = 100
    patience: int = 10
    min_epochs: int = 0  # early stopping cannot trigger before this epoch
    num_runs: int = 5
    loss_mode: str = "nnpu"  # nnpu | upu | ce
    nnpu_gradient: str = "clamp"  # clamp | negate-descend
    nnpu_prior_weighted: bool = True
    class_prior: Optional[float] = None
    smote_enabled: bool = True
    smote_target_ratio: float = 0.3
    smote_k: int = 5
    link_tau: float = 0.5
    link_max_degree: int = 5
    link_warmup_steps: int = 50
    link_steps_per_epoch: int = 5
    link_lr: float = 0.01
    inductive: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.num_runs < 1:
            raise ConfigError("num_runs must be >= 1")
        if self.fx != 2 * self.d:
            raise ConfigError(f"fx must equal 2 * d ({self.fx} != {2 * self.d})")
        if self.loss_mode not in ("nnpu", "upu", "ce"):
            raise ConfigError(f"unknown loss_mode {self.loss_mode!r}")
        if self.nnpu_gradient not in ("clamp", "negate-descend"):
            raise ConfigError(f"unknown nnpu_gradient {self.nnpu_gradient!r}")
        if self.model not in ("attention", "mean", "none"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.aggregate not in ("neighbor", "self"):
            raise ConfigError(f"unknown aggregate {self.aggregate!r}")
        if self.batch_size != 0:
            raise ConfigError("only full-graph training (batch_size = 0) is supported")
        if self.class_prior is not None and not 0 < self.class_prior < 1:
            raise ConfigError("class_prior must lie in (0, 1)")
        if not 0 < self.smote_target_ratio < 1:
            raise ConfigError("smote_target_ratio must lie in (0, 1)")
        if not 0 < self.link_tau <= 1:
            raise ConfigError("link_tau must lie in (0, 1]")


class FraudModel(nn.Module):
    def __init__(self, vocab_size: int, edge_dim: int, config: TrainConfig, generator: torch.Generator):
        super().__init__()
        self.encoder = BehaviorEncoder(
            vocab_size, config.d, config.attention_blocks, config.dropout, config.project_qkv, generator
        )
        self.scorer = GraphScorer(
            self.encoder.out_dim, edge_dim, config.hidden, config.gnn_layers, config.dropout,
            config.model, config.aggregate, generator,
        )

    def forward(self, seqs: torch.Tensor, graph: Graph) -> torch.Tensor:
        return self.scorer(graph, self.encoder(seqs))


@dataclass
class TrainedModel:
    model: FraudModel
    config: TrainConfig
    vocab_size: int
    edge_dim: int
    link_params: Optional[LinkGeneratorParams]
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_f1: float = 0.0

    @torch.no_grad()
    def scores(self, dataset: Dataset) -> np.ndarray:
        """Raw decision values ``t`` for every player (eval mode, full graph)."""
        self.model.eval()
        t = self.model(torch.as_tensor(dataset.sequences), dataset_graph(dataset))
        return t.double().numpy()

    def predict(self, dataset: Dataset) -> np.ndarray:
        return np.tanh(self.scores(dataset))

    def evaluate(self, dataset: Dataset, split: int = TEST) -> MetricsReport:
        idx = dataset.indices(split)
        return compute_metrics(self.predict(dataset)[idx], dataset.labels[idx])

    def validation_f1(self, dataset: Dataset) -> float:
        idx = dataset.indices(VALIDATION)
        return f1_score(self.predict(dataset)[idx], dataset.labels[idx])


def dataset_graph(dataset: Dataset, dtype=torch.float32) -> Graph:
    return Graph.from_arrays(dataset.num_players, dataset.edge_index, dataset.edge_features, dtype)


class EarlyStopping:
    """Stop once ``patience`` epochs pass without a strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best: Optional[float] = None
        self.best_epoch = 0
        self.bad_epochs = 0

    def step(self, epoch: int, value: float) -> bool:
        if self.best is None or value > self.best:
            self.best, self.best_epoch, self.bad_epochs = value, epoch, 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience

    @property
    def improved(self) -> bool:
        return self.bad_epochs == 0


def resolve_prior(dataset: Dataset, config: TrainConfig) -> float:
    if config.class_prior is not None:
        return config.class_prior
    if dataset.class_prior is None:
        train = dataset.split == TRAIN
        return float(np.mean(dataset.labels[train] == FRAUD))
    return float(dataset.class_prior)


def train(
    dataset: Dataset,
    config: TrainConfig,
    val_f1_fn: Optional[Callable[["TrainedModel", Dataset], float]] = None,
) -> TrainedModel:
    """Fit one model; returns the best-validation-F1 checkpoint.

    ``val_f1_fn`` overrides the per-epoch validation metric (used in tests).
    """
    config.validate()
    train_idx = dataset.indices(TRAIN)
    labeled = dataset.train_label[train_idx] == LABELED
    if not labeled.any():
        raise TrainingError("no labeled positives in the train split")
    prior = resolve_prior(dataset, config)

    gen = torch.Generator().manual_seed(config.seed)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 17]))
    model = FraudModel(dataset.vocab_size, dataset.edge_dim, config, gen)
    trained = TrainedModel(model, config, dataset.vocab_size, dataset.edge_dim, None)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)

    full_graph = dataset_graph(dataset)
    all_seqs = torch.as_tensor(dataset.sequences)
    if config.inductive:
        graph, _ = full_graph.subgraph(torch.as_tensor(train_idx))
        seqs = all_seqs[train_idx]
        loss_nodes = np.arange(len(train_idx))
    else:
        graph, seqs = full_graph, all_seqs
        loss_nodes = train_idx
    n_train = len(train_idx)
    positives = loss_nodes[labeled]
    use_smote = config.smote_enabled
    link = LinkGeneratorParams.zeros(config.fx, config.link_tau) if use_smote else None
    if use_smote and graph.num_edges == 0:
        raise TrainingError("GraphSMOTE needs at least one training edge")

    stopper = EarlyStopping(config.patience)
    best_state = copy.deepcopy(model.state_dict())
    best_link = link
    val_fn = val_f1_fn or (lambda tm, ds: tm.validation_f1(ds))

    for epoch in range(1, config.max_epochs + 1):
        model.train()
        x = model.encoder(seqs)
        g, n_syn = graph, 0
        if use_smote:
            steps = config.link_warmup_steps if epoch == 1 else config.link_steps_per_epoch
            link = train_link_generator(graph, x, link, steps, config.link_lr, rng)
            draw = draw_smote(x, positives, n_train, config.smote_target_ratio, config.smote_k, rng)
            n_syn = len(draw)
            syn = draw.interpolate(x)
            g = wire_synthetic_nodes(graph, x, syn, draw.parent_a, draw.parent_b, link, config.link_max_degree)
            x = torch.cat([x, syn], dim=0)
        t = model.scorer(g, x)
        syn_idx = np.arange(graph.num_nodes, graph.num_nodes + n_syn)
        p_idx = torch.as_tensor(np.concatenate([positives, syn_idx]))
        u_idx = torch.as_tensor(np.concatenate([loss_nodes, syn_idx]))
        loss = _loss(t, p_idx, u_idx, prior, n_train, n_syn, config)

        if not torch.isfinite(loss):
            raise TrainingError(f"loss diverged (non-finite) at epoch {epoch}")
        opt.zero_grad()
        loss.backward()
        opt.step()

        trained.link_params = link
        val_f1 = float(val_fn(trained, dataset))
        trained.history.append({"epoch": epoch, "train_loss": float(loss.item()), "val_f1": val_f1})
        stop = stopper.step(epoch, val_f1)
        if stopper.improved:
            best_state = copy.deepcopy(model.state_dict())
            best_link = link
        log.debug("epoch %d loss %.5f val_f1 %.4f", epoch, loss.item(), val_f1)
        if stop and epoch >= config.min_epochs:
            break

    model.load_state_dict(best_state)
    model.eval()
    trained.link_params = best_link
    trained.best_epoch = stopper.best_epoch
    trained.best_val_f1 = float(stopper.best)
    return trained


def _loss(t, p_idx, u_idx, prior, n_train, n_syn, config: TrainConfig) -> torch.Tensor:
    if config.loss_mode == "ce":
        # unlabeled treated as negative
        is_pos = torch.zeros(t.shape[0], dtype=torch.bool)
        is_pos[p_idx] = True
        target = is_pos[u_idx].to(t.dtype)
        return cross_entropy_loss(torch.sigmoid(t[u_idx]), target)
    # synthetic positives join the training population, shifting its prior
    prior_aug = (prior * n_train + n_syn) / (n_train + n_syn)
    est = estimate_risk(t[p_idx], t[u_idx], prior_aug, prior_weighted=config.nnpu_prior_weighted)
    if config.loss_mode == "upu":
        return est.upu
    return est.objective(config.nnpu_gradient)


# ---------------------------------------------------------------- repetition

@dataclass
class RepeatedReport:
    runs: list[MetricsReport]
    histories: list[list[dict]]
    seeds: list[int]

    def mean(self) -> dict[str, float]:
        return {m: float(np.mean([getattr(r, m) for r in self.runs])) for m in METRIC_NAMES}

    def std(self) -> dict[str, float]:
        return {m: float(np.std([getattr(r, m) for r in self.runs])) for m in METRIC_NAMES}

    def as_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "mean": self.mean(),
            "std": self.std(),
            "runs": [r.as_dict() for r in self.runs],
        }


def run_repeated(dataset: Dataset, config: TrainConfig) -> RepeatedReport:
    """Train with seeds ``seed .. seed + num_runs - 1`` and report test metrics."""
    config.validate()
    runs, histories, seeds = [], [], []
    for r in range(config.num_runs):
        cfg = dataclasses.replace(config, seed=config.seed + r)
        tm = train(dataset, cfg)
        runs.append(tm.evaluate(dataset, TEST))
        histories.append(tm.history)
        seeds.append(cfg.seed)
    return RepeatedReport(runs, histories, seeds)


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(trained: TrainedModel, path: str | Path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": dataclasses.asdict(trained.config),
        "vocab_size": trained.vocab_size,
        "edge_dim": trained.edge_dim,
        "state_dict": trained.model.state_dict(),
        "link_weight": None if trained.link_params is None else trained.link_params.weight,
        "history": trained.history,
        "best_epoch": trained.best_epoch,
        "best_val_f1": trained.best_val_f1,
    }
    torch.save(payload, Path(path))


def load_checkpoint(path: str | Path, expected: Optional[TrainConfig] = None) -> TrainedModel:
    """Restore a model; with ``expected`` given, any hyperparameter mismatch is an error."""
    payload = torch.load(Path(path), weights_only=True)
    if payload.get("format") != CHECKPOINT_FORMAT or payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} file")
    raw = dict(payload["config"])
    for key, value in raw.items():
        if isinstance(value, list):
            raw[key] = tuple(value)
    config = TrainConfig(**raw)
    if expected is not None:
        diff = [
            f.name for f in dataclasses.fields(TrainConfig)
            if f.name not in ("seed", "num_runs") and getattr(expected, f.name) != getattr(config, f.name)
        ]
        if diff:
            raise ValueError(f"{path}: checkpoint hyperparameters differ: {', '.join(diff)}")
    model = FraudModel(payload["vocab_size"], payload["edge_dim"], config, torch.Generator().manual_seed(0))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    link = None
    if payload["link_weight"] is not None:
        link = LinkGeneratorParams(payload["link_weight"], config.link_tau)
    return TrainedModel(
        model, config, payload["vocab_size"], payload["edge_dim"], link,
        payload["history"], payload["best_epoch"], payload["best_val_f1"],
    )
