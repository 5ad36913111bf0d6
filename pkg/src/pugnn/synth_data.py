"""Synthetic play-to-earn datasets with planted chargeback-fraud structure.

Two signal channels are planted:

* behaviour: fraud players spend most of their activity on a small set of
  "focus" events (purchasing goods, mining tokens, tutorials/quests), benign
  players spread activity over the whole vocabulary.  A fraction of frauds is
  camouflaged (weak focus) and a fraction of benign players are grinders
  (moderate focus), so behaviour alone is not enough.
* graph: frauds form collusion rings whose members funnel tokens into one or
  two sink accounts (star motif) with occasional member-to-member chains, all
  inside a narrow time window.  Benign players trade sparsely at random.

Player ids are the row indices ``0 .. num_players - 1``.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .config import ConfigError, dump_config, from_mapping

PAD = 0
FRAUD, BENIGN = 1, -1
LABELED, UNLABELED, NOT_TRAIN = 1, 0, -1
SPLITS = ("train", "validation", "test")
TRAIN, VALIDATION, TEST = 0, 1, 2

FORMAT_VERSION = 1


class DatasetFormatError(ValueError):
    """Malformed dataset directory; message carries ``file:line``."""


@dataclass(frozen=True)
class GeneratorConfig:
    num_players: int = 2000
    fraud_fraction: float = 0.2
    seq_len: int = 24
    vocab_size: int = 24
    edge_dim: int = 2
    focus_events: int = 4
    ring_size_range: tuple[int, int] = (4, 10)
    # behaviour: share of activity spent on focus events
    fraud_focus: float = 0.6
    camouflage_focus: float = 0.25
    grinder_focus: float = 0.45
    fraud_camouflage: float = 0.35
    benign_grinder: float = 0.12
    # graph
    ring_transfers: float = 0.5
    ring_chain_prob: float = 0.3
    ring_time_width: float = 0.1
    fraud_benign_edges: float = 0.3
    benign_out_degree: float = 1.85
    benign_to_fraud: float = 0.02
    allow_self_transfer: bool = False
    # protocol
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    split_mode: str = "random"
    labeled_positive_fraction: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        lo, hi = self.ring_size_range
        if self.num_players < 4:
            raise ConfigError("num_players must be >= 4")
        if not 0.0 < self.fraud_fraction < 1.0:
            raise ConfigError("fraud_fraction must lie in (0, 1)")
        if not 2 <= lo <= hi:
            raise ConfigError("ring_size_range must satisfy 2 <= min <= max")
        if self.fraud_fraction * self.num_players < 2 * hi:
            raise ConfigError(
                "fraud_fraction * num_players must be >= 2 * max ring size "
                f"({self.fraud_fraction * self.num_players:g} < {2 * hi})"
            )
        if abs(sum(self.split_fractions) - 1.0) > 1e-9 or min(self.split_fractions) < 0:
            raise ConfigError("split fractions must be non-negative and sum to 1")
        if self.seq_len < 1:
            raise ConfigError("seq_len must be >= 1")
        if not 1 <= self.focus_events < self.vocab_size - 1:
            raise ConfigError("need 1 <= focus_events < vocab_size - 1")
        if self.edge_dim < 2:
            raise ConfigError("edge_dim must be >= 2 (amount, time)")
        if self.split_mode not in ("random", "chronological"):
            raise ConfigError(f"unknown split_mode {self.split_mode!r}")
        if not 0.0 < self.labeled_positive_fraction <= 1.0:
            raise ConfigError("labeled_positive_fraction must lie in (0, 1]")
        for name in ("fraud_focus", "camouflage_focus", "grinder_focus",
                     "fraud_camouflage", "benign_grinder", "ring_chain_prob",
                     "benign_to_fraud", "ring_time_width"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")


PRESETS: dict[str, GeneratorConfig] = {
    "small": GeneratorConfig(num_players=300, seq_len=16),
    "benchmark": GeneratorConfig(num_players=2000, seq_len=16, seed=2024),
    # Table-1 scale: ~32.9K players, ~62.4K transfers, 12.9K:10.8K:9.3K split
    "large": GeneratorConfig(
        num_players=32900,
        fraud_fraction=0.22,
        split_fractions=(0.392, 0.328, 0.28),
        seed=1,
    ),
}


@dataclass(frozen=True)
class PlayerRecord:
    player_id: int
    activity_sequence: tuple[int, ...]
    true_label: int


@dataclass(frozen=True)
class TransactionEdge:
    src: int
    dst: int
    features: tuple[float, ...]


@dataclass(eq=False)
class Dataset:
    """Array-backed dataset; row ``i`` of every per-player array is player ``i``.

    ``train_label`` is ``LABELED`` / ``UNLABELED`` on train players and
    ``NOT_TRAIN`` elsewhere.  ``class_prior`` is the ground-truth fraud fraction
    of the train split.
    """

    sequences: np.ndarray
    labels: np.ndarray
    edge_index: np.ndarray
    edge_features: np.ndarray
    split: np.ndarray
    train_label: np.ndarray
    vocab_size: int
    edge_feature_names: tuple[str, ...] = ("amount", "time")
    seed: int = 0
    class_prior: Optional[float] = None
    config: Optional[GeneratorConfig] = None

    @property
    def num_players(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return len(self.edge_index)

    @property
    def seq_len(self) -> int:
        return self.sequences.shape[1]

    @property
    def edge_dim(self) -> int:
        return self.edge_features.shape[1]

    def player(self, i: int) -> PlayerRecord:
        return PlayerRecord(i, tuple(int(s) for s in self.sequences[i]), int(self.labels[i]))

    def iter_edges(self) -> Iterator[TransactionEdge]:
        for (s, d), f in zip(self.edge_index, self.edge_features):
            yield TransactionEdge(int(s), int(d), tuple(float(v) for v in f))

    @property
    def split_assignment(self) -> dict[int, str]:
        return {i: SPLITS[s] for i, s in enumerate(self.split)}

    def indices(self, split: str | int) -> np.ndarray:
        code = SPLITS.index(split) if isinstance(split, str) else split
        return np.flatnonzero(self.split == code)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        arrays = ("sequences", "labels", "edge_index", "edge_features", "split", "train_label")
        return all(
            np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays
        ) and (self.vocab_size, self.edge_feature_names, self.seed, self.class_prior, self.config) == (
            other.vocab_size, other.edge_feature_names, other.seed, other.class_prior, other.config
        )

    def validate(self) -> None:
        n = self.num_players
        if n == 0:
            raise ValueError("empty dataset")
        if self.edge_index.size and (self.edge_index.min() < 0 or self.edge_index.max() >= n):
            raise ValueError("edge endpoint refers to an unknown player")
        if self.sequences.size and self.sequences.max() >= self.vocab_size:
            raise ValueError("event id >= vocab_size")
        in_train = self.split == TRAIN
        if np.any((self.train_label == NOT_TRAIN) == in_train):
            raise ValueError("train_label must be defined exactly on train players")
        if np.any((self.train_label == LABELED) & (self.labels != FRAUD)):
            raise ValueError("labeled positive that is not a fraud player")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _sample_sequences(cfg: GeneratorConfig, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n_players, n, vocab = len(labels), cfg.seq_len, cfg.vocab_size
    events = vocab - 1  # ids 1 .. vocab-1
    focus = np.zeros(events)
    focus[: cfg.focus_events] = 1.0

    base = rng.dirichlet(np.full(events, 2.0), size=n_players)
    focus_mix = rng.dirichlet(np.full(cfg.focus_events, 2.0), size=n_players)
    focus_probs = np.zeros((n_players, events))
    focus_probs[:, : cfg.focus_events] = focus_mix

    fraud = labels == FRAUD
    share = np.zeros(n_players)
    camo = rng.random(n_players) < cfg.fraud_camouflage
    grind = rng.random(n_players) < cfg.benign_grinder
    share[fraud] = np.where(camo[fraud], cfg.camouflage_focus, cfg.fraud_focus)
    share[~fraud] = np.where(grind[~fraud], cfg.grinder_focus, 0.0)
    probs = share[:, None] * focus_probs + (1.0 - share[:, None]) * base

    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random((n_players, n))
    draws = (u[:, :, None] >= cdf[:, None, :]).sum(axis=2) + 1
    # activity counts vary; short histories are left-padded with PAD
    active = rng.integers(max(1, n // 2), 2 * n + 1, size=n_players)
    length = np.minimum(active, n)
    pos = np.arange(n)[None, :]
    return np.where(pos >= (n - length)[:, None], draws, PAD).astype(np.int64)


def _plant_rings(cfg: GeneratorConfig, frauds: np.ndarray, rng: np.random.Generator) -> list[np.ndarray]:
    lo, hi = cfg.ring_size_range
    order = rng.permutation(frauds)
    rings, start = [], 0
    while start < len(order):
        size = int(rng.integers(lo, hi + 1))
        if len(order) - start - size < lo:
            size = len(order) - start
        rings.append(order[start : start + size])
        start += size
    return rings


def generate_dataset(config: GeneratorConfig) -> Dataset:
    """Generate players, transfers, split and PU labels; pure in ``config``."""
    config.validate()
    cfg, seed = config, config.seed
    n_players = cfg.num_players
    n_fraud = int(round(cfg.fraud_fraction * n_players))

    rng_label = _rng(seed, 0)
    labels = np.full(n_players, BENIGN, dtype=np.int8)
    frauds = np.sort(rng_label.choice(n_players, size=n_fraud, replace=False))
    labels[frauds] = FRAUD
    benign = np.flatnonzero(labels == BENIGN)

    sequences = _sample_sequences(cfg, labels, _rng(seed, 1))

    rng = _rng(seed, 2)
    src, dst, amount, time = [], [], [], []

    def add(s, d, a, t):
        src.append(np.asarray(s, dtype=np.int64))
        dst.append(np.asarray(d, dtype=np.int64))
        amount.append(np.asarray(a, dtype=np.float64))
        time.append(np.asarray(t, dtype=np.float64))

    for ring in _plant_rings(cfg, frauds, rng):
        n_sinks = 1 if len(ring) < 7 else 2
        sinks, members = ring[:n_sinks], ring[n_sinks:]
        t0 = rng.uniform(0.0, 1.0 - cfg.ring_time_width)
        reps = 1 + rng.poisson(cfg.ring_transfers, size=len(members))
        s = np.repeat(members, reps)
        d = rng.choice(sinks, size=len(s))
        chain = rng.random(len(ring) - 1) < cfg.ring_chain_prob
        s = np.concatenate([s, ring[:-1][chain]])
        d = np.concatenate([d, ring[1:][chain]])
        add(s, d, rng.lognormal(1.0, 0.4, size=len(s)), t0 + rng.uniform(0, cfg.ring_time_width, size=len(s)))

    k = rng.poisson(cfg.fraud_benign_edges, size=n_fraud)
    s = np.repeat(frauds, k)
    add(s, rng.choice(benign, size=len(s)), rng.lognormal(0.0, 0.8, size=len(s)), rng.random(len(s)))

    k = rng.poisson(cfg.benign_out_degree, size=len(benign))
    s = np.repeat(benign, k)
    to_fraud = rng.random(len(s)) < cfg.benign_to_fraud
    d = np.where(to_fraud, rng.choice(frauds, size=len(s)), rng.choice(benign, size=len(s)))
    add(s, d, rng.lognormal(0.0, 0.8, size=len(s)), rng.random(len(s)))

    src_a, dst_a = np.concatenate(src), np.concatenate(dst)
    touched = np.zeros(n_players, dtype=bool)
    touched[src_a] = touched[dst_a] = True
    lonely = np.flatnonzero(~touched)
    add(lonely, rng.choice(benign, size=len(lonely)), rng.lognormal(0.0, 0.8, size=len(lonely)), rng.random(len(lonely)))

    src_a, dst_a = np.concatenate(src), np.concatenate(dst)
    if not cfg.allow_self_transfer:
        loops = src_a == dst_a
        # redirect to the next player id; deterministic and keeps degree counts
        dst_a[loops] = (dst_a[loops] + 1) % n_players
    edge_index = np.stack([src_a, dst_a], axis=1)
    feats = [np.concatenate(amount), np.clip(np.concatenate(time), 0.0, 1.0)]
    names = ["amount", "time"]
    for j in range(cfg.edge_dim - 2):
        feats.append(rng.standard_normal(len(src_a)))
        names.append(f"x{j}")
    edge_features = np.stack(feats, axis=1)

    ds = Dataset(
        sequences=sequences,
        labels=labels,
        edge_index=edge_index,
        edge_features=edge_features,
        split=np.zeros(n_players, dtype=np.int8),
        train_label=np.zeros(n_players, dtype=np.int8),
        vocab_size=cfg.vocab_size,
        edge_feature_names=tuple(names),
        seed=seed,
        config=cfg,
    )
    ds = split_dataset(ds, cfg.split_mode, cfg.split_fractions, seed=seed)
    return apply_pu_masking(ds, cfg.labeled_positive_fraction, seed=seed)


def _split_counts(n: int, fractions) -> tuple[int, int]:
    n_train = int(math.floor(fractions[0] * n + 0.5))
    n_val = int(math.floor(fractions[1] * n + 0.5))
    return n_train, min(n_val, n - n_train)


def split_dataset(dataset: Dataset, mode: str = "random", fractions=None, seed: Optional[int] = None) -> Dataset:
    """Assign train/validation/test; resets PU labels (re-apply masking after).

    ``chronological`` orders players by the timestamp of their first transfer
    (players without transfers go last) and fills train, validation, test in
    that order.
    """
    if fractions is None:
        fractions = dataset.config.split_fractions if dataset.config else (0.6, 0.2, 0.2)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError("split fractions must sum to 1")
    n = dataset.num_players
    seed = dataset.seed if seed is None else seed
    if mode == "random":
        order = _rng(seed, 3).permutation(n)
    elif mode == "chronological":
        if "time" not in dataset.edge_feature_names:
            raise ValueError("chronological split needs a 'time' edge feature")
        t = dataset.edge_features[:, dataset.edge_feature_names.index("time")]
        first = np.full(n, np.inf)
        np.minimum.at(first, dataset.edge_index[:, 0], t)
        np.minimum.at(first, dataset.edge_index[:, 1], t)
        order = np.lexsort((np.arange(n), first))
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    n_train, n_val = _split_counts(n, fractions)
    split = np.empty(n, dtype=np.int8)
    split[order[:n_train]] = TRAIN
    split[order[n_train : n_train + n_val]] = VALIDATION
    split[order[n_train + n_val :]] = TEST
    train_label = np.where(split == TRAIN, UNLABELED, NOT_TRAIN).astype(np.int8)
    train = split == TRAIN
    prior = float(np.mean(dataset.labels[train] == FRAUD)) if train.any() else None
    return dataclasses.replace(dataset, split=split, train_label=train_label, class_prior=prior)


def apply_pu_masking(dataset: Dataset, labeled_positive_fraction: float = 0.5, seed: Optional[int] = None) -> Dataset:
    """Reveal a uniformly random ``fraction`` of train frauds as labeled positives."""
    if not 0.0 < labeled_positive_fraction <= 1.0:
        raise ValueError("labeled_positive_fraction must lie in (0, 1]")
    train = dataset.split == TRAIN
    if not train.any():
        raise ValueError("dataset has no train split")
    seed = dataset.seed if seed is None else seed
    train_frauds = np.flatnonzero(train & (dataset.labels == FRAUD))
    k = int(math.floor(labeled_positive_fraction * len(train_frauds) + 0.5))
    chosen = _rng(seed, 4).choice(train_frauds, size=k, replace=False)
    train_label = np.where(train, UNLABELED, NOT_TRAIN).astype(np.int8)
    train_label[chosen] = LABELED
    return dataclasses.replace(dataset, train_label=train_label)


def jensen_shannon(p: np.ndarray, q: np.ndarray) -> float:
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a, b):
        nz = a > 0
        return float(np.sum(a[nz] * np.log(a[nz] / b[nz])))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def event_histogram(sequences: np.ndarray, vocab_size: int) -> np.ndarray:
    counts = np.bincount(sequences.ravel(), minlength=vocab_size).astype(np.float64)
    counts[PAD] = 0.0
    return counts


# ---------------------------------------------------------------- file format

def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write ``players.txt``, ``edges.csv`` and ``meta.json`` under ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lines = [f"# pugnn players v{FORMAT_VERSION}: id true_label split train_label | events"]
    for i in range(dataset.num_players):
        events = " ".join(str(int(e)) for e in dataset.sequences[i])
        lines.append(
            f"{i} {int(dataset.labels[i])} {SPLITS[dataset.split[i]]} "
            f"{int(dataset.train_label[i])} | {events}"
        )
    (path / "players.txt").write_text("\n".join(lines) + "\n")

    rows = ["src,dst," + ",".join(dataset.edge_feature_names)]
    for (s, d), f in zip(dataset.edge_index.tolist(), dataset.edge_features.tolist()):
        rows.append(f"{s},{d}," + ",".join(repr(v) for v in f))
    (path / "edges.csv").write_text("\n".join(rows) + "\n")

    meta = {
        "format_version": FORMAT_VERSION,
        "seed": dataset.seed,
        "vocab_size": dataset.vocab_size,
        "seq_len": dataset.seq_len,
        "class_prior": dataset.class_prior,
        "generator_config": dump_config(dataset.config) if dataset.config else None,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {path}")
    meta_file = path / "meta.json"
    try:
        meta = json.loads(meta_file.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{meta_file}:{exc.lineno}: {exc.msg}") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise DatasetFormatError(f"{meta_file}:1: unsupported format_version {meta.get('format_version')!r}")
    vocab, n = int(meta["vocab_size"]), int(meta["seq_len"])

    pfile = path / "players.txt"
    seqs, labels, split, tl = [], [], [], []
    for lineno, line in enumerate(pfile.read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        where = f"{pfile}:{lineno}"
        try:
            head, _, events = line.partition("|")
            pid, lab, sp, t = head.split()
            ev = [int(e) for e in events.split()]
            pid, lab, t = int(pid), int(lab), int(t)
        except ValueError:
            raise DatasetFormatError(f"{where}: cannot parse player record") from None
        if pid != len(seqs):
            raise DatasetFormatError(f"{where}: expected player id {len(seqs)}, got {pid}")
        if lab not in (FRAUD, BENIGN) or sp not in SPLITS or t not in (LABELED, UNLABELED, NOT_TRAIN):
            raise DatasetFormatError(f"{where}: invalid label/split field")
        if len(ev) != n or any(e < 0 or e >= vocab for e in ev):
            raise DatasetFormatError(f"{where}: sequence must hold {n} event ids in [0, {vocab})")
        seqs.append(ev)
        labels.append(lab)
        split.append(SPLITS.index(sp))
        tl.append(t)
    if not seqs:
        raise DatasetFormatError(f"{pfile}:1: empty dataset")

    efile = path / "edges.csv"
    elines = efile.read_text().splitlines()
    if not elines:
        raise DatasetFormatError(f"{efile}:1: missing header")
    header = elines[0].split(",")
    if header[:2] != ["src", "dst"] or len(header) < 3:
        raise DatasetFormatError(f"{efile}:1: header must start with src,dst and name >= 1 feature")
    names = tuple(header[2:])
    eidx, efeat = [], []
    for lineno, line in enumerate(elines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            s, d = int(parts[0]), int(parts[1])
            f = [float(v) for v in parts[2:]]
        except (ValueError, IndexError):
            raise DatasetFormatError(f"{efile}:{lineno}: cannot parse edge") from None
        if len(f) != len(names):
            raise DatasetFormatError(f"{efile}:{lineno}: expected {len(names)} features, got {len(f)}")
        if not (0 <= s < len(seqs) and 0 <= d < len(seqs)):
            raise DatasetFormatError(f"{efile}:{lineno}: edge references unknown player")
        eidx.append((s, d))
        efeat.append(f)

    cfg = None
    if meta.get("generator_config"):
        from .config import parse_kv_text

        cfg = from_mapping(GeneratorConfig, parse_kv_text(meta["generator_config"]))
    ds = Dataset(
        sequences=np.asarray(seqs, dtype=np.int64).reshape(len(seqs), n),
        labels=np.asarray(labels, dtype=np.int8),
        edge_index=np.asarray(eidx, dtype=np.int64).reshape(-1, 2),
        edge_features=np.asarray(efeat, dtype=np.float64).reshape(-1, len(names)),
        split=np.asarray(split, dtype=np.int8),
        train_label=np.asarray(tl, dtype=np.int8),
        vocab_size=vocab,
        edge_feature_names=names,
        seed=int(meta["seed"]),
        class_prior=meta["class_prior"],
        config=cfg,
    )
    try:
        ds.validate()
    except ValueError as exc:
        raise DatasetFormatError(f"{pfile}:1: {exc}") from None
    return ds
