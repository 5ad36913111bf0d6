"""GraphSMOTE-style oversampling of labeled positives.

Synthetic positives are interpolated in behaviour-embedding space between a
labeled positive and one of its k nearest labeled-positive neighbours, then
wired into the training graph with a bilinear link scorer trained on the
observed transfers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .graph_layers import Graph


@dataclass
class SyntheticNode:
    embedding: torch.Tensor
    parent_a: int
    parent_b: int
    lam: float
    label: int = 1


@dataclass
class SmoteDraw:
    """Vectorised form of a batch of synthetic nodes (parents index into ``embeddings``)."""

    parent_a: np.ndarray
    parent_b: np.ndarray
    lam: np.ndarray

    def __len__(self) -> int:
        return len(self.lam)

    def interpolate(self, embeddings: torch.Tensor) -> torch.Tensor:
        lam = torch.as_tensor(self.lam, dtype=embeddings.dtype).unsqueeze(1)
        return (1 - lam) * embeddings[self.parent_a] + lam * embeddings[self.parent_b]


@dataclass
class LinkGeneratorParams:
    weight: torch.Tensor
    tau: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")

    @classmethod
    def zeros(cls, dim: int, tau: float = 0.5, dtype=torch.float32) -> "LinkGeneratorParams":
        return cls(torch.zeros(dim, dim, dtype=dtype), tau)

    def score(self, xu: torch.Tensor, xv: torch.Tensor) -> torch.Tensor:
        """``sigmoid(x_u^T W x_v)`` row by row."""
        return torch.sigmoid(((xu @ self.weight) * xv).sum(-1))

    def score_matrix(self, xu: torch.Tensor, xv: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(xu @ self.weight @ xv.T)


def num_synthetic(n_positive: int, n_total: int, target_ratio: float) -> int:
    """Smallest m with ``(P + m) / (N + m) >= target_ratio``."""
    if not 0.0 < target_ratio < 1.0:
        raise ValueError("target_ratio must lie in (0, 1)")
    need = (target_ratio * n_total - n_positive) / (1.0 - target_ratio)
    return max(0, math.ceil(need - 1e-9))


def draw_smote(
    embeddings: torch.Tensor,
    positives: np.ndarray,
    n_total: int,
    target_ratio: float,
    k: int,
    rng: np.random.Generator,
) -> SmoteDraw:
    positives = np.asarray(positives, dtype=np.int64)
    if len(positives) < 2:
        raise ValueError("insufficient minority samples: need at least 2 labeled positives")
    if k < 1:
        raise ValueError("k must be >= 1")
    m = num_synthetic(len(positives), n_total, target_ratio)
    if m == 0:
        empty = np.zeros(0, dtype=np.int64)
        return SmoteDraw(empty, empty.copy(), np.zeros(0))
    pos = embeddings.detach()[torch.as_tensor(positives)]
    dist = torch.cdist(pos, pos)
    dist.fill_diagonal_(float("inf"))
    kk = min(k, len(positives) - 1)
    knn = torch.argsort(dist, dim=1, stable=True)[:, :kk].numpy()
    a_local = rng.integers(0, len(positives), size=m)
    b_local = knn[a_local, rng.integers(0, kk, size=m)]
    lam = rng.random(m)
    return SmoteDraw(positives[a_local], positives[b_local], lam)


def smote_nodes(
    embeddings: torch.Tensor,
    train_labels,
    target_ratio: float,
    k: int,
    rng: np.random.Generator,
) -> list[SyntheticNode]:
    """Synthetic positives until labeled positives make up ``target_ratio``.

    ``train_labels`` holds 1 for labeled positives and 0 for unlabeled rows;
    every row of ``embeddings`` counts towards the total.
    """
    labels = np.asarray(train_labels)
    draw = draw_smote(embeddings, np.flatnonzero(labels == 1), len(labels), target_ratio, k, rng)
    emb = draw.interpolate(embeddings)
    return [
        SyntheticNode(emb[i], int(draw.parent_a[i]), int(draw.parent_b[i]), float(draw.lam[i]))
        for i in range(len(draw))
    ]


def train_link_generator(
    graph: Graph,
    embeddings: torch.Tensor,
    params: LinkGeneratorParams | None = None,
    epochs: int = 50,
    lr: float = 0.01,
    rng: np.random.Generator | None = None,
) -> LinkGeneratorParams:
    """Logistic edge prediction: observed transfers vs. uniform non-pairs (1:1)."""
    if graph.num_edges == 0:
        raise ValueError("cannot train a link generator on a graph without edges")
    rng = rng if rng is not None else np.random.default_rng(0)
    x = embeddings.detach()
    if params is None:
        params = LinkGeneratorParams.zeros(x.shape[1], dtype=x.dtype)
    weight = params.weight.detach().clone().to(x.dtype).requires_grad_(True)
    opt = torch.optim.Adam([weight], lr=lr)
    src, dst = graph.edge_index
    n_pos = len(src)
    target = torch.cat([torch.ones(n_pos, dtype=x.dtype), torch.zeros(n_pos, dtype=x.dtype)])
    for _ in range(epochs):
        neg = torch.as_tensor(rng.integers(0, graph.num_nodes, size=(2, n_pos)))
        u = torch.cat([src, neg[0]])
        v = torch.cat([dst, neg[1]])
        logits = ((x @ weight)[u] * x[v]).sum(-1)
        loss = torch.nn.functional.binary_cross_entropy_with_logits(logits, target)
        opt.zero_grad()
        loss.backward()
        opt.step()
    return LinkGeneratorParams(weight.detach(), params.tau)


def parent_edge_features(graph: Graph, parents_a, parents_b) -> torch.Tensor:
    """Mean feature vector over all edges incident to either parent (zeros if none)."""
    n, fe = graph.num_nodes, graph.edge_dim
    sums = graph.edge_attr.new_zeros(n, fe)
    counts = graph.edge_attr.new_zeros(n)
    ones = torch.ones(graph.num_edges, dtype=graph.edge_attr.dtype)
    for end in graph.edge_index:
        sums.index_add_(0, end, graph.edge_attr)
        counts.index_add_(0, end, ones)
    a = torch.as_tensor(parents_a, dtype=torch.long)
    b = torch.as_tensor(parents_b, dtype=torch.long)
    total = sums[a] + sums[b]
    cnt = (counts[a] + counts[b]).unsqueeze(1)
    return torch.where(cnt > 0, total / cnt.clamp(min=1), torch.zeros_like(total))


def wire_synthetic_nodes(
    graph: Graph,
    embeddings: torch.Tensor,
    synthetic: torch.Tensor,
    parents_a,
    parents_b,
    link_params: LinkGeneratorParams,
    max_degree: int = 5,
) -> Graph:
    """New graph with synthetic nodes appended as ids ``N .. N+M-1``.

    Each synthetic node ``s`` gets edges ``s -> v`` to the (at most
    ``max_degree``) existing nodes with the highest score above ``tau``.
    """
    n, m = graph.num_nodes, synthetic.shape[0]
    if m == 0:
        return Graph(n, graph.edge_index.clone(), graph.edge_attr.clone())
    with torch.no_grad():
        scores = link_params.score_matrix(synthetic.detach().to(link_params.weight.dtype), embeddings.detach().to(link_params.weight.dtype))
    kk = min(max_degree, n)
    top, idx = torch.topk(scores, kk, dim=1)
    keep = top > link_params.tau
    rows = torch.arange(m).unsqueeze(1).expand(m, kk)[keep]
    dst = idx[keep]
    feats = parent_edge_features(graph, parents_a, parents_b)[rows]
    edge_index = torch.cat([graph.edge_index, torch.stack([rows + n, dst])], dim=1)
    edge_attr = torch.cat([graph.edge_attr, feats.to(graph.edge_attr.dtype)], dim=0)
    return Graph(n + m, edge_index, edge_attr)
