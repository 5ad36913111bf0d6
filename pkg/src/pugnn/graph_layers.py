"""Edge-featured GATv2-style layers and the bidirectional graph scorer.

Edges are directed ``src -> dst``; a layer updates node ``i`` from its
in-neighbours ``j`` (plus a self loop with a zero edge feature):

    score_ij = a . LeakyReLU(W_att [h_i || h_j || e_ij])
    alpha_ij = softmax_j(score_ij)
    h'_i     = sum_j alpha_ij W_msg h_j

The reverse stack runs the same layer type on the transposed edge set, so a
node also aggregates from the accounts it sent tokens to.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn
import torch.nn.functional as F

from .layers import Linear, RowBatchNorm, dropout, init_uniform_

NEGATIVE_SLOPE = 0.2


class GraphError(ValueError):
    pass


@dataclass
class Graph:
    num_nodes: int
    edge_index: torch.Tensor  # (2, E): row 0 src, row 1 dst
    edge_attr: torch.Tensor  # (E, F_e)

    def __post_init__(self):
        self.edge_index = torch.as_tensor(self.edge_index, dtype=torch.long).reshape(2, -1)
        if self.edge_attr.shape[0] != self.edge_index.shape[1]:
            raise GraphError("edge_attr rows must match number of edges")
        if self.edge_index.numel() and (
            self.edge_index.min() < 0 or self.edge_index.max() >= self.num_nodes
        ):
            raise GraphError("edge endpoint outside 0 .. num_nodes-1")

    @property
    def num_edges(self) -> int:
        return self.edge_index.shape[1]

    @property
    def edge_dim(self) -> int:
        return self.edge_attr.shape[1]

    def reverse(self) -> "Graph":
        return Graph(self.num_nodes, self.edge_index.flip(0), self.edge_attr)

    def to(self, dtype) -> "Graph":
        return Graph(self.num_nodes, self.edge_index, self.edge_attr.to(dtype))

    @classmethod
    def from_arrays(cls, num_nodes: int, edges, edge_attr, dtype=torch.float32) -> "Graph":
        """``edges`` is an (E, 2) array of ``(src, dst)`` pairs."""
        ei = torch.as_tensor(edges, dtype=torch.long).reshape(-1, 2).T.contiguous()
        ea = torch.as_tensor(edge_attr, dtype=dtype).reshape(ei.shape[1], -1)
        return cls(num_nodes, ei, ea)

    def subgraph(self, nodes: torch.Tensor) -> tuple["Graph", torch.Tensor]:
        """Induced subgraph on ``nodes`` (relabelled 0..k-1) and the kept-edge mask."""
        remap = torch.full((self.num_nodes,), -1, dtype=torch.long)
        remap[nodes] = torch.arange(len(nodes))
        src, dst = remap[self.edge_index[0]], remap[self.edge_index[1]]
        keep = (src >= 0) & (dst >= 0)
        return Graph(len(nodes), torch.stack([src[keep], dst[keep]]), self.edge_attr[keep]), keep


def add_self_loops(edge_index: torch.Tensor, edge_attr: torch.Tensor, num_nodes: int):
    loops = torch.arange(num_nodes)
    ei = torch.cat([edge_index, torch.stack([loops, loops])], dim=1)
    ea = torch.cat([edge_attr, edge_attr.new_zeros(num_nodes, edge_attr.shape[1])], dim=0)
    return ei, ea


def segment_softmax(logits: torch.Tensor, index: torch.Tensor, num_segments: int) -> torch.Tensor:
    seg_max = logits.new_full((num_segments,), float("-inf"))
    seg_max = seg_max.scatter_reduce(0, index, logits, reduce="amax", include_self=True)
    ex = torch.exp(logits - seg_max[index])
    denom = ex.new_zeros(num_segments).index_add(0, index, ex)
    return ex / denom[index]


@dataclass
class GraphLayerParams:
    w_att: torch.Tensor  # (2 F_in + F_e, H)
    a: torch.Tensor  # (H,)
    w_msg: torch.Tensor  # (F_in, H)


def attention_scores(h, edge_index, edge_attr, params: GraphLayerParams) -> torch.Tensor:
    f_in = h.shape[1]
    w_i, w_j, w_e = params.w_att[:f_in], params.w_att[f_in : 2 * f_in], params.w_att[2 * f_in :]
    src, dst = edge_index
    z = (h @ w_i)[dst] + (h @ w_j)[src] + edge_attr @ w_e
    return F.leaky_relu(z, NEGATIVE_SLOPE) @ params.a


def attention_coefficients(graph: Graph, h: torch.Tensor, params: GraphLayerParams):
    """Attention weights over ``N_i + {i}`` for every node.

    Returns ``(alpha, edge_index)`` where ``edge_index`` is the graph's edges
    followed by one self loop per node and ``alpha[k]`` belongs to edge ``k``.
    """
    ei, ea = add_self_loops(graph.edge_index, graph.edge_attr.to(h.dtype), graph.num_nodes)
    scores = attention_scores(h, ei, ea, params)
    return segment_softmax(scores, ei[1], graph.num_nodes), ei


def layer_forward(graph: Graph, h: torch.Tensor, params: GraphLayerParams, aggregate: str = "neighbor") -> torch.Tensor:
    """One attention layer.  ``aggregate='self'`` sums ``W_msg h_i`` instead of ``W_msg h_j``."""
    if h.shape[0] != graph.num_nodes:
        raise GraphError(f"got {h.shape[0]} node states for {graph.num_nodes} nodes")
    if aggregate not in ("neighbor", "self"):
        raise ValueError(f"unknown aggregate mode {aggregate!r}")
    alpha, ei = attention_coefficients(graph, h, params)
    msg = h @ params.w_msg
    src, dst = ei
    picked = msg[src] if aggregate == "neighbor" else msg[dst]
    out = msg.new_zeros(graph.num_nodes, msg.shape[1])
    return out.index_add(0, dst, alpha.unsqueeze(1) * picked)


def mean_aggregate(graph: Graph, h: torch.Tensor, weight: torch.Tensor) -> torch.Tensor:
    """Unweighted mean of ``W h_j`` over ``N_i + {i}``."""
    ei, _ = add_self_loops(graph.edge_index, graph.edge_attr, graph.num_nodes)
    msg = h @ weight
    src, dst = ei
    total = msg.new_zeros(graph.num_nodes, msg.shape[1]).index_add(0, dst, msg[src])
    deg = msg.new_zeros(graph.num_nodes).index_add(0, dst, torch.ones_like(dst, dtype=msg.dtype))
    return total / deg.unsqueeze(1)


class GATv2EdgeLayer(nn.Module):
    def __init__(self, f_in: int, f_edge: int, f_out: int, aggregate: str = "neighbor", generator=None):
        super().__init__()
        fan = 2 * f_in + f_edge
        self.w_att = nn.Parameter(init_uniform_(torch.empty(fan, f_out), fan, generator))
        self.a = nn.Parameter(init_uniform_(torch.empty(f_out), f_out, generator))
        self.w_msg = nn.Parameter(init_uniform_(torch.empty(f_in, f_out), f_in, generator))
        self.aggregate = aggregate

    @property
    def params(self) -> GraphLayerParams:
        return GraphLayerParams(self.w_att, self.a, self.w_msg)

    def forward(self, graph: Graph, h: torch.Tensor) -> torch.Tensor:
        return layer_forward(graph, h, self.params, self.aggregate)


class MeanLayer(nn.Module):
    def __init__(self, f_in: int, f_edge: int, f_out: int, generator=None):
        super().__init__()
        self.weight = nn.Parameter(init_uniform_(torch.empty(f_in, f_out), f_in, generator))

    def forward(self, graph: Graph, h: torch.Tensor) -> torch.Tensor:
        return mean_aggregate(graph, h, self.weight)


class _Stack(nn.Module):
    def __init__(self, kind, f_in, f_edge, hidden, layers, p_drop, aggregate, generator):
        super().__init__()
        self.layers = nn.ModuleList()
        self.norms = nn.ModuleList()
        for i in range(layers):
            width_in = f_in if i == 0 else hidden
            if kind == "attention":
                self.layers.append(GATv2EdgeLayer(width_in, f_edge, hidden, aggregate, generator))
            else:
                self.layers.append(MeanLayer(width_in, f_edge, hidden, generator))
            if i < layers - 1:
                self.norms.append(RowBatchNorm(hidden))
        self.p_drop = p_drop
        self.generator = generator

    def forward(self, graph, h):
        for i, layer in enumerate(self.layers):
            h = layer(graph, h)
            if i < len(self.norms):
                h = torch.relu(self.norms[i](h))
                h = dropout(h, self.p_drop, self.training, self.generator)
        return h


class GraphScorer(nn.Module):
    """Node scores ``t`` from behaviour embeddings over a transaction graph.

    ``kind`` selects the message passing: ``attention`` (GATv2 with edge
    features), ``mean`` (unweighted neighbourhood mean) or ``none`` (a
    three-layer MLP on ``x`` alone).  Final representation for graph kinds is
    ``h_rev || h_fwd || x`` followed by a linear head; ``tanh(t)`` is the
    prediction in [-1, 1].
    """

    def __init__(
        self,
        in_dim: int,
        edge_dim: int,
        hidden: int = 64,
        layers: int = 2,
        dropout: float = 0.1,
        kind: str = "attention",
        aggregate: str = "neighbor",
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        if kind not in ("attention", "mean", "none"):
            raise ValueError(f"unknown scorer kind {kind!r}")
        self.kind, self.in_dim, self.hidden = kind, in_dim, hidden
        self.p_drop, self.generator = dropout, generator
        if kind == "none":
            self.mlp = nn.ModuleList([
                Linear(in_dim, hidden, generator=generator),
                Linear(hidden, hidden, generator=generator),
                Linear(hidden, 1, generator=generator),
            ])
            return
        self.forward_stack = _Stack(kind, in_dim, edge_dim, hidden, layers, dropout, aggregate, generator)
        self.reverse_stack = _Stack(kind, in_dim, edge_dim, hidden, layers, dropout, aggregate, generator)
        self.head = Linear(2 * hidden + in_dim, 1, generator=generator)

    @property
    def graph_dim(self) -> int:
        return 0 if self.kind == "none" else 2 * self.hidden

    def graph_embedding(self, graph: Graph, x: torch.Tensor) -> torch.Tensor:
        """``h_rev || h_fwd`` (width ``2 * hidden``)."""
        if x.shape[1] != self.in_dim:
            raise GraphError(f"embedding width {x.shape[1]} does not match scorer input {self.in_dim}")
        if self.kind == "none":
            return x.new_zeros(x.shape[0], 0)
        h_fwd = self.forward_stack(graph, x)
        h_rev = self.reverse_stack(graph.reverse(), x)
        return torch.cat([h_rev, h_fwd], dim=1)

    def forward(self, graph: Graph, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.in_dim:
            raise GraphError(f"embedding width {x.shape[1]} does not match scorer input {self.in_dim}")
        if self.kind == "none":
            h = x
            for i, lin in enumerate(self.mlp):
                h = lin(h)
                if i < len(self.mlp) - 1:
                    h = dropout(torch.relu(h), self.p_drop, self.training, self.generator)
            return h.squeeze(1)
        rep = torch.cat([self.graph_embedding(graph, x), x], dim=1)
        return self.head(rep).squeeze(1)


def model_forward(graph: Graph, x: torch.Tensor, scorer: GraphScorer) -> torch.Tensor:
    """Predictions in [-1, 1]; class +1 when positive."""
    return torch.tanh(scorer(graph, x))
