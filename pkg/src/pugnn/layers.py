"""Small building blocks shared by the encoder and graph modules.

Every random draw takes an explicit ``torch.Generator`` so a run is fully
determined by its seed.
"""
from __future__ import annotations

import math
from typing import Optional

import torch
from torch import nn
import torch.nn.functional as F


def init_uniform_(t: torch.Tensor, fan_in: int, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    with torch.no_grad():
        t.copy_(torch.rand(t.shape, generator=generator, dtype=t.dtype) * 2 * bound - bound)
    return t


def dropout(x: torch.Tensor, p: float, training: bool, generator: Optional[torch.Generator]) -> torch.Tensor:
    if not training or p == 0.0:
        return x
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype) >= p
    return x * keep / (1.0 - p)


class Linear(nn.Module):
    """``y = x @ weight + bias`` with weight stored as (in, out)."""

    def __init__(self, n_in: int, n_out: int, bias: bool = True, generator=None):
        super().__init__()
        self.weight = nn.Parameter(init_uniform_(torch.empty(n_in, n_out), n_in, generator))
        self.bias = nn.Parameter(init_uniform_(torch.empty(n_out), n_in, generator)) if bias else None

    def forward(self, x):
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class RowBatchNorm(nn.Module):
    """BatchNorm over the rows of a 2-D input selected by ``mask``.

    Unselected rows pass through as zeros.  With fewer than two selected rows
    in training mode the running statistics are used instead.  Full-graph
    training updates the statistics once per epoch, hence the high default
    momentum.
    """

    def __init__(self, width: int, momentum: float = 0.5):
        super().__init__()
        self.bn = nn.BatchNorm1d(width, momentum=momentum)

    def forward(self, x: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        if mask is None:
            rows = x
        else:
            rows = x[mask]
        use_batch = self.training and rows.shape[0] > 1
        out = F.batch_norm(
            rows,
            self.bn.running_mean,
            self.bn.running_var,
            self.bn.weight,
            self.bn.bias,
            training=use_batch,
            momentum=self.bn.momentum,
            eps=self.bn.eps,
        )
        if mask is None:
            return out
        full = torch.zeros_like(x)
        full[mask] = out
        return full
