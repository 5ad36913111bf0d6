"""Sigmoid surrogate loss and PN / uPU / nnPU empirical risks.

All functions accept tensors (gradients flow) or plain sequences, which are
converted to float64 tensors.  Risks are returned as 0-dim tensors.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

CE_EPS = 1e-7


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def sigmoid_loss(t, y) -> torch.Tensor:
    """``1 / (1 + exp(t * y))``, evaluated as ``sigmoid(-t * y)`` (no overflow)."""
    t = _as_tensor(t)
    return torch.sigmoid(-t * y)


def _check_prior(prior: float) -> None:
    if not 0.0 < prior < 1.0:
        raise ValueError(f"class prior must lie in (0, 1), got {prior}")


def _nonempty(scores, name: str) -> torch.Tensor:
    scores = _as_tensor(scores).reshape(-1)
    if scores.numel() == 0:
        raise ValueError(f"{name} is empty")
    return scores


def risk_pn(scores_p, scores_n, prior: float) -> torch.Tensor:
    _check_prior(prior)
    sp = _nonempty(scores_p, "scores_p")
    sn = _nonempty(scores_n, "scores_n")
    return prior * sigmoid_loss(sp, 1).mean() + (1.0 - prior) * sigmoid_loss(sn, -1).mean()


@dataclass
class RiskEstimate:
    r_p_pos: torch.Tensor
    r_p_neg: torch.Tensor
    r_u_neg: torch.Tensor
    upu: torch.Tensor
    nnpu: torch.Tensor
    correction: torch.Tensor
    prior: float

    def objective(self, mode: str = "clamp") -> torch.Tensor:
        """Quantity to back-propagate.

        ``clamp`` differentiates ``nnpu`` as written (zero gradient through the
        correction when it is negative).  ``negate-descend`` follows the usual
        nnPU training rule: on a negative correction, step along ``-correction``
        so the unlabeled-as-negative risk is pushed back up.
        """
        if mode == "clamp":
            return self.nnpu
        if mode == "negate-descend":
            return -self.correction if self.correction.item() < 0 else self.nnpu
        raise ValueError(f"unknown nnPU gradient mode {mode!r}")


def estimate_risk(scores_p, scores_u, prior: float, prior_weighted: bool = True) -> RiskEstimate:
    """Component risks plus the uPU and nnPU combinations.

    With ``prior_weighted=False`` the nnPU correction is
    ``r_u_neg - r_p_neg`` (no prior in front of the positive term), i.e. the
    literal printed variant; ``upu`` is unaffected.
    """
    _check_prior(prior)
    sp = _nonempty(scores_p, "scores_p")
    su = _nonempty(scores_u, "scores_u")
    r_p_pos = sigmoid_loss(sp, 1).mean()
    r_p_neg = sigmoid_loss(sp, -1).mean()
    r_u_neg = sigmoid_loss(su, -1).mean()
    upu = prior * r_p_pos - prior * r_p_neg + r_u_neg
    correction = r_u_neg - (prior * r_p_neg if prior_weighted else r_p_neg)
    nnpu = prior * r_p_pos + torch.clamp(correction, min=0.0)
    return RiskEstimate(r_p_pos, r_p_neg, r_u_neg, upu, nnpu, correction, prior)


def risk_upu(scores_p, scores_u, prior: float) -> RiskEstimate:
    return estimate_risk(scores_p, scores_u, prior)


def risk_nnpu(scores_p, scores_u, prior: float, prior_weighted: bool = True) -> RiskEstimate:
    return estimate_risk(scores_p, scores_u, prior, prior_weighted=prior_weighted)


def cross_entropy_loss(probabilities, labels) -> torch.Tensor:
    """Mean binary cross-entropy; labels are 1 (positive) / 0 (negative)."""
    p = _as_tensor(probabilities)
    y = _as_tensor(labels).to(p.dtype)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: probabilities {tuple(p.shape)} vs labels {tuple(y.shape)}")
    p = p.clamp(CE_EPS, 1.0 - CE_EPS)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p)).mean()
