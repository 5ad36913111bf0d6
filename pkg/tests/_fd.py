"""Central finite differences, independent of autograd."""
import numpy as np
import torch


def central_difference(f, x: torch.Tensor, h: float = 1e-6) -> torch.Tensor:
    """Numerical gradient of scalar ``f()`` w.r.t. tensor ``x`` (perturbed in place)."""
    grad = torch.zeros_like(x)
    flat, gflat = x.data.view(-1), grad.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        plus = float(f())
        flat[i] = orig - h
        minus = float(f())
        flat[i] = orig
        gflat[i] = (plus - minus) / (2 * h)
    return grad


def max_relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    """``||a - n||_inf / ||n||_inf`` (falls back to absolute error for a zero gradient)."""
    a = analytic.detach().double().reshape(-1).numpy()
    n = numeric.detach().double().reshape(-1).numpy()
    scale = np.max(np.abs(n))
    err = np.max(np.abs(a - n))
    return float(err / scale) if scale > 0 else float(err)


def check_gradients(loss_fn, tensors, h=1e-6):
    """Worst relative error over ``tensors`` between autograd and central differences."""
    for t in tensors:
        t.grad = None
    loss = loss_fn()
    analytic = torch.autograd.grad(loss, tensors)
    worst = 0.0
    with torch.no_grad():
        for t, g in zip(tensors, analytic):
            worst = max(worst, max_relative_error(g, central_difference(loss_fn, t, h)))
    return worst
