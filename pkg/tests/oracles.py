"""Independent numpy oracles and finite-difference helpers for the test suite.

Everything here is hand-rolled (no torch) so it checks the library path rather
than sharing code with it.
"""

import numpy as np
import torch


def np_softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def np_layernorm(x, gamma, beta, eps=1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)  # biased, matching nn.LayerNorm
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def sa_oracle(x, w_q, w_k, w_v, w, residual, gamma=None, beta=None):
    """Dense self-attention fusion oracle; x is (3, d) rows, weights are (out, in)."""
    d = x.shape[1]
    q, k, v = x @ w_q.T, x @ w_k.T, x @ w_v.T
    attn = np_softmax(q @ k.T / np.sqrt(d), axis=-1)
    z = attn @ v
    y_rows = np_layernorm(x + z, gamma, beta) if residual else z
    return float(w @ y_rows.sum(axis=0)), y_rows, attn


def r1_oracle(h_author, h_cap, h_idea, w_a, w_i, w_c, w):
    combined = w_a @ h_author + w_i @ h_idea + w_c @ h_cap
    return float(w @ combined)


def gated_oracle(h_author, h_cap, h_idea, w_a, w_c, w_i):
    x_a, x_c, x_i = w_a @ h_author, w_c @ h_cap, w_i @ h_idea
    logits = np.stack([x_a * x_i, x_c * x_i, x_i * x_i])
    p = np_softmax(logits, axis=0)
    return float((p[0] * x_a + p[1] * x_c + p[2] * x_i).sum()), p


def average_oracle(h_author, h_cap, h_idea, w):
    return float(w @ ((h_author + h_cap + h_idea) / 3.0))


def tf_degenerate_oracle(h_idea, w):
    """Transformer fusion with zeroed attention output and zeroed MLP reduces to
    two stacked layer norms of the idea row followed by the readout."""
    ones = np.ones_like(h_idea)
    zeros = np.zeros_like(h_idea)
    return float(w @ np_layernorm(np_layernorm(h_idea, ones, zeros), ones, zeros))


def central_difference_gradient(fn, tensor, step=1e-4):
    """Central finite-difference gradient of scalar fn() w.r.t. tensor, in place."""
    grad = torch.zeros_like(tensor)
    flat = tensor.view(-1)
    grad_flat = grad.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + step
            f_plus = float(fn())
            flat[i] = orig - step
            f_minus = float(fn())
            flat[i] = orig
            grad_flat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def gradient_relative_error(analytic, fd):
    diff = float((analytic - fd).abs().max())
    scale = max(float(analytic.abs().max()), float(fd.abs().max()), 1.0)
    return diff / scale


def assert_gradients_match(make_scalar, tensors, step=1e-4, tol=1e-4):
    """Compare autograd gradients of make_scalar() against central differences.

    ``tensors`` must be leaf float64 tensors with requires_grad=True that feed
    make_scalar; every one is checked coordinate by coordinate.
    """
    y = make_scalar()
    grads = torch.autograd.grad(y, tensors, allow_unused=True)
    for tensor, grad in zip(tensors, grads):
        analytic = torch.zeros_like(tensor) if grad is None else grad.detach()
        fd = central_difference_gradient(make_scalar, tensor, step=step)
        err = gradient_relative_error(analytic, fd)
        assert err < tol, f"gradient mismatch {err:.3e} on tensor of shape {tuple(tensor.shape)}"
