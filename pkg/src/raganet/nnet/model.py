"""Forward and reverse-mode passes of the sequence classifier.

Pipeline: token embedding -> single LSTM layer over time -> soft-alignment
attention (``e_t = v . tanh(W h_t)``, softmax over unmasked steps, context
``c = sum_t alpha_t h_t``) -> batch normalization of the context vector ->
dense + ReLU + dropout -> dense -> softmax (or raw embedding output, for
the ranking head).

Everything is plain numpy; the backward pass mirrors the forward step by
step from cached activations, so gradients can be verified against finite
differences at float64.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..validation import as_id_matrix
from .losses import softmax
from .params import ModelConfig, ModelParams

PAD_ID = 0
BN_EPS = 1e-5
BN_MOMENTUM = 0.9

MODES = ("train", "eval", "finetune")


def _sigmoid(x):
    # stable on both tails; a single ufunc call keeps the LSTM loop cheap
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class ForwardTrace:
    """Cached activations of one forward pass, consumed by ``backward``."""

    mode: str
    ids: np.ndarray            # [B, L] int
    mask: np.ndarray           # [B, L] bool, True on real tokens
    xh: np.ndarray             # [B, L, E+H]: embedded input | previous h
    sig_gates: np.ndarray      # [B, L, 3H]: input | forget | output gates
    gate_g: np.ndarray         # [B, L, H] candidate
    cell: np.ndarray           # [B, L, H]
    tanh_cell: np.ndarray
    h: np.ndarray              # [B, L, H]
    attn_u: np.ndarray         # [B, L, H] tanh(h W)
    alpha: np.ndarray          # [B, L] attention weights, 0 on PAD
    context: np.ndarray        # [B, H]
    bn_x_hat: np.ndarray       # [B, H]
    bn_inv_std: np.ndarray     # [H]
    bn_out: np.ndarray         # [B, H]
    d1_pre: np.ndarray         # [B, D1]
    d1_dropped: np.ndarray     # [B, D1] input of the final dense layer
    drop_mask: np.ndarray | None
    logits: np.ndarray         # [B, C]
    probs: np.ndarray | None   # [B, C]; None for the embedding head


def batchnorm_apply(x, scale, shift, running_mean, running_var, mode,
                    momentum: float = BN_MOMENTUM, eps: float = BN_EPS,
                    update_running: bool = True):
    """Normalize a feature batch per feature.

    Train mode normalizes by the batch mean/variance (batch size >= 2
    required) and folds them into the running statistics in place; eval
    mode uses the running statistics.  Returns ``(out, x_hat, inv_std)``.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("batchnorm_apply expects a [batch, features] array")
    if mode == "train":
        if x.shape[0] < 2:
            raise ValueError("batch normalization needs a batch of >= 2 in "
                             "train mode")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        if update_running:
            running_mean *= momentum
            running_mean += (1.0 - momentum) * mean
            running_var *= momentum
            running_var += (1.0 - momentum) * var
    elif mode in ("eval", "finetune"):
        mean = running_mean
        var = running_var
    else:
        raise ValueError(f"unknown mode {mode!r}")
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    return scale * x_hat + shift, x_hat, inv_std


def forward(params: ModelParams, cfg: ModelConfig, sequences, mode: str = "eval",
            rng: np.random.Generator | None = None):
    """Run a batch of equal-length id sequences through the network.

    Returns ``(out, trace)`` where ``out`` is ``[B, n_outputs]`` --
    probabilities for the classifier head, raw activations for the
    embedding head.  Dropout is active in ``train`` and ``finetune`` modes
    (``rng`` required); batch statistics are only used and updated in
    ``train`` mode, so ``finetune`` leaves the frozen running statistics
    untouched.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    ids = as_id_matrix(sequences)
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError("token id outside the model vocabulary")
    mask = ids != PAD_ID
    if not mask.any(axis=1).all():
        raise ValueError("a sequence consists entirely of PAD: no unmasked "
                         "step to attend to")

    dtype = params.dtype
    batch, length = ids.shape
    e_dim, hidden = cfg.embed_dim, cfg.lstm_hidden

    kernel = params["lstm_kernel"]
    kernel_h = kernel[e_dim:]
    bias = params["lstm_bias"]

    emb = params["embedding"][ids]                       # [B, L, E]
    xh = np.empty((batch, length, e_dim + hidden), dtype=dtype)
    xh[:, :, :e_dim] = emb
    # input contribution of every timestep in one matmul
    x_part = emb.reshape(-1, e_dim) @ kernel[:e_dim]
    x_part = x_part.reshape(batch, length, 4 * hidden)

    sig_gates = np.empty((batch, length, 3 * hidden), dtype=dtype)
    gate_g = np.empty((batch, length, hidden), dtype=dtype)
    cell = np.empty_like(gate_g)
    tanh_cell = np.empty_like(gate_g)
    h_all = np.empty_like(gate_g)

    h = np.zeros((batch, hidden), dtype=dtype)
    c = np.zeros((batch, hidden), dtype=dtype)
    for t in range(length):
        xh[:, t, e_dim:] = h
        a = x_part[:, t] + h @ kernel_h + bias
        sio = _sigmoid(a[:, :3 * hidden])
        g_t = np.tanh(a[:, 3 * hidden:])
        i_t = sio[:, :hidden]
        f_t = sio[:, hidden:2 * hidden]
        c = f_t * c + i_t * g_t
        tc = np.tanh(c)
        h = sio[:, 2 * hidden:] * tc
        sig_gates[:, t] = sio
        gate_g[:, t] = g_t
        cell[:, t] = c
        tanh_cell[:, t] = tc
        h_all[:, t] = h

    # soft-alignment attention over the hidden states, PAD masked out
    u = np.tanh(h_all @ params["attn_proj"])             # [B, L, H]
    scores = u @ params["attn_score"]                    # [B, L]
    scores = np.where(mask, scores, -np.inf)
    scores = scores - scores.max(axis=1, keepdims=True)
    expo = np.exp(scores)
    alpha = expo / expo.sum(axis=1, keepdims=True)
    context = np.einsum("bl,blh->bh", alpha, h_all)

    bn_out, x_hat, inv_std = batchnorm_apply(
        context, params["bn_scale"], params["bn_shift"],
        params["bn_running_mean"], params["bn_running_var"], mode)

    d1_pre = bn_out @ params["dense1_kernel"] + params["dense1_bias"]
    d1 = np.maximum(d1_pre, 0.0)

    drop_mask = None
    if mode in ("train", "finetune") and cfg.dropout_rate > 0.0:
        if rng is None:
            raise ValueError(f"{mode} mode with dropout needs an rng")
        keep = 1.0 - cfg.dropout_rate
        drop_mask = (rng.random(d1.shape) < keep).astype(dtype) / dtype.type(keep)
        d1 = d1 * drop_mask

    logits = d1 @ params["dense2_kernel"] + params["dense2_bias"]
    probs = None if cfg.embedding_head else softmax(logits, axis=1)
    out = logits if cfg.embedding_head else probs

    trace = ForwardTrace(
        mode=mode, ids=ids, mask=mask, xh=xh,
        sig_gates=sig_gates, gate_g=gate_g,
        cell=cell, tanh_cell=tanh_cell, h=h_all,
        attn_u=u, alpha=alpha, context=context,
        bn_x_hat=x_hat, bn_inv_std=inv_std, bn_out=bn_out,
        d1_pre=d1_pre, d1_dropped=d1, drop_mask=drop_mask,
        logits=logits, probs=probs,
    )
    return out, trace


def forward_classifier(params: ModelParams, cfg: ModelConfig, tokens,
                       mode: str = "eval",
                       rng: np.random.Generator | None = None):
    """Single-sequence forward; returns ``(probs, trace)``.

    Train mode on a single sequence fails in batch normalization by
    contract: training always goes through batches.
    """
    ids = np.asarray(getattr(tokens, "ids", tokens), dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ValueError("tokens must be a non-empty 1D id sequence")
    out, trace = forward(params, cfg, ids[None, :], mode=mode, rng=rng)
    return out[0], trace


def backward_from_dlogits(params: ModelParams, cfg: ModelConfig,
                          trace: ForwardTrace, d_logits) -> dict[str, np.ndarray]:
    """Reverse pass from the gradient at the final dense output.

    Returns gradients for every learnable tensor, aligned with the names in
    :class:`ModelParams`.  Deterministic given the trace (the dropout mask
    is part of it).
    """
    d_logits = np.asarray(d_logits, dtype=params.dtype)
    batch, length = trace.ids.shape
    e_dim, hidden = cfg.embed_dim, cfg.lstm_hidden

    grads: dict[str, np.ndarray] = {}

    grads["dense2_kernel"] = trace.d1_dropped.T @ d_logits
    grads["dense2_bias"] = d_logits.sum(axis=0)
    dd1 = d_logits @ params["dense2_kernel"].T
    if trace.drop_mask is not None:
        dd1 = dd1 * trace.drop_mask
    da1 = dd1 * (trace.d1_pre > 0)

    grads["dense1_kernel"] = trace.bn_out.T @ da1
    grads["dense1_bias"] = da1.sum(axis=0)
    dbn = da1 @ params["dense1_kernel"].T

    grads["bn_scale"] = (dbn * trace.bn_x_hat).sum(axis=0)
    grads["bn_shift"] = dbn.sum(axis=0)
    dx_hat = dbn * params["bn_scale"]
    if trace.mode == "train":
        # batch statistics depend on the input: full batch-norm jacobian
        n = batch
        dcontext = (trace.bn_inv_std / n) * (
            n * dx_hat
            - dx_hat.sum(axis=0)
            - trace.bn_x_hat * (dx_hat * trace.bn_x_hat).sum(axis=0)
        )
    else:
        dcontext = dx_hat * trace.bn_inv_std

    # attention
    h_all, alpha, u = trace.h, trace.alpha, trace.attn_u
    dalpha = np.einsum("bh,blh->bl", dcontext, h_all)
    dh_all = alpha[:, :, None] * dcontext[:, None, :]
    inner = (dalpha * alpha).sum(axis=1, keepdims=True)
    de = alpha * (dalpha - inner)                       # zero on PAD steps
    grads["attn_score"] = np.einsum("blh,bl->h", u, de)
    du = de[:, :, None] * params["attn_score"]
    du *= 1.0 - u * u
    grads["attn_proj"] = h_all.reshape(-1, hidden).T @ du.reshape(-1, hidden)
    dh_all += du @ params["attn_proj"].T

    # LSTM backward through time
    kernel_t = params["lstm_kernel"].T
    d_gates = np.empty((batch, length, 4 * hidden), dtype=params.dtype)
    dxh = np.empty_like(trace.xh)
    dh_next = np.zeros((batch, hidden), dtype=params.dtype)
    dc_next = np.zeros_like(dh_next)
    for t in range(length - 1, -1, -1):
        sio = trace.sig_gates[:, t]
        i_t = sio[:, :hidden]
        f_t = sio[:, hidden:2 * hidden]
        o_t = sio[:, 2 * hidden:]
        g_t = trace.gate_g[:, t]
        tc = trace.tanh_cell[:, t]
        dh = dh_all[:, t] + dh_next
        dc = dc_next + dh * o_t * (1.0 - tc * tc)
        c_prev = trace.cell[:, t - 1] if t > 0 else 0.0
        dg_t = d_gates[:, t]
        dg_t[:, :hidden] = dc * g_t
        dg_t[:, hidden:2 * hidden] = dc * c_prev
        dg_t[:, 2 * hidden:3 * hidden] = dh * tc
        # pre-activation derivative of the three sigmoid gates at once
        dg_t[:, :3 * hidden] *= sio * (1.0 - sio)
        dg_t[:, 3 * hidden:] = dc * i_t * (1.0 - g_t * g_t)
        dxh[:, t] = dg_t @ kernel_t
        dh_next = dxh[:, t, e_dim:]
        dc_next = dc * f_t

    flat_xh = trace.xh.reshape(-1, e_dim + hidden)
    flat_dg = d_gates.reshape(-1, 4 * hidden)
    grads["lstm_kernel"] = flat_xh.T @ flat_dg
    grads["lstm_bias"] = flat_dg.sum(axis=0)

    d_emb = np.zeros_like(params["embedding"])
    np.add.at(d_emb, trace.ids.reshape(-1), dxh[:, :, :e_dim].reshape(-1, e_dim))
    grads["embedding"] = d_emb
    return grads


def backward(params: ModelParams, cfg: ModelConfig, trace: ForwardTrace,
             loss_kind: str, target) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss over the traced batch.

    ``loss_kind='cce'`` is the mean categorical cross entropy against the
    integer class labels in ``target`` (softmax and CCE fold into
    ``probs - onehot`` at the logits).
    """
    if loss_kind != "cce":
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    if trace.probs is None:
        raise ValueError("cce backward needs a classifier-head trace")
    labels = np.asarray(target, dtype=np.int64).reshape(-1)
    batch, n_out = trace.probs.shape
    if labels.shape[0] != batch:
        raise ValueError("one label per traced sequence required")
    if labels.min() < 0 or labels.max() >= n_out:
        raise ValueError("label out of range")
    d_logits = trace.probs.copy()
    d_logits[np.arange(batch), labels] -= 1.0
    d_logits /= batch
    return backward_from_dlogits(params, cfg, trace, d_logits)
