"""Loss functions: categorical cross entropy and the triplet margin hinge."""
from __future__ import annotations

import numpy as np

LOG_EPS = 1e-12


def softmax(logits, axis=-1):
    """Numerically stable softmax (shift-invariant by construction)."""
    z = np.asarray(logits, dtype=np.float64) if np.asarray(logits).dtype.kind != "f" \
        else np.asarray(logits)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def cce_loss(probs, label: int) -> float:
    """Cross entropy of one probability vector against its true class:
    ``-log(probs[label] + eps)``."""
    probs = np.asarray(probs)
    if probs.ndim != 1:
        raise ValueError("probs must be a single probability vector")
    if not 0 <= int(label) < probs.shape[0]:
        raise ValueError(f"label {label} out of range for {probs.shape[0]} classes")
    return float(-np.log(probs[int(label)] + LOG_EPS))


def cce_loss_batch(probs, labels, reduction: str = "mean") -> float:
    """Cross entropy over a batch of probability rows."""
    probs = np.asarray(probs)
    labels = np.asarray(labels, dtype=np.int64)
    picked = probs[np.arange(probs.shape[0]), labels]
    losses = -np.log(picked + LOG_EPS)
    if reduction == "mean":
        return float(losses.mean())
    if reduction == "sum":
        return float(losses.sum())
    raise ValueError(f"unknown reduction {reduction!r}")


def triplet_loss(e_ref, e_pos, e_neg, margin: float = 1.0) -> float:
    """Hinge triplet margin loss with Euclidean distance:
    ``max(D(pos, ref) - D(neg, ref) + margin, 0)``.
    """
    e_ref = np.asarray(e_ref, dtype=np.float64)
    e_pos = np.asarray(e_pos, dtype=np.float64)
    e_neg = np.asarray(e_neg, dtype=np.float64)
    if not e_ref.shape == e_pos.shape == e_neg.shape:
        raise ValueError("embedding dimensions must match")
    d_pos = np.linalg.norm(e_pos - e_ref)
    d_neg = np.linalg.norm(e_neg - e_ref)
    return float(max(d_pos - d_neg + margin, 0.0))


def triplet_loss_and_grads(e_ref, e_pos, e_neg, margin: float = 1.0):
    """Mean hinge loss over a batch of triplets plus embedding gradients.

    Inputs are ``[n_triplets, dim]``; returns ``(loss, g_ref, g_pos,
    g_neg)`` where gradients are of the mean loss.  Inactive hinges and
    zero-distance pairs contribute zero gradient.
    """
    e_ref, e_pos, e_neg = (np.atleast_2d(np.asarray(e)) for e in
                           (e_ref, e_pos, e_neg))
    if not e_ref.shape == e_pos.shape == e_neg.shape:
        raise ValueError("embedding dimensions must match")
    n = e_ref.shape[0]
    diff_pos = e_pos - e_ref
    diff_neg = e_neg - e_ref
    d_pos = np.linalg.norm(diff_pos, axis=1)
    d_neg = np.linalg.norm(diff_neg, axis=1)
    losses = np.maximum(d_pos - d_neg + margin, 0.0)
    active = losses > 0.0

    def unit(diff, dist):
        safe = np.where(dist > 0, dist, 1.0)
        u = diff / safe[:, None]
        u[dist == 0] = 0.0
        return u

    u_pos = unit(diff_pos, d_pos)
    u_neg = unit(diff_neg, d_neg)
    scale = (active.astype(e_ref.dtype) / n)[:, None]
    g_pos = scale * u_pos
    g_neg = -scale * u_neg
    g_ref = -g_pos - g_neg
    return float(losses.mean()), g_ref, g_pos, g_neg
