"""Numerical core: weighted propagation, a two-layer graph convolution with
hand-written backprop, an Adam optimizer, and accuracy.

Everything runs in float64 on scipy CSR matrices. The forward pass is

    Z      = relu(P @ X @ W0)
    logits = P @ Z @ W1

with P the self-loop-augmented, symmetrically degree-normalized weighted
adjacency. Gradients are exact analytic derivatives of the training objective
(mean cross-entropy over the training split, optionally plus a weighted sum of
edge reconstruction residuals that backpropagates into Z).
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .graph import Graph, check_weights, weighted_degrees

# Alias kept for signature clarity; see normalize().
PropagationMatrix = sp.csr_matrix

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class GnnParams:
    """Encoder/classifier weights plus Adam moments. Treated as a value."""

    w0: np.ndarray
    w1: np.ndarray
    m_w0: np.ndarray
    v_w0: np.ndarray
    m_w1: np.ndarray
    v_w1: np.ndarray
    step: int = 0

    @classmethod
    def init(cls, num_features: int, hidden: int, num_classes: int, rng) -> "GnnParams":
        w0 = glorot(num_features, hidden, rng)
        w1 = glorot(hidden, num_classes, rng)
        return cls(w0, w1, np.zeros_like(w0), np.zeros_like(w0), np.zeros_like(w1), np.zeros_like(w1))


def glorot(fan_in: int, fan_out: int, rng) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass(frozen=True)
class ForwardCache:
    """Intermediates of one forward pass, enough to backpropagate."""

    px: np.ndarray      # P @ X
    pre_h: np.ndarray   # P @ X @ W0, before relu
    z: np.ndarray       # hidden embeddings, relu(pre_h)
    logits: np.ndarray  # P @ z @ W1


def normalize(g: Graph, w: np.ndarray) -> sp.csr_matrix:
    """P = Dhat^{-1/2} (W + I) Dhat^{-1/2} over the edge support.

    Dhat counts the unit self-loop, so isolated rows reduce to identity rows.
    """
    w = check_weights(g, w)
    adj = g.adjacency
    dhat = weighted_degrees(g, w) + 1.0
    inv_sqrt = 1.0 / np.sqrt(dhat)
    base = np.ones(adj.entry_edge.shape[0], dtype=np.float64)
    offdiag = adj.entry_edge >= 0
    base[offdiag] = w[adj.entry_edge[offdiag]]
    data = base * inv_sqrt[adj.entry_src] * inv_sqrt[adj.indices]
    return adj.matrix(data)


def forward(p: GnnParams, features: np.ndarray, prop: sp.csr_matrix) -> ForwardCache:
    if not (np.isfinite(features).all() and np.isfinite(p.w0).all() and np.isfinite(p.w1).all()):
        raise ValueError("non-finite input to forward pass")
    px = prop @ features
    pre_h = px @ p.w0
    z = np.maximum(pre_h, 0.0)
    logits = (prop @ z) @ p.w1
    return ForwardCache(px=px, pre_h=pre_h, z=z, logits=logits)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def edge_reconstruction(z: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decoded edge scores sigma(z_u . z_v) and squared residuals to 1."""
    if edges.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    dots = np.einsum("ij,ij->i", z[edges[:, 0]], z[edges[:, 1]])
    decoded = expit(dots)
    return decoded, (decoded - 1.0) ** 2


def loss_and_grads(p, g: Graph, prop, mask, cfg):
    """Objective value, per-node training losses, and exact weight gradients.

    mask supplies the per-edge selection values for the reconstruction term;
    pass None (or set cfg.recon_in_wstep False) for plain cross-entropy.
    Returns (loss, node_losses, (grad_w0, grad_w1)). node_losses has one entry
    per node and is zero off the training split.
    """
    cache = forward(p, g.features, prop)
    return loss_and_grads_from_cache(p, g, prop, cache, mask, cfg)


def loss_and_grads_from_cache(p, g: Graph, prop, cache: ForwardCache, mask, cfg):
    train = g.train_idx
    if train.size == 0:
        raise ValueError("training split is empty")
    logp = log_softmax(cache.logits)
    node_losses = np.zeros(g.num_nodes)
    node_losses[train] = -logp[train, g.labels[train]]
    loss = float(node_losses[train].mean())

    grad_logits = np.zeros_like(cache.logits)
    probs = softmax(cache.logits[train])
    probs[np.arange(train.size), g.labels[train]] -= 1.0
    grad_logits[train] = probs / train.size

    pz = prop @ cache.z
    grad_w1 = pz.T @ grad_logits
    grad_z = prop @ (grad_logits @ p.w1.T)

    use_recon = mask is not None and getattr(cfg, "recon_in_wstep", True) and g.num_edges > 0
    if use_recon:
        beta = cfg.beta
        sel = np.asarray(mask.s if hasattr(mask, "s") else mask, dtype=np.float64)
        decoded, resid = edge_reconstruction(cache.z, g.edges)
        loss += float(beta * np.dot(sel, resid))
        # d resid / d dot = 2 (a - 1) a (1 - a); route through both endpoints.
        coef = beta * sel * 2.0 * (decoded - 1.0) * decoded * (1.0 - decoded)
        grad_z += g.adjacency.pair_matrix(coef) @ cache.z

    grad_pre = grad_z * (cache.pre_h > 0.0)
    grad_w0 = cache.px.T @ grad_pre
    return loss, node_losses, (grad_w0, grad_w1)


def adam_step(p: GnnParams, grads, lr: float) -> GnnParams:
    """One bias-corrected adaptive-moment update; returns fresh params."""
    g0, g1 = grads
    if not (np.isfinite(g0).all() and np.isfinite(g1).all()):
        raise ValueError("non-finite gradients")
    t = p.step + 1
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t

    def upd(w, m, v, grad):
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
        w = w - lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        return w, m, v

    w0, m0, v0 = upd(p.w0, p.m_w0, p.v_w0, g0)
    w1, m1, v1 = upd(p.w1, p.m_w1, p.v_w1, g1)
    return GnnParams(w0, w1, m0, v0, m1, v1, step=t)


def accuracy(logits: np.ndarray, g: Graph, split: str) -> float:
    """Fraction of split nodes classified correctly; argmax ties go low."""
    idx = g.split(split)
    if idx.size == 0:
        raise ValueError(f"split {split!r} is empty")
    pred = np.argmax(logits[idx], axis=1)
    return float(np.mean(pred == g.labels[idx]))
