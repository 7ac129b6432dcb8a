"""Self-paced edge curriculum: residual scoring, closed-form mask updates with
a growing age parameter, smoothed edge reweighting, and the training loop.

Each training iteration alternates between one optimizer step on the model and
a refresh of the per-edge selection mask S in [0, 1]. An edge's difficulty is
its reconstruction residual R = (sigma(z_u . z_v) - 1)^2 under the current
hidden embeddings; the mask solves, edge by edge,

    min_{S in [0,1]}  beta * S * R  +  lambda * (S - 1)^2  +  gamma * (S - S_prev)^2

whose minimizer is clip((2*lambda + 2*gamma*S_prev - beta*R) / (2*lambda + 2*gamma)).
As the age parameter lambda grows, the solution is pulled toward 1 and the
training structure converges to the input structure. The propagation weights
actually used for message passing smooth S by historical selection frequency
and endpoint confidence.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .nn import (
    GnnParams,
    accuracy,
    adam_step,
    edge_reconstruction,
    forward,
    loss_and_grads_from_cache,
    normalize,
)

# Sub-streams of the run seed. Model initialization shares one stream across
# every training regime so that equal seeds mean equal starting weights.
MODEL_STREAM = 0
ORDER_STREAM = 1


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


@dataclass
class RclConfig:
    """Hyperparameters of a curriculum training run."""

    beta: float = 0.1
    gamma: float = 1.0
    pace: int = 1
    epochs: int = 300
    lr: float = 0.01
    hidden: int = 64
    epsilon_conv: float = 1e-3
    init_frac: float = 0.1
    recon_in_wstep: bool = True
    smoothing: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not 1 <= self.pace <= 5:
            raise ValueError("pace must be an integer in 1..5")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.hidden < 1:
            raise ValueError("hidden width must be positive")
        if not 0 < self.epsilon_conv < 1:
            raise ValueError("epsilon_conv must lie in (0, 1)")
        if not 0 < self.init_frac < 1:
            raise ValueError("init_frac must lie in (0, 1)")


@dataclass
class MaskState:
    """Per-edge selection state carried across iterations.

    s           : mask values in [0, 1], aligned with Graph.edges
    counts      : how many iterations each edge has been selected (s > 0)
    lam         : current age parameter
    iter        : iterations completed
    node_losses : latest per-node training losses, zero off the training split
    """

    s: np.ndarray
    counts: np.ndarray
    lam: float
    iter: int
    node_losses: np.ndarray

    def copy(self) -> "MaskState":
        return MaskState(
            self.s.copy(), self.counts.copy(), self.lam, self.iter, self.node_losses.copy()
        )


@dataclass
class TraceRow:
    iter: int
    lam: float
    num_selected: int
    frac_easy: float | None
    frac_medium: float | None
    frac_hard: float | None
    train_loss: float
    val_acc: float


@dataclass
class CurriculumTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iter,lambda,num_selected,frac_easy,frac_medium,frac_hard,train_loss,val_acc\n")
            for r in self.rows:
                fracs = ",".join(
                    "" if f is None else f"{f:.9g}" for f in (r.frac_easy, r.frac_medium, r.frac_hard)
                )
                fh.write(
                    f"{r.iter},{r.lam:.9g},{r.num_selected},{fracs},{r.train_loss:.9g},{r.val_acc:.9g}\n"
                )

    @classmethod
    def load(cls, path) -> "CurriculumTrace":
        rows = []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
            if not header.startswith("iter,lambda,num_selected"):
                raise ValueError(f"not a trace file: {path}")
            for line in fh:
                t, lam, k, fe, fm, fh_, loss, acc = line.rstrip("\n").split(",")
                rows.append(
                    TraceRow(
                        int(t),
                        float(lam),
                        int(k),
                        float(fe) if fe else None,
                        float(fm) if fm else None,
                        float(fh_) if fh_ else None,
                        float(loss),
                        float(acc),
                    )
                )
        return cls(rows)


@dataclass(frozen=True)
class RunMetrics:
    best_val_acc: float
    test_acc: float
    best_epoch: int


def decode(z: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Logistic inner-product edge scores for the stored edge list."""
    if not np.isfinite(z).all():
        raise ValueError("non-finite embeddings")
    decoded, _ = edge_reconstruction(z, edges)
    return decoded

def residuals(decoded: np.ndarray) -> np.ndarray:
    """Squared mismatch to the adjacency value 1 on the edge support."""
    return (np.asarray(decoded, dtype=np.float64) - 1.0) ** 2


def update_mask(r, s_prev, lam: float, beta: float, gamma: float) -> np.ndarray:
    """Closed-form minimizer of the per-edge mask objective, clipped to [0, 1]."""
    if lam <= 0 or beta <= 0 or gamma < 0:
        raise ValueError("require lam > 0, beta > 0, gamma >= 0")
    r = np.asarray(r, dtype=np.float64)
    s_prev = np.asarray(s_prev, dtype=np.float64)
    raw = (2.0 * lam + 2.0 * gamma * s_prev - beta * r) / (2.0 * lam + 2.0 * gamma)
    return np.clip(raw, 0.0, 1.0)


def lambda_saturation(cfg: RclConfig) -> float:
    """Age parameter beyond which every on-support mask entry is >= 1 - epsilon_conv."""
    return cfg.beta / (2.0 * cfg.epsilon_conv)


def schedule_lambda(cfg: RclConfig, t: int, lam0: float) -> float:
    """Geometric growth from lam0, reaching saturation at iteration T / pace.

    Frozen at the saturation value afterwards, so with pace = 1 the training
    structure converges to the input structure exactly at the final iteration.
    """
    if t < 0:
        raise ValueError("iteration must be nonnegative")
    lam_conv = lambda_saturation(cfg)
    if lam0 >= lam_conv:
        raise ValueError(f"lam0={lam0} already saturated (>= {lam_conv})")
    if lam0 <= 0:
        raise ValueError("lam0 must be positive")
    x = cfg.pace * t / cfg.epochs
    if x >= 1.0:
        return lam_conv
    return lam0 * (lam_conv / lam0) ** x


def smooth_weights(s, mask: MaskState, g: Graph, enabled: bool = True) -> np.ndarray:
    """Propagation weights for the next iteration; also advances edge counts.

    weight(e) = psi(e) * rho(u) * rho(v) * s(e) with psi the selection
    frequency counts/iter and rho(v) = exp(-loss_v) (1 off the training
    split). With smoothing disabled the weights are the mask values verbatim,
    but selection counts still advance.
    """
    if mask.iter < 1:
        raise ValueError("smoothing needs at least one completed iteration")
    s = np.asarray(s, dtype=np.float64)
    selected = s > 0.0
    mask.counts = mask.counts + selected
    if not enabled:
        return s.copy()
    psi = mask.counts / mask.iter
    rho = np.exp(-mask.node_losses)
    pi = psi * rho[g.edges[:, 0]] * rho[g.edges[:, 1]]
    return pi * s


@dataclass
class StructureInit:
    """Initial mask and weights derived from a pretrained plain backbone."""

    mask: MaskState
    lam0: float
    weights: np.ndarray
    backbone: object = None  # FitResult of the pretraining run


def init_structure(g: Graph, cfg: RclConfig, backbone=None) -> StructureInit:
    """Score edges with a model pretrained on the full structure and keep the
    easiest ones.

    lam0 is set so that, under the gamma-free closed form, roughly an
    init_frac fraction of edges starts with s > 0 (edges whose residual falls
    below the init_frac quantile).
    """
    from .baselines import train_vanilla  # deferred to avoid a module cycle

    if backbone is None:
        backbone = train_vanilla(g, cfg)
    r = residuals(decode(backbone.z, g.edges))

    if r.size == 0:
        lam0 = cfg.beta / 4.0
        s0 = np.zeros(0)
    elif np.all(r == r[0]):
        # Degenerate scoring: no quantile to anchor on.
        lam0 = cfg.beta * float(r.max()) / 4.0
        if lam0 <= 0.0:
            lam0 = cfg.beta / 4.0
        s0 = update_mask(r, np.zeros_like(r), lam0, cfg.beta, 0.0)
    else:
        q = float(np.quantile(r, cfg.init_frac))
        if q <= 0.0:
            q = float(r[r > 0.0].min()) / 2.0
        lam0 = cfg.beta * q / 2.0
        s0 = update_mask(r, np.zeros_like(r), lam0, cfg.beta, 0.0)

    mask = MaskState(
        s=s0,
        counts=np.zeros(g.num_edges, dtype=np.int64),
        lam=lam0,
        iter=0,
        node_losses=np.zeros(g.num_nodes),
    )
    return StructureInit(mask=mask, lam0=lam0, weights=s0.copy(), backbone=backbone)


def train_rcl(
    g: Graph,
    cfg: RclConfig,
    difficulty: np.ndarray | None = None,
    init: StructureInit | None = None,
):
    """Run the full curriculum training loop.

    Per iteration: one Adam step on the model under the current smoothed
    weights, then residual scoring from that forward pass's embeddings, the
    closed-form mask refresh at the scheduled age parameter, and reweighting
    for the next iteration. Validation/test accuracy is read from the same
    forward pass, so the reported model is the (parameters, structure) pair of
    the best-validation iteration.

    Returns (best GnnParams, CurriculumTrace, RunMetrics).
    """
    if init is None:
        init = init_structure(g, cfg)
    mask = init.mask.copy()
    weights = init.weights.copy()

    rng = stream_rng(cfg.seed, MODEL_STREAM)
    params = GnnParams.init(g.num_features, cfg.hidden, g.num_classes, rng)

    has_val = g.val_idx.size > 0
    has_test = g.test_idx.size > 0
    best_val, best_params, best_test, best_epoch = -math.inf, None, math.nan, -1
    trace = CurriculumTrace()

    counts_by_difficulty = None
    if difficulty is not None:
        difficulty = np.asarray(difficulty)
        counts_by_difficulty = [max(int((difficulty == d).sum()), 1) for d in range(3)]

    for t in range(cfg.epochs):
        prop = normalize(g, np.clip(weights, 0.0, 1.0))
        cache = forward(params, g.features, prop)
        loss, node_losses, grads = loss_and_grads_from_cache(params, g, prop, cache, mask, cfg)

        val_acc = accuracy(cache.logits, g, "val") if has_val else math.nan
        if val_acc > best_val or best_params is None:
            best_val = val_acc
            best_params = params
            best_test = accuracy(cache.logits, g, "test") if has_test else math.nan
            best_epoch = t

        params = adam_step(params, grads, cfg.lr)

        scored = residuals(decode(cache.z, g.edges))
        lam = schedule_lambda(cfg, t, init.lam0)
        mask.s = update_mask(scored, mask.s, lam, cfg.beta, cfg.gamma)
        mask.lam = lam
        mask.iter += 1
        mask.node_losses = node_losses
        weights = smooth_weights(mask.s, mask, g, enabled=cfg.smoothing)

        selected = mask.s > 0.0
        fracs = (None, None, None)
        if counts_by_difficulty is not None:
            fracs = tuple(
                float(selected[difficulty == d].sum()) / counts_by_difficulty[d] for d in range(3)
            )
        train_loss = float(node_losses[g.train_idx].mean())
        trace.rows.append(
            TraceRow(t, lam, int(selected.sum()), fracs[0], fracs[1], fracs[2], train_loss, val_acc)
        )

    metrics = RunMetrics(best_val_acc=best_val, test_acc=best_test, best_epoch=best_epoch)
    return best_params, trace, metrics
