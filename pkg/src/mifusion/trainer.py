"""Two-stage training loop.

Each epoch first fits the variational predictors by likelihood maximization
over a (configurable) subset of the training data, then jointly trains every
other parameter group on the MI-augmented main loss with global-norm
gradient clipping. The predictors are frozen in stage 2 and everything else
is frozen in stage 1; checkpoint selection keeps the minimum-validation-MAE
epoch with patience-based early stopping.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .ba_bound import i_ba, l_ba, lld_loss
from .cpc import cosine_matrix, l_cpc, nce_loss_from_cosines
from .errors import ConfigError, EmptyAfterExclusion, InsufficientSamples, NonFiniteLoss, ZeroVariance
from .fusion import main_loss, task_loss
from .gmm import HistoryMemory, entropy_train_batch, entropy_train_pooled
from .metrics import compute_metrics
from .numeric import blas_single_thread, spawn_rng

TRACE_INTERVAL = 20  # steps averaged per trace row


@dataclass
class TrainConfig:
    batch_size: int = 32
    eta_lld: float = 5e-3
    eta_main: float = 1e-3
    alpha: float = 0.3
    beta: float = 0.1
    memory_size_batches: int = 1
    grad_clip: float = 5.0
    epochs: int = 40
    patience: int = 5
    seed: int = 0
    stage1_fraction: float = 1.0
    strict_entropy: bool = False  # raise instead of skipping the entropy term on a cold memory
    pooled_entropy: bool = False  # single Gaussian instead of the polarity split

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.eta_lld <= 0 or self.eta_main <= 0:
            raise ConfigError("learning rates must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be non-negative")
        if self.memory_size_batches < 0:
            raise ConfigError("memory_size_batches must be >= 0")
        if self.grad_clip <= 0:
            raise ConfigError("grad_clip must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")
        if not 0.0 < self.stage1_fraction <= 1.0:
            raise ConfigError("stage1_fraction must lie in (0, 1]")


@dataclass
class LossBundle:
    """Scalar losses and subterms of one stage-2 step."""

    step: int
    task: float
    ba: float
    cpc: float
    main: float
    i_ba: dict
    l_n: dict
    entropy: dict
    warm_up: bool


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected adaptive-moment update, applied in place.

    ``params`` and ``grads`` are dicts of arrays sharing keys; separate
    parameter groups carry separate states and learning rates.
    """
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


def clip_gradients(grads, max_norm: float):
    """Scale all gradients by max_norm/g when the global L2 norm g exceeds it."""
    arrays = list(grads.values()) if isinstance(grads, dict) else list(grads)
    total = math.sqrt(sum(float((g * g).sum()) for g in arrays))
    if total > max_norm:
        scale = max_norm / total
        for g in arrays:
            g *= scale
    return grads


def _batch_indices(n, batch_size, rng, limit=None):
    order = rng.permutation(n)
    if limit is not None:
        order = order[:limit]
    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def stage1_epoch(model, data, cfg: TrainConfig, rng, q_state: AdamState, lld_log) -> float:
    """One likelihood-maximization pass; only predictor parameters move.

    Encoder outputs are treated as constants here, so no other group can
    drift. Visits ceil(stage1_fraction * N) samples, reshuffled per epoch.
    """
    n = len(data)
    limit = math.ceil(cfg.stage1_fraction * n)
    batches = _batch_indices(n, cfg.batch_size, rng, limit)
    q_params = model.q_params()
    arrays = {name: t.data for name, t in q_params.items()}
    total = 0.0
    for idx in batches:
        samples = [data[i] for i in idx]
        emb = model.encode(samples, detach=True)
        loss = lld_loss(model.q_preds, emb)
        value = loss.item()
        if not math.isfinite(value):
            raise NonFiniteLoss(f"stage-1 likelihood loss is {value} at step {len(lld_log)}")
        if q_params:
            model.zero_grads()
            loss.backward()
            grads = {name: t.grad for name, t in q_params.items()}
            adam_step(arrays, grads, q_state, cfg.eta_lld)
        lld_log.append(value)
        total += value
    return total / max(len(batches), 1)


def stage2_epoch(model, data, memories, cfg: TrainConfig, rng, main_state: AdamState,
                 step_rows, bundles, start_step: int) -> int:
    """One joint-training pass; every group except the predictors moves.

    Per batch: encode, estimate the per-class Gaussians from history plus
    the current batch, push the batch into the FIFO memories, then build
    the bound losses, fuse, predict, clip and update.
    """
    batches = _batch_indices(len(data), cfg.batch_size, rng)
    main_params = model.main_params()
    arrays = {name: t.data for name, t in main_params.items()}
    targets = sorted({pair[1] for pair in model.cfg.ba_pairs})
    step = start_step
    for idx in batches:
        samples = [data[i] for i in idx]
        labels = np.array([s.label for s in samples], dtype=np.float64)
        positive = labels >= 0.0
        emb = model.encode(samples)

        entropies = {}
        warm = False
        for m in targets:
            mem = memories[m]
            d = emb[m].data.shape[1]
            try:
                if cfg.pooled_entropy:
                    ent = entropy_train_batch_pooled(emb[m], mem, d)
                else:
                    hist_pos, hist_neg = mem.class_rows(d)
                    ent = entropy_train_batch(emb[m], positive, hist_pos, hist_neg)
            except InsufficientSamples:
                if cfg.strict_entropy or mem.full:
                    raise
                ent = Tensor(0.0)  # cold memory: skip the term until it fills
                warm = True
            entropies[m] = ent
        for m in ("v", "a"):
            memories[m].update(emb[m].data, positive)

        estimates = {}
        for pair in model.cfg.ba_pairs:
            estimates[pair] = i_ba(
                model.q_preds[pair], emb[pair[0]], emb[pair[1]], entropies[pair[1]], pair=pair
            )
        ba = l_ba(*(est.value for est in estimates.values()))

        z = model.fusion.fuse(emb["t"], emb["v"], emb["a"])
        preds = model.head.predict(z)
        tloss = task_loss(preds, labels)

        l_ns = {}
        for m in model.cfg.cpc_modalities:
            l_ns[m] = nce_loss_from_cosines(cosine_matrix(model.cpc_preds[m], z, emb[m]))
        cpc_total = l_cpc(l_ns.get("t"), l_ns.get("v"), l_ns.get("a"))

        total = main_loss(tloss, cpc_total, ba, cfg.alpha, cfg.beta)
        values = (tloss.item(), ba.item(), cpc_total.item(), total.item())
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteLoss(f"stage-2 losses (task, ba, cpc, main) = {values} at step {step}")

        model.zero_grads()
        total.backward()
        grads = {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in main_params.items()
        }
        clip_gradients(grads, cfg.grad_clip)
        adam_step(arrays, grads, main_state, cfg.eta_main)

        step_rows.append((values[0], values[1], values[2]))
        bundles.append(
            LossBundle(
                step=step, task=values[0], ba=values[1], cpc=values[2], main=values[3],
                i_ba={p: est.value.item() for p, est in estimates.items()},
                l_n={m: t.item() for m, t in l_ns.items()},
                entropy={m: e.item() for m, e in entropies.items()},
                warm_up=warm,
            )
        )
        step += 1
    return step


def entropy_train_batch_pooled(batch_tensor, mem: HistoryMemory, d: int):
    return entropy_train_pooled(batch_tensor, mem.all_rows(d))


@dataclass(frozen=True)
class TraceRow:
    interval: int
    task: float
    ba: float
    cpc: float
    lld: float


def build_trace(stage2_rows, lld_rows, interval: int = TRACE_INTERVAL):
    """Average the per-step logs over consecutive windows of ``interval`` steps.

    The final partial window is averaged over its actual step count; a
    column with no steps in a window is nan.
    """
    n = max(len(stage2_rows), len(lld_rows))
    rows = []

    def col(vals):
        return float(np.mean(vals)) if len(vals) else float("nan")

    for k in range(math.ceil(n / interval)):
        lo, hi = k * interval, (k + 1) * interval
        chunk2 = stage2_rows[lo:hi]
        rows.append(
            TraceRow(
                interval=k,
                task=col([r[0] for r in chunk2]),
                ba=col([r[1] for r in chunk2]),
                cpc=col([r[2] for r in chunk2]),
                lld=col(lld_rows[lo:hi]),
            )
        )
    return rows


def _fmt(x) -> str:
    return repr(float(x))


def trace_to_csv(rows) -> str:
    lines = ["interval,task,ba,cpc,lld"]
    for r in rows:
        lines.append(f"{r.interval},{_fmt(r.task)},{_fmt(r.ba)},{_fmt(r.cpc)},{_fmt(r.lld)}")
    return "\n".join(lines) + "\n"


def steps_to_csv(stage2_rows, lld_rows) -> str:
    """Per-step log; stage-1 rows carry only lld, stage-2 rows the rest."""
    lines = ["stage,index,task,ba,cpc,lld"]
    for i, v in enumerate(lld_rows):
        lines.append(f"1,{i},nan,nan,nan,{_fmt(v)}")
    for i, (t, b, c) in enumerate(stage2_rows):
        lines.append(f"2,{i},{_fmt(t)},{_fmt(b)},{_fmt(c)},nan")
    return "\n".join(lines) + "\n"


def steps_from_csv(text: str):
    """Inverse of steps_to_csv; returns (stage2_rows, lld_rows)."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "stage,index,task,ba,cpc,lld":
        raise ValueError("unrecognized per-step log header")
    stage2, lld = [], []
    for ln in lines[1:]:
        stage, _, task, ba, cpc, l = ln.split(",")
        if stage == "1":
            lld.append(float(l))
        else:
            stage2.append((float(task), float(ba), float(cpc)))
    return stage2, lld


@dataclass
class TrainResult:
    best_params: dict
    best_epoch: int
    best_val_mae: float
    epochs_run: int
    trace: list
    stage2_rows: list
    lld_rows: list
    bundles: list
    epoch_rows: list


METRIC_KEYS = ("mae", "corr", "acc7", "acc2_nonneg", "acc2_pos", "f1_nonneg", "f1_pos")


def _val_metrics(preds, labels):
    try:
        report = compute_metrics(preds, labels)
        return {k: getattr(report, k) for k in METRIC_KEYS}
    except (ZeroVariance, EmptyAfterExclusion):
        out = {k: float("nan") for k in METRIC_KEYS}
        out["mae"] = float(np.mean(np.abs(np.asarray(preds) - np.asarray(labels))))
        return out


def train(model, train_data, val_data, cfg: TrainConfig) -> TrainResult:
    """Alternate the two stages per epoch and keep the best-validation model."""
    if not train_data or not val_data:
        raise ConfigError("train and validation splits must be nonempty")
    rng = spawn_rng(cfg.seed, 1)
    capacity = cfg.memory_size_batches * cfg.batch_size
    memories = {m: HistoryMemory(capacity) for m in ("v", "a")}
    q_state, main_state = AdamState(), AdamState()
    lld_rows, stage2_rows, bundles, epoch_rows = [], [], [], []
    val_labels = np.array([s.label for s in val_data], dtype=np.float64)

    best_params = model.param_arrays()
    best_val = math.inf
    best_epoch = -1
    since_improve = 0
    step = 0
    epochs_run = 0
    with blas_single_thread():
        for epoch in range(cfg.epochs):
            mean_lld = stage1_epoch(model, train_data, cfg, rng, q_state, lld_rows)
            step = stage2_epoch(
                model, train_data, memories, cfg, rng, main_state, stage2_rows, bundles, step
            )
            val_preds = model.predict(val_data)
            row = {"epoch": epoch, "mean_lld": mean_lld}
            row.update(_val_metrics(val_preds, val_labels))
            epoch_rows.append(row)
            epochs_run = epoch + 1
            if row["mae"] < best_val:
                best_val = row["mae"]
                best_epoch = epoch
                best_params = model.param_arrays()
                since_improve = 0
            else:
                since_improve += 1
                if since_improve > cfg.patience:
                    break
    trace = build_trace(stage2_rows, lld_rows)
    return TrainResult(
        best_params=best_params,
        best_epoch=best_epoch,
        best_val_mae=best_val,
        epochs_run=epochs_run,
        trace=trace,
        stage2_rows=stage2_rows,
        lld_rows=lld_rows,
        bundles=bundles,
        epoch_rows=epoch_rows,
    )
