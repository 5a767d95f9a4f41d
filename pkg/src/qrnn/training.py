"""Loss, Adam, the copy-task training loop, and the gradient-check harness.

Training is deterministic: the config seed fully determines weight init
(stream 0) and the batch drawn at each epoch (stream 1 keyed by the epoch
number), so a run can be resumed from a checkpoint and reproduce the
uninterrupted run bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autograd import (DivergenceError, Parameter, Tensor, backward,
                       softmax_cross_entropy, zero_grad)
from .copy_task import (CopyBatch, CopyTaskSpec, CopyTaskModel, accuracies,
                        build_copy_model, flatten_targets, generate_batch)

__all__ = [
    "AnnealConfig",
    "TrainConfig",
    "MetricsRecord",
    "Adam",
    "cross_entropy",
    "TrainResult",
    "train_copy_task",
    "run_training",
    "snapshot_state",
    "restore_state",
    "GradCheckReport",
    "analytic_gradients",
    "numeric_gradients",
    "compare_gradients",
    "grad_check",
]

_INIT_STREAM = 0
_DATA_STREAM = 1


@dataclass
class AnnealConfig:
    """Halve the learning rate after `patience` epochs without a better loss."""

    halving_factor: float = 0.5
    patience: int = 50


@dataclass
class TrainConfig:
    learning_rate: float = 5e-3
    epochs: int = 2000
    batch_size: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    anneal: AnnealConfig | None = None
    grad_clip: float | None = None
    early_stop_accuracy: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class MetricsRecord:
    epoch: int
    loss: float
    accuracy_recall: float
    accuracy_full: float


def cross_entropy(logits, targets) -> Tensor:
    """Mean cross-entropy per timestep over stacked (rows, classes) logits."""
    return softmax_cross_entropy(logits, targets)


class Adam:
    """Adam with bias correction; moments kept per parameter tensor."""

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise RuntimeError("adam step before any gradients were populated")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)

    def zero_grad(self) -> None:
        zero_grad(self.params)


@dataclass
class TrainResult:
    records: list[MetricsRecord]
    model: CopyTaskModel
    optimizer: Adam
    config: TrainConfig
    anneal_state: dict = field(default_factory=dict)


def snapshot_state(model, optimizer: Adam | None = None) -> dict:
    """Copies of all weights (and optimizer moments) for later restore."""
    snap = {"params": {name: p.data.copy() for name, p in model.parameters()}}
    if optimizer is not None:
        snap["adam_m"] = [m.copy() for m in optimizer.m]
        snap["adam_v"] = [v.copy() for v in optimizer.v]
        snap["adam_t"] = optimizer.step_count
        snap["lr"] = optimizer.lr
    return snap


def restore_state(model, optimizer: Adam | None, snap: dict) -> None:
    for name, p in model.parameters():
        np.copyto(p.data, snap["params"][name])
    if optimizer is not None and "adam_m" in snap:
        for m, saved in zip(optimizer.m, snap["adam_m"]):
            np.copyto(m, saved)
        for v, saved in zip(optimizer.v, snap["adam_v"]):
            np.copyto(v, saved)
        optimizer.step_count = snap["adam_t"]
        optimizer.lr = snap["lr"]


def _grad_norm(params) -> float:
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad * p.grad))
    return math.sqrt(total)


def run_training(model: CopyTaskModel, optimizer: Adam, spec: CopyTaskSpec,
                 cfg: TrainConfig, start_epoch: int = 0,
                 epochs: int | None = None,
                 anneal_state: dict | None = None,
                 on_epoch=None) -> list[MetricsRecord]:
    """One optimizer step per epoch on a freshly sampled batch.

    Epoch numbering is 1-based and continues from ``start_epoch`` so a
    resumed run draws the same batches as an uninterrupted one.  Raises
    DivergenceError (carrying the records so far and the last finite
    snapshot) if the loss or the updated weights stop being finite.
    """
    if epochs is None:
        epochs = cfg.epochs
    params = [p for _, p in model.parameters()]
    state = anneal_state if anneal_state is not None else {}
    records: list[MetricsRecord] = []
    last_good = snapshot_state(model, optimizer)
    for epoch in range(start_epoch + 1, start_epoch + epochs + 1):
        rng = np.random.default_rng([cfg.seed, _DATA_STREAM, epoch])
        batch = generate_batch(spec, cfg.batch_size, rng)
        loss_t, logits = model.loss(batch)
        loss = float(loss_t.data)
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}",
                                  records=records, snapshot=last_good)
        recall, full = accuracies(logits.data, flatten_targets(batch.targets),
                                  spec, cfg.batch_size)
        optimizer.zero_grad()
        backward(loss_t)
        if cfg.grad_clip is not None:
            gnorm = _grad_norm(params)
            if gnorm > cfg.grad_clip:
                factor = cfg.grad_clip / gnorm
                for p in params:
                    p.grad *= factor
        optimizer.step()
        records.append(MetricsRecord(epoch=epoch, loss=loss,
                                     accuracy_recall=recall, accuracy_full=full))
        if on_epoch is not None:
            on_epoch(records[-1])
        finite = all(np.all(np.isfinite(p.data)) for p in params)
        if not finite:
            raise DivergenceError(f"non-finite weights after epoch {epoch}",
                                  records=records, snapshot=last_good)
        last_good = snapshot_state(model, optimizer)
        if cfg.anneal is not None:
            best = state.get("best_loss")
            if best is None or loss < best:
                state["best_loss"] = loss
                state["bad_epochs"] = 0
            else:
                state["bad_epochs"] = state.get("bad_epochs", 0) + 1
                if state["bad_epochs"] >= cfg.anneal.patience:
                    optimizer.lr *= cfg.anneal.halving_factor
                    state["bad_epochs"] = 0
        if (cfg.early_stop_accuracy is not None
                and recall >= cfg.early_stop_accuracy):
            break
    return records


def train_copy_task(kind: str, spec: CopyTaskSpec, cfg: TrainConfig,
                    hidden: int | None = None, on_epoch=None) -> TrainResult:
    """Build a fresh model from the config seed and train it."""
    rng = np.random.default_rng([cfg.seed, _INIT_STREAM])
    model = build_copy_model(kind, spec, hidden=hidden, rng=rng)
    optimizer = Adam([p for _, p in model.parameters()], lr=cfg.learning_rate,
                     beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)
    anneal_state: dict = {}
    records = run_training(model, optimizer, spec, cfg,
                           anneal_state=anneal_state, on_epoch=on_epoch)
    return TrainResult(records=records, model=model, optimizer=optimizer,
                       config=cfg, anneal_state=anneal_state)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    per_param: list[tuple[str, float]]
    max_rel_error: float
    worst_param: str

    def format_table(self) -> str:
        width = max(len(name) for name, _ in self.per_param)
        lines = [f"{name:<{width}}  {err:.3e}" for name, err in self.per_param]
        lines.append(f"max relative error: {self.max_rel_error:.3e} ({self.worst_param})")
        return "\n".join(lines)


def analytic_gradients(named_params, loss_fn) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of loss_fn() for each named parameter."""
    named_params = list(named_params)
    zero_grad([p for _, p in named_params])
    loss = loss_fn()
    backward(loss)
    return {name: p.grad.copy() for name, p in named_params}


def numeric_gradients(named_params, loss_fn, h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of loss_fn() per scalar parameter."""
    out = {}
    for name, p in named_params:
        flat = p.data.reshape(-1)
        grad = np.empty_like(flat)
        for idx in range(flat.size):
            saved = flat[idx]
            flat[idx] = saved + h
            f_plus = float(loss_fn().data)
            flat[idx] = saved - h
            f_minus = float(loss_fn().data)
            flat[idx] = saved
            grad[idx] = (f_plus - f_minus) / (2.0 * h)
        out[name] = grad.reshape(p.data.shape)
    return out


def compare_gradients(analytic: dict, numeric: dict,
                      floor: float = 1e-12) -> GradCheckReport:
    """Per-tensor max of |a - n| / max(|a|, |n|, floor)."""
    rows = []
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        rel = np.abs(a - n) / denom
        rows.append((name, float(rel.max()) if rel.size else 0.0))
    worst_name, worst = max(rows, key=lambda r: r[1])
    return GradCheckReport(per_param=rows, max_rel_error=worst,
                           worst_param=worst_name)


def grad_check(named_params, loss_fn, h: float = 1e-5) -> GradCheckReport:
    named_params = list(named_params)
    analytic = analytic_gradients(named_params, loss_fn)
    numeric = numeric_gradients(named_params, loss_fn, h=h)
    return compare_gradients(analytic, numeric)
