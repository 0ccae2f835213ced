"""Training loop with early stopping, and ranking evaluation."""

from __future__ import annotations

import logging

import numpy as np

from .checkpoint import Checkpoint
from .config import Config
from .data import Dataset, make_window
from .decoder import bce_loss
from .metrics import make_records, metrics_report
from .model import Model
from .optim import Adam
from .tensor import NonFiniteError, Tape, backward, no_grad

log = logging.getLogger(__name__)


class EarlyStopping:
    """Stop once the monitored loss has not decreased for ``patience`` epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record one epoch; returns True if this epoch is the new best."""
        if value < self.best:
            self.best, self.best_epoch, self.bad_epochs = value, epoch, 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def target_timesteps(dataset: Dataset, split: str) -> list[int]:
    return [t for t in dataset.timesteps(split) if t >= 1]


def evaluate_split(model: Model, dataset: Dataset, split: str, filtered: bool = False):
    """Mean loss and rank records over every target timestep of ``split``."""
    if split not in ("train", "valid", "test"):
        raise ValueError(f"unknown split {split!r}")
    total_loss, n_samples, records = 0.0, 0, []
    with no_grad():
        for t in target_timesteps(dataset, split):
            window = make_window(dataset, t, model.config.window, split=split)
            if not len(window.pairs):
                continue
            P = model.score(window)
            total_loss += float(bce_loss(P, window.labels).data) * len(window.pairs)
            n_samples += len(window.pairs)
            records += make_records(P.data, window.labels, filtered, start_id=len(records))
    if not n_samples:
        raise ValueError(f"split {split!r} has no evaluable samples")
    return total_loss / n_samples, records


def evaluate(model_or_ckpt, dataset: Dataset, split: str = "test", filtered: bool | None = None) -> dict:
    """MRR and Hits@{1,3,10} report for ``split``."""
    model = model_or_ckpt.to_model() if isinstance(model_or_ckpt, Checkpoint) else model_or_ckpt
    if filtered is None:
        filtered = model.config.filtered_eval
    loss, records = evaluate_split(model, dataset, split, filtered)
    report = metrics_report(records, filtered)
    report["loss"] = loss
    return report


def train_epoch(model: Model, opt: Adam, dataset: Dataset, epoch: int = 0) -> float:
    cfg = model.config
    losses = []
    for t in target_timesteps(dataset, "train"):
        window = make_window(dataset, t, cfg.window, split="train")
        for b, start in enumerate(range(0, len(window.pairs), cfg.batch_size)):
            rows = slice(start, start + cfg.batch_size)
            try:
                with Tape() as tape:
                    loss = bce_loss(model.score(window, window.pairs[rows]), window.labels[rows])
            except NonFiniteError as exc:
                raise RuntimeError(f"non-finite value in epoch {epoch}, timestep {t}, "
                                   f"batch {b}: {exc}") from exc
            opt.step(backward(tape, loss, opt.params))
            losses.append(float(loss.data))
    return float(np.mean(losses))


def train(config: Config, dataset: Dataset, callback=None) -> Checkpoint:
    """Fit a model; returns the checkpoint with the lowest validation loss.

    ``callback(epoch, record)`` is called after every epoch with the
    history entry (train loss, validation loss and MRR).
    """
    if not target_timesteps(dataset, "train") or not len(dataset.valid):
        raise ValueError("train: training and validation splits must be non-empty")
    model = Model(config, dataset.vocab.n_entities, dataset.vocab.n_types)
    opt = Adam(model.param_groups())
    stopper = EarlyStopping(config.patience)
    history: list[dict] = []
    best = None
    for epoch in range(1, config.max_epochs + 1):
        train_loss = train_epoch(model, opt, dataset, epoch)
        val_loss, records = evaluate_split(model, dataset, "valid", config.filtered_eval)
        rec = {"epoch": epoch, "train_loss": train_loss, "valid_loss": val_loss,
               "valid_mrr": metrics_report(records)["mrr"]}
        history.append(rec)
        log.info("epoch %d  train loss %.5f  valid loss %.5f  valid MRR %.4f",
                 epoch, train_loss, val_loss, rec["valid_mrr"])
        if callback is not None:
            callback(epoch, rec)
        if stopper.update(epoch, val_loss):
            best = Checkpoint.from_model(model, adam=opt.state_arrays(), best_val_loss=val_loss,
                                         epoch=epoch)
        if stopper.should_stop:
            log.info("early stop after epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break
    best.history = history
    return best
