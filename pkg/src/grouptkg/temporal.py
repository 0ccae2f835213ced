"""Decay-aware GRU over per-timestep representation sequences.

The previous hidden state is shrunk by ``gamma = sigmoid(-max(0, W * dt + b))``
before the usual GRU update, where ``dt`` is the number of timesteps since
the unit's last event.  All units of one kind (entities, or event types)
share one parameter set and are processed together as rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (ShapeError, Tensor, add, as_tensor, concat, gather_rows, matmul, mul, relu, reshape,
                     scale, sigmoid, sub, tanh)


@dataclass
class DecayParams:
    W_gamma: Tensor  # (1,)
    b_gamma: Tensor  # (1,)

    def tensors(self) -> dict[str, Tensor]:
        return dict(vars(self))


@dataclass
class GruParams:
    W_reset: Tensor  # (2d, d)
    b_reset: Tensor
    W_update: Tensor
    b_update: Tensor
    W_new: Tensor
    b_new: Tensor

    def tensors(self) -> dict[str, Tensor]:
        return dict(vars(self))


class LastActiveTracker:
    """Timestep of each unit's most recent event, starting at the first window step."""

    def __init__(self, n_units: int, t0: int):
        self.last = np.full(n_units, t0, dtype=np.int64)

    def elapsed(self, t: int) -> np.ndarray:
        return t - self.last

    def update(self, t: int, active: np.ndarray) -> None:
        self.last[np.asarray(active, dtype=bool)] = t


def decay_rate(delta_t, params: DecayParams) -> Tensor:
    """Decay factor in (0, 0.5]; ``delta_t`` is a constant (no gradient)."""
    dt = np.asarray(delta_t, dtype=params.W_gamma.dtype)
    if np.any(dt < 0):
        raise ValueError("decay_rate: elapsed time must be non-negative")
    if dt.ndim == 1:
        dt = dt[:, None]
    arg = add(mul(Tensor(dt), params.W_gamma), params.b_gamma)
    return sigmoid(scale(relu(arg), -1.0))


def decayed_gru_step(x: Tensor, h_prev: Tensor, gamma, params: GruParams) -> Tensor:
    """One GRU update on the decayed state ``gamma * h_prev``.

    ``x`` and ``h_prev`` are vectors or ``(n, d)`` row batches; ``gamma`` is
    a scalar or an ``(n, 1)`` column.
    """
    if x.shape != h_prev.shape:
        raise ShapeError(f"decayed_gru_step: input {x.shape} vs state {h_prev.shape}")
    h_hat = mul(as_tensor(gamma, x.dtype), h_prev)
    xh = concat([x, h_hat])
    r = sigmoid(add(matmul(xh, params.W_reset), params.b_reset))
    z = sigmoid(add(matmul(xh, params.W_update), params.b_update))
    h_new = tanh(add(matmul(concat([x, mul(r, h_hat)]), params.W_new), params.b_new))
    return add(mul(z, h_hat), mul(sub(1.0, z), h_new))


def encode_sequence(X_seq: list[Tensor], activity: np.ndarray, decay: DecayParams,
                    gru: GruParams, timesteps=None) -> Tensor:
    """Final hidden state after running the decayed GRU over ``X_seq``.

    ``activity`` is a boolean ``(steps, n_units)`` array; ``timesteps`` gives
    the absolute timestep of each step (default ``0, 1, ...``).
    """
    if not X_seq:
        raise ValueError("encode_sequence: empty sequence")
    single = X_seq[0].ndim == 1
    if single:
        X_seq = [reshape(x, (1, x.shape[0])) for x in X_seq]
    steps = list(range(len(X_seq))) if timesteps is None else list(timesteps)
    activity = np.asarray(activity, dtype=bool).reshape(len(X_seq), -1)
    n = activity.shape[1]
    tracker = LastActiveTracker(n, steps[0])
    elapsed = []
    for t, act in zip(steps, activity):
        elapsed.append(tracker.elapsed(t))
        tracker.update(t, act)
    # decay factors for every step at once, then one row block per step
    gammas = decay_rate(np.concatenate(elapsed), decay)
    h = Tensor(np.zeros(X_seq[0].shape, dtype=X_seq[0].dtype))
    for k, x in enumerate(X_seq):
        gamma = gammas if len(X_seq) == 1 else gather_rows(gammas, np.arange(k * n, (k + 1) * n))
        h = decayed_gru_step(x, h, gamma, gru)
    return reshape(h, (h.shape[1],)) if single else h
