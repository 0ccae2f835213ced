"""Conv-TransE event-type scoring and the multi-label loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (ShapeError, Tensor, add, bce, concat, conv1d, matmul, relu, reshape,
                     sigmoid, transpose)


@dataclass
class DecoderParams:
    kernels: Tensor  # (C, 2, K)
    conv_bias: Tensor  # (C,)
    W_fc: Tensor  # (C * d, d)
    b_fc: Tensor  # (d,)

    def tensors(self) -> dict[str, Tensor]:
        return dict(vars(self))


def conv_transe_features(h_s: Tensor, h_o: Tensor, params: DecoderParams) -> Tensor:
    """Stack subject/object rows, convolve, flatten and project back to ``d``."""
    if h_s.shape != h_o.shape:
        raise ShapeError(f"conv_transe_score: subject {h_s.shape} vs object {h_o.shape}")
    single = h_s.ndim == 1
    d = h_s.shape[-1]
    n = 1 if single else h_s.shape[0]
    stacked = reshape(concat([h_s, h_o]), (n, 2, d))
    maps = relu(conv1d(stacked, params.kernels, params.conv_bias, same_padding=True))
    flat = reshape(maps, (n, maps.shape[1] * d))
    v = relu(add(matmul(flat, params.W_fc), params.b_fc))
    return reshape(v, (d,)) if single else v


def conv_transe_score(h_s: Tensor, h_o: Tensor, L_r: Tensor, params: DecoderParams) -> Tensor:
    """Probability of every event type for each ``(s, o)`` pair.

    ``h_s``/``h_o`` are vectors (result ``(N_r,)``) or ``(B, d)`` batches
    (result ``(B, N_r)``).
    """
    if L_r.shape[-1] != h_s.shape[-1]:
        raise ShapeError(f"conv_transe_score: type matrix {L_r.shape} vs entity {h_s.shape}")
    v = conv_transe_features(h_s, h_o, params)
    return sigmoid(matmul(v, transpose(L_r)))


def bce_loss(P: Tensor, Y) -> Tensor:
    """Mean over samples of the per-type binary cross-entropy summed over types.

    Probabilities are clamped to ``[1e-12, 1 - 1e-12]`` before the logs.
    """
    Y = np.asarray(Y)
    if not np.isin(Y, (0, 1)).all():
        raise ValueError("bce_loss: labels must be 0/1")
    return bce(P, Y)
