"""Implicit correlations on the fully connected entity-group graph.

For every ordered pair of distinct groups ``(i, j)`` a correlation vector
``c_ij`` is produced from the two group representations, its intensity
``q_ij`` is scored by a one-channel 1-D convolution, and each group pools
the intensity-weighted correlations of its outgoing pairs before an
update layer mixes the pooled vector with the group's own representation.

Pooling is a mean over the ``n - 1`` partners by default. A plain sum grows
with the group count and compounds across stacked layers, which saturates
the recurrent units downstream; ``reduce="sum"`` is kept for comparison.

All pairs are evaluated as one batch; parameters are shared across pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (ShapeError, Tensor, add, concat, conv1d, gather_rows, matmul, mean,
                     mul, relu, reshape, scale, scatter_add_rows, sigmoid)

REDUCTIONS = ("mean", "sum")


@dataclass
class CorrEncoderParams:
    W_pair: Tensor  # (2d, d)
    b_pair: Tensor  # (d,)
    conv_kernel: Tensor  # (1, 1, K)
    conv_bias: Tensor  # (1,)
    W_upd: Tensor  # (2d, d)
    b_upd: Tensor  # (d,)

    def tensors(self) -> dict[str, Tensor]:
        return dict(vars(self))


def ordered_pairs(n_groups: int, blocks: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays ``(I, J)`` over all ``n * (n - 1)`` ordered pairs with ``i != j``.

    With ``blocks > 1`` the pairs are repeated inside each block of
    ``n_groups`` rows.
    """
    i, j = np.nonzero(~np.eye(n_groups, dtype=bool))
    offsets = np.repeat(np.arange(blocks) * n_groups, len(i))
    return np.tile(i, blocks) + offsets, np.tile(j, blocks) + offsets


def _affine_relu(x: Tensor, W: Tensor, b: Tensor, op: str) -> Tensor:
    if x.shape[-1] != W.shape[0]:
        raise ShapeError(f"{op}: input {x.shape} vs weight {W.shape}")
    return relu(add(matmul(x, W), b))


def pair_correlation(g_i: Tensor, g_j: Tensor, params: CorrEncoderParams) -> Tensor:
    """``ReLU(W_pair^T [g_i; g_j] + b_pair)``; accepts vectors or row batches."""
    if g_i.shape != g_j.shape:
        raise ShapeError(f"pair_correlation: shapes {g_i.shape} and {g_j.shape}")
    return _affine_relu(concat([g_i, g_j]), params.W_pair, params.b_pair, "pair_correlation")


def intensity(c: Tensor, params: CorrEncoderParams) -> Tensor:
    """Scalar intensity in (0, 1) per correlation vector.

    ``c`` of shape ``(d,)`` gives shape ``(1,)``; ``(P, d)`` gives ``(P, 1)``.
    """
    single = c.ndim == 1
    batch = reshape(c, (1 if single else c.shape[0], 1, c.shape[-1]))
    conv = conv1d(batch, params.conv_kernel, params.conv_bias, same_padding=True)  # (P, 1, d)
    q = sigmoid(mean(conv, axis=2))  # (P, 1)
    return reshape(q, (1,)) if single else q


def group_aggregate(G: Tensor, params: CorrEncoderParams, blocks: int = 1,
                    reduce: str = "mean") -> Tensor:
    """Intensity-weighted mean (or sum) of correlations over all other groups.

    ``G`` may stack ``blocks`` independent group graphs row-wise.
    """
    if reduce not in REDUCTIONS:
        raise ValueError(f"unknown reduction {reduce!r}")
    rows, d = G.shape
    n_g = rows // blocks
    if n_g < 2:
        return Tensor(np.zeros((rows, d), dtype=G.dtype))
    I, J = ordered_pairs(n_g, blocks)
    C = pair_correlation(gather_rows(G, I), gather_rows(G, J), params)
    q = intensity(C, params)
    pooled = scatter_add_rows(mul(q, C), I, rows)
    return scale(pooled, 1.0 / (n_g - 1)) if reduce == "mean" else pooled


def group_update(a: Tensor, g: Tensor, params: CorrEncoderParams) -> Tensor:
    """``ReLU(W_upd^T [a; g] + b_upd)`` for a vector or a row batch."""
    if a.shape != g.shape:
        raise ShapeError(f"group_update: shapes {a.shape} and {g.shape}")
    return _affine_relu(concat([a, g]), params.W_upd, params.b_upd, "group_update")


def encode_groups(G: Tensor, params: CorrEncoderParams, blocks: int = 1,
                  reduce: str = "mean") -> Tensor:
    return group_update(group_aggregate(G, params, blocks, reduce), G, params)
