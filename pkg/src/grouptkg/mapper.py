"""Soft entity-to-group assignment and the two projections it induces."""

from __future__ import annotations

from dataclasses import dataclass

from .tensor import ShapeError, Tensor, matmul, permute, reshape, sparsemax_rows, transpose


@dataclass
class MappingMatrix:
    """Unconstrained logits whose row-wise sparsemax is the assignment.

    One instance is shared by every timestep and every hierarchical layer.
    """

    raw: Tensor

    @property
    def n_entities(self) -> int:
        return self.raw.shape[0]

    @property
    def n_groups(self) -> int:
        return self.raw.shape[1]

    def effective(self) -> Tensor:
        return effective_mapping(self.raw)


def effective_mapping(raw: Tensor) -> Tensor:
    """Rows on the probability simplex, with sub-threshold entries exactly 0."""
    return sparsemax_rows(raw)


def _blockwise(A: Tensor, X: Tensor, blocks: int) -> Tensor:
    # A @ X_k for each of ``blocks`` row blocks of X, stacked back into rows
    n, d = X.shape[0] // blocks, X.shape[1]
    cols = reshape(permute(reshape(X, (blocks, n, d)), (1, 0, 2)), (n, blocks * d))
    out = matmul(A, cols)
    return reshape(permute(reshape(out, (A.shape[0], blocks, d)), (1, 0, 2)),
                   (blocks * A.shape[0], d))


def entities_to_groups(M: Tensor, E: Tensor, blocks: int = 1) -> Tensor:
    """Group representations ``G = M^T E``: each group is a weighted sum of entities.

    With ``blocks > 1``, ``E`` holds that many stacked entity tables and the
    result stacks the corresponding group tables.
    """
    if M.shape[0] * blocks != E.shape[0]:
        raise ShapeError(f"entities_to_groups: mapping {M.shape} vs entities {E.shape}")
    if blocks == 1:
        return matmul(transpose(M), E)
    return _blockwise(transpose(M), E, blocks)


def groups_to_entities(M: Tensor, G: Tensor, blocks: int = 1) -> Tensor:
    """Back-projection ``E = M G``; each entity row is a convex mix of group rows."""
    if M.shape[1] * blocks != G.shape[0]:
        raise ShapeError(f"groups_to_entities: mapping {M.shape} vs groups {G.shape}")
    if blocks == 1:
        return matmul(M, G)
    return _blockwise(M, G, blocks)
