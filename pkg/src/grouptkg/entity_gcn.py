"""Relational entity-graph convolution and the hierarchical layer stack.

One hierarchical layer runs four stages in order: project entities onto
groups, convolve on the group graph, project back onto entities, then a
composition-based relational convolution over the snapshot's edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import CorrEncoderParams, encode_groups
from .data import Snapshot, WindowBatch, stack_snapshots
from .mapper import entities_to_groups, groups_to_entities
from .tensor import (ShapeError, Tensor, add, concat, gather_rows, matmul, mul, relu,
                     scatter_add_rows, sub, transpose)

COMPOSITIONS = ("sub", "mult")


@dataclass
class EntityConvParams:
    W_in: Tensor  # (d, d)
    W_out: Tensor  # (d, d)
    W_self: Tensor  # (d, d)
    W_ent_upd: Tensor  # (2d, d)
    b_ent_upd: Tensor  # (d,)
    W_rel: Tensor  # (d, d)

    def tensors(self) -> dict[str, Tensor]:
        return dict(vars(self))


@dataclass
class LayerParams:
    corr: CorrEncoderParams
    ent: EntityConvParams

    def tensors(self) -> dict[str, Tensor]:
        out = {f"corr.{k}": v for k, v in self.corr.tensors().items()}
        out.update({f"ent.{k}": v for k, v in self.ent.tensors().items()})
        return out


def _compose(e: Tensor, r: Tensor, composition: str) -> Tensor:
    if composition == "sub":
        return sub(e, r)
    if composition == "mult":
        return mul(e, r)
    raise ValueError(f"unknown composition operator {composition!r}")


def comp_aggregate(snapshot: Snapshot, E: Tensor, R: Tensor, params: EntityConvParams,
                   composition: str = "sub") -> Tensor:
    """Degree-normalized sum of self, incoming and outgoing messages.

    An edge ``(j, r, i)`` sends ``W_in^T (e_j - r)`` to ``i`` and
    ``W_out^T (e_i - r)`` to ``j``; the normalizer is ``1 / (deg + 1)``.
    """
    n_e = E.shape[0]
    if n_e != snapshot.n_entities or R.shape[0] != snapshot.n_types:
        raise ShapeError(f"comp_aggregate: E {E.shape}, R {R.shape} vs snapshot with "
                         f"{snapshot.n_entities} entities and {snapshot.n_types} types")
    out = matmul(E, params.W_self)
    if len(snapshot.edges):
        src, rel, dst = snapshot.src, snapshot.rel, snapshot.dst
        r_e = gather_rows(R, rel)
        incoming = matmul(_compose(gather_rows(E, src), r_e, composition), params.W_in)
        outgoing = matmul(_compose(gather_rows(E, dst), r_e, composition), params.W_out)
        out = add(out, scatter_add_rows(incoming, dst, n_e))
        out = add(out, scatter_add_rows(outgoing, src, n_e))
    norm = (1.0 / (snapshot.degree + 1.0)).astype(E.dtype)[:, None]
    return mul(out, Tensor(norm))


def entity_update(a: Tensor, e: Tensor, params: EntityConvParams) -> Tensor:
    if a.shape != e.shape:
        raise ShapeError(f"entity_update: shapes {a.shape} and {e.shape}")
    return relu(add(matmul(concat([a, e]), params.W_ent_upd), params.b_ent_upd))


def project_event_types(R: Tensor, params: EntityConvParams) -> Tensor:
    """Linear map ``R W_rel^T`` into the entity space, no activation."""
    if R.shape[-1] != params.W_rel.shape[1]:
        raise ShapeError(f"project_event_types: R {R.shape} vs W_rel {params.W_rel.shape}")
    return matmul(R, transpose(params.W_rel))


def hgcn_layer(snapshot: Snapshot, E: Tensor, R: Tensor, layer: LayerParams, M: Tensor | None,
               group_pathway: bool = True, composition: str = "sub",
               corr_reduce: str = "mean") -> tuple[Tensor, Tensor]:
    """One four-stage hierarchical layer; ``M`` is the effective mapping.

    A stacked snapshot (``blocks > 1``) runs all its blocks at once, with
    ``E`` holding one entity table per block.
    """
    if group_pathway:
        if M is None:
            raise ValueError("hgcn_layer: group pathway requires a mapping matrix")
        k = snapshot.blocks
        G = entities_to_groups(M, E, k)
        E_mid = groups_to_entities(M, encode_groups(G, layer.corr, k, corr_reduce), k)
    else:
        E_mid = E
    A = comp_aggregate(snapshot, E_mid, R, layer.ent, composition)
    return entity_update(A, E_mid, layer.ent), project_event_types(R, layer.ent)


def run_stack(snapshot: Snapshot, E0: Tensor, R0: Tensor, layers: list[LayerParams],
              M: Tensor | None, group_pathway: bool = True,
              composition: str = "sub", corr_reduce: str = "mean") -> tuple[Tensor, Tensor]:
    E, R = E0, R0
    for layer in layers:
        E, R = hgcn_layer(snapshot, E, R, layer, M, group_pathway, composition, corr_reduce)
    return E, R


def retention_index(activity: np.ndarray) -> np.ndarray:
    """For each step and unit, the latest step ``<= k`` at which the unit was active.

    Units never active up to step ``k`` point at step 0.
    """
    steps = np.arange(activity.shape[0])[:, None]
    marked = np.where(activity, steps, 0)
    marked[0] = 0
    return np.maximum.accumulate(marked, axis=0)


def encode_window(window: WindowBatch, E0: Tensor, R0: Tensor, layers: list[LayerParams],
                  M: Tensor | None, group_pathway: bool = True, composition: str = "sub",
                  corr_reduce: str = "mean"):
    """Per-step entity and event-type sequences over a window.

    Every step starts from the base tables ``E0``/``R0``.  Rows of entities
    (event types) with no event at a step keep their value from the previous
    step.  All window snapshots are run through the layer stack together as
    one stacked snapshot.

    Returns ``(E_seq, R_seq, entity_activity, type_activity)`` where the
    activity arrays are boolean ``(steps, n)``.
    """
    if not window.snapshots:
        raise ValueError("encode_window: empty window")
    snaps = window.snapshots
    T, n_e = len(snaps), E0.shape[0]
    stacked = stack_snapshots(snaps)
    E_all, R = run_stack(stacked, gather_rows(E0, np.tile(np.arange(n_e), T)), R0, layers, M,
                         group_pathway, composition, corr_reduce)
    # R' does not depend on the snapshot, so every step shares one table
    ent_act = np.stack([s.entity_active for s in snaps])
    type_act = np.stack([s.type_active for s in snaps])
    src = retention_index(ent_act) * n_e + np.arange(n_e)
    E_seq = [gather_rows(E_all, src[k]) for k in range(T)]
    R_seq = [R] * T
    return E_seq, R_seq, ent_act, type_act
