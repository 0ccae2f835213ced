"""Hits@k and MRR over multi-label event-type rankings.

Ranks are pessimistic: every other candidate whose score ties the true
label's score is counted ahead of it.  Averages are micro-averages over all
(sample, true label) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RankRecord:
    sample_id: int
    labels: tuple[int, ...]
    scores: np.ndarray
    filtered: bool = False
    ranks: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if not self.labels:
            raise ValueError(f"sample {self.sample_id}: empty label set")
        others = set(self.labels) if self.filtered else ()
        self.ranks = tuple(rank_of(self.scores, q, exclude=others) for q in self.labels)


def rank_of(scores, q: int, exclude=()) -> int:
    """1 + number of other candidates scoring >= ``scores[q]``.

    Candidates in ``exclude`` (other true labels, in filtered mode) are
    removed before ranking; ``q`` itself is never excluded.
    """
    scores = np.asarray(scores)
    if not 0 <= q < scores.shape[0]:
        raise IndexError(f"rank_of: type id {q} out of range for {scores.shape[0]} types")
    ahead = scores >= scores[q]
    ahead[q] = False
    for j in exclude:
        if j != q:
            ahead[j] = False
    return 1 + int(ahead.sum())


def _all_ranks(records) -> np.ndarray:
    records = list(records)
    if not records:
        raise ValueError("no rank records")
    return np.array([r for rec in records for r in rec.ranks], dtype=np.float64)


def hits_at_k(records, k: int) -> float:
    if k < 1:
        raise ValueError(f"hits_at_k: k must be >= 1, got {k}")
    return float(np.mean(_all_ranks(records) <= k))


def mrr(records) -> float:
    return float(np.mean(1.0 / _all_ranks(records)))


def make_records(P, Y, filtered: bool = False, start_id: int = 0) -> list[RankRecord]:
    """One record per row of the score matrix ``P`` with labels from multi-hot ``Y``."""
    P = np.asarray(P)
    Y = np.asarray(Y)
    return [RankRecord(start_id + i, tuple(np.flatnonzero(y).tolist()), p, filtered)
            for i, (p, y) in enumerate(zip(P, Y))]


def metrics_report(records, filtered: bool = False) -> dict:
    records = list(records)
    return {
        "mrr": mrr(records),
        "hits1": hits_at_k(records, 1),
        "hits3": hits_at_k(records, 3),
        "hits10": hits_at_k(records, 10),
        "samples": len(records),
        "labels": sum(len(r.labels) for r in records),
        "filtered": filtered,
    }


def format_report(report: dict) -> str:
    mode = "filtered" if report["filtered"] else "raw"
    return (f"MRR {100 * report['mrr']:.2f}  Hits@1 {100 * report['hits1']:.2f}  "
            f"Hits@3 {100 * report['hits3']:.2f}  Hits@10 {100 * report['hits10']:.2f}  "
            f"({report['samples']} samples, {report['labels']} labels, {mode})")


def write_report(path: str, report: dict) -> None:
    """Machine-readable ``key=value`` lines."""
    with open(path, "w", encoding="utf-8") as f:
        for key in ("mrr", "hits1", "hits3", "hits10", "samples", "labels", "filtered"):
            value = report[key]
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, float):
                value = repr(value)
            f.write(f"{key}={value}\n")


def read_report(path: str) -> dict:
    out: dict = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            key, _, value = line.strip().partition("=")
            if not key:
                continue
            if value in ("true", "false"):
                out[key] = value == "true"
            elif key in ("samples", "labels"):
                out[key] = int(value)
            else:
                out[key] = float(value)
    return out
