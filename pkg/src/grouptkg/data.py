"""Quadruple datasets, per-timestep snapshots and historical windows.

Dataset directories follow the layout used by the public ICEWS/GDELT
releases::

    train.txt  valid.txt  test.txt     # "s r o t" per line, extra columns ignored
    stat.txt                           # optional, "N_e N_r ..."
    entity2id.txt  relation2id.txt     # optional, "name<TAB>id"

Raw timestamps are divided by the time granularity (24 for daily ICEWS
files stored in hours, 15 for GDELT files stored in minutes) to obtain
dense timestep indices.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import NamedTuple

import numpy as np

SPLITS = ("train", "valid", "test")


class Quadruple(NamedTuple):
    s: int
    r: int
    o: int
    t: int


@dataclass(frozen=True)
class Vocabulary:
    n_entities: int
    n_types: int
    entity_names: dict[int, str] | None = None
    type_names: dict[int, str] | None = None

    def entity_name(self, i: int) -> str:
        return (self.entity_names or {}).get(i, str(i))

    def type_name(self, i: int) -> str:
        return (self.type_names or {}).get(i, str(i))


@dataclass(frozen=True, eq=False)
class Snapshot:
    """The multi-relational directed entity graph at one timestep.

    ``edges`` is an ``(n, 3)`` array of distinct ``(s, r, o)`` rows sorted
    lexicographically.  A snapshot with ``blocks > 1`` is the disjoint union
    of several snapshots (see :func:`stack_snapshots`); entity ids are then
    offset by ``block * entities_per_block``.
    """

    t: int
    edges: np.ndarray
    n_entities: int
    n_types: int
    blocks: int = 1

    @property
    def entities_per_block(self) -> int:
        return self.n_entities // self.blocks

    @property
    def src(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def rel(self) -> np.ndarray:
        return self.edges[:, 1]

    @property
    def dst(self) -> np.ndarray:
        return self.edges[:, 2]

    @cached_property
    def degree(self) -> np.ndarray:
        """In-degree plus out-degree per entity."""
        return (np.bincount(self.src, minlength=self.n_entities)
                + np.bincount(self.dst, minlength=self.n_entities))

    @cached_property
    def entity_active(self) -> np.ndarray:
        return self.degree > 0

    @cached_property
    def type_active(self) -> np.ndarray:
        return np.bincount(self.rel, minlength=self.n_types) > 0

    @property
    def active_entities(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.entity_active).tolist())

    @cached_property
    def labels(self) -> dict[tuple[int, int], np.ndarray]:
        out: dict[tuple[int, int], np.ndarray] = {}
        for s, r, o in self.edges.tolist():
            y = out.get((s, o))
            if y is None:
                y = out[(s, o)] = np.zeros(self.n_types)
            y[r] = 1.0
        return out

    def query_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct ``(s, o)`` pairs, sorted, and their multi-hot label matrix."""
        keys = sorted(self.labels)
        pairs = np.array(keys, dtype=np.int64).reshape(-1, 2)
        y = np.array([self.labels[k] for k in keys]).reshape(-1, self.n_types)
        return pairs, y


@dataclass(frozen=True)
class WindowBatch:
    t: int
    snapshots: list[Snapshot]
    pairs: np.ndarray
    labels: np.ndarray

    @property
    def timesteps(self) -> list[int]:
        return [s.t for s in self.snapshots]


@dataclass(eq=False)
class Dataset:
    vocab: Vocabulary
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    granularity: int = 1
    name: str = ""
    snapshots: list[Snapshot] = field(init=False, repr=False)

    def __post_init__(self):
        for split in SPLITS:
            arr = np.asarray(getattr(self, split), dtype=np.int64).reshape(-1, 4)
            check_quadruples(arr, self.vocab, split)
            setattr(self, split, arr)
        check_chronology(self.train, self.valid, self.test)
        self.snapshots = build_snapshots(self.all_quadruples(), self.vocab)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)

    def all_quadruples(self) -> np.ndarray:
        return np.concatenate([self.train, self.valid, self.test])

    @property
    def t_max(self) -> int:
        return len(self.snapshots)

    def timesteps(self, split: str) -> list[int]:
        return sorted(set(self.split(split)[:, 3].tolist()))

    def split_snapshot(self, split: str, t: int) -> Snapshot:
        """Snapshot built from the events of one split only (query source)."""
        cache = self.__dict__.setdefault("_split_snaps", {})
        key = (split, t)
        if key not in cache:
            q = self.split(split)
            cache[key] = _snapshot(t, q[q[:, 3] == t][:, :3], self.vocab)
        return cache[key]


def check_quadruples(q: np.ndarray, vocab: Vocabulary, where: str = "") -> None:
    if q.size == 0:
        return
    if q.min() < 0:
        raise ValueError(f"{where}: negative id or timestep")
    if q[:, [0, 2]].max() >= vocab.n_entities:
        raise ValueError(f"{where}: entity id >= N_e = {vocab.n_entities}")
    if q[:, 1].max() >= vocab.n_types:
        raise ValueError(f"{where}: event-type id >= N_r = {vocab.n_types}")


def check_chronology(train: np.ndarray, valid: np.ndarray, test: np.ndarray) -> None:
    spans = [(name, q[:, 3]) for name, q in zip(SPLITS, (train, valid, test)) if len(q)]
    for (a, ta), (b, tb) in zip(spans, spans[1:]):
        if ta.max() > tb.min():
            raise ValueError(f"splits not chronological: max {a} timestep {ta.max()} > "
                             f"min {b} timestep {tb.min()}")


# -- parsing ---------------------------------------------------------------------


def _read_raw(path: str) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) < 4:
                raise ValueError(f"{path}:{lineno}: expected at least 4 fields, got {len(fields)}")
            try:
                row = [int(x) for x in fields[:4]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer field in {line.strip()!r}") from None
            if min(row) < 0:
                raise ValueError(f"{path}:{lineno}: negative value in {line.strip()!r}")
            rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def _read_stat(directory: str) -> tuple[int, int] | None:
    path = os.path.join(directory, "stat.txt")
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as f:
        fields = f.read().split()
    return int(fields[0]), int(fields[1])


def _read_names(path: str) -> dict[int, str] | None:
    if not os.path.exists(path):
        return None
    names = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split("\t")
            if len(parts) >= 2:
                names[int(parts[1])] = parts[0]
    return names


def _vocab_for(directory: str, quads: np.ndarray) -> Vocabulary:
    stat = _read_stat(directory)
    if stat is not None:
        n_e, n_r = stat
    else:
        n_e = int(quads[:, [0, 2]].max()) + 1 if len(quads) else 0
        n_r = int(quads[:, 1].max()) + 1 if len(quads) else 0
    return Vocabulary(n_e, n_r,
                      _read_names(os.path.join(directory, "entity2id.txt")),
                      _read_names(os.path.join(directory, "relation2id.txt")))


def parse_quadruples(path: str, granularity: int = 1) -> tuple[list[Quadruple], Vocabulary]:
    """Read one quadruple file.

    The vocabulary comes from a ``stat.txt`` next to the file when present,
    otherwise from the largest ids seen.
    """
    raw = _read_raw(path)
    raw[:, 3] //= granularity
    vocab = _vocab_for(os.path.dirname(os.path.abspath(path)), raw)
    check_quadruples(raw, vocab, path)
    return [Quadruple(*row) for row in raw.tolist()], vocab


def detect_granularity(timestamps: np.ndarray) -> int:
    nonzero = np.unique(timestamps[timestamps > 0])
    if nonzero.size == 0:
        return 1
    return int(reduce(math.gcd, nonzero.tolist()))


def load_dataset(directory: str, granularity: int | None = None) -> Dataset:
    """Load ``train/valid/test.txt`` from a directory.

    With ``granularity=None`` the quantum is the gcd of all raw timestamps,
    which recovers 24 for hour-stamped ICEWS and 15 for minute-stamped GDELT.
    """
    raws = {}
    for split in SPLITS:
        path = os.path.join(directory, f"{split}.txt")
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        raws[split] = _read_raw(path)
    if granularity is None:
        granularity = detect_granularity(np.concatenate([r[:, 3] for r in raws.values()]))
    for r in raws.values():
        r[:, 3] //= granularity
    vocab = _vocab_for(directory, np.concatenate(list(raws.values())))
    return Dataset(vocab, raws["train"], raws["valid"], raws["test"],
                   granularity=granularity, name=os.path.basename(os.path.normpath(directory)))


def write_quadruples(path: str, quads, granularity: int = 1) -> None:
    arr = np.asarray(quads, dtype=np.int64).reshape(-1, 4)
    with open(path, "w", encoding="utf-8") as f:
        for s, r, o, t in arr.tolist():
            f.write(f"{s}\t{r}\t{o}\t{t * granularity}\n")


def save_dataset(dataset: Dataset, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for split in SPLITS:
        write_quadruples(os.path.join(directory, f"{split}.txt"), dataset.split(split),
                         dataset.granularity)
    with open(os.path.join(directory, "stat.txt"), "w", encoding="utf-8") as f:
        f.write(f"{dataset.vocab.n_entities} {dataset.vocab.n_types}\n")


def dataset_stats(dataset: Dataset) -> dict[str, int]:
    return {
        "entities": dataset.vocab.n_entities,
        "relations": dataset.vocab.n_types,
        "train": len(dataset.train),
        "valid": len(dataset.valid),
        "test": len(dataset.test),
        "timesteps": dataset.t_max,
        "granularity": dataset.granularity,
    }


# -- snapshots and windows -------------------------------------------------------


def _snapshot(t: int, triples: np.ndarray, vocab: Vocabulary) -> Snapshot:
    edges = np.unique(np.asarray(triples, dtype=np.int64).reshape(-1, 3), axis=0)
    return Snapshot(t, edges, vocab.n_entities, vocab.n_types)


def stack_snapshots(snapshots: list[Snapshot]) -> Snapshot:
    """Disjoint union of snapshots over a shared entity and event-type set."""
    n_e = snapshots[0].n_entities
    parts = []
    for k, snap in enumerate(snapshots):
        e = snap.edges.copy()
        e[:, [0, 2]] += k * n_e
        parts.append(e)
    return Snapshot(snapshots[-1].t, np.concatenate(parts).reshape(-1, 3),
                    n_e * len(snapshots), snapshots[0].n_types, blocks=len(snapshots))


def build_snapshots(quads, vocab: Vocabulary) -> list[Snapshot]:
    """One snapshot per timestep from 0 to the last one seen; gaps are empty."""
    q = np.asarray(quads, dtype=np.int64).reshape(-1, 4)
    check_quadruples(q, vocab, "build_snapshots")
    if len(q) == 0:
        return []
    q = q[np.argsort(q[:, 3], kind="stable")]
    n_steps = int(q[:, 3].max()) + 1
    bounds = np.searchsorted(q[:, 3], np.arange(n_steps + 1))
    return [_snapshot(t, q[bounds[t]:bounds[t + 1], :3], vocab) for t in range(n_steps)]


def make_window(dataset: Dataset, t: int, w: int, split: str | None = None) -> WindowBatch:
    """History snapshots ``[max(0, t - w), t - 1]`` and the queries at ``t``.

    Queries come from the combined snapshot at ``t`` unless ``split`` names
    the split whose events should be queried.
    """
    if t < 1:
        raise ValueError(f"make_window: target timestep {t} has no history")
    if w < 1:
        raise ValueError(f"make_window: window length must be >= 1, got {w}")
    if t >= dataset.t_max + 1:
        raise ValueError(f"make_window: timestep {t} beyond the data (T_max = {dataset.t_max})")
    history = dataset.snapshots[max(0, t - w):t]
    if split is None:
        target = dataset.snapshots[t] if t < dataset.t_max else _snapshot(t, np.empty((0, 3)), dataset.vocab)
    else:
        target = dataset.split_snapshot(split, t)
    pairs, labels = target.query_arrays()
    return WindowBatch(t, history, pairs, labels)


def synth_periodic_tkg(n_entities: int, n_types: int, period: int, t_max: int, seed: int,
                       pairs_per_step: int | None = None) -> Dataset:
    """Deterministic periodic fixture.

    Each phase ``t mod period`` has its own seeded set of ordered entity
    pairs, and the event type of ``(s, o, t)`` is a fixed function of
    ``(s + o + t) mod period``.  Timesteps are split 60/20/20.
    """
    if min(n_entities, n_types, period, t_max) < 2:
        raise ValueError("synth_periodic_tkg: all counts must be >= 2")
    rng = np.random.default_rng(seed)
    all_pairs = np.array([(s, o) for s in range(n_entities) for o in range(n_entities) if s != o])
    k = min(pairs_per_step or n_entities, len(all_pairs))
    phase_pairs = [all_pairs[np.sort(rng.choice(len(all_pairs), size=k, replace=False))]
                   for _ in range(period)]
    type_of_residue = rng.permutation(n_types)[np.arange(period) % n_types]
    rows = []
    for t in range(t_max):
        for s, o in phase_pairs[t % period]:
            rows.append((s, type_of_residue[(s + o + t) % period], o, t))
    quads = np.array(rows, dtype=np.int64)
    n_train = int(round(0.6 * t_max))
    n_valid = int(round(0.2 * t_max))
    ts = quads[:, 3]
    return Dataset(Vocabulary(n_entities, n_types),
                   quads[ts < n_train],
                   quads[(ts >= n_train) & (ts < n_train + n_valid)],
                   quads[ts >= n_train + n_valid],
                   name=f"synth-{n_entities}-{n_types}-{period}-{t_max}-{seed}")
