"""Parameter container and the end-to-end forward pass."""

from __future__ import annotations

import numpy as np

from .config import Config
from .correlation import CorrEncoderParams
from .data import Dataset, WindowBatch, make_window
from .decoder import DecoderParams, conv_transe_score
from .entity_gcn import EntityConvParams, LayerParams, encode_window
from .mapper import MappingMatrix
from .optim import xavier_init
from .temporal import DecayParams, GruParams, encode_sequence
from .tensor import ShapeError, Tensor, gather_rows


def parameter_shapes(config: Config, n_entities: int, n_types: int) -> dict[str, tuple[int, ...]]:
    """Name -> shape of every trainable tensor, in canonical order."""
    d, g, C = config.dim, config.n_groups, config.decoder_channels
    shapes: dict[str, tuple[int, ...]] = {
        "E0": (n_entities, d),
        "R0": (n_types, d),
        "mapper.raw": (n_entities, g),
    }
    for i in range(config.n_layers):
        p = f"layers.{i}."
        shapes.update({
            p + "corr.W_pair": (2 * d, d), p + "corr.b_pair": (d,),
            p + "corr.conv_kernel": (1, 1, config.corr_kernel), p + "corr.conv_bias": (1,),
            p + "corr.W_upd": (2 * d, d), p + "corr.b_upd": (d,),
            p + "ent.W_in": (d, d), p + "ent.W_out": (d, d), p + "ent.W_self": (d, d),
            p + "ent.W_ent_upd": (2 * d, d), p + "ent.b_ent_upd": (d,), p + "ent.W_rel": (d, d),
        })
    for unit in ("entity", "type"):
        shapes.update({f"{unit}_decay.W_gamma": (1,), f"{unit}_decay.b_gamma": (1,)})
        for gate in ("reset", "update", "new"):
            shapes.update({f"{unit}_gru.W_{gate}": (2 * d, d), f"{unit}_gru.b_{gate}": (d,)})
    shapes.update({
        "decoder.kernels": (C, 2, config.decoder_kernel), "decoder.conv_bias": (C,),
        "decoder.W_fc": (C * d, d), "decoder.b_fc": (d,),
    })
    return shapes


def _init_tensor(name: str, shape: tuple[int, ...], rng, dtype) -> Tensor:
    leaf = name.rsplit(".", 1)[-1]
    if leaf.startswith("b_") or leaf.endswith("bias"):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, name=name)
    if len(shape) == 3:
        # conv kernels: fan_in = rows * K, fan_out = C * K
        C, rows, K = shape
        bound = np.sqrt(6.0 / (rows * K + C * K))
        return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True,
                      name=name)
    if len(shape) == 1:
        t = xavier_init((1, 1), rng, dtype)
        return Tensor(np.abs(t.data).reshape(shape), requires_grad=True, name=name)
    return xavier_init(shape, rng, dtype, name=name)


class Model:
    """All trainable tensors plus the forward computation.

    Tensors live in ``self.tensors`` keyed by the names of
    :func:`parameter_shapes`; the structured views (``layers``, ``decoder``,
    ...) share the same ``Tensor`` objects.
    """

    def __init__(self, config: Config, n_entities: int, n_types: int,
                 arrays: dict[str, np.ndarray] | None = None):
        self.config = config
        self.n_entities = n_entities
        self.n_types = n_types
        shapes = parameter_shapes(config, n_entities, n_types)
        dtype = config.np_dtype
        self.tensors: dict[str, Tensor] = {}
        if arrays is None:
            rng = np.random.default_rng(config.seed)
            for name, shape in shapes.items():
                self.tensors[name] = _init_tensor(name, shape, rng, dtype)
        else:
            missing = set(shapes) - set(arrays)
            if missing:
                raise KeyError(f"missing tensors: {sorted(missing)}")
            for name, shape in shapes.items():
                arr = np.asarray(arrays[name])
                if arr.shape != shape:
                    raise ShapeError(f"tensor {name!r}: stored shape {arr.shape}, "
                                     f"config expects {shape}")
                self.tensors[name] = Tensor(arr.astype(dtype, copy=True), requires_grad=True,
                                            name=name)
        t = self.tensors
        self.E0, self.R0 = t["E0"], t["R0"]
        self.mapper = MappingMatrix(t["mapper.raw"])
        self.layers = []
        for i in range(config.n_layers):
            p = f"layers.{i}."
            corr = CorrEncoderParams(*(t[p + "corr." + k] for k in
                                       ("W_pair", "b_pair", "conv_kernel", "conv_bias", "W_upd", "b_upd")))
            ent = EntityConvParams(*(t[p + "ent." + k] for k in
                                     ("W_in", "W_out", "W_self", "W_ent_upd", "b_ent_upd", "W_rel")))
            self.layers.append(LayerParams(corr, ent))
        self.entity_decay = DecayParams(t["entity_decay.W_gamma"], t["entity_decay.b_gamma"])
        self.type_decay = DecayParams(t["type_decay.W_gamma"], t["type_decay.b_gamma"])
        gru_keys = ("W_reset", "b_reset", "W_update", "b_update", "W_new", "b_new")
        self.entity_gru = GruParams(*(t["entity_gru." + k] for k in gru_keys))
        self.type_gru = GruParams(*(t["type_gru." + k] for k in gru_keys))
        self.decoder = DecoderParams(*(t["decoder." + k] for k in
                                       ("kernels", "conv_bias", "W_fc", "b_fc")))

    @property
    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def param_groups(self) -> list[tuple[list[Tensor], float]]:
        """Mapper logits at the mapper learning rate, everything else at the default."""
        rest = [p for name, p in self.tensors.items() if name != "mapper.raw"]
        return [([self.mapper.raw], self.config.lr_mapper), (rest, self.config.lr_default)]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.tensors.items()}

    def encode(self, window: WindowBatch) -> tuple[Tensor, Tensor]:
        """Final entity states ``(N_e, d)`` and event-type states ``(N_r, d)``."""
        cfg = self.config
        M = self.mapper.effective() if cfg.group_pathway else None
        E_seq, R_seq, ent_act, type_act = encode_window(
            window, self.E0, self.R0, self.layers, M, cfg.group_pathway, cfg.composition,
            cfg.corr_reduce)
        steps = window.timesteps
        H_e = encode_sequence(E_seq, ent_act, self.entity_decay, self.entity_gru, steps)
        H_r = encode_sequence(R_seq, type_act, self.type_decay, self.type_gru, steps)
        return H_e, H_r

    def score(self, window: WindowBatch, pairs=None) -> Tensor:
        """Probabilities ``(n_pairs, N_r)`` for ``pairs`` (default: the window's queries)."""
        pairs = window.pairs if pairs is None else np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        H_e, H_r = self.encode(window)
        return conv_transe_score(gather_rows(H_e, pairs[:, 0]), gather_rows(H_e, pairs[:, 1]),
                                 H_r, self.decoder)


def forward_predict(model: Model, dataset: Dataset, t: int, queries=None) -> Tensor:
    """Event-type probabilities for ``(s, o)`` queries at timestep ``t``."""
    window = make_window(dataset, t, model.config.window)
    return model.score(window, queries)
