from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .correlation import REDUCTIONS
from .entity_gcn import COMPOSITIONS

DTYPES = {"float64": np.float64, "float32": np.float32}


@dataclass
class Config:
    """Model and training hyperparameters.

    Defaults follow the reference setting: 16 groups, window 7, 2 layers,
    dimension 100, batch 16, learning rates 0.001 (0.05 for the mapper),
    early-stopping patience 3.  The GRU hidden size must equal ``dim``.
    """

    n_groups: int = 16
    window: int = 7
    n_layers: int = 2
    dim: int = 100
    gru_hidden: int | None = None
    batch_size: int = 16
    lr_default: float = 0.001
    lr_mapper: float = 0.05
    patience: int = 3
    max_epochs: int = 100
    seed: int = 0
    group_pathway: bool = True
    filtered_eval: bool = False
    decoder_channels: int = 50
    decoder_kernel: int = 3
    corr_kernel: int = 3
    composition: str = "sub"
    corr_reduce: str = "mean"
    dtype: str = "float64"

    def __post_init__(self):
        if self.gru_hidden is None:
            self.gru_hidden = self.dim
        for name in ("n_groups", "window", "n_layers", "dim", "gru_hidden", "batch_size",
                     "patience", "max_epochs", "decoder_channels", "decoder_kernel", "corr_kernel"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"config: {name} must be a positive integer, got {value!r}")
        if self.gru_hidden != self.dim:
            raise ValueError(f"config: gru_hidden ({self.gru_hidden}) must equal dim ({self.dim})")
        if not (self.lr_default > 0 and self.lr_mapper > 0):
            raise ValueError("config: learning rates must be positive")
        if self.decoder_kernel % 2 == 0 or self.corr_kernel % 2 == 0:
            raise ValueError("config: kernel widths must be odd")
        if self.composition not in COMPOSITIONS:
            raise ValueError(f"config: composition must be one of {COMPOSITIONS}")
        if self.corr_reduce not in REDUCTIONS:
            raise ValueError(f"config: corr_reduce must be one of {REDUCTIONS}")
        if self.dtype not in DTYPES:
            raise ValueError(f"config: dtype must be one of {tuple(DTYPES)}")

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"config: unknown keys {sorted(unknown)}")
        return cls(**d)
