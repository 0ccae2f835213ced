"""Xavier initialization and Adam with per-group learning rates."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import DEFAULT_DTYPE, ShapeError, Tensor


def xavier_init(shape: tuple[int, int], rng, dtype=DEFAULT_DTYPE, name: str | None = None) -> Tensor:
    """Uniform Xavier/Glorot sample for a ``(fan_in, fan_out)`` matrix.

    ``rng`` is a seed or a ``numpy.random.Generator``.
    """
    if len(shape) != 2:
        raise ShapeError(f"xavier_init: expected a 2-D shape, got {shape}")
    fan_in, fan_out = shape
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"xavier_init: zero fan in shape {shape}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    data = gen.uniform(-bound, bound, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True, name=name)


class Adam:
    """Adam with bias correction.

    ``groups`` is a sequence of ``(params, lr)`` pairs; each parameter is
    updated with the learning rate of its group.
    """

    def __init__(self, groups: Sequence[tuple[Sequence[Tensor], float]],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params: list[Tensor] = []
        self.lrs: list[float] = []
        for params, lr in groups:
            if lr <= 0:
                raise ValueError(f"learning rate must be positive, got {lr}")
            for p in params:
                self.params.append(p)
                self.lrs.append(float(lr))
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError(f"expected {len(self.params)} gradients, got {len(grads)}")
        for p, g in zip(self.params, grads):
            if g.shape != p.shape:
                raise ShapeError(f"adam_step: gradient shape {g.shape} vs parameter {p.shape}")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            p.data = (p.data - self.lrs[i] * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"step": np.array([self.t], dtype=np.float64)}
        for i in range(len(self.params)):
            out[f"m.{i}"] = self.m[i]
            out[f"v.{i}"] = self.v[i]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays["step"][0])
        for i in range(len(self.params)):
            self.m[i] = np.array(arrays[f"m.{i}"], dtype=self.params[i].dtype)
            self.v[i] = np.array(arrays[f"v.{i}"], dtype=self.params[i].dtype)

