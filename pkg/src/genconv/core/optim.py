# src/genconv/core/optim.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..domain.models import OptimizerSpec
from ..errors import ShapeError


@dataclass
class OptimizerState:
    """Adam (or plain SGD) bookkeeping; moment buffers mirror the parameter shapes."""

    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_parameters(cls, params: Sequence[np.ndarray], spec: OptimizerSpec | None = None):
        spec = spec or OptimizerSpec()
        return cls(
            kind=spec.kind,
            lr=spec.lr,
            beta1=spec.beta1,
            beta2=spec.beta2,
            eps=spec.eps,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.kind, self.lr, self.beta1, self.beta2, self.eps, self.step,
            [a.copy() for a in self.m], [a.copy() for a in self.v],
        )


def _check_shapes(params, grads, state: OptimizerState) -> None:
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError(
            f"parameter/gradient/state count mismatch: {len(params)}/{len(grads)}/{len(state.m)}"
        )
    for i, (p, g, m) in enumerate(zip(params, grads, state.m)):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch at parameter {i}: {p.shape} vs {g.shape} vs {m.shape}")


def optimizer_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: OptimizerState
) -> Sequence[np.ndarray]:
    """Update ``params`` in place and advance the step counter."""
    _check_shapes(params, grads, state)
    state.step += 1

    if state.kind == "sgd":
        for p, g in zip(params, grads):
            p -= (state.lr * g).astype(p.dtype, copy=False)
        return params

    b1, b2, t = state.beta1, state.beta2, state.step
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype, copy=False)
    return params
