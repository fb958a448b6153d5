"""LSTM cell built from the tape primitives so BPTT comes for free."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from irn.autodiff import ops
from irn.autodiff.tensor import Tensor
from irn.errors import DataError, DimensionError


@dataclass
class LstmParams:
    """Fused gate weights, gate order (input, forget, candidate, output)."""

    w_x: Tensor  # D x 4H
    w_h: Tensor  # H x 4H
    bias: Tensor  # 4H

    @property
    def hidden(self) -> int:
        return self.w_h.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[0]

    @classmethod
    def zeros(cls, input_dim: int, hidden: int, requires_grad: bool = True) -> "LstmParams":
        return cls(
            Tensor(np.zeros((input_dim, 4 * hidden)), requires_grad),
            Tensor(np.zeros((hidden, 4 * hidden)), requires_grad),
            Tensor(np.zeros(4 * hidden), requires_grad),
        )


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, p: LstmParams) -> tuple[Tensor, Tensor]:
    H = p.hidden
    zero_b = np.zeros(4 * H)
    pre = ops.add(ops.linear(x, p.w_x, p.bias), ops.linear(h, p.w_h, zero_b))
    i = ops.sigmoid(ops.columns(pre, 0, H))
    f = ops.sigmoid(ops.columns(pre, H, 2 * H))
    g = ops.tanh(ops.columns(pre, 2 * H, 3 * H))
    o = ops.sigmoid(ops.columns(pre, 3 * H, 4 * H))
    c_new = ops.add(ops.mul(f, c), ops.mul(i, g))
    h_new = ops.mul(o, ops.tanh(c_new))
    return h_new, c_new


def lstm_forward(seq: Sequence, params: LstmParams, masks: Sequence | None = None) -> Tensor:
    """Run the cell over ``seq`` from a zero state and return the last hidden state.

    Steps may be 1-D vectors (a single sequence) or B x D matrices. With
    ``masks``, row b keeps its previous state wherever ``masks[t][b] == 0``,
    which lets sequences of different lengths share one batch.
    """
    if len(seq) == 0:
        raise DataError("lstm_forward: empty sequence")
    steps = [ops.as_tensor(x) for x in seq]
    single = steps[0].data.ndim == 1
    if single:
        steps = [ops.reshape(s, (1, -1)) for s in steps]
    D = steps[0].shape[1]
    if D != params.input_dim:
        raise DimensionError(f"lstm_forward: input width {D} but w_x is {params.w_x.shape}")
    B = steps[0].shape[0]
    h = Tensor(np.zeros((B, params.hidden)))
    c = Tensor(np.zeros((B, params.hidden)))
    for t, x in enumerate(steps):
        if x.shape != (B, D):
            raise DimensionError(f"lstm_forward: step {t} has shape {x.shape}, expected {(B, D)}")
        h_new, c_new = lstm_cell(x, h, c, params)
        if masks is not None:
            h_new = ops.blend(h_new, h, masks[t])
            c_new = ops.blend(c_new, c, masks[t])
        h, c = h_new, c_new
    if single:
        return ops.reshape(h, (-1,))
    return h
