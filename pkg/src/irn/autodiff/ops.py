"""Differentiable primitives.

All ops take and return :class:`Tensor`; numpy arrays are accepted wherever an
input is treated as a constant.
"""
from __future__ import annotations

from contextlib import contextmanager
from typing import Sequence

import numpy as np

from irn.autodiff.tensor import Tensor, make_result
from irn.errors import ConfigError, DataError, DimensionError


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# relu pre-activations seen while a probe is open; the gradient checker uses
# these to spot coordinates whose perturbation crosses a kink
_KINK_PROBES: list[list[np.ndarray]] = []


@contextmanager
def kink_probe():
    masks: list[np.ndarray] = []
    _KINK_PROBES.append(masks)
    try:
        yield masks
    finally:
        _KINK_PROBES.pop()


def linear(x, W, b) -> Tensor:
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if x.data.ndim != 2 or W.data.ndim != 2 or x.shape[1] != W.shape[0]:
        raise DimensionError(f"linear: x {x.shape} incompatible with W {W.shape}")
    if b.data.ndim != 1 or b.shape[0] != W.shape[1]:
        raise DimensionError(f"linear: bias {b.shape} incompatible with W {W.shape}")
    xd, Wd = x.data, W.data
    out = xd @ Wd
    out += b.data

    def back(g):
        return (
            g @ Wd.T if x.requires_grad else None,
            xd.T @ g if W.requires_grad else None,
            g.sum(axis=0) if b.requires_grad else None,
        )

    return make_result(out, (x, W, b), back, "linear")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    for probe in _KINK_PROBES:
        probe.append(mask.copy())
    out = np.where(mask, x.data, 0.0)
    return make_result(out, (x,), lambda g: (g * mask,), "relu")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    # split by sign so exp never overflows
    out = np.empty_like(xd)
    pos = xd >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    e = np.exp(xd[~pos])
    out[~pos] = e / (1.0 + e)
    return make_result(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return make_result(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "add")
    return make_result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "sub")
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return make_result(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return make_result(a.data * c, (a,), lambda g: (g * c,), "scale")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return make_result(
        np.array(a.data.sum()), (a,), lambda g: (np.full(shape, g.item()),), "sum_all"
    )


def concat(xs: Sequence) -> Tensor:
    """Column-wise concatenation in argument order."""
    xs = [as_tensor(x) for x in xs]
    if not xs:
        raise DimensionError("concat: no inputs")
    if len(xs) == 1:
        return xs[0]
    lead = xs[0].shape[:-1]
    for x in xs:
        if x.data.ndim != xs[0].data.ndim or x.shape[:-1] != lead:
            raise DimensionError(
                f"concat: leading shapes differ: {[t.shape for t in xs]}"
            )
    widths = [x.shape[-1] for x in xs]
    bounds = np.cumsum([0] + widths)
    out = np.concatenate([x.data for x in xs], axis=-1)

    def back(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(xs)))

    return make_result(out, xs, back, "concat")


def columns(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    shape = x.shape

    def back(g):
        full = np.zeros(shape)
        full[..., start:stop] = g
        return (full,)

    return make_result(x.data[..., start:stop].copy(), (x,), back, "columns")


def mean_pool_rows(x) -> Tensor:
    """Column means of a P x D matrix, returned as a length-D vector."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise DimensionError(f"mean_pool_rows: expected a matrix, got {x.shape}")
    P = x.shape[0]
    if P == 0:
        raise DataError("mean_pool_rows: cannot pool zero rows")
    out = x.data.mean(axis=0)
    return make_result(out, (x,), lambda g: (np.broadcast_to(g / P, x.shape),), "mean_pool")


def mean_pool_groups(x, n_groups: int) -> Tensor:
    """Mean over contiguous equal-sized row blocks: (G*P) x D -> G x D."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise DimensionError(f"mean_pool_groups: expected a matrix, got {x.shape}")
    rows, D = x.shape
    if n_groups <= 0 or rows == 0:
        raise DataError("mean_pool_groups: cannot pool zero rows")
    if rows % n_groups:
        raise DimensionError(f"mean_pool_groups: {rows} rows do not split into {n_groups} groups")
    P = rows // n_groups
    out = x.data.reshape(n_groups, P, D).mean(axis=1)

    def back(g):
        return (np.repeat(g / P, P, axis=0),)

    return make_result(out, (x,), back, "mean_pool_groups")


def take_rows(x, index) -> Tensor:
    """Gather rows ``x[index]``; repeated indices accumulate gradient."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)
    shape = x.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, index, g)
        return (full,)

    return make_result(x.data[index], (x,), back, "take_rows")


def blend(new, old, mask) -> Tensor:
    """``mask * new + (1 - mask) * old`` with a constant 0/1 row mask (B x 1)."""
    new, old = as_tensor(new), as_tensor(old)
    _same_shape(new, old, "blend")
    m = np.asarray(mask, dtype=np.float64).reshape(-1, 1)
    out = m * new.data + (1.0 - m) * old.data
    return make_result(out, (new, old), lambda g: (g * m, g * (1.0 - m)), "blend")


def dropout(x, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity outside training."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs an rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return make_result(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels) -> tuple[Tensor, np.ndarray]:
    """Mean negative log-likelihood over the batch and the softmax probabilities."""
    logits = as_tensor(logits)
    if logits.data.ndim != 2:
        raise DimensionError(f"softmax_cross_entropy: logits must be B x C, got {logits.shape}")
    B, C = logits.shape
    labels = np.asarray(labels, dtype=np.intp).reshape(-1)
    if labels.shape[0] != B:
        raise DimensionError(f"softmax_cross_entropy: {labels.shape[0]} labels for {B} rows")
    if B and (labels.min() < 0 or labels.max() >= C):
        raise DataError(f"label out of range [0, {C}): {labels.tolist()}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    logp = z - logsum[:, None]
    probs = np.exp(logp)
    loss = -logp[np.arange(B), labels].mean()

    def back(g):
        d = probs.copy()
        d[np.arange(B), labels] -= 1.0
        return (d * (g.item() / B),)

    return make_result(np.array(loss), (logits,), back, "softmax_cross_entropy"), probs
