"""Dense float64 tensors and the reverse-mode gradient tape."""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from irn.errors import ConfigError, NumericError


class Tensor:
    """A numpy float64 array with an optional gradient slot.

    ``data`` is always a C-contiguous float64 array; ``grad`` is ``None`` until a
    backward pass touches the tensor.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_from_op")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._from_op = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ConfigError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of differentiable operations.

    Operations append themselves while the tape is active (see :func:`recording`).
    :func:`backward` walks the nodes once, newest first, and then clears them.
    """

    nodes: list[_Node] = field(default_factory=list)

    def record(self, out: Tensor, inputs: Iterable[Tensor], backward_fn) -> None:
        self.nodes.append(_Node(out, tuple(inputs), backward_fn))

    def __len__(self) -> int:
        return len(self.nodes)

    def reset(self) -> None:
        self.nodes.clear()


_ACTIVE: list[Tape] = []


@contextmanager
def recording(tape: Tape | None = None):
    tape = Tape() if tape is None else tape
    _ACTIVE.append(tape)
    try:
        yield tape
    finally:
        _ACTIVE.pop()


def active_tape() -> Tape | None:
    return _ACTIVE[-1] if _ACTIVE else None


def check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values produced by {what}")


def make_result(data: np.ndarray, inputs: Sequence[Tensor], backward_fn, what: str) -> Tensor:
    """Wrap an op's output and put it on the active tape if any input needs grad."""
    check_finite(data, what)
    needs = any(t.requires_grad for t in inputs)
    tape = active_tape()
    out = Tensor(data, requires_grad=needs and tape is not None)
    out._from_op = True
    if out.requires_grad:
        tape.record(out, inputs, backward_fn)
    return out


def backward(loss: Tensor, tape: Tape, params: Iterable[Tensor] = ()) -> None:
    """Populate ``.grad`` on every tensor upstream of ``loss``.

    Tensors in ``params`` start from zero, so a parameter the loss does not
    depend on ends with an all-zero gradient rather than ``None``.
    """
    if loss.size != 1:
        raise ConfigError(f"backward needs a scalar loss, got shape {loss.shape}")
    for p in params:
        p.zero_grad()
    if not tape.nodes or not any(node.out is loss for node in tape.nodes[::-1]):
        tape.reset()
        if loss.requires_grad:
            raise ConfigError("loss was not produced on this tape")
        return
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        g = node.out.grad
        if g is None:
            continue
        grads = node.backward_fn(g)
        for inp, gi in zip(node.inputs, grads):
            if gi is None or not inp.requires_grad:
                continue
            if inp.grad is None:
                inp.grad = np.array(gi, dtype=np.float64, copy=True).reshape(inp.shape)
            else:
                inp.grad += gi
        if node.out is not loss:
            node.out.grad = None
    tape.reset()
