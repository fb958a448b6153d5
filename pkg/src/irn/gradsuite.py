"""Finite-difference checks over every tape op and every model variant.

Model checks run on micro-models (N=2 joints, T=4 frames, tiny widths) so a
full sweep takes seconds; dropout stays on with a re-seeded generator so
each evaluation sees the same masks.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from irn import autodiff as ad
from irn.autodiff import ops
from irn.autodiff.gradcheck import GradCheckReport, grad_check
from irn.autodiff.tensor import Tensor
from irn.model import VARIANTS, ModelConfig
from irn.skeleton.joints import body_part_ids
from irn.skeleton.types import InteractionSample, PersonJointSet
from irn.training import init_model


@dataclass
class GradCase:
    name: str
    fn: Callable[[], Tensor]
    params: dict[str, Tensor]


def _param(rng, *shape) -> Tensor:
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _weighted(x: Tensor, w: np.ndarray) -> Tensor:
    # a fixed random projection turns any output into a scalar with generic gradients
    return ops.sum_all(ops.mul(x, Tensor(w)))


def op_cases(seed: int = 0) -> list[GradCase]:
    rng = np.random.default_rng(seed)
    cases = []

    def add_case(name, build, **params):
        probe = build(**params)
        w = rng.normal(size=probe.shape)
        cases.append(GradCase(name, lambda: _weighted(build(**params), w), params))

    add_case("linear", lambda x, W, b: ops.linear(x, W, b), x=_param(rng, 3, 4), W=_param(rng, 4, 2), b=_param(rng, 2))
    add_case("relu", lambda x: ops.relu(x), x=_param(rng, 4, 3))
    add_case("sigmoid", lambda x: ops.sigmoid(x), x=_param(rng, 4, 3))
    add_case("tanh", lambda x: ops.tanh(x), x=_param(rng, 4, 3))
    add_case("add", lambda a, b: ops.add(a, b), a=_param(rng, 2, 3), b=_param(rng, 2, 3))
    add_case("sub", lambda a, b: ops.sub(a, b), a=_param(rng, 2, 3), b=_param(rng, 2, 3))
    add_case("mul", lambda a, b: ops.mul(a, b), a=_param(rng, 2, 3), b=_param(rng, 2, 3))
    add_case("scale", lambda a: ops.scale(a, -1.7), a=_param(rng, 5))
    add_case("reshape", lambda a: ops.reshape(a, (3, 2)), a=_param(rng, 2, 3))
    add_case("concat", lambda a, b: ops.concat([a, b]), a=_param(rng, 2, 3), b=_param(rng, 2, 2))
    add_case("columns", lambda a: ops.columns(a, 1, 3), a=_param(rng, 3, 4))
    add_case("mean_pool_rows", lambda a: ops.mean_pool_rows(a), a=_param(rng, 5, 3))
    add_case("mean_pool_groups", lambda a: ops.mean_pool_groups(a, 2), a=_param(rng, 6, 3))
    add_case("take_rows", lambda a: ops.take_rows(a, [2, 0, 2]), a=_param(rng, 3, 2))
    mask = np.array([1.0, 0.0, 1.0])
    add_case("blend", lambda a, b: ops.blend(a, b, mask), a=_param(rng, 3, 2), b=_param(rng, 3, 2))
    add_case("dropout", lambda a: ops.dropout(a, 0.4, True, np.random.default_rng(5)), a=_param(rng, 4, 4))
    labels = np.array([2, 0, 1])
    z = _param(rng, 3, 4)
    cases.append(GradCase("softmax_cross_entropy", lambda: ops.softmax_cross_entropy(z, labels)[0], {"z": z}))
    lp = ad.LstmParams(_param(rng, 3, 8), _param(rng, 2, 8), _param(rng, 8))
    xs = [_param(rng, 2, 3) for _ in range(3)]
    masks = [np.ones(2), np.array([1.0, 0.0]), np.ones(2)]
    w = rng.normal(size=(2, 2))
    params = {"w_x": lp.w_x, "w_h": lp.w_h, "bias": lp.bias, **{f"x{t}": x for t, x in enumerate(xs)}}
    cases.append(GradCase("lstm", lambda: _weighted(ad.lstm_forward(xs, lp, masks), w), params))
    return cases


def micro_config(variant: str, use_h: bool, lstm: bool, fusion_layer: int = 1) -> ModelConfig:
    return ModelConfig(variant=variant, use_h=use_h, lstm=lstm, n_classes=3, n_joints=2, T=4, d=3,
                       g_widths=(5, 4), f_widths=(4, 3, 3), lstm_units=3, dropout=0.25,
                       fusion_layer=fusion_layer)


def micro_person(rng, N=2, T=4, d=3) -> PersonJointSet:
    return PersonJointSet(rng.normal(size=(N, T, d)), np.arange(N), np.asarray(body_part_ids(N)))


def model_case(variant: str, use_h: bool, lstm: bool, seed: int = 0, fusion_layer: int = 1) -> GradCase:
    cfg = micro_config(variant, use_h, lstm, fusion_layer)
    rng = np.random.default_rng(seed)
    model = init_model(cfg, std=0.5, seed=rng)
    samples = []
    for label in (0, 2):
        windows = [(micro_person(rng), micro_person(rng)) for _ in range(2)]
        samples.append(InteractionSample(windows[0][0], windows[0][1], label, windows if lstm else []))
    labels = np.array([s.label for s in samples])

    def fn():
        logits = model.logits(samples, training=True, rng=np.random.default_rng(seed + 100))
        return ops.softmax_cross_entropy(logits, labels)[0]

    name = f"{'LSTM-' if lstm else ''}{variant}{'+h' if use_h else ''}"
    if variant == "fc1_fused" and fusion_layer != 1:
        name += f"@fc{fusion_layer}"
    return GradCase(name, fn, model.params)


def model_cases(seed: int = 0) -> list[GradCase]:
    cases = [model_case(v, h, l, seed) for v, h, l in itertools.product(VARIANTS, (False, True), (False, True))]
    cases += [model_case("fc1_fused", True, False, seed, k) for k in (2, 3)]
    return cases


def run_suite(eps: float = 1e-5, tol: float = 1e-4, seed: int = 0,
              which: str = "all") -> list[tuple[str, GradCheckReport]]:
    cases = []
    if which in ("all", "ops"):
        cases += op_cases(seed)
    if which in ("all", "models"):
        cases += model_cases(seed)
    return [(c.name, grad_check(c.fn, c.params, eps=eps, tol=tol)) for c in cases]
