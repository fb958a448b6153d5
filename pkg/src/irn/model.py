"""Interaction relational network variants on top of the tape.

Parameters live in a flat ``name -> Tensor`` dict so they can be saved,
copied between models and handed to the optimiser without any class
hierarchy. Names follow ``<module>.layer<k>.weight`` / ``.bias``:

* ``g_inter`` / ``g_intra`` / ``g_naive``: relation modules (MLP on pair rows)
* ``f_inter`` / ``f_intra`` / ``f_naive`` / ``f_fused``: global modules
* ``lstm.w_x`` / ``lstm.w_h`` / ``lstm.bias`` and ``lstm.classifier``

Every variant is computed in batches: the pair rows of all windows in a
batch are stacked, pushed through g in one matmul per layer, then mean-pooled
per window.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from irn import autodiff as ad
from irn.autodiff import ops
from irn.autodiff.tensor import Tensor
from irn.errors import ConfigError, DataError, DimensionError
from irn.pairing import PairKind, relation_rows, row_width
from irn.skeleton.types import InteractionSample, PersonJointSet

VARIANTS = ("inter", "intra", "fused", "fc1_fused", "naive")
FULL_G_WIDTHS = (1000, 1000, 1000, 500)
FULL_F_WIDTHS = (500, 250, 250)
FULL_LSTM_UNITS = 256

_KINDS = {
    "inter": (PairKind.INTER_FORWARD, PairKind.INTER_BACKWARD),
    "intra": (PairKind.INTRA_P1, PairKind.INTRA_P2),
    "naive": (PairKind.NAIVE,),
}


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "inter"
    use_h: bool = True
    lstm: bool = False
    n_classes: int = 8
    n_joints: int = 15
    T: int = 8
    d: int = 3
    g_widths: tuple[int, ...] = FULL_G_WIDTHS
    f_widths: tuple[int, ...] = FULL_F_WIDTHS
    lstm_units: int = FULL_LSTM_UNITS
    dropout: float = 0.25
    fusion_layer: int = 1  # only read by fc1_fused: fuse after f layer 1, 2 or 3
    one_hot: bool = False

    def __post_init__(self):
        object.__setattr__(self, "g_widths", tuple(int(w) for w in self.g_widths))
        object.__setattr__(self, "f_widths", tuple(int(w) for w in self.f_widths))
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be at least 2")
        if self.T < 2:
            raise ConfigError("T must be at least 2")
        if self.d not in (2, 3):
            raise ConfigError("d must be 2 or 3")
        if self.variant in ("intra", "fused", "fc1_fused", "naive") and self.n_joints < 2:
            raise ConfigError(f"{self.variant} needs at least two joints")
        if not self.g_widths or not self.f_widths or min(self.g_widths + self.f_widths) < 1:
            raise ConfigError("layer widths must be positive and non-empty")
        if not 1 <= self.fusion_layer <= len(self.f_widths):
            raise ConfigError(f"fusion_layer must lie in 1..{len(self.f_widths)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.lstm and self.lstm_units < 1:
            raise ConfigError("lstm_units must be positive")

    @property
    def row_width(self) -> int:
        return row_width(self.T, self.d, self.n_joints, self.use_h, self.one_hot)

    @property
    def relation_width(self) -> int:
        return self.g_widths[-1]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["g_widths"] = list(self.g_widths)
        out["f_widths"] = list(self.f_widths)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model config keys: {unknown}")
        return cls(**data)

    def fingerprint(self) -> str:
        return config_fingerprint(self.to_dict())


def config_fingerprint(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# parameter layout

def _mlp_shapes(prefix: str, widths: Sequence[int], in_dim: int, start: int = 0) -> dict:
    shapes = {}
    for k, w in enumerate(widths, start=start):
        shapes[f"{prefix}.layer{k}.weight"] = (in_dim, w)
        shapes[f"{prefix}.layer{k}.bias"] = (w,)
        in_dim = w
    return shapes


def _head_shapes(prefix: str, in_dim: int, C: int) -> dict:
    return {f"{prefix}.classifier.weight": (in_dim, C), f"{prefix}.classifier.bias": (C,)}


def _stream_input(cfg: ModelConfig, stream: str) -> int:
    R = cfg.relation_width
    return {"inter": R, "naive": R, "intra": 2 * R, "fused": 3 * R}[stream]


def feature_width(cfg: ModelConfig) -> int:
    """Width of the pre-classifier feature (what the LSTM consumes)."""
    if cfg.variant == "fc1_fused" and cfg.fusion_layer == len(cfg.f_widths):
        return 2 * cfg.f_widths[-1]
    return cfg.f_widths[-1]


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every parameter name and its shape, in a fixed order."""
    shapes: dict[str, tuple[int, ...]] = {}
    fw, C = cfg.f_widths, cfg.n_classes
    v = cfg.variant
    if v in ("inter", "fused", "fc1_fused"):
        shapes.update(_mlp_shapes("g_inter", cfg.g_widths, cfg.row_width))
    if v in ("intra", "fused", "fc1_fused"):
        shapes.update(_mlp_shapes("g_intra", cfg.g_widths, cfg.row_width))
    if v == "naive":
        shapes.update(_mlp_shapes("g_naive", cfg.g_widths, cfg.row_width))

    if v in ("inter", "intra", "naive", "fused"):
        head = f"f_{v}"
        shapes.update(_mlp_shapes(head, fw, _stream_input(cfg, v)))
        head_in = fw[-1]
    else:
        k = cfg.fusion_layer
        shapes.update(_mlp_shapes("f_inter", fw[:k], _stream_input(cfg, "inter")))
        shapes.update(_mlp_shapes("f_intra", fw[:k], _stream_input(cfg, "intra")))
        shapes.update(_mlp_shapes("f_fused", fw[k:], 2 * fw[k - 1], start=k))
        head = "f_fused"
        head_in = feature_width(cfg)

    if cfg.lstm:
        H = cfg.lstm_units
        shapes["lstm.w_x"] = (head_in, 4 * H)
        shapes["lstm.w_h"] = (H, 4 * H)
        shapes["lstm.bias"] = (4 * H,)
        shapes.update(_head_shapes("lstm", H, C))
    else:
        shapes.update(_head_shapes(head, head_in, C))
    return shapes


# building blocks

def mlp_forward(x: Tensor, params: dict[str, Tensor], prefix: str, layers: Sequence[int],
                dropout: float = 0.0, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
    """``layers`` are the layer indices under ``prefix``; ReLU after each, then dropout."""
    for k in layers:
        x = ops.relu(ops.linear(x, params[f"{prefix}.layer{k}.weight"], params[f"{prefix}.layer{k}.bias"]))
        if dropout:
            x = ops.dropout(x, dropout, training, rng)
    return x


def g_forward(rows, params: dict[str, Tensor], prefix: str = "g_inter") -> Tensor:
    """Relation module on a P x in row matrix (ReLU after every layer)."""
    n = 0
    while f"{prefix}.layer{n}.weight" in params:
        n += 1
    if n == 0:
        raise ConfigError(f"no parameters under {prefix!r}")
    return mlp_forward(ops.as_tensor(rows), params, prefix, range(n))


def score_average(logits_a, logits_b) -> np.ndarray:
    """Softmax both score vectors and average the probabilities."""
    a = np.asarray(logits_a.data if isinstance(logits_a, Tensor) else logits_a, dtype=np.float64)
    b = np.asarray(logits_b.data if isinstance(logits_b, Tensor) else logits_b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"score_average: shapes differ {a.shape} vs {b.shape}")
    return 0.5 * (ops.softmax(a) + ops.softmax(b))


class IrnModel:
    def __init__(self, config: ModelConfig, params: dict[str, Tensor]):
        self.config = config
        shapes = param_shapes(config)
        missing = sorted(set(shapes) - set(params))
        extra = sorted(set(params) - set(shapes))
        if missing or extra:
            raise ConfigError(f"parameter set does not fit config: missing {missing}, unexpected {extra}")
        for name, shape in shapes.items():
            if params[name].shape != tuple(shape):
                raise DimensionError(f"{name}: expected shape {tuple(shape)}, got {params[name].shape}")
        self.params = {name: params[name] for name in shapes}

    @classmethod
    def zeros(cls, config: ModelConfig) -> "IrnModel":
        return cls(config, {k: Tensor(np.zeros(s), requires_grad=True, name=k)
                            for k, s in param_shapes(config).items()})

    def copy(self) -> "IrnModel":
        return IrnModel(self.config, {k: Tensor(p.data.copy(), p.requires_grad, name=k)
                                      for k, p in self.params.items()})

    def lstm_params(self) -> ad.LstmParams:
        p = self.params
        return ad.LstmParams(p["lstm.w_x"], p["lstm.w_h"], p["lstm.bias"])

    # pooled relation descriptors

    def _rows(self, pairs: Sequence[tuple[PersonJointSet, PersonJointSet]], kinds) -> list[np.ndarray]:
        cfg = self.config
        for p1, p2 in pairs:
            if p1.n_joints != cfg.n_joints or p1.T != cfg.T or p1.d != cfg.d:
                raise DimensionError(
                    f"joint set (N={p1.n_joints}, T={p1.T}, d={p1.d}) does not match model "
                    f"(N={cfg.n_joints}, T={cfg.T}, d={cfg.d})"
                )
        per = [relation_rows(p1, p2, kinds, cfg.use_h, cfg.one_hot) for p1, p2 in pairs]
        return [np.concatenate([r[k] for r in per]) if len(per) > 1 else per[0][k] for k in kinds]

    def _pool(self, pairs, stream: str, prefix: str) -> list[Tensor]:
        """One B x R pooled descriptor per pair kind of ``stream``."""
        kinds = _KINDS[stream]
        blocks = self._rows(pairs, kinds)
        B = len(pairs)
        out = g_forward(np.concatenate(blocks) if len(blocks) > 1 else blocks[0], self.params, prefix)
        pooled = ops.mean_pool_groups(out, len(kinds) * B)
        if len(kinds) == 1:
            return [pooled]
        return [ops.take_rows(pooled, np.arange(i * B, (i + 1) * B)) for i in range(len(kinds))]

    def pooled(self, pairs) -> dict[str, Tensor]:
        """Pooled descriptors by stream: ``inter`` (B x R), ``intra`` (B x 2R), ``naive``."""
        if not pairs:
            raise DataError("no windows to evaluate")
        v = self.config.variant
        out = {}
        if v in ("inter", "fused", "fc1_fused"):
            fwd, bwd = self._pool(pairs, "inter", "g_inter")
            out["inter"] = ops.scale(ops.add(fwd, bwd), 0.5)
        if v in ("intra", "fused", "fc1_fused"):
            a, b = self._pool(pairs, "intra", "g_intra")
            out["intra"] = ops.concat([a, b])
        if v == "naive":
            out["naive"] = self._pool(pairs, "naive", "g_naive")[0]
        return out

    # global module

    def features(self, pairs, training: bool = False, rng: np.random.Generator | None = None,
                 trace: dict | None = None) -> Tensor:
        """Pre-classifier feature per window (B x feature_width)."""
        cfg = self.config
        fw, rate = cfg.f_widths, cfg.dropout
        pooled = self.pooled(pairs)
        if trace is not None:
            trace.update(pooled)
        v = cfg.variant
        if v in ("inter", "intra", "naive"):
            return mlp_forward(pooled[v], self.params, f"f_{v}", range(len(fw)), rate, training, rng)
        if v == "fused":
            desc = ops.concat([pooled["inter"], pooled["intra"]])
            if trace is not None:
                trace["descriptor"] = desc
            return mlp_forward(desc, self.params, "f_fused", range(len(fw)), rate, training, rng)
        k = cfg.fusion_layer
        a_inter = mlp_forward(pooled["inter"], self.params, "f_inter", range(k), rate, training, rng)
        a_intra = mlp_forward(pooled["intra"], self.params, "f_intra", range(k), rate, training, rng)
        if trace is not None:
            trace["fc_inter"], trace["fc_intra"] = a_inter, a_intra
        return mlp_forward(ops.concat([a_inter, a_intra]), self.params, "f_fused", range(k, len(fw)),
                           rate, training, rng)

    def _classify(self, x: Tensor, head: str) -> Tensor:
        return ops.linear(x, self.params[f"{head}.classifier.weight"], self.params[f"{head}.classifier.bias"])

    def head_name(self) -> str:
        v = self.config.variant
        return "f_fused" if v == "fc1_fused" else f"f_{v}"

    # entry points

    def window_logits(self, pairs, training: bool = False, rng=None, trace: dict | None = None) -> Tensor:
        """Logits for each (P1, P2) window as an independent sample (non-LSTM models)."""
        if self.config.lstm:
            raise ConfigError("model has an LSTM head; use sequence_logits")
        return self._classify(self.features(pairs, training, rng, trace), self.head_name())

    def sequence_logits(self, sequences: Sequence[Sequence[tuple[PersonJointSet, PersonJointSet]]],
                        training: bool = False, rng=None) -> Tensor:
        """LSTM head over each sample's windows in temporal order; B x C."""
        if not self.config.lstm:
            raise ConfigError("model has no LSTM head")
        if not sequences or any(len(s) == 0 for s in sequences):
            raise DataError("every sample needs at least one window")
        flat = [w for s in sequences for w in s]
        feats = self.features(flat, training, rng)
        starts = np.cumsum([0] + [len(s) for s in sequences[:-1]])
        lengths = np.array([len(s) for s in sequences])
        steps, masks = [], []
        for t in range(int(lengths.max())):
            # finished samples re-read their last window and are masked out
            idx = starts + np.minimum(t, lengths - 1)
            steps.append(ops.take_rows(feats, idx))
            masks.append((t < lengths).astype(np.float64))
        h = ad.lstm_forward(steps, self.lstm_params(), masks if (lengths != lengths[0]).any() else None)
        h = ops.dropout(h, self.config.dropout, training, rng)
        return self._classify(h, "lstm")

    def logits(self, samples: Sequence[InteractionSample], training: bool = False, rng=None) -> Tensor:
        if not samples:
            raise DataError("empty batch")
        if self.config.lstm:
            return self.sequence_logits([s.windows or [(s.p1, s.p2)] for s in samples], training, rng)
        return self.window_logits([(s.p1, s.p2) for s in samples], training, rng)

    def predict_proba(self, samples: Sequence[InteractionSample]) -> np.ndarray:
        return ops.softmax(self.logits(samples).data)


# single-sample wrappers, one per variant

def _single(model: IrnModel, variant: str, p1: PersonJointSet, p2: PersonJointSet) -> np.ndarray:
    if model.config.variant != variant:
        raise ConfigError(f"expected a {variant} model, got {model.config.variant}")
    return model.window_logits([(p1, p2)]).data[0]


def irn_inter_forward(p1, p2, model: IrnModel) -> np.ndarray:
    return _single(model, "inter", p1, p2)


def irn_intra_forward(p1, p2, model: IrnModel) -> np.ndarray:
    return _single(model, "intra", p1, p2)


def irn_fused_forward(p1, p2, model: IrnModel) -> np.ndarray:
    return _single(model, "fused", p1, p2)


def irn_fc1_fused_forward(p1, p2, model: IrnModel) -> np.ndarray:
    return _single(model, "fc1_fused", p1, p2)


def naive_forward(p1, p2, model: IrnModel) -> np.ndarray:
    return _single(model, "naive", p1, p2)


def lstm_irn_forward(windows, model: IrnModel) -> np.ndarray:
    return model.sequence_logits([list(windows)]).data[0]
