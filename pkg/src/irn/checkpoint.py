"""Versioned checkpoint container.

An ``.npz``-compatible zip holding ``param/<name>``, ``adam_m/<name>`` and
``adam_v/<name>`` arrays plus a ``meta`` JSON blob (format version, model
config, fingerprint, epoch, optimiser scalars, RNG state, history). Entries
carry a fixed timestamp, so identical content gives identical bytes.
"""
from __future__ import annotations

import io
import json
import os
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from irn.autodiff.optim import AdamState
from irn.autodiff.tensor import Tensor
from irn.errors import ConfigError, DataError
from irn.model import IrnModel, ModelConfig

FORMAT_VERSION = 1
_STAMP = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    model: IrnModel
    fingerprint: str
    epoch: int = 0
    adam: AdamState | None = None
    rng_state: dict | None = None
    history: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _write_entry(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_STAMP)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def save_checkpoint(path, model: IrnModel, fingerprint: str | None = None, epoch: int = 0,
                    adam: AdamState | None = None, rng: np.random.Generator | None = None,
                    history: list[dict] | None = None, extra: dict | None = None) -> Path:
    """Write atomically: a crash mid-write leaves any earlier file in place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "fingerprint": fingerprint or model.config.fingerprint(),
        "epoch": int(epoch),
        "adam": None if adam is None else {
            "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "epsilon": adam.epsilon, "t": adam.t,
        },
        "rng_state": None if rng is None else rng.bit_generator.state,
        "history": history or [],
        "extra": extra or {},
    }
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w") as zf:
        for name, p in model.params.items():
            _write_entry(zf, f"param/{name}.npy", _npy_bytes(p.data))
        if adam is not None:
            for name in sorted(adam.m):
                _write_entry(zf, f"adam_m/{name}.npy", _npy_bytes(adam.m[name]))
                _write_entry(zf, f"adam_v/{name}.npy", _npy_bytes(adam.v[name]))
        blob = json.dumps(_jsonable(meta), sort_keys=True).encode()
        _write_entry(zf, "meta.npy", _npy_bytes(np.frombuffer(blob, dtype=np.uint8)))
    os.replace(tmp, path)
    return path


def load_checkpoint(path, expect_fingerprint: str | None = None) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise DataError(f"{path}: unreadable checkpoint ({e})") from None
    if "meta" not in arrays:
        raise DataError(f"{path}: no meta entry; not a checkpoint")
    meta = json.loads(arrays.pop("meta").tobytes().decode())
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: checkpoint format {meta.get('format_version')} unsupported")
    if expect_fingerprint is not None and meta["fingerprint"] != expect_fingerprint:
        raise ConfigError(
            f"{path}: config fingerprint {meta['fingerprint'][:12]} does not match {expect_fingerprint[:12]}"
        )
    cfg = ModelConfig.from_dict(meta["model_config"])
    params = {k[len("param/"):]: Tensor(v, requires_grad=True, name=k[len("param/"):])
              for k, v in arrays.items() if k.startswith("param/")}
    model = IrnModel(cfg, params)
    adam = None
    if meta["adam"] is not None:
        adam = AdamState(**meta["adam"])
        adam.m = {k[len("adam_m/"):]: v.copy() for k, v in arrays.items() if k.startswith("adam_m/")}
        adam.v = {k[len("adam_v/"):]: v.copy() for k, v in arrays.items() if k.startswith("adam_v/")}
    return Checkpoint(model, meta["fingerprint"], meta["epoch"], adam, meta["rng_state"],
                      meta["history"], meta["extra"])


def restore_rng(state: dict | None, seed: int = 0) -> np.random.Generator:
    rng = np.random.default_rng(seed)
    if state is not None:
        rng.bit_generator.state = state
    return rng
