"""Readers for SBU, per-frame pose-estimator output, NTU RGB+D, and the canonical JSON record.

SBU Kinect Interaction layout (as distributed)::

    <root>/<pair>/<category>/<take>/skeleton_pos.txt      e.g. s01s02/03/001/

Each line of ``skeleton_pos.txt`` is ``frame, x1, y1, z1, ..., x15, y15, z15``
for person 1 followed by the same 45 values for person 2: 1 + 2*15*3 = 91
comma-separated numbers. Coordinates are the dataset's normalised values and
are kept as-is.
"""
from __future__ import annotations

import json
import logging
import os
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from irn.errors import DataError, ParseError
from irn.skeleton.types import SkeletonSequence

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SBU_CLASSES = (
    "approaching", "departing", "kicking", "pushing",
    "shaking_hands", "hugging", "exchanging", "punching",
)
SBU_JOINTS = 15
SBU_FPS = 15.0
SBU_ROW_LEN = 1 + 2 * SBU_JOINTS * 3

# interaction-only classes: NTU RGB+D A50-A60, NTU RGB+D 120 adds A106-A120
NTU_MUTUAL_ACTIONS = tuple(range(50, 61)) + tuple(range(106, 121))
_NTU_NAME = re.compile(r"S(\d{3})C(\d{3})P(\d{3})R(\d{3})A(\d{3})")


def _parse_sbu_file(path: Path) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = [p for p in re.split(r"[,\s]+", line) if p]
            if len(parts) != SBU_ROW_LEN:
                raise ParseError(
                    f"expected {SBU_ROW_LEN} values per row, found {len(parts)}", path, lineno
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise ParseError(f"non-numeric value ({exc})", path, lineno) from None
    if not rows:
        raise ParseError("no frames", path)
    arr = np.asarray(rows)
    coords = arr[:, 1:].reshape(len(rows), 2, SBU_JOINTS, 3)
    return arr[:, 0], coords


def load_sbu(root: str | os.PathLike) -> list[SkeletonSequence]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"SBU root not found: {root}")
    files = sorted(root.rglob("skeleton_pos.txt"))
    if not files:
        warnings.warn(f"no SBU skeleton files under {root}", stacklevel=2)
        return []
    out = []
    for path in files:
        take_dir = path.parent
        cat_dir = take_dir.parent
        pair_dir = cat_dir.parent
        try:
            label = int(cat_dir.name) - 1
        except ValueError:
            raise ParseError(f"category folder {cat_dir.name!r} is not numeric", path) from None
        if not 0 <= label < len(SBU_CLASSES):
            raise ParseError(f"category {cat_dir.name} outside 01..08", path)
        _, coords = _parse_sbu_file(path)
        out.append(SkeletonSequence(
            coords=coords,
            valid=np.ones(coords.shape[:3], dtype=bool),
            fps=SBU_FPS,
            label=label,
            group=pair_dir.name,
            seq_id=f"{pair_dir.name}/{cat_dir.name}/{take_dir.name}",
        ))
    return out


@dataclass
class CandidateSequence:
    """Per-frame pose candidates before identity assignment.

    ``frames[t]`` is a list of (joints, 3) arrays holding x, y, confidence.
    """

    frames: list[list[np.ndarray]]
    fps: float = 30.0
    seq_id: str = ""

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def _poses_from_record(obj, path: Path) -> list[np.ndarray]:
    if isinstance(obj, dict):
        if "people" in obj:
            flat = [p.get("pose_keypoints_2d", []) for p in obj["people"]]
        elif "poses" in obj:
            flat = obj["poses"]
        else:
            raise ParseError("record has neither 'people' nor 'poses'", path)
    elif isinstance(obj, list):
        flat = obj
    else:
        raise ParseError("record must be an object or a list of poses", path)
    poses = []
    for k, p in enumerate(flat):
        arr = np.asarray(p, dtype=np.float64).reshape(-1)
        if arr.size == 0 or arr.size % 3:
            raise ParseError(f"pose {k} has {arr.size} values, not a multiple of 3", path)
        poses.append(arr.reshape(-1, 3))
    return poses


def load_pose_stream(directory: str | os.PathLike, fps: float = 30.0) -> CandidateSequence:
    """Read one JSON record per frame (files sorted by name).

    Accepts OpenPose output (``{"people": [{"pose_keypoints_2d": [...]}]}``),
    ``{"poses": [[x, y, c, ...], ...]}`` or a bare list of flat pose arrays.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"pose directory not found: {directory}")
    files = sorted(directory.glob("*.json"))
    if not files:
        raise DataError(f"no frame records in {directory}")
    frames = []
    for path in files:
        try:
            obj = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"unreadable frame record ({exc})", path) from None
        frames.append(_poses_from_record(obj, path))
    return CandidateSequence(frames, fps=fps, seq_id=directory.name)


def pose_xy_valid(pose: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split an (x, y, confidence) pose; zero-confidence joints become (0, 0) and invalid."""
    valid = pose[:, 2] > 0
    xy = np.where(valid[:, None], pose[:, :2], 0.0)
    return xy, valid


def load_ntu(path: str | os.PathLike) -> SkeletonSequence:
    """Read one NTU RGB+D ``.skeleton`` file (25 Kinect v2 joints, 3D camera coords).

    The two body ids tracked in the most frames become the two person slots.
    """
    path = Path(path)
    with open(path) as fh:
        tokens = fh.read().split("\n")
    lines = [ln.strip() for ln in tokens]
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and lines[pos] == "":
            pos += 1
        if pos >= len(lines):
            raise ParseError("unexpected end of file", path, pos + 1)
        pos += 1
        return lines[pos - 1], pos

    try:
        n_frames = int(next_line()[0])
        frames: list[dict[str, tuple[np.ndarray, np.ndarray]]] = []
        for _ in range(n_frames):
            bodies = {}
            n_bodies = int(next_line()[0])
            for _ in range(n_bodies):
                info, _ = next_line()
                body_id = info.split()[0]
                n_joints = int(next_line()[0])
                xyz = np.zeros((n_joints, 3))
                ok = np.zeros(n_joints, dtype=bool)
                for j in range(n_joints):
                    line, lineno = next_line()
                    vals = line.split()
                    if len(vals) < 12:
                        raise ParseError(f"joint row has {len(vals)} values, expected 12", path, lineno)
                    xyz[j] = [float(v) for v in vals[:3]]
                    ok[j] = int(float(vals[11])) != 0
                bodies[body_id] = (xyz, ok)
            frames.append(bodies)
    except ValueError as exc:
        raise ParseError(f"malformed NTU skeleton ({exc})", path, pos) from None
    if not frames:
        raise DataError(f"{path}: zero frames")

    counts: dict[str, int] = {}
    for fr in frames:
        for bid in fr:
            counts[bid] = counts.get(bid, 0) + 1
    keep = sorted(counts, key=lambda b: (-counts[b], b))[:2]
    n_joints = next(iter(next(f for f in frames if f).values()))[0].shape[0]
    coords = np.zeros((len(frames), 2, n_joints, 3))
    valid = np.zeros((len(frames), 2, n_joints), dtype=bool)
    for t, fr in enumerate(frames):
        for slot, bid in enumerate(keep):
            if bid in fr:
                coords[t, slot], valid[t, slot] = fr[bid]

    meta = {}
    m = _NTU_NAME.search(path.name)
    if m:
        setup, camera, subject, _, action = (int(g) for g in m.groups())
        meta = dict(setup=setup, camera=camera, subject=subject)
        label = NTU_MUTUAL_ACTIONS.index(action) if action in NTU_MUTUAL_ACTIONS else None
    else:
        label = None
    return SkeletonSequence(coords, valid, fps=30.0, label=label, seq_id=path.stem,
                            group=None, **meta)


def load_ntu_dir(directory: str | os.PathLike, mutual_only: bool = True) -> list[SkeletonSequence]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"NTU directory not found: {directory}")
    out = []
    for path in sorted(directory.glob("*.skeleton")):
        m = _NTU_NAME.search(path.name)
        if mutual_only and (not m or int(m.group(5)) not in NTU_MUTUAL_ACTIONS):
            continue
        out.append(load_ntu(path))
    if not out:
        warnings.warn(f"no NTU skeleton files under {directory}", stacklevel=2)
    return out


# canonical interchange record

def sequence_to_record(seq: SkeletonSequence) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": seq.seq_id,
        "d": seq.d,
        "fps": seq.fps,
        "label": seq.label,
        "subject": seq.subject,
        "camera": seq.camera,
        "setup": seq.setup,
        "group": seq.group,
        "persons": [seq.coords[:, p].tolist() for p in range(2)],
        "valid": [seq.valid[:, p].astype(int).tolist() for p in range(2)],
    }


def record_to_sequence(rec: dict, path=None) -> SkeletonSequence:
    if rec.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {rec.get('schema_version')!r}", path)
    try:
        persons = [np.asarray(p, dtype=np.float64) for p in rec["persons"]]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad persons array ({exc})", path) from None
    if len(persons) != 2 or persons[0].shape != persons[1].shape or persons[0].ndim != 3:
        raise ParseError("persons must hold two [frame][joint][coord] arrays of equal shape", path)
    coords = np.stack(persons, axis=1)
    if coords.shape[3] != rec.get("d"):
        raise ParseError(f"d={rec.get('d')} but coordinates have {coords.shape[3]} dims", path)
    if "valid" in rec:
        valid = np.stack([np.asarray(v, dtype=bool) for v in rec["valid"]], axis=1)
    else:
        valid = np.ones(coords.shape[:3], dtype=bool)
    return SkeletonSequence(
        coords, valid, fps=float(rec.get("fps", 30.0)), label=rec.get("label"),
        subject=rec.get("subject"), camera=rec.get("camera"), setup=rec.get("setup"),
        group=rec.get("group"), seq_id=str(rec.get("id", "")),
    )


def write_record(seq: SkeletonSequence, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(sequence_to_record(seq)))


def read_record(path: str | os.PathLike) -> SkeletonSequence:
    path = Path(path)
    try:
        rec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc})", path) from None
    return record_to_sequence(rec, path)


def write_manifest(seqs: Iterable[SkeletonSequence], files: Iterable[str], path, dataset: str,
                   classes: Iterable[str] | None = None) -> dict:
    entries = []
    for seq, fname in zip(seqs, files):
        entries.append({
            "id": seq.seq_id, "file": fname, "label": seq.label, "subject": seq.subject,
            "camera": seq.camera, "setup": seq.setup, "group": seq.group,
        })
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "dataset": dataset,
        "classes": list(classes) if classes is not None else None,
        "sequences": entries,
    }
    Path(path).write_text(json.dumps(manifest, indent=1))
    return manifest


def read_manifest(path: str | os.PathLike) -> tuple[dict, list[SkeletonSequence]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid manifest JSON ({exc})", path) from None
    base = path.parent
    seqs = [read_record(base / e["file"]) for e in manifest.get("sequences", [])]
    return manifest, seqs
