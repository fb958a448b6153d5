"""From sequences to joint objects and interaction samples."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from irn.errors import ConfigError, DataError
from irn.skeleton.joints import SOURCE_MAPS, body_part_ids
from irn.skeleton.types import InteractionSample, PersonJointSet, SkeletonSequence
from irn.skeleton.windows import window_central, window_overlapping


def subsample_joints(seq: SkeletonSequence, source_map: Sequence[int] | str = "ntu25") -> SkeletonSequence:
    """Keep the joints listed in ``source_map`` (canonical order), relabelled 0..len-1."""
    if isinstance(source_map, str):
        try:
            source_map = SOURCE_MAPS[source_map]
        except KeyError:
            raise ConfigError(f"unknown joint map {source_map!r}; known: {sorted(SOURCE_MAPS)}") from None
    idx = np.asarray(source_map, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= seq.n_joints):
        raise ConfigError(
            f"joint map needs source index {int(idx.max())} but sequence has {seq.n_joints} joints"
        )
    return seq.replace(coords=seq.coords[:, :, idx].copy(), valid=seq.valid[:, :, idx].copy())


def normalize_minmax(seq: SkeletonSequence) -> SkeletonSequence:
    """Scale every axis into [0, 1] using the sequence's valid coordinates."""
    pts = seq.coords[seq.valid]
    if pts.size == 0:
        return seq
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    coords = np.where(seq.valid[..., None], (seq.coords - lo) / span, 0.0)
    return seq.replace(coords=coords)


def fill_gaps(coords: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Linear interpolation over invalid frames, per joint and axis.

    ``coords`` is (frames, joints, d) for one person. Gaps before the first
    or after the last valid frame take that frame's value; a joint never
    valid becomes zeros.
    """
    out = np.array(coords, dtype=np.float64, copy=True)
    F, N, d = out.shape
    t = np.arange(F)
    for n in range(N):
        ok = valid[:, n]
        if ok.all():
            continue
        if not ok.any():
            out[:, n] = 0.0
            continue
        for a in range(d):
            out[:, n, a] = np.interp(t, t[ok], coords[ok, n, a])
    return out


def build_joint_objects(seq: SkeletonSequence, window: Sequence[int], person: int,
                        filled: np.ndarray | None = None) -> PersonJointSet:
    """Joint objects of ``person`` over the frames in ``window``.

    ``filled`` may carry a precomputed :func:`fill_gaps` result for that person.
    """
    window = np.asarray(window, dtype=np.intp)
    if window.size == 0 or window.min() < 0 or window.max() >= seq.n_frames:
        raise DataError(f"window indices outside 0..{seq.n_frames - 1}")
    if not seq.valid[window, person].any():
        raise DataError(f"{seq.seq_id or 'sequence'}: person {person + 1} missing in every window frame")
    if filled is None:
        filled = fill_gaps(seq.coords[:, person], seq.valid[:, person])
    traj = filled[window]  # T x N x d
    N = seq.n_joints
    return PersonJointSet(
        coords=np.transpose(traj, (1, 0, 2)).copy(),
        joint_ids=np.arange(N),
        part_ids=np.asarray(body_part_ids(N)),
    )


def make_sample(seq: SkeletonSequence, T: int, dilation: int = 1, sequential: bool = False) -> InteractionSample:
    if seq.label is None:
        raise DataError(f"{seq.seq_id or 'sequence'} has no label")
    filled = [fill_gaps(seq.coords[:, p], seq.valid[:, p]) for p in range(2)]
    central = window_central(seq.n_frames, T, dilation)
    p1 = build_joint_objects(seq, central, 0, filled[0])
    p2 = build_joint_objects(seq, central, 1, filled[1])
    windows, offsets = [], (central[0],)
    if sequential:
        wins = window_overlapping(seq.n_frames, T)
        windows = [
            (build_joint_objects(seq, w, 0, filled[0]), build_joint_objects(seq, w, 1, filled[1]))
            for w in wins
        ]
        offsets = tuple(w[0] for w in wins)
    return InteractionSample(p1, p2, int(seq.label), windows, seq.seq_id, offsets)


def make_samples(seqs: Sequence[SkeletonSequence], T: int, dilation: int = 1,
                 sequential: bool = False) -> list[InteractionSample]:
    return [make_sample(s, T, dilation, sequential) for s in seqs]
