"""Frame-to-frame identity assignment for per-frame pose estimates."""
from __future__ import annotations

from itertools import combinations

import numpy as np

from irn.errors import DataError
from irn.skeleton.loaders import CandidateSequence, pose_xy_valid
from irn.skeleton.types import SkeletonSequence


def pose_distance(xy_a, valid_a, xy_b, valid_b) -> float:
    """Mean Euclidean distance over joints valid in both poses; inf if none are."""
    both = valid_a & valid_b
    if not both.any():
        return np.inf
    return float(np.linalg.norm(xy_a[both] - xy_b[both], axis=1).mean())


def _seed(frames) -> int:
    for t, cands in enumerate(frames):
        if sum(v.any() for _, v in cands) >= 2:
            return t
    raise DataError("no frame contains two poses; cannot form an interaction")


def _seed_rank(cands, ab):
    (xa, va), (xb, vb) = cands[ab[0]], cands[ab[1]]
    ca = xa[va].mean(axis=0) if va.any() else np.full(2, np.inf)
    cb = xb[vb].mean(axis=0) if vb.any() else np.full(2, np.inf)
    return (-(va.sum() + vb.sum()), float(np.linalg.norm(ca - cb)), ab)


def assign_bodies(candidates: CandidateSequence, max_cost: float | None = None) -> SkeletonSequence:
    """Track two persons through a stream of unordered pose candidates.

    Identities are seeded on the first frame holding at least two poses: the
    pair with most valid joints and, among those, the closest centroids,
    ordered left to right. Each later frame is matched greedily by lowest
    cost against each track's last known pose. An unmatched track repeats
    that pose with validity off, and surplus candidates are dropped. ``extra["assignment"]`` keeps, per frame, the
    candidate index taken by each track (-1 when unmatched).
    """
    frames = [[pose_xy_valid(p) for p in fr] for fr in candidates.frames]
    if not frames:
        raise DataError("zero frames")
    t0 = _seed(frames)
    seeds = list(min(combinations(range(len(frames[t0])), 2), key=lambda ab: _seed_rank(frames[t0], ab)))
    seeds.sort(key=lambda k: frames[t0][k][0][frames[t0][k][1], 0].mean())
    n_joints = frames[t0][seeds[0]][0].shape[0]

    last_xy = np.stack([frames[t0][k][0].copy() for k in seeds])
    last_valid = np.stack([frames[t0][k][1].copy() for k in seeds])

    T = len(frames)
    coords = np.zeros((T, 2, n_joints, 2))
    valid = np.zeros((T, 2, n_joints), dtype=bool)
    assignment = np.full((T, 2), -1, dtype=np.int64)
    coords[:t0] = last_xy

    for t in range(t0, T):
        cands = [c for c in frames[t] if c[0].shape[0] == n_joints]
        idx = [k for k, c in enumerate(frames[t]) if c[0].shape[0] == n_joints]
        cost = np.full((2, len(cands)), np.inf)
        for p in range(2):
            for j, (xy, v) in enumerate(cands):
                cost[p, j] = pose_distance(last_xy[p], last_valid[p], xy, v)
        if max_cost is not None:
            cost[cost > max_cost] = np.inf
        taken = [None, None]
        while np.isfinite(cost).any():
            p, j = np.unravel_index(np.argmin(cost), cost.shape)
            taken[p] = j
            cost[p, :] = np.inf
            cost[:, j] = np.inf
        for p in range(2):
            j = taken[p]
            if j is None:
                coords[t, p] = last_xy[p]
                continue
            xy, v = cands[j]
            coords[t, p] = xy
            valid[t, p] = v
            assignment[t, p] = idx[j]
            last_xy[p][v] = xy[v]
            last_valid[p] |= v

    return SkeletonSequence(
        coords, valid, fps=candidates.fps, seq_id=candidates.seq_id,
        extra={"assignment": assignment},
    )
