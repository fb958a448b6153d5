"""Evaluation splits: grouped k-fold and the id-list protocols."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from irn.errors import ConfigError
from irn.skeleton.types import FoldSplit, SkeletonSequence

# SBU participant-pair folds as listed with the dataset
SBU_FOLDS = (
    ("s01s02", "s03s04", "s05s02", "s06s04"),
    ("s02s03", "s02s07", "s03s05", "s05s03"),
    ("s01s03", "s01s07", "s07s01", "s07s03"),
    ("s02s01", "s02s06", "s03s02", "s03s06"),
    ("s04s02", "s04s03", "s04s06", "s06s02", "s06s03"),
)

NTU_CS_TRAIN_SUBJECTS = (1, 2, 4, 5, 8, 9, 13, 14, 15, 16, 17, 18, 19, 25, 27, 28, 31, 34, 35, 38)
NTU120_CS_TRAIN_SUBJECTS = NTU_CS_TRAIN_SUBJECTS + (
    45, 46, 47, 49, 50, 52, 53, 54, 55, 56, 57, 58, 59, 70, 74, 78, 80, 81, 82, 83, 84, 85,
    86, 89, 91, 92, 93, 94, 95, 97, 98, 100, 103,
)
NTU_CV_TRAIN_CAMERAS = (2, 3)
NTU120_CSET_TRAIN_SETUPS = tuple(range(2, 33, 2))

PROTOCOLS = ("kfold", "cross-subject", "cross-view", "cross-setup")
_ID_FIELD = {"cross-subject": "subject", "cross-view": "camera", "cross-setup": "setup"}


def kfold(seqs: Sequence[SkeletonSequence], k: int, seed: int = 0,
          group_by_pair: bool = True) -> list[FoldSplit]:
    """Partition sequences into ``k`` folds, keeping participant-pair groups together.

    Groups are placed largest first (ties in seeded random order) into the
    currently smallest fold, so fold sizes differ by at most one group.
    """
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    groups: dict[str, list[str]] = {}
    for s in seqs:
        key = s.group if (group_by_pair and s.group is not None) else f"seq:{s.seq_id}"
        groups.setdefault(key, []).append(s.seq_id)
    if len(groups) < k:
        raise ConfigError(f"only {len(groups)} groups for {k} folds")
    rng = np.random.default_rng(seed)
    keys = sorted(groups)
    order = rng.permutation(len(keys))
    keys = sorted((keys[i] for i in order), key=lambda g: -len(groups[g]))
    members: list[list[str]] = [[] for _ in range(k)]
    for g in keys:
        target = min(range(k), key=lambda f: (len(members[f]), f))
        members[target].extend(groups[g])
    return _splits_from_members(seqs, members, "kfold")


def explicit_folds(seqs: Sequence[SkeletonSequence], fold_groups: Sequence[Sequence[str]]) -> list[FoldSplit]:
    """Folds given as lists of group names (e.g. :data:`SBU_FOLDS`)."""
    lookup = {g: f for f, gs in enumerate(fold_groups) for g in gs}
    members: list[list[str]] = [[] for _ in fold_groups]
    missing = sorted({s.group for s in seqs if s.group not in lookup}, key=str)
    if missing:
        raise ConfigError(f"groups not covered by the split file: {missing}")
    for s in seqs:
        members[lookup[s.group]].append(s.seq_id)
    return _splits_from_members(seqs, members, "kfold")


def _splits_from_members(seqs, members, protocol) -> list[FoldSplit]:
    ids = [s.seq_id for s in seqs]
    out = []
    for f, test in enumerate(members):
        test_set = set(test)
        out.append(FoldSplit([i for i in ids if i not in test_set], [i for i in ids if i in test_set],
                             protocol, f))
    return out


def id_split(seqs: Sequence[SkeletonSequence], protocol: str, train_ids: Sequence[int]) -> FoldSplit:
    """Cross-subject / cross-view / cross-setup: sequences whose id is in ``train_ids`` train."""
    field = _ID_FIELD[protocol]
    train_ids = set(int(i) for i in train_ids)
    train, test = [], []
    for s in seqs:
        value = getattr(s, field)
        if value is None:
            raise ConfigError(f"{protocol} needs '{field}' on every sequence; {s.seq_id} has none")
        (train if value in train_ids else test).append(s.seq_id)
    return FoldSplit(train, test, protocol, 0)


def make_folds(seqs: Sequence[SkeletonSequence], protocol: str = "kfold", k: int = 5, seed: int = 0,
               train_ids: Sequence[int] | None = None,
               fold_groups: Sequence[Sequence[str]] | None = None) -> list[FoldSplit]:
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")
    ids = [s.seq_id for s in seqs]
    if len(set(ids)) != len(ids):
        raise ConfigError("sequence ids must be unique to build folds")
    if protocol == "kfold":
        if fold_groups is not None:
            return explicit_folds(seqs, fold_groups)
        return kfold(seqs, k, seed)
    if train_ids is None:
        raise ConfigError(f"{protocol} needs a list of training ids")
    return [id_split(seqs, protocol, train_ids)]
