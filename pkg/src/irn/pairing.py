"""Relation pair enumeration and the pair-wise distance/motion features.

Pairs are enumerated in lexicographic (joint_id_a, joint_id_b) order whatever
the storage order of the joint sets, so a batch is reproducible row for row.

A relation-module input row is laid out as::

    a.coords | a.joint_id, a.body_part_id | b.coords | b.joint_id, b.body_part_id | D | M

with the trailing ``D | M`` block (2T - 1 values) present only when the
pair-wise features are switched on.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from irn.errors import DataError
from irn.skeleton.joints import BODY_PARTS
from irn.skeleton.types import JointObject, PersonJointSet


class PairKind(enum.Enum):
    INTER_FORWARD = "inter_forward"
    INTER_BACKWARD = "inter_backward"
    INTRA_P1 = "intra_p1"
    INTRA_P2 = "intra_p2"
    NAIVE = "naive"


INTER_KINDS = (PairKind.INTER_FORWARD, PairKind.INTER_BACKWARD)
INTRA_KINDS = (PairKind.INTRA_P1, PairKind.INTRA_P2)


@dataclass(frozen=True)
class RelationPair:
    a: JointObject
    b: JointObject
    kind: PairKind


def inter_count(n: int) -> int:
    return n * n


def intra_count(n: int) -> int:
    return n * (n - 1) // 2


def naive_count(n: int) -> int:
    return 2 * n * n + n * (n - 1)


# (person of a, storage idx of a, person of b, storage idx of b); person 0 is P1
@dataclass
class _Index:
    pa: np.ndarray
    ia: np.ndarray
    pb: np.ndarray
    ib: np.ndarray

    def __len__(self):
        return len(self.ia)

    @staticmethod
    def cat(parts: list["_Index"]) -> "_Index":
        return _Index(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("pa", "ia", "pb", "ib")))


@dataclass
class PairBatch:
    persons: tuple[PersonJointSet, ...]
    index: dict[PairKind, _Index] = field(default_factory=dict)

    def count(self, kind: PairKind) -> int:
        return len(self.index[kind])

    @property
    def kinds(self) -> list[PairKind]:
        return list(self.index)

    def pairs(self, kind: PairKind) -> list[RelationPair]:
        idx = self.index[kind]
        objs = [p.joints for p in self.persons]
        return [
            RelationPair(objs[pa][ia], objs[pb][ib], kind)
            for pa, ia, pb, ib in zip(idx.pa, idx.ia, idx.pb, idx.ib)
        ]

    def rows(self, kind: PairKind, use_h: bool = True, one_hot: bool = False) -> np.ndarray:
        idx = self.index[kind]
        return _assemble(self.persons, idx, use_h, one_hot)


def _order(p: PersonJointSet) -> np.ndarray:
    return np.argsort(p.joint_ids, kind="stable")


def _check_same(p1: PersonJointSet, p2: PersonJointSet) -> None:
    if p1.n_joints != p2.n_joints:
        raise DataError(f"joint sets differ in size: {p1.n_joints} vs {p2.n_joints}")
    if p1.coords.shape[1:] != p2.coords.shape[1:]:
        raise DataError(f"joint sets differ in (T, d): {p1.coords.shape[1:]} vs {p2.coords.shape[1:]}")


def _inter_index(src: int, dst: int, oa: np.ndarray, ob: np.ndarray) -> _Index:
    n = len(oa)
    ia = np.repeat(oa, n)
    ib = np.tile(ob, n)
    return _Index(np.full(n * n, src), ia, np.full(n * n, dst), ib)


def _intra_index(person: int, order: np.ndarray) -> _Index:
    i, k = np.triu_indices(len(order), 1)
    return _Index(np.full(len(i), person), order[i], np.full(len(i), person), order[k])


def inter_pairs(p1: PersonJointSet, p2: PersonJointSet) -> PairBatch:
    _check_same(p1, p2)
    o1, o2 = _order(p1), _order(p2)
    return PairBatch((p1, p2), {
        PairKind.INTER_FORWARD: _inter_index(0, 1, o1, o2),
        PairKind.INTER_BACKWARD: _inter_index(1, 0, o2, o1),
    })


def intra_pairs(p: PersonJointSet, kind: PairKind = PairKind.INTRA_P1) -> PairBatch:
    if p.n_joints < 2:
        raise DataError("intra pairs need at least two joints")
    return PairBatch((p,), {kind: _intra_index(0, _order(p))})


def naive_pairs(p1: PersonJointSet, p2: PersonJointSet) -> PairBatch:
    _check_same(p1, p2)
    if p1.n_joints < 2:
        raise DataError("intra pairs need at least two joints")
    o1, o2 = _order(p1), _order(p2)
    idx = _Index.cat([
        _inter_index(0, 1, o1, o2), _inter_index(1, 0, o2, o1),
        _intra_index(0, o1), _intra_index(1, o2),
    ])
    return PairBatch((p1, p2), {PairKind.NAIVE: idx})


def all_pairs(p1: PersonJointSet, p2: PersonJointSet) -> PairBatch:
    """Inter (both directions) and intra (both persons) under their own kinds."""
    batch = inter_pairs(p1, p2)
    batch.index[PairKind.INTRA_P1] = _intra_index(0, _order(p1))
    batch.index[PairKind.INTRA_P2] = _intra_index(1, _order(p2))
    naive = naive_pairs(p1, p2)
    batch.index[PairKind.NAIVE] = naive.index[PairKind.NAIVE]
    return batch


# pair-wise structured features

def _traj_pair(a: JointObject, b: JointObject) -> tuple[np.ndarray, np.ndarray]:
    if a.coords.shape != b.coords.shape or a.d != b.d:
        raise DataError(f"joint objects differ in length: {a.coords.shape} vs {b.coords.shape}")
    return a.trajectory(), b.trajectory()


def distance_vector(a: JointObject, b: JointObject) -> np.ndarray:
    """Per-frame Euclidean distance between the two joints (length T)."""
    ta, tb = _traj_pair(a, b)
    return np.sqrt(((ta - tb) ** 2).sum(axis=-1))


def motion_vector(a: JointObject, b: JointObject) -> np.ndarray:
    """Distance from ``a`` at frame t to ``b`` at frame t+1 (length T-1). Not symmetric."""
    ta, tb = _traj_pair(a, b)
    if ta.shape[0] < 2:
        raise DataError("motion needs at least two frames")
    return np.sqrt(((ta[:-1] - tb[1:]) ** 2).sum(axis=-1))


def pairwise_feature_h(a: JointObject, b: JointObject) -> np.ndarray:
    return np.concatenate([distance_vector(a, b), motion_vector(a, b)])


def _tags(joint_ids, part_ids, one_hot: bool, n_joints: int) -> np.ndarray:
    if not one_hot:
        return np.stack([joint_ids, part_ids], axis=1).astype(np.float64)
    out = np.zeros((len(joint_ids), n_joints + len(BODY_PARTS)))
    out[np.arange(len(joint_ids)), joint_ids] = 1.0
    out[np.arange(len(joint_ids)), n_joints + part_ids] = 1.0
    return out


def tag_width(n_joints: int, one_hot: bool = False) -> int:
    return n_joints + len(BODY_PARTS) if one_hot else 2


def row_width(T: int, d: int, n_joints: int, use_h: bool, one_hot: bool = False) -> int:
    obj = T * d + tag_width(n_joints, one_hot)
    return 2 * obj + ((2 * T - 1) if use_h else 0)


def assemble_relation_input(pair: RelationPair, use_h: bool = True, one_hot: bool = False,
                            n_joints: int | None = None) -> np.ndarray:
    """Single input row for the relation module (see module docstring for the layout)."""
    a, b = pair.a, pair.b
    if one_hot and n_joints is None:
        raise DataError("one-hot tags need n_joints")
    ta = _tags(np.array([a.joint_id]), np.array([a.body_part_id]), one_hot, n_joints or 0)[0]
    tb = _tags(np.array([b.joint_id]), np.array([b.body_part_id]), one_hot, n_joints or 0)[0]
    parts = [a.coords, ta, b.coords, tb]
    if use_h:
        parts.append(pairwise_feature_h(a, b))
    return np.concatenate(parts)


def _assemble(persons, idx: _Index, use_h: bool, one_hot: bool) -> np.ndarray:
    coords = np.stack([p.coords for p in persons])  # persons x N x T x d
    jids = np.stack([p.joint_ids for p in persons])
    pids = np.stack([p.part_ids for p in persons])
    n_joints = persons[0].n_joints
    A = coords[idx.pa, idx.ia]
    B = coords[idx.pb, idx.ib]
    P, T, d = A.shape
    parts = [
        A.reshape(P, T * d), _tags(jids[idx.pa, idx.ia], pids[idx.pa, idx.ia], one_hot, n_joints),
        B.reshape(P, T * d), _tags(jids[idx.pb, idx.ib], pids[idx.pb, idx.ib], one_hot, n_joints),
    ]
    if use_h:
        parts.append(np.sqrt(((A - B) ** 2).sum(axis=-1)))
        parts.append(np.sqrt(((A[:, :-1] - B[:, 1:]) ** 2).sum(axis=-1)))
    return np.concatenate(parts, axis=1)


def relation_rows(p1: PersonJointSet, p2: PersonJointSet, kinds, use_h: bool = True,
                  one_hot: bool = False) -> dict[PairKind, np.ndarray]:
    """Input matrices for the requested pair kinds of one (P1, P2) window."""
    _check_same(p1, p2)
    o1, o2 = _order(p1), _order(p2)
    builders = {
        PairKind.INTER_FORWARD: lambda: _inter_index(0, 1, o1, o2),
        PairKind.INTER_BACKWARD: lambda: _inter_index(1, 0, o2, o1),
        PairKind.INTRA_P1: lambda: _intra_index(0, o1),
        PairKind.INTRA_P2: lambda: _intra_index(1, o2),
        PairKind.NAIVE: lambda: _Index.cat([
            _inter_index(0, 1, o1, o2), _inter_index(1, 0, o2, o1),
            _intra_index(0, o1), _intra_index(1, o2),
        ]),
    }
    if any(k in INTRA_KINDS or k is PairKind.NAIVE for k in kinds) and p1.n_joints < 2:
        raise DataError("intra pairs need at least two joints")
    return {k: _assemble((p1, p2), builders[k](), use_h, one_hot) for k in kinds}
