import math
from collections import Counter

import numpy as np
import pytest

from irn.errors import DataError
from irn.pairing import (
    PairKind, assemble_relation_input, distance_vector, inter_pairs, intra_pairs, motion_vector,
    naive_pairs, pairwise_feature_h, relation_rows, row_width,
)
from irn.skeleton.types import JointObject, PersonJointSet


def person(N, T=4, d=3, seed=0):
    rng = np.random.default_rng(seed)
    parts = rng.integers(0, 5, size=N)
    return PersonJointSet(rng.normal(size=(N, T, d)), np.arange(N), parts)


def joint(traj, jid=0, part=0):
    traj = np.asarray(traj, dtype=float)
    return JointObject(traj.reshape(-1), jid, part, traj.shape[1])


def loop_distance(a, b):
    out = []
    for t in range(a.T):
        out.append(math.sqrt(sum((a.frame(t)[k] - b.frame(t)[k]) ** 2 for k in range(a.d))))
    return np.array(out)


def loop_motion(a, b):
    out = []
    for t in range(a.T - 1):
        out.append(math.sqrt(sum((a.frame(t)[k] - b.frame(t + 1)[k]) ** 2 for k in range(a.d))))
    return np.array(out)


@pytest.mark.parametrize("N", [1, 2, 5, 15])
def test_inter_counts(N):
    b = inter_pairs(person(N), person(N, seed=1))
    assert b.count(PairKind.INTER_FORWARD) == N * N
    assert b.count(PairKind.INTER_BACKWARD) == N * N
    firsts = Counter(p.a.joint_id for p in b.pairs(PairKind.INTER_FORWARD))
    assert all(v == N for v in firsts.values()) and len(firsts) == N


def test_inter_directions_and_order():
    p1, p2 = person(3), person(3, seed=1)
    b = inter_pairs(p1, p2)
    fwd = b.pairs(PairKind.INTER_FORWARD)
    assert [(p.a.joint_id, p.b.joint_id) for p in fwd] == [(i, k) for i in range(3) for k in range(3)]
    assert np.array_equal(fwd[1].a.coords, p1.joints[0].coords)
    assert np.array_equal(fwd[1].b.coords, p2.joints[1].coords)
    bwd = b.pairs(PairKind.INTER_BACKWARD)
    assert np.array_equal(bwd[1].a.coords, p2.joints[0].coords)
    with pytest.raises(DataError):
        inter_pairs(person(3), person(4))


@pytest.mark.parametrize("N", [2, 5, 15])
def test_intra_counts(N):
    pairs = intra_pairs(person(N)).pairs(PairKind.INTRA_P1)
    assert len(pairs) == N * (N - 1) // 2
    assert all(p.a.joint_id < p.b.joint_id for p in pairs)
    with pytest.raises(DataError):
        intra_pairs(person(1))


@pytest.mark.parametrize("N", [2, 5, 15])
def test_naive_is_union_of_specialised(N):
    p1, p2 = person(N), person(N, seed=1)
    naive = naive_pairs(p1, p2)
    assert naive.count(PairKind.NAIVE) == 2 * N * N + N * (N - 1)
    key = lambda p: (p.a.coords.tobytes(), p.a.joint_id, p.b.coords.tobytes(), p.b.joint_id)
    union = Counter()
    inter = inter_pairs(p1, p2)
    for kind in (PairKind.INTER_FORWARD, PairKind.INTER_BACKWARD):
        union.update(map(key, inter.pairs(kind)))
    union.update(map(key, intra_pairs(p1).pairs(PairKind.INTRA_P1)))
    union.update(map(key, intra_pairs(p2).pairs(PairKind.INTRA_P1)))
    assert Counter(map(key, naive.pairs(PairKind.NAIVE))) == union


def test_distance_and_motion_examples():
    same = joint([[1, 2, 3], [4, 5, 6]])
    assert distance_vector(same, same).tolist() == [0.0, 0.0]
    a = joint([[0, 0], [0, 0]])
    b = joint([[3, 4], [3, 4]])
    assert distance_vector(a, b).tolist() == [5.0, 5.0]
    k = joint([[3, 4], [0, 4]])
    assert motion_vector(a, k).tolist() == [4.0]
    assert motion_vector(k, a).tolist() == [5.0]
    with pytest.raises(DataError):
        motion_vector(joint([[0, 0]]), joint([[1, 1]]))
    with pytest.raises(DataError):
        distance_vector(joint([[0, 0]]), joint([[1, 1], [2, 2]]))


def test_static_motion_equals_distance_prefix():
    a = joint(np.tile([1.0, -2.0, 0.5], (6, 1)))
    b = joint(np.tile([0.0, 3.0, 1.0], (6, 1)))
    assert np.array_equal(motion_vector(a, b), distance_vector(a, b)[:-1])


def test_h_layout():
    rng = np.random.default_rng(2)
    a, b = joint(rng.normal(size=(8, 3))), joint(rng.normal(size=(8, 3)))
    h = pairwise_feature_h(a, b)
    assert h.shape == (15,)
    assert np.array_equal(h[:8], pairwise_feature_h(b, a)[:8])
    z = joint(np.ones((8, 3)))
    assert not pairwise_feature_h(z, z).any()


def test_features_match_scalar_loops_on_random_pairs():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(1000):
        T, d = rng.integers(2, 9), rng.integers(2, 4)
        a, b = joint(rng.normal(size=(T, d))), joint(rng.normal(size=(T, d)))
        worst = max(worst, np.max(np.abs(distance_vector(a, b) - loop_distance(a, b))))
        worst = max(worst, np.max(np.abs(motion_vector(a, b) - loop_motion(a, b))))
        h = pairwise_feature_h(a, b)
        ref = np.concatenate([loop_distance(a, b), loop_motion(a, b)])
        worst = max(worst, np.max(np.abs(h - ref)))
    assert worst <= 1e-12


@pytest.mark.parametrize("T,expect", [(8, 67), (32, 259)])
def test_row_width(T, expect):
    rng = np.random.default_rng(0)
    a, b = joint(rng.normal(size=(T, 3)), 1, 2), joint(rng.normal(size=(T, 3)), 4, 3)
    from irn.pairing import RelationPair
    row = assemble_relation_input(RelationPair(a, b, PairKind.INTER_FORWARD), use_h=True)
    assert row.shape == (expect,) == (row_width(T, 3, 15, True),)
    short = assemble_relation_input(RelationPair(a, b, PairKind.INTER_FORWARD), use_h=False)
    assert np.array_equal(short, row[: expect - (2 * T - 1)])
    assert row[3 * T:3 * T + 2].tolist() == [1.0, 2.0]


def test_vectorised_rows_match_per_pair_assembly():
    p1, p2 = person(4, T=5, seed=3), person(4, T=5, seed=4)
    rows = relation_rows(p1, p2, list(PairKind), use_h=True)
    from irn.pairing import all_pairs
    batch = all_pairs(p1, p2)
    for kind in PairKind:
        ref = np.stack([assemble_relation_input(p, True) for p in batch.pairs(kind)])
        assert np.array_equal(rows[kind], ref)


def test_one_hot_tags():
    p1, p2 = person(3, T=2), person(3, T=2, seed=1)
    rows = relation_rows(p1, p2, [PairKind.INTER_FORWARD], use_h=False, one_hot=True)[PairKind.INTER_FORWARD]
    assert rows.shape[1] == row_width(2, 3, 3, False, one_hot=True)
    tag = rows[0, 6:6 + 8]
    assert tag[:3].tolist() == [1, 0, 0] and tag[3:].sum() == 1


def test_storage_permutation_does_not_change_rows():
    p1, p2 = person(6, seed=5), person(6, seed=6)
    perm = np.random.default_rng(0).permutation(6)
    a = relation_rows(p1, p2, list(PairKind))
    b = relation_rows(p1.permuted(perm), p2.permuted(perm[::-1]), list(PairKind))
    for k in PairKind:
        assert np.array_equal(a[k], b[k])


def test_d_symmetric_and_nonnegative():
    rng = np.random.default_rng(8)
    for _ in range(200):
        a, b = joint(rng.normal(size=(5, 3))), joint(rng.normal(size=(5, 3)))
        assert np.array_equal(distance_vector(a, b), distance_vector(b, a))
        assert (distance_vector(a, b) >= 0).all() and (motion_vector(a, b) >= 0).all()
