from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from irn.errors import DataError


@dataclass
class SkeletonSequence:
    """Two person slots of joint coordinates over time.

    ``coords`` has shape (frames, 2, joints, d); ``valid`` has shape
    (frames, 2, joints). A person slot that is missing for a frame has all of
    its joints marked invalid.
    """

    coords: np.ndarray
    valid: np.ndarray
    fps: float = 30.0
    label: Optional[int] = None
    subject: Optional[int] = None
    camera: Optional[int] = None
    setup: Optional[int] = None
    group: Optional[str] = None
    seq_id: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.valid is None:
            self.valid = np.ones(self.coords.shape[:3], dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.coords.ndim != 4 or self.coords.shape[1] != 2:
            raise DataError(f"coords must be (frames, 2, joints, d), got {self.coords.shape}")
        if self.coords.shape[3] not in (2, 3):
            raise DataError(f"coordinate dimensionality must be 2 or 3, got {self.coords.shape[3]}")
        if self.valid.shape != self.coords.shape[:3]:
            raise DataError(f"valid mask {self.valid.shape} does not match coords {self.coords.shape}")

    @property
    def n_frames(self) -> int:
        return self.coords.shape[0]

    @property
    def n_joints(self) -> int:
        return self.coords.shape[2]

    @property
    def d(self) -> int:
        return self.coords.shape[3]

    def replace(self, **changes) -> "SkeletonSequence":
        fields = dict(
            coords=self.coords, valid=self.valid, fps=self.fps, label=self.label,
            subject=self.subject, camera=self.camera, setup=self.setup, group=self.group,
            seq_id=self.seq_id, extra=dict(self.extra),
        )
        fields.update(changes)
        return SkeletonSequence(**fields)


@dataclass(frozen=True)
class JointObject:
    """One joint over a T-frame window: frame-major coords plus its id tags."""

    coords: np.ndarray  # length T*d
    joint_id: int
    body_part_id: int
    d: int

    @property
    def T(self) -> int:
        return self.coords.shape[0] // self.d

    def frame(self, t: int) -> np.ndarray:
        return self.coords[t * self.d:(t + 1) * self.d]

    def trajectory(self) -> np.ndarray:
        return self.coords.reshape(self.T, self.d)


@dataclass
class PersonJointSet:
    """All N joint objects of one person for one window.

    Stored as arrays for vectorised pairing: ``coords`` is (N, T, d) and the
    id arrays are length N. Row order is storage order only; the joint
    identity travels with ``joint_ids``.
    """

    coords: np.ndarray
    joint_ids: np.ndarray
    part_ids: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.joint_ids = np.asarray(self.joint_ids, dtype=np.int64)
        self.part_ids = np.asarray(self.part_ids, dtype=np.int64)
        N = self.coords.shape[0]
        if self.joint_ids.shape != (N,) or self.part_ids.shape != (N,):
            raise DataError("joint/part id arrays must have one entry per joint")
        if sorted(self.joint_ids.tolist()) != list(range(N)):
            raise DataError(f"joint ids must cover 0..{N - 1} exactly once")

    @property
    def n_joints(self) -> int:
        return self.coords.shape[0]

    @property
    def T(self) -> int:
        return self.coords.shape[1]

    @property
    def d(self) -> int:
        return self.coords.shape[2]

    @property
    def joints(self) -> list[JointObject]:
        return [
            JointObject(self.coords[n].reshape(-1).copy(), int(self.joint_ids[n]),
                        int(self.part_ids[n]), self.d)
            for n in range(self.n_joints)
        ]

    def permuted(self, perm) -> "PersonJointSet":
        perm = np.asarray(perm)
        return PersonJointSet(self.coords[perm], self.joint_ids[perm], self.part_ids[perm])


@dataclass
class InteractionSample:
    """Training/evaluation unit: the central window plus, optionally, a window sequence."""

    p1: PersonJointSet
    p2: PersonJointSet
    label: int
    windows: list[tuple[PersonJointSet, PersonJointSet]] = field(default_factory=list)
    source: str = ""
    offsets: tuple[int, ...] = ()

    def swapped(self) -> "InteractionSample":
        return InteractionSample(
            self.p2, self.p1, self.label,
            [(b, a) for a, b in self.windows], self.source, self.offsets,
        )


@dataclass
class FoldSplit:
    train: list[str]
    test: list[str]
    protocol: str
    fold: int = 0

    def __post_init__(self):
        overlap = set(self.train) & set(self.test)
        if overlap:
            raise DataError(f"train/test overlap: {sorted(overlap)[:5]}")
