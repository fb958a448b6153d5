"""Seeded generator of toy two-person interactions on the canonical 15-joint skeleton.

Four archetypes, each defined by how the two bodies relate over time:

* approach: torso-to-torso distance shrinks linearly
* depart: it grows linearly
* strike: one person's right hand shoots out toward the other's chest and
  back within a few frames; after impact the struck person recoils, so the
  distance is flat and then opens
* clasp: distance is fixed; both right hands move to the midpoint and stay
"""
from __future__ import annotations

import numpy as np

from irn.errors import ConfigError
from irn.skeleton.loaders import CandidateSequence
from irn.skeleton.types import SkeletonSequence

ARCHETYPES = ("approach", "depart", "strike", "clasp")

# person facing +x, torso at the origin; axes (x toward partner, y lateral, z up)
REST_POSE = np.array([
    [0.00, 0.00, 0.55],    # head
    [0.00, 0.00, 0.35],    # neck
    [0.00, 0.00, 0.00],    # torso
    [0.00, 0.20, 0.32],    # left shoulder
    [0.02, 0.26, 0.05],    # left elbow
    [0.06, 0.26, -0.20],   # left hand
    [0.00, -0.20, 0.32],   # right shoulder
    [0.02, -0.26, 0.05],   # right elbow
    [0.06, -0.26, -0.20],  # right hand
    [0.00, 0.10, -0.15],   # left hip
    [0.02, 0.10, -0.60],   # left knee
    [0.00, 0.10, -1.05],   # left foot
    [0.00, -0.10, -0.15],  # right hip
    [0.02, -0.10, -0.60],  # right knee
    [0.00, -0.10, -1.05],  # right foot
])
TORSO, R_ELBOW, R_HAND = 2, 7, 8
FLIP = np.array([-1.0, -1.0, 1.0])  # person 2 faces -x


def _person(rest: np.ndarray, root: np.ndarray, facing: float) -> np.ndarray:
    flip = np.ones(3) if facing > 0 else FLIP
    return rest * flip + root


def synthesize_sample(archetype: str, rng: np.random.Generator, noise: float = 0.02,
                      n_frames: int = 16, seq_id: str = "") -> SkeletonSequence:
    if archetype not in ARCHETYPES:
        raise ConfigError(f"unknown archetype {archetype!r}; choose from {ARCHETYPES}")
    if noise < 0:
        raise ConfigError("noise must be non-negative")
    label = ARCHETYPES.index(archetype)
    F = n_frames
    s = np.linspace(0.0, 1.0, F)
    height = rng.uniform(0.9, 1.1, size=2)
    rests = [REST_POSE * h for h in height]
    near, far = rng.uniform(0.7, 1.0), rng.uniform(1.8, 2.4)
    still = rng.uniform(0.8, 1.0)
    offset = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), 1.05])

    if archetype == "approach":
        dist = far + (near - far) * s
    elif archetype == "depart":
        dist = near + (far - near) * s
    else:
        dist = np.full(F, still)
    # who walks: 0 = both, 1 = person 1 only, 2 = person 2 only
    mover = rng.integers(0, 3)
    frac = {0: 0.5, 1: 1.0, 2: 0.0}[int(mover)]
    x1 = -dist * frac
    x2 = dist * (1.0 - frac)

    # per-frame hand reach in [0, 1] for each person
    reach = np.zeros((F, 2))
    if archetype == "strike":
        striker = int(rng.integers(0, 2))
        peak = rng.uniform(0.3, 0.5) * (F - 1)
        width = max(1.5, 0.12 * F)
        reach[:, striker] = np.clip(1.0 - np.abs(np.arange(F) - peak) / width, 0.0, 1.0)
        recoil = 0.4 * np.clip((np.arange(F) - peak) / (0.3 * F), 0.0, 1.0)
        if striker == 0:
            x2 = x2 + recoil
        else:
            x1 = x1 - recoil
    elif archetype == "clasp":
        end = rng.uniform(0.35, 0.55)
        ramp = np.clip(s / end, 0.0, 1.0)
        reach[:, 0] = reach[:, 1] = 0.5 - 0.5 * np.cos(np.pi * ramp)

    coords = np.zeros((F, 2, 15, 3))
    for t in range(F):
        roots = [offset + [x1[t], 0.0, 0.0], offset + [x2[t], 0.0, 0.0]]
        for p in range(2):
            facing = 1.0 if p == 0 else -1.0
            body = _person(rests[p], roots[p], facing)
            if reach[t, p] > 0:
                other = roots[1 - p]
                if archetype == "strike":
                    target = other + [0.0, 0.0, 0.15]
                else:
                    target = 0.5 * (roots[0] + roots[1]) + [0.0, 0.0, 0.1]
                a = reach[t, p]
                hand = body[R_HAND]
                body[R_HAND] = hand + a * (target - hand)
                body[R_ELBOW] = body[R_ELBOW] + 0.5 * a * (target - hand)
            coords[t, p] = body
    if noise > 0:
        coords = coords + rng.normal(scale=noise, size=coords.shape)
    return SkeletonSequence(coords, np.ones((F, 2, 15), dtype=bool), fps=15.0, label=label,
                            seq_id=seq_id)


def synthesize_corpus(n: int, seed: int = 0, noise: float = 0.02, n_frames: int = 16) -> list[SkeletonSequence]:
    """``n`` samples cycling through the archetypes in order, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    return [
        synthesize_sample(ARCHETYPES[i % len(ARCHETYPES)], rng, noise, n_frames, seq_id=f"synth-{i:05d}")
        for i in range(n)
    ]


def root_distance(seq: SkeletonSequence) -> np.ndarray:
    return np.linalg.norm(seq.coords[:, 0, TORSO] - seq.coords[:, 1, TORSO], axis=-1)


def synthesize_pose_stream(rng: np.random.Generator, n_frames: int = 60, crossing: bool = True,
                           passerby: bool = False, shuffle: bool = True, noise: float = 0.005,
                           ) -> tuple[CandidateSequence, np.ndarray]:
    """2D per-frame candidates for two walkers plus the ground-truth identities.

    With ``crossing`` the two walk past each other at different depths. With
    ``passerby`` a third, distant pose appears in every frame. Returns the
    candidates and a (frames, 2) array of the candidate index that belongs to
    person 1 and person 2 in each frame.
    """
    s = np.linspace(0.0, 1.0, n_frames)
    if crossing:
        xs = np.stack([-1.0 + 2.0 * s, 1.0 - 2.0 * s], axis=1)
    else:
        xs = np.stack([np.full(n_frames, -0.6), np.full(n_frames, 0.6)], axis=1)
    depth = (0.0, 1.2)
    frames, truth = [], np.zeros((n_frames, 2), dtype=np.int64)
    for t in range(n_frames):
        poses = []
        for p in range(2):
            scale = 1.0 / (1.0 + 0.3 * depth[p])
            body = _person(REST_POSE, np.array([xs[t, p], 0.0, 0.0]), 1.0 if p == 0 else -1.0)
            xy = np.stack([body[:, 0] * scale, -body[:, 2] * scale - 0.25 * depth[p]], axis=1)
            xy = xy + rng.normal(scale=noise, size=xy.shape)
            poses.append(np.concatenate([xy, np.ones((15, 1))], axis=1))
        if passerby:
            body = _person(REST_POSE, np.array([6.0, 0.0, 0.0]), 1.0)
            xy = np.stack([body[:, 0], -body[:, 2] + 3.0], axis=1)
            poses.append(np.concatenate([xy, np.ones((15, 1))], axis=1))
        order = rng.permutation(len(poses)) if shuffle else np.arange(len(poses))
        frames.append([poses[k] for k in order])
        inv = np.argsort(order)
        truth[t] = inv[:2]
    return CandidateSequence(frames, fps=30.0, seq_id="synthetic-stream"), truth
