"""Canonical 15-joint layout and source-index tables for other skeleton formats."""

# SBU Kinect order
JOINT_NAMES = (
    "head", "neck", "torso",
    "left_shoulder", "left_elbow", "left_hand",
    "right_shoulder", "right_elbow", "right_hand",
    "left_hip", "left_knee", "left_foot",
    "right_hip", "right_knee", "right_foot",
)

BODY_PARTS = ("torso", "left_arm", "right_arm", "left_leg", "right_leg")

# joint index -> body part index
PART_OF_JOINT = (0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4)

# canonical joint -> index in the Kinect v2 (NTU RGB+D) 25-joint skeleton
NTU25_TO_CANONICAL = (3, 2, 1, 4, 5, 7, 8, 9, 11, 12, 13, 15, 16, 17, 19)

# canonical joint -> index in OpenPose BODY_25 output
OPENPOSE25_TO_CANONICAL = (0, 1, 8, 5, 6, 7, 2, 3, 4, 12, 13, 14, 9, 10, 11)

IDENTITY15 = tuple(range(15))

SOURCE_MAPS = {
    "ntu25": NTU25_TO_CANONICAL,
    "openpose25": OPENPOSE25_TO_CANONICAL,
    "identity15": IDENTITY15,
}


def body_part_ids(n_joints: int) -> list[int]:
    """Part ids for a skeleton with ``n_joints`` joints.

    Anything other than the canonical 15-joint layout gets every joint tagged
    as torso, since no part table is known for it.
    """
    if n_joints == len(PART_OF_JOINT):
        return list(PART_OF_JOINT)
    return [0] * n_joints
