from irn.skeleton.types import (
    FoldSplit, InteractionSample, JointObject, PersonJointSet, SkeletonSequence,
)
from irn.skeleton.joints import BODY_PARTS, JOINT_NAMES, PART_OF_JOINT, SOURCE_MAPS
from irn.skeleton.loaders import (
    CandidateSequence, load_ntu, load_ntu_dir, load_pose_stream, load_sbu, read_manifest,
    read_record, record_to_sequence, sequence_to_record, write_manifest, write_record,
)
from irn.skeleton.tracking import assign_bodies
from irn.skeleton.windows import window_central, window_overlapping
from irn.skeleton.objects import (
    build_joint_objects, fill_gaps, make_sample, make_samples, normalize_minmax, subsample_joints,
)
from irn.skeleton.synthetic import ARCHETYPES, synthesize_corpus, synthesize_pose_stream, synthesize_sample
from irn.skeleton.folds import SBU_FOLDS, make_folds
