from .batching import make_batches, pad_frames, pad_tokens, shift_frames
from .corpus import (
    CorpusSample,
    DatasetAdapter,
    InMemoryDataset,
    ManifestError,
    read_manifest,
    write_manifest,
)
from .poses import (
    JOINT_EDGES,
    JOINT_NAMES,
    N_JOINTS,
    POSE_DIM,
    PoseFormatError,
    check_pose_sequence,
    load_pose,
    save_pose,
)
from .synthetic import SyntheticSpec, generate_synthetic_corpus, word_motifs
from .vocab import BLANK, BOS, EOS, GLOSS_RESERVED, PAD, UNK, WORD_RESERVED, Vocabulary

__all__ = [
    "BLANK", "BOS", "EOS", "GLOSS_RESERVED", "PAD", "UNK", "WORD_RESERVED",
    "CorpusSample", "DatasetAdapter", "InMemoryDataset", "JOINT_EDGES", "JOINT_NAMES",
    "ManifestError", "N_JOINTS", "POSE_DIM", "PoseFormatError", "SyntheticSpec", "Vocabulary",
    "check_pose_sequence", "generate_synthetic_corpus", "load_pose", "make_batches",
    "pad_frames", "pad_tokens", "read_manifest", "save_pose", "shift_frames",
    "word_motifs", "write_manifest",
]
