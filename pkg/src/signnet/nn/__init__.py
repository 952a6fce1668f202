from .layers import (
    DecoderLayer,
    EncoderLayer,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    causal_mask,
    positional_encoding,
    scaled_dot_product_attention,
)
from .models import (
    EOS_CHANNEL,
    POSE_DIM,
    ModelConfig,
    Pose2TextModel,
    Text2PoseModel,
    decode_pose_autoregressive,
    decode_text_autoregressive,
    gloss_probabilities,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint

__all__ = [
    "CheckpointError",
    "DecoderLayer",
    "EOS_CHANNEL",
    "EncoderLayer",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "ModelConfig",
    "Module",
    "MultiHeadAttention",
    "POSE_DIM",
    "Pose2TextModel",
    "Text2PoseModel",
    "causal_mask",
    "decode_pose_autoregressive",
    "decode_text_autoregressive",
    "gloss_probabilities",
    "load_checkpoint",
    "positional_encoding",
    "save_checkpoint",
    "scaled_dot_product_attention",
]
