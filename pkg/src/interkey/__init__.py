"""Interactive keypoint estimation: predict, click, propagate.

A model predicts anatomical keypoints on an image; a user corrects a few
mispredicted points; the model propagates those corrections to revise the
remaining keypoints. Includes Gaussian heatmap encoding of clicks,
interaction-guided channel gating, a shape-prior (distance/angle) loss,
click-simulation training, and NoC/FR evaluation.
"""

from interkey.codec import CodecConfig, decode_local_softargmax, encode_interaction, encode_keypoints, heatmap_bce
from interkey.keypoints import KeypointSet

__all__ = [
    "CodecConfig",
    "KeypointSet",
    "encode_keypoints",
    "encode_interaction",
    "decode_local_softargmax",
    "heatmap_bce",
]
