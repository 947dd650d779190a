"""Acoustic model: dilated-convolution branches fused by a gated graph layer."""

from .network import (
    BranchConfig, GatedGCNLayer, ModelConfig, PredictionBundle, SoundAQNet, count_params, forward, init_params,
    load_checkpoint, save_checkpoint, tiny_config,
)
from .receptive_field import Layer, branch_layer_plan, min_input_length, receptive_field, receptive_field_trace

__all__ = [
    "BranchConfig", "GatedGCNLayer", "ModelConfig", "PredictionBundle", "SoundAQNet", "count_params", "forward",
    "init_params", "load_checkpoint", "save_checkpoint", "tiny_config", "Layer", "branch_layer_plan",
    "min_input_length", "receptive_field", "receptive_field_trace",
]
