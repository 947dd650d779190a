"""Receptive-field arithmetic for stacks of dilated convolutions and pools."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Layer:
    kind: str  # "conv" or "pool"
    k: int | None = None  # None: use the branch kernel size
    dilation: int = 1
    stride: int = 1


def branch_layer_plan(dilations=(1, 2, 3), convs_per_block=2, pooling=True, pool_size=2):
    """Layer sequence of one branch along the time axis."""
    plan = []
    for r in dilations:
        plan += [Layer("conv", None, r, 1)] * convs_per_block
        if pooling:
            plan.append(Layer("pool", pool_size, 1, pool_size))
    return plan


def receptive_field_trace(kernel, layer_plan):
    """Receptive field (frames) after each layer.

    Each layer widens the field by ``(k - 1) * dilation * jump`` where
    ``jump`` is the product of the strides of all earlier layers.
    """
    if not layer_plan:
        raise ValueError("layer plan must not be empty")
    rfs, jump, out = 1, 1, []
    for layer in layer_plan:
        k = kernel if layer.k is None else layer.k
        rfs += (k - 1) * layer.dilation * jump
        jump *= layer.stride
        out.append(rfs)
    return out


def receptive_field(kernel, layer_plan):
    return receptive_field_trace(kernel, layer_plan)[-1]


def min_input_length(config, hop_ms=10.0, layer_plan=None):
    """Shortest input (ms) that covers the largest branch receptive field.

    ``config`` is a model config (anything with ``kernels``) or a plain
    sequence of kernel sizes.
    """
    kernels = getattr(config, "kernels", config)
    if layer_plan is None:
        layer_plan = branch_layer_plan(getattr(config, "dilations", (1, 2, 3)))
    return max(receptive_field(k, layer_plan) for k in kernels) * hop_ms
