"""Per-layer feature maps for a selected sample, with dead-channel detection.

A channel is dead when every value equals the constant a fully masked channel
would produce: the bias pushed through the activation-free tail of the stack
(relu clamps it at zero, pooling and flatten keep a constant constant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Masks, Model, forward_all_activations
from .session import Session, SessionError

DEAD_TOLERANCE = 1e-7


@dataclass
class ChannelStats:
    channel: int
    min: float
    max: float
    mean: float
    is_dead: bool


@dataclass
class FeatureMaps:
    layer_index: int
    maps: list[np.ndarray]  # one 2-D map per channel (dense: single 1 x n map)
    stats: list[ChannelStats]


def dead_channel_constants(model: Model, layer_index: int) -> np.ndarray | None:
    """Per-channel constant a fully pruned channel would output at this layer."""
    producer = None
    for i in range(layer_index, -1, -1):
        if model.layers[i].weighted:
            producer = i
            break
    if producer is None:
        return None
    consts = model.layers[producer].bias.astype(np.float32).copy()
    for i in range(producer + 1, layer_index + 1):
        kind = model.layers[i].kind
        if kind == "relu":
            consts = np.maximum(consts, np.float32(0.0))
        elif kind in ("maxpool2d", "flatten"):
            pass  # a constant channel stays that constant
        else:
            return None  # another weighted layer in between: not this producer's bias
    return consts


def _as_channel_maps(activation: np.ndarray) -> list[np.ndarray]:
    if activation.ndim == 3:
        return [activation[c] for c in range(activation.shape[0])]
    return [activation.reshape(1, -1)]


def layer_feature_maps(
    model: Model, masks: Masks | None, sample: np.ndarray, layer_index: int
) -> FeatureMaps:
    activations = forward_all_activations(model, masks, sample)
    if not 0 <= layer_index < len(model.layers):
        raise IndexError(f"layer index {layer_index} out of range")
    maps = _as_channel_maps(activations[layer_index])
    consts = dead_channel_constants(model, layer_index)
    stats = []
    for c, fmap in enumerate(maps):
        is_dead = False
        if consts is not None and len(consts) == len(maps):
            is_dead = bool(np.all(np.abs(fmap - consts[c]) <= DEAD_TOLERANCE))
        stats.append(
            ChannelStats(
                channel=c,
                min=float(fmap.min()),
                max=float(fmap.max()),
                mean=float(fmap.mean()),
                is_dead=is_dead,
            )
        )
    return FeatureMaps(layer_index=layer_index, maps=maps, stats=stats)


def feature_maps(
    session: Session, sample_index: int, layer_index: int, masks_variant: str = "current"
) -> FeatureMaps:
    if masks_variant not in ("current", "baseline"):
        raise SessionError(f"unknown masks variant {masks_variant!r}")
    if not 0 <= sample_index < len(session.dataset.samples):
        raise IndexError(f"sample index {sample_index} out of range")
    masks = session.current_masks if masks_variant == "current" else session.steps[0].masks
    return layer_feature_maps(
        session.model, masks, session.dataset.samples[sample_index], layer_index
    )
