"""Model definition and forward-inference engine.

Layers are plain dataclasses over float32 numpy arrays. Inference is pure:
nothing mutates the model, masks are applied by multiplying weights with a
congruent 0/1 tensor, which is bit-identical to running with the masked
weights explicitly set to 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WEIGHTED_KINDS = ("dense", "conv2d")
LAYER_KINDS = ("dense", "conv2d", "relu", "maxpool2d", "flatten")

# masks: {layer_index: uint8 ndarray congruent to that layer's weight}
Masks = dict[int, np.ndarray]


class ModelError(ValueError):
    pass


class ShapeChainError(ModelError):
    """Layer input/output shapes do not chain; carries the layer index."""

    def __init__(self, layer_index: int, message: str):
        self.layer_index = layer_index
        super().__init__(f"layer {layer_index}: {message}")


@dataclass
class LayerSpec:
    kind: str
    weight: np.ndarray | None = None  # dense: [out, in]; conv2d: [out_ch, in_ch, kh, kw]
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0
    window: int = 0  # maxpool2d only

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ModelError(f"unknown layer kind {self.kind!r}")
        if self.weight is not None:
            self.weight = np.ascontiguousarray(self.weight, dtype=np.float32)
        if self.bias is not None:
            self.bias = np.ascontiguousarray(self.bias, dtype=np.float32)
        if self.kind == "dense":
            if self.weight is None or self.weight.ndim != 2:
                raise ModelError("dense layer needs a 2-d weight [out, in]")
            if self.bias is None or self.bias.shape != (self.weight.shape[0],):
                raise ModelError("dense bias must have length out_units")
        elif self.kind == "conv2d":
            if self.weight is None or self.weight.ndim != 4:
                raise ModelError("conv2d layer needs a 4-d weight [out_ch, in_ch, kh, kw]")
            if self.bias is None or self.bias.shape != (self.weight.shape[0],):
                raise ModelError("conv2d bias must have length out_ch")
            if self.stride < 1 or self.padding < 0:
                raise ModelError("conv2d needs stride >= 1 and padding >= 0")
        elif self.kind == "maxpool2d":
            if self.window < 1 or self.stride < 1:
                raise ModelError("maxpool2d needs window >= 1 and stride >= 1")

    @property
    def weighted(self) -> bool:
        return self.kind in WEIGHTED_KINDS


@dataclass
class Model:
    name: str
    input_shape: tuple[int, ...]  # [features] or [channels, height, width]
    layers: list[LayerSpec] = field(default_factory=list)

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        if not any(l.weighted for l in self.layers):
            raise ModelError("model has no weighted layer")
        layer_output_shapes(self)  # fail fast on a broken chain

    def weighted_indices(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if l.weighted]

    def all_ones_masks(self) -> Masks:
        return {
            i: np.ones(self.layers[i].weight.shape, dtype=np.uint8)
            for i in self.weighted_indices()
        }


@dataclass
class Dataset:
    name: str
    samples: np.ndarray  # [N, *input_shape], float32
    labels: np.ndarray  # [N], integer
    class_names: list[str]

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if len(self.samples) < 1 or len(self.samples) != len(self.labels):
            raise ModelError("dataset needs N >= 1 samples with matching labels")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise ModelError("labels out of range for class_names")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def conv2d_forward(
    weight: np.ndarray, bias: np.ndarray, stride: int, padding: int, x: np.ndarray
) -> np.ndarray:
    """Cross-correlation (no kernel flip) with symmetric zero padding.

    x: [in_ch, H, W] -> [out_ch, H', W'] with H' = (H + 2p - kh) // s + 1.
    """
    out_ch, in_ch, kh, kw = weight.shape
    if x.ndim != 3 or x.shape[0] != in_ch:
        raise ModelError(f"conv2d input must be [{in_ch}, H, W], got {x.shape}")
    h, w = x.shape[1], x.shape[2]
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if h + 2 * padding < kh or w + 2 * padding < kw or ho < 1 or wo < 1:
        raise ModelError(f"conv2d output would be empty for input {x.shape}")
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, ::stride, ::stride]  # [in_ch, ho, wo, kh, kw]
    cols = win.transpose(0, 3, 4, 1, 2).reshape(in_ch * kh * kw, ho * wo)
    out = weight.reshape(out_ch, -1) @ np.ascontiguousarray(cols, dtype=np.float32)
    out += bias[:, None]
    return out.reshape(out_ch, ho, wo)


def maxpool2d_forward(window: int, stride: int, x: np.ndarray) -> np.ndarray:
    if x.ndim != 3:
        raise ModelError(f"maxpool2d input must be [C, H, W], got {x.shape}")
    h, w = x.shape[1], x.shape[2]
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    if h < window or w < window or ho < 1 or wo < 1:
        raise ModelError(f"maxpool2d output would be empty for input {x.shape}")
    win = np.lib.stride_tricks.sliding_window_view(x, (window, window), axis=(1, 2))
    return np.ascontiguousarray(win[:, ::stride, ::stride].max(axis=(3, 4)))


def _layer_output_shape(layer: LayerSpec, shape: tuple[int, ...], index: int) -> tuple[int, ...]:
    if layer.kind == "dense":
        out_units, in_units = layer.weight.shape
        if shape != (in_units,):
            raise ShapeChainError(index, f"dense expects [{in_units}], got {list(shape)}")
        return (out_units,)
    if layer.kind == "conv2d":
        out_ch, in_ch, kh, kw = layer.weight.shape
        if len(shape) != 3 or shape[0] != in_ch:
            raise ShapeChainError(index, f"conv2d expects [{in_ch}, H, W], got {list(shape)}")
        ho = (shape[1] + 2 * layer.padding - kh) // layer.stride + 1
        wo = (shape[2] + 2 * layer.padding - kw) // layer.stride + 1
        if shape[1] + 2 * layer.padding < kh or shape[2] + 2 * layer.padding < kw or ho < 1 or wo < 1:
            raise ShapeChainError(index, f"conv2d output empty for input {list(shape)}")
        return (out_ch, ho, wo)
    if layer.kind == "relu":
        return shape
    if layer.kind == "maxpool2d":
        if len(shape) != 3:
            raise ShapeChainError(index, f"maxpool2d expects [C, H, W], got {list(shape)}")
        ho = (shape[1] - layer.window) // layer.stride + 1
        wo = (shape[2] - layer.window) // layer.stride + 1
        if shape[1] < layer.window or shape[2] < layer.window or ho < 1 or wo < 1:
            raise ShapeChainError(index, f"maxpool2d output empty for input {list(shape)}")
        return (shape[0], ho, wo)
    if layer.kind == "flatten":
        return (int(np.prod(shape)),)
    raise ModelError(f"unknown layer kind {layer.kind!r}")


def layer_output_shapes(model: Model) -> list[tuple[int, ...]]:
    """Output shape of every layer, validating the whole chain."""
    shapes = []
    shape = model.input_shape
    for i, layer in enumerate(model.layers):
        shape = _layer_output_shape(layer, shape, i)
        shapes.append(shape)
    return shapes


def effective_weight(layer: LayerSpec, mask: np.ndarray | None) -> np.ndarray:
    if mask is None:
        return layer.weight
    if mask.shape != layer.weight.shape:
        raise ModelError(
            f"mask shape {mask.shape} does not match weight shape {layer.weight.shape}"
        )
    return layer.weight * mask


def forward_all_activations(
    model: Model, masks: Masks | None, x: np.ndarray
) -> list[np.ndarray]:
    """Post-layer output for every layer; the last entry is the class scores."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    if x.shape != model.input_shape:
        raise ShapeChainError(0, f"input shape {x.shape} != model input {model.input_shape}")
    activations = []
    for i, layer in enumerate(model.layers):
        mask = masks.get(i) if masks is not None else None
        if layer.kind == "dense":
            if x.shape != (layer.weight.shape[1],):
                raise ShapeChainError(i, f"dense expects [{layer.weight.shape[1]}], got {x.shape}")
            x = effective_weight(layer, mask) @ x + layer.bias
        elif layer.kind == "conv2d":
            x = conv2d_forward(effective_weight(layer, mask), layer.bias, layer.stride, layer.padding, x)
        elif layer.kind == "relu":
            x = np.maximum(x, np.float32(0.0))
        elif layer.kind == "maxpool2d":
            x = maxpool2d_forward(layer.window, layer.stride, x)
        elif layer.kind == "flatten":
            x = np.ascontiguousarray(x).reshape(-1)
        activations.append(x)
    return activations


def forward(model: Model, masks: Masks | None, x: np.ndarray) -> np.ndarray:
    """Pre-softmax class scores for one input sample."""
    return forward_all_activations(model, masks, x)[-1]
