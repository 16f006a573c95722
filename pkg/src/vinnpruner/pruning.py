"""Pruning scores, ratio-based mask updates, mask-view geometry, manual edits.

MAP scores a weight by its absolute value. LAP multiplies that magnitude by
the Euclidean norms of the masked weights in the nearest preceding and
following weighted layers that connect to the same unit/channel, so weights
feeding or fed by weak neighbors rank lower. Missing neighbor (or a mode
that excludes a direction) contributes a factor of 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Masks, Model, LayerSpec, ModelError, layer_output_shapes, effective_weight

ALGORITHMS = ("map", "lap", "lap_forward", "lap_backward", "manual")
EDIT_KINDS = (
    "prune_indices",
    "restore_indices",
    "prune_channel",
    "restore_channel",
    "prune_rect",
    "restore_rect",
)


class PruneError(ValueError):
    pass


@dataclass
class PruneSettings:
    algorithm: str = "lap"
    global_ratio: float = 0.5
    per_layer_ratio: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise PruneError(f"unknown algorithm {self.algorithm!r}")
        for ratio in [self.global_ratio, *self.per_layer_ratio.values()]:
            if not 0.0 <= ratio <= 1.0:
                raise PruneError(f"ratio {ratio} outside [0, 1]")

    def ratio_for(self, layer_index: int) -> float:
        return self.per_layer_ratio.get(layer_index, self.global_ratio)

    def validate_layers(self, model: Model) -> None:
        weighted = set(model.weighted_indices())
        for idx in self.per_layer_ratio:
            if idx not in weighted:
                raise PruneError(f"per_layer_ratio key {idx} is not a weighted layer")


@dataclass
class MaskEdit:
    layer_index: int
    kind: str
    # flat index list, channel index, or rect (row0, col0, row1, col1) inclusive
    payload: list[int] | int | tuple[int, int, int, int]

    def __post_init__(self):
        if self.kind not in EDIT_KINDS:
            raise PruneError(f"unknown edit kind {self.kind!r}")


def map_scores(weight: np.ndarray) -> np.ndarray:
    return np.abs(weight)


def _nearest_weighted(model: Model, layer_index: int, direction: int) -> int | None:
    i = layer_index + direction
    while 0 <= i < len(model.layers):
        if model.layers[i].weighted:
            return i
        i += direction
    return None


def _producer_norms(model: Model, masks: Masks | None, layer_index: int) -> np.ndarray | None:
    """Norm of the preceding weighted layer's slice producing each input unit/channel."""
    prev_idx = _nearest_weighted(model, layer_index, -1)
    if prev_idx is None:
        return None
    prev = model.layers[prev_idx]
    w_prev = effective_weight(prev, masks.get(prev_idx) if masks else None)
    layer = model.layers[layer_index]
    if prev.kind == "dense":
        unit_norms = np.sqrt((w_prev.astype(np.float64) ** 2).sum(axis=1))
    else:  # conv2d producer: norm per out-channel kernel slice
        unit_norms = np.sqrt((w_prev.astype(np.float64) ** 2).sum(axis=(1, 2, 3)))
    if layer.kind == "conv2d":
        return unit_norms  # in-channel i fed by producer channel i
    # dense consumer: expand channel norms over the flat positions of each channel
    in_units = layer.weight.shape[1]
    if len(unit_norms) == in_units:
        return unit_norms
    if in_units % len(unit_norms) != 0:
        raise ModelError(
            f"cannot map {len(unit_norms)} producer units onto {in_units} dense inputs"
        )
    return np.repeat(unit_norms, in_units // len(unit_norms))


def _consumer_norms(model: Model, masks: Masks | None, layer_index: int) -> np.ndarray | None:
    """Norm of the following weighted layer's slice consuming each output unit/channel."""
    next_idx = _nearest_weighted(model, layer_index, +1)
    if next_idx is None:
        return None
    nxt = model.layers[next_idx]
    w_next = effective_weight(nxt, masks.get(next_idx) if masks else None).astype(np.float64)
    layer = model.layers[layer_index]
    out_units = layer.weight.shape[0]
    if nxt.kind == "dense":
        col_norms_sq = (w_next**2).sum(axis=0)  # per consumed input unit
        if len(col_norms_sq) == out_units:
            return np.sqrt(col_norms_sq)
        # dense after flatten: a channel is consumed through all its flat positions
        if len(col_norms_sq) % out_units != 0:
            raise ModelError(
                f"cannot map {len(col_norms_sq)} dense inputs onto {out_units} producer channels"
            )
        per_channel = col_norms_sq.reshape(out_units, -1).sum(axis=1)
        return np.sqrt(per_channel)
    # conv2d consumer: norm per in-channel slice
    return np.sqrt((w_next**2).sum(axis=(0, 2, 3)))


def lap_scores(
    model: Model, masks: Masks | None, layer_index: int, mode: str = "both"
) -> np.ndarray:
    if mode not in ("both", "forward", "backward"):
        raise PruneError(f"unknown LAP mode {mode!r}")
    layer = model.layers[layer_index]
    if not layer.weighted:
        raise PruneError(f"layer {layer_index} is not a weighted layer")
    scores = np.abs(layer.weight).astype(np.float64)
    if mode in ("both", "backward"):
        prev = _producer_norms(model, masks, layer_index)
        if prev is not None:
            if layer.kind == "dense":
                scores *= prev[None, :]
            else:
                scores *= prev[None, :, None, None]
    if mode in ("both", "forward"):
        nxt = _consumer_norms(model, masks, layer_index)
        if nxt is not None:
            if layer.kind == "dense":
                scores *= nxt[:, None]
            else:
                scores *= nxt[:, None, None, None]
    return scores


def prune_by_ratio(scores: np.ndarray, mask: np.ndarray, ratio: float) -> np.ndarray:
    """Prune floor(ratio * unpruned) of the still-unpruned weights with the
    smallest scores; ties broken by smaller flat index. Never resurrects."""
    if not 0.0 <= ratio <= 1.0:
        raise PruneError(f"ratio {ratio} outside [0, 1]")
    if scores.shape != mask.shape:
        raise PruneError(f"scores shape {scores.shape} != mask shape {mask.shape}")
    flat_scores = scores.reshape(-1)
    flat_mask = mask.reshape(-1).astype(np.uint8)
    alive = np.flatnonzero(flat_mask)
    n_prune = int(ratio * len(alive))
    out = flat_mask.copy()
    if n_prune > 0:
        # stable sort on score keeps flat-index order among ties
        order = alive[np.argsort(flat_scores[alive], kind="stable")]
        out[order[:n_prune]] = 0
    return out.reshape(mask.shape)


@dataclass(frozen=True)
class MaskViewLayout:
    """2-D grid the UI renders and rectangle edits address.

    dense [out, in]: rows = out, cols = in, row_span = 1.
    conv [out_ch, in_ch, kh, kw]: one row per out-channel holding in_ch
    kernel blocks of kh*kw cells left-to-right (cols = in_ch*kh*kw); each
    row is drawn kh pixel-rows tall (row_span = kh).
    """

    kind: str
    rows: int
    cols: int
    row_span: int
    in_ch: int = 1
    kh: int = 1
    kw: int = 1

    def cell_to_flat(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise PruneError(f"cell ({row}, {col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def flat_to_cell(self, flat: int) -> tuple[int, int]:
        if not 0 <= flat < self.rows * self.cols:
            raise PruneError(f"flat index {flat} out of range")
        return flat // self.cols, flat % self.cols


def mask_view_layout_from_shape(shape: tuple[int, ...]) -> MaskViewLayout:
    if len(shape) == 2:
        out_units, in_units = shape
        return MaskViewLayout(kind="dense", rows=out_units, cols=in_units, row_span=1)
    if len(shape) == 4:
        out_ch, in_ch, kh, kw = shape
        return MaskViewLayout(
            kind="conv2d", rows=out_ch, cols=in_ch * kh * kw, row_span=kh,
            in_ch=in_ch, kh=kh, kw=kw,
        )
    raise PruneError(f"no mask view for weight shape {shape}")


def mask_view_layout(layer: LayerSpec) -> MaskViewLayout:
    if not layer.weighted:
        raise PruneError("mask view is only defined for weighted layers")
    return mask_view_layout_from_shape(layer.weight.shape)


def rect_to_flat_indices(layout: MaskViewLayout, rect: tuple[int, int, int, int]) -> list[int]:
    row0, col0, row1, col1 = (int(v) for v in rect)
    if row0 > row1 or col0 > col1:
        raise PruneError(f"degenerate rectangle {rect}")
    if row0 < 0 or col0 < 0 or row1 >= layout.rows or col1 >= layout.cols:
        raise PruneError(f"rectangle {rect} outside {layout.rows}x{layout.cols} grid")
    return [
        layout.cell_to_flat(r, c)
        for r in range(row0, row1 + 1)
        for c in range(col0, col1 + 1)
    ]


def channel_flat_indices(layer: LayerSpec, channel: int) -> np.ndarray:
    """Flat indices of one out-channel slice (conv) or one row (dense)."""
    shape = layer.weight.shape
    if not 0 <= channel < shape[0]:
        raise PruneError(f"channel {channel} out of range for shape {shape}")
    per_channel = int(np.prod(shape[1:]))
    return np.arange(channel * per_channel, (channel + 1) * per_channel)


def apply_edit(model: Model, masks: Masks, edit: MaskEdit) -> None:
    """Apply one edit in place; raises before touching anything if out of bounds."""
    if edit.layer_index not in masks:
        raise PruneError(f"layer {edit.layer_index} is not a weighted layer")
    layer = model.layers[edit.layer_index]
    mask = masks[edit.layer_index]
    value = 0 if edit.kind.startswith("prune") else 1
    if edit.kind in ("prune_indices", "restore_indices"):
        idx = np.asarray(list(edit.payload), dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= mask.size):
            raise PruneError(f"flat index out of range for layer {edit.layer_index}")
    elif edit.kind in ("prune_channel", "restore_channel"):
        idx = channel_flat_indices(layer, int(edit.payload))
    else:  # rect
        idx = np.asarray(rect_to_flat_indices(mask_view_layout(layer), tuple(edit.payload)))
    mask.reshape(-1)[idx] = value


def apply_edits(model: Model, masks: Masks, edits: list[MaskEdit]) -> Masks:
    """Apply edits in order to a copy of the masks.

    Atomic from the caller's view: the input masks are never touched, and an
    out-of-bounds edit raises, so the batch either fully applies or not at all.
    """
    new_masks = {i: m.copy() for i, m in masks.items()}
    for edit in edits:
        apply_edit(model, new_masks, edit)
    return new_masks
