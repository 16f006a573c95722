"""Pruning session: the card timeline of steps over one model + dataset.

A session is a single-writer state machine. Step 0 is the unpruned baseline;
every prune / manual-edit action appends a new step whose parent is the
current step, so reverting creates a new branch head and removing a step
cascades to its descendants.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .metrics import EvalReport, evaluate
from .model import Dataset, Masks, Model
from .pruning import (
    MaskEdit,
    PruneError,
    PruneSettings,
    apply_edits,
    lap_scores,
    map_scores,
    prune_by_ratio,
)


class SessionError(ValueError):
    pass


@dataclass
class PruneStep:
    step_id: int
    parent_id: int | None
    settings: PruneSettings
    masks: Masks
    manual_edits: list[MaskEdit]
    report: EvalReport
    created_at: float


@dataclass
class Session:
    session_id: str
    model: Model
    dataset: Dataset
    steps: dict[int, PruneStep] = field(default_factory=dict)
    current_id: int = 0
    _next_id: int = 0
    # channels marked for removal via feature-map clicks, pending the next step
    pending_marks: set[tuple[int, int]] = field(default_factory=set)

    def __post_init__(self):
        if not self.steps:
            masks = self.model.all_ones_masks()
            self.steps[0] = PruneStep(
                step_id=0,
                parent_id=None,
                settings=PruneSettings(algorithm="manual", global_ratio=0.0),
                masks=masks,
                manual_edits=[],
                report=evaluate(self.model, masks, self.dataset),
                created_at=time.time(),
            )
            self._next_id = 1
            self.current_id = 0

    @property
    def current_step(self) -> PruneStep:
        return self.steps[self.current_id]

    @property
    def current_masks(self) -> Masks:
        return self.current_step.masks

    def _append_step(
        self, settings: PruneSettings, masks: Masks, edits: list[MaskEdit]
    ) -> PruneStep:
        step = PruneStep(
            step_id=self._next_id,
            parent_id=self.current_id,
            settings=settings,
            masks=masks,
            manual_edits=edits,
            report=evaluate(self.model, masks, self.dataset),
            created_at=time.time(),
        )
        self.steps[step.step_id] = step
        self.current_id = step.step_id
        self._next_id += 1
        return step

    def run_prune_step(self, settings: PruneSettings) -> PruneStep:
        if settings.algorithm == "manual":
            raise SessionError("manual steps go through apply_manual_edits")
        settings.validate_layers(self.model)
        # LAP scores use the masks as of the start of the step for every layer
        start_masks = self.current_masks
        new_masks: Masks = {}
        for idx in self.model.weighted_indices():
            layer = self.model.layers[idx]
            if settings.algorithm == "map":
                scores = map_scores(layer.weight)
            else:
                mode = {"lap": "both", "lap_forward": "forward", "lap_backward": "backward"}[
                    settings.algorithm
                ]
                scores = lap_scores(self.model, start_masks, idx, mode)
            new_masks[idx] = prune_by_ratio(scores, start_masks[idx], settings.ratio_for(idx))
        return self._append_step(settings, new_masks, [])

    def apply_manual_edits(self, edits: list[MaskEdit]) -> PruneStep:
        new_masks = apply_edits(self.model, self.current_masks, edits)
        for edit in edits:
            if edit.kind in ("prune_channel", "restore_channel"):
                self.pending_marks.discard((edit.layer_index, int(edit.payload)))
        settings = PruneSettings(algorithm="manual", global_ratio=0.0)
        return self._append_step(settings, new_masks, list(edits))

    def list_steps(self) -> list[PruneStep]:
        return [self.steps[k] for k in sorted(self.steps)]

    def revert_to(self, step_id: int) -> PruneStep:
        if step_id not in self.steps:
            raise SessionError(f"unknown step id {step_id}")
        self.current_id = step_id
        return self.steps[step_id]

    def remove_step(self, step_id: int) -> list[int]:
        """Delete a step and all its descendants; returns the removed ids."""
        if step_id not in self.steps:
            raise SessionError(f"unknown step id {step_id}")
        if step_id == 0:
            raise SessionError("the baseline step cannot be removed")
        removed = {step_id}
        changed = True
        while changed:
            changed = False
            for step in self.steps.values():
                if step.parent_id in removed and step.step_id not in removed:
                    removed.add(step.step_id)
                    changed = True
        parent = self.steps[step_id].parent_id
        for sid in removed:
            del self.steps[sid]
        if self.current_id in removed:
            self.current_id = parent if parent is not None else 0
        return sorted(removed)

    def mark_channel_from_feature_map(self, layer_index: int, channel: int) -> MaskEdit:
        """Toggle a pending channel mark; returns the edit without applying it."""
        if layer_index not in self.current_masks:
            raise PruneError(f"layer {layer_index} is not a weighted layer")
        n_channels = self.model.layers[layer_index].weight.shape[0]
        if not 0 <= channel < n_channels:
            raise PruneError(f"channel {channel} out of range for layer {layer_index}")
        key = (layer_index, channel)
        if key in self.pending_marks:
            self.pending_marks.discard(key)
            return MaskEdit(layer_index, "restore_channel", channel)
        self.pending_marks.add(key)
        return MaskEdit(layer_index, "prune_channel", channel)
