import math

import numpy as np
import pytest

from vinnpruner.metrics import evaluate
from vinnpruner.pruning import MaskEdit, PruneSettings
from vinnpruner.session import Session, SessionError

from conftest import tiny_dataset


@pytest.fixture()
def mlp_session(mlp, blobs_test):
    return Session(session_id="t", model=mlp, dataset=blobs_test)


def test_baseline_step_is_all_ones(mlp_session):
    step = mlp_session.steps[0]
    assert step.step_id == 0 and step.parent_id is None
    assert all(m.all() for m in step.masks.values())
    assert step.report.global_ratio == 0.0


def test_ratio_zero_step_changes_nothing(mlp_session):
    step = mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.0))
    for i, mask in step.masks.items():
        np.testing.assert_array_equal(mask, mlp_session.steps[0].masks[i])
    assert step.report.accuracy == mlp_session.steps[0].report.accuracy
    assert step.report.mean_loss == mlp_session.steps[0].report.mean_loss


def test_map_half_prunes_floor_counts(mlp_session):
    step = mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.5))
    for i, mask in step.masks.items():
        assert int((mask == 0).sum()) == math.floor(0.5 * mask.size)


def test_lap_and_map_masks_differ_on_fixture(mlp, blobs_test):
    a = Session(session_id="a", model=mlp, dataset=blobs_test)
    b = Session(session_id="b", model=mlp, dataset=blobs_test)
    a.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.5))
    b.run_prune_step(PruneSettings(algorithm="lap", global_ratio=0.5))
    assert any(
        not np.array_equal(a.current_masks[i], b.current_masks[i]) for i in a.current_masks
    )


def test_per_layer_ratio_overrides_global(mlp_session):
    weighted = mlp_session.model.weighted_indices()
    settings = PruneSettings(
        algorithm="map", global_ratio=0.5, per_layer_ratio={weighted[0]: 0.0}
    )
    step = mlp_session.run_prune_step(settings)
    assert (step.masks[weighted[0]] == 0).sum() == 0
    assert (step.masks[weighted[1]] == 0).sum() == math.floor(0.5 * step.masks[weighted[1]].size)


def test_lap_scores_use_start_of_step_masks(mlp_session):
    # two consecutive LAP steps from a reverted state must be reproducible
    s1 = mlp_session.run_prune_step(PruneSettings(algorithm="lap", global_ratio=0.3))
    mlp_session.revert_to(0)
    s2 = mlp_session.run_prune_step(PruneSettings(algorithm="lap", global_ratio=0.3))
    for i in s1.masks:
        np.testing.assert_array_equal(s1.masks[i], s2.masks[i])


def test_manual_edit_step(mlp_session):
    step = mlp_session.apply_manual_edits([MaskEdit(0, "prune_channel", 3)])
    assert step.settings.algorithm == "manual"
    assert step.manual_edits[0].kind == "prune_channel"
    assert not step.masks[0][3].any()


def test_manual_edit_atomicity(mlp_session):
    with pytest.raises(Exception):
        mlp_session.apply_manual_edits(
            [MaskEdit(0, "prune_channel", 3), MaskEdit(0, "prune_indices", [10**6])]
        )
    assert mlp_session.current_id == 0
    assert mlp_session.current_masks[0].all()


def test_report_matches_masks(mlp_session):
    step = mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.5))
    re_report = evaluate(mlp_session.model, step.masks, mlp_session.dataset)
    assert abs(re_report.accuracy - step.report.accuracy) <= 1e-6
    assert abs(re_report.mean_loss - step.report.mean_loss) <= 1e-6
    assert [
        (s.pruned, s.total) for s in re_report.sparsity
    ] == [(s.pruned, s.total) for s in step.report.sparsity]


def test_sparsity_monotone_without_restores(mlp_session):
    prev_counts = [0 for _ in mlp_session.current_masks]
    for ratio in (0.2, 0.3, 0.5):
        step = mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=ratio))
        counts = [int((step.masks[i] == 0).sum()) for i in sorted(step.masks)]
        assert all(c >= p for c, p in zip(counts, prev_counts))
        prev_counts = counts


def test_revert_to_baseline(mlp_session):
    mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.5))
    step = mlp_session.revert_to(0)
    assert mlp_session.current_id == 0
    assert step.report.global_ratio == 0.0


def test_remove_leaf_step(mlp_session):
    step = mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.5))
    n = len(mlp_session.list_steps())
    removed = mlp_session.remove_step(step.step_id)
    assert removed == [step.step_id]
    assert len(mlp_session.list_steps()) == n - 1
    assert mlp_session.current_id == 0


def test_remove_cascades_to_descendants(mlp_session):
    s1 = mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.2))
    s2 = mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.2))
    removed = mlp_session.remove_step(s1.step_id)
    assert set(removed) == {s1.step_id, s2.step_id}
    assert mlp_session.current_id == 0


def test_remove_baseline_rejected(mlp_session):
    with pytest.raises(SessionError):
        mlp_session.remove_step(0)


def test_remove_unknown_step_rejected(mlp_session):
    with pytest.raises(SessionError):
        mlp_session.remove_step(42)


def test_prune_after_revert_reproduces_masks(mlp_session):
    settings = PruneSettings(algorithm="map", global_ratio=0.5)
    s1 = mlp_session.run_prune_step(settings)
    mlp_session.revert_to(0)
    s2 = mlp_session.run_prune_step(settings)
    for i in s1.masks:
        np.testing.assert_array_equal(s1.masks[i], s2.masks[i])


def test_revert_creates_branch(mlp_session):
    s1 = mlp_session.run_prune_step(PruneSettings(algorithm="map", global_ratio=0.2))
    mlp_session.revert_to(0)
    s2 = mlp_session.run_prune_step(PruneSettings(algorithm="lap", global_ratio=0.2))
    assert s1.parent_id == 0 and s2.parent_id == 0
    assert s1.step_id != s2.step_id


def test_mark_channel_toggles(mlp_session):
    edit = mlp_session.mark_channel_from_feature_map(0, 3)
    assert (edit.kind, edit.payload) == ("prune_channel", 3)
    assert mlp_session.current_masks[0].all()  # returned, not applied
    edit = mlp_session.mark_channel_from_feature_map(0, 3)
    assert edit.kind == "restore_channel"
    assert not mlp_session.pending_marks
