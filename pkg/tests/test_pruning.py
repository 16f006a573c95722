import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vinnpruner.model import LayerSpec, Model
from vinnpruner.pruning import (
    MaskEdit,
    PruneError,
    PruneSettings,
    apply_edits,
    channel_flat_indices,
    lap_scores,
    map_scores,
    mask_view_layout,
    prune_by_ratio,
    rect_to_flat_indices,
)

from conftest import dense


def brute_force_prune(scores, mask, ratio):
    """Independent oracle: sort (score, flat index) ascending, zero the first
    floor(ratio * remaining) unpruned entries."""
    flat_scores = scores.reshape(-1)
    out = mask.reshape(-1).copy()
    alive = [i for i in range(len(out)) if out[i]]
    n_prune = math.floor(ratio * len(alive))
    for _, i in sorted((flat_scores[i], i) for i in alive)[:n_prune]:
        out[i] = 0
    return out.reshape(mask.shape)


# ---------------------------------------------------------------- map_scores


def test_map_scores_absolute_value():
    np.testing.assert_array_equal(
        map_scores(np.array([0.5, -0.1, 0.3, -0.8], np.float32)),
        np.array([0.5, 0.1, 0.3, 0.8], np.float32),
    )


def test_map_scores_all_zero():
    np.testing.assert_array_equal(map_scores(np.zeros((3, 3), np.float32)), np.zeros((3, 3)))


def test_map_scores_fixture_layer(mlp, golden):
    np.testing.assert_allclose(
        map_scores(mlp.layers[0].weight),
        np.asarray(golden["mlp_layer0_abs_scores"], dtype=np.float32),
        rtol=1e-7,
    )


# ---------------------------------------------------------------- lap_scores


def three_layer_net():
    return Model(
        "t",
        (2,),
        [
            dense([[1, 0], [0, 2]]),
            dense([[3, 4], [5, 6]]),
            dense([[1, 1], [1, 1]]),
        ],
    )


def test_lap_identity_neighbors_reduces_to_map():
    model = Model(
        "t", (2,), [dense(np.eye(2)), dense([[3, -4], [5, 6]]), dense(np.eye(2))]
    )
    masks = model.all_ones_masks()
    np.testing.assert_array_equal(
        lap_scores(model, masks, 1, "both"), map_scores(model.layers[1].weight)
    )


def test_lap_three_layer_hand_computed():
    model = three_layer_net()
    scores = lap_scores(model, model.all_ones_masks(), 1, "both")
    # independently recomputed: |W2[i,j]| * ||row j of W1|| * ||col i of W3||
    w1 = np.array([[1, 0], [0, 2]], dtype=np.float64)
    w2 = np.array([[3, 4], [5, 6]], dtype=np.float64)
    w3 = np.ones((2, 2), dtype=np.float64)
    expected = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            prev = math.sqrt(sum(w1[j, k] ** 2 for k in range(2)))
            nxt = math.sqrt(sum(w3[k, i] ** 2 for k in range(2)))
            expected[i, j] = abs(w2[i, j]) * prev * nxt
    np.testing.assert_allclose(scores, expected, rtol=1e-12)
    assert scores[0, 0] == pytest.approx(3 * 1 * math.sqrt(2))


def test_lap_forward_on_last_layer_is_map():
    model = three_layer_net()
    np.testing.assert_array_equal(
        lap_scores(model, model.all_ones_masks(), 2, "forward"),
        map_scores(model.layers[2].weight),
    )


def test_lap_backward_on_first_layer_is_map():
    model = three_layer_net()
    np.testing.assert_array_equal(
        lap_scores(model, model.all_ones_masks(), 0, "backward"),
        map_scores(model.layers[0].weight),
    )


def test_lap_norms_respect_masks():
    model = three_layer_net()
    masks = model.all_ones_masks()
    masks[0][1, 1] = 0  # kills row 1 of W1 -> prev_norm(1) == 0
    scores = lap_scores(model, masks, 1, "backward")
    assert scores[0, 1] == 0.0 and scores[1, 1] == 0.0
    assert scores[0, 0] > 0.0


def test_lap_rejects_non_weighted_layer():
    model = Model("t", (2,), [dense(np.eye(2)), LayerSpec("relu")])
    with pytest.raises(PruneError):
        lap_scores(model, model.all_ones_masks(), 1)


def test_lap_conv_dense_boundary(cnn):
    # dense after flatten: channel norms aggregate the 16 flat positions
    masks = cnn.all_ones_masks()
    scores = lap_scores(cnn, masks, 3, "forward")
    w_dense = cnn.layers[6].weight.astype(np.float64)
    per_channel = np.sqrt((w_dense.reshape(4, 8, 16) ** 2).sum(axis=(0, 2)))
    expected = np.abs(cnn.layers[3].weight).astype(np.float64) * per_channel[:, None, None, None]
    np.testing.assert_allclose(scores, expected, rtol=1e-10)


# ------------------------------------------------------------ prune_by_ratio


def test_prune_by_ratio_half():
    scores = np.array([0.5, 0.1, 0.3, 0.8], np.float32)
    mask = np.ones(4, np.uint8)
    np.testing.assert_array_equal(prune_by_ratio(scores, mask, 0.5), [1, 0, 0, 1])


def test_prune_by_ratio_zero_is_identity():
    scores = np.array([0.5, 0.1], np.float32)
    mask = np.array([1, 0], np.uint8)
    np.testing.assert_array_equal(prune_by_ratio(scores, mask, 0.0), [1, 0])


def test_prune_by_ratio_tie_breaks_on_lower_index():
    scores = np.array([0.2, 0.2, 0.9], np.float32)
    mask = np.ones(3, np.uint8)
    np.testing.assert_array_equal(prune_by_ratio(scores, mask, 1 / 3), [0, 1, 1])


def test_prune_by_ratio_never_resurrects():
    scores = np.array([9.0, 0.1, 0.2, 0.3], np.float32)
    mask = np.array([0, 1, 1, 1], np.uint8)
    out = prune_by_ratio(scores, mask, 1 / 3)
    assert out[0] == 0
    np.testing.assert_array_equal(out, [0, 0, 1, 1])


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(1, 80),
    ratio=st.floats(0.0, 1.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_prune_by_ratio_matches_brute_force(n, ratio, seed):
    rng = np.random.default_rng(seed)
    scores = rng.random(n).astype(np.float32)
    scores[rng.random(n) < 0.3] = 0.5  # force ties
    mask = (rng.random(n) > 0.2).astype(np.uint8)
    np.testing.assert_array_equal(
        prune_by_ratio(scores, mask, ratio), brute_force_prune(scores, mask, ratio)
    )


def test_lap_reduces_to_map_ranking_under_uniform_norms():
    rng = np.random.default_rng(5)
    # +/-1 neighbor matrices: every row/col norm is exactly 2.0
    w1 = rng.choice([-1.0, 1.0], size=(4, 4))
    w3 = rng.choice([-1.0, 1.0], size=(4, 4))
    w2 = rng.standard_normal((4, 4))
    model = Model("u", (4,), [dense(w1), dense(w2), dense(w3)])
    masks = model.all_ones_masks()
    for ratio in np.arange(0.1, 1.0, 0.1):
        a = prune_by_ratio(lap_scores(model, masks, 1, "both"), masks[1], float(ratio))
        b = prune_by_ratio(map_scores(model.layers[1].weight), masks[1], float(ratio))
        np.testing.assert_array_equal(a, b)


# ------------------------------------------------------------------- layout


def test_conv_layout_geometry():
    layer = LayerSpec(
        "conv2d",
        weight=np.zeros((4, 2, 3, 3), np.float32),
        bias=np.zeros(4, np.float32),
    )
    layout = mask_view_layout(layer)
    assert (layout.rows, layout.cols, layout.row_span) == (4, 18, 3)


def test_dense_layout_geometry():
    layout = mask_view_layout(dense(np.zeros((10, 5), np.float32)))
    assert (layout.rows, layout.cols, layout.row_span) == (10, 5, 1)


def test_layout_mapping_is_bijective():
    layer = LayerSpec(
        "conv2d", weight=np.zeros((4, 2, 3, 3), np.float32), bias=np.zeros(4, np.float32)
    )
    layout = mask_view_layout(layer)
    seen = set()
    for r in range(layout.rows):
        for c in range(layout.cols):
            flat = layout.cell_to_flat(r, c)
            assert layout.flat_to_cell(flat) == (r, c)
            seen.add(flat)
    assert seen == set(range(4 * 2 * 3 * 3))


def test_full_row_rect_prunes_whole_out_channel():
    layer = LayerSpec(
        "conv2d", weight=np.zeros((4, 2, 3, 3), np.float32), bias=np.zeros(4, np.float32)
    )
    layout = mask_view_layout(layer)
    idx = rect_to_flat_indices(layout, (0, 0, 0, 17))
    np.testing.assert_array_equal(sorted(idx), channel_flat_indices(layer, 0))


# -------------------------------------------------------------------- edits


def two_layer_model():
    return Model("e", (2,), [dense([[1.0, 2.0], [3.0, 4.0]]), dense([[1.0, 1.0]])])


def test_prune_then_restore_channel_roundtrip():
    model = two_layer_model()
    masks = model.all_ones_masks()
    out = apply_edits(
        model,
        masks,
        [MaskEdit(0, "prune_channel", 1), MaskEdit(0, "restore_channel", 1)],
    )
    np.testing.assert_array_equal(out[0], masks[0])


def test_rect_covering_grid_zeroes_mask():
    model = two_layer_model()
    out = apply_edits(model, model.all_ones_masks(), [MaskEdit(0, "prune_rect", (0, 0, 1, 1))])
    assert not out[0].any()


def test_prune_indices_flat_zero():
    model = two_layer_model()
    out = apply_edits(model, model.all_ones_masks(), [MaskEdit(0, "prune_indices", [0])])
    np.testing.assert_array_equal(out[0], [[0, 1], [1, 1]])


def test_out_of_bounds_edit_rejected_and_source_untouched():
    model = two_layer_model()
    masks = model.all_ones_masks()
    with pytest.raises(PruneError):
        apply_edits(
            model,
            masks,
            [MaskEdit(0, "prune_indices", [0]), MaskEdit(0, "prune_indices", [99])],
        )
    assert masks[0].all()


def test_settings_validation():
    with pytest.raises(PruneError):
        PruneSettings(algorithm="magic")
    with pytest.raises(PruneError):
        PruneSettings(global_ratio=1.5)
    model = two_layer_model()
    with pytest.raises(PruneError):
        PruneSettings(per_layer_ratio={5: 0.5}).validate_layers(model)
