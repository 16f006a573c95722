import numpy as np
import pytest

from vinnpruner.model import (
    LayerSpec,
    Model,
    ModelError,
    ShapeChainError,
    conv2d_forward,
    forward,
    forward_all_activations,
    layer_output_shapes,
    maxpool2d_forward,
)
from vinnpruner.reference import ref_forward_all

from conftest import dense, random_model


def test_dense_forward_hand_computed():
    model = Model("m", (2,), [dense([[1, 2], [3, 4]])])
    np.testing.assert_array_equal(forward(model, None, np.array([1.0, 1.0])), [3.0, 7.0])


def test_dense_forward_masked_weight_contributes_nothing():
    model = Model("m", (2,), [dense([[1, 2], [3, 4]])])
    masks = model.all_ones_masks()
    masks[0][0, 1] = 0
    np.testing.assert_array_equal(forward(model, masks, np.array([1.0, 1.0])), [1.0, 7.0])


def test_relu_activation():
    model = Model("m", (2,), [LayerSpec("relu"), dense([[1, 0], [0, 1]])])
    acts = forward_all_activations(model, None, np.array([-1.0, 2.0]))
    np.testing.assert_array_equal(acts[0], [0.0, 2.0])


def test_dense_then_relu_activations():
    model = Model("m", (1,), [dense([[1], [-1]]), LayerSpec("relu")])
    acts = forward_all_activations(model, None, np.array([2.0]))
    np.testing.assert_array_equal(acts[0], [2.0, -2.0])
    np.testing.assert_array_equal(acts[1], [2.0, 0.0])


def test_conv_1x1_kernel_scales_input():
    weight = np.full((1, 1, 1, 1), 2.0, dtype=np.float32)
    x = np.array([[[1, 2], [3, 4]]], dtype=np.float32)
    out = conv2d_forward(weight, np.zeros(1, np.float32), 1, 0, x)
    np.testing.assert_array_equal(out, [[[2, 4], [6, 8]]])


def test_maxpool_2x2():
    x = np.array([[[1, 2], [3, 4]]], dtype=np.float32)
    np.testing.assert_array_equal(maxpool2d_forward(2, 2, x), [[[4.0]]])


def test_conv_output_spatial_dims():
    weight = np.ones((1, 1, 3, 3), dtype=np.float32)
    x = np.zeros((1, 8, 8), dtype=np.float32)
    assert conv2d_forward(weight, np.zeros(1, np.float32), 1, 1, x).shape == (1, 8, 8)
    assert conv2d_forward(weight, np.zeros(1, np.float32), 2, 0, x).shape == (1, 3, 3)


def test_conv_too_small_input_raises():
    weight = np.ones((1, 1, 5, 5), dtype=np.float32)
    with pytest.raises(ModelError):
        conv2d_forward(weight, np.zeros(1, np.float32), 1, 0, np.zeros((1, 3, 3), np.float32))


def test_shape_mismatch_names_layer():
    with pytest.raises(ShapeChainError, match="layer 1"):
        Model("m", (3,), [dense([[1, 0, 0]]), dense([[1, 2]])])


def test_input_shape_mismatch_rejected():
    model = Model("m", (2,), [dense([[1, 2]])])
    with pytest.raises(ShapeChainError):
        forward(model, None, np.zeros(3, np.float32))


def test_masking_equivalence_bit_exact():
    rng = np.random.default_rng(7)
    for _ in range(20):
        model = random_model(rng, [5, 6, 4])
        masks = model.all_ones_masks()
        for i in masks:
            masks[i] = (rng.random(masks[i].shape) > 0.4).astype(np.uint8)
        x = rng.standard_normal(5).astype(np.float32)
        zeroed_layers = []
        for i, layer in enumerate(model.layers):
            if layer.weighted:
                zeroed_layers.append(
                    LayerSpec("dense", weight=layer.weight * masks[i], bias=layer.bias)
                )
            else:
                zeroed_layers.append(layer)
        zeroed = Model("z", model.input_shape, zeroed_layers)
        a = forward(model, masks, x)
        b = forward(zeroed, None, x)
        assert a.tobytes() == b.tobytes()


def test_forward_is_deterministic(cnn, shapes_test):
    a = forward(cnn, cnn.all_ones_masks(), shapes_test.samples[0])
    b = forward(cnn, cnn.all_ones_masks(), shapes_test.samples[0])
    assert a.tobytes() == b.tobytes()


def test_forward_never_mutates_weights(cnn, shapes_test):
    before = [l.weight.copy() for l in cnn.layers if l.weighted]
    masks = cnn.all_ones_masks()
    masks[0][:] = 0
    forward(cnn, masks, shapes_test.samples[0])
    after = [l.weight for l in cnn.layers if l.weighted]
    for b, a in zip(before, after):
        assert b.tobytes() == a.tobytes()


def test_dense_linearity_with_zero_bias():
    rng = np.random.default_rng(11)
    model = Model("m", (4,), [dense(rng.standard_normal((3, 4)))])
    x = rng.standard_normal(4).astype(np.float32)
    np.testing.assert_allclose(
        forward(model, None, np.float32(2.0) * x),
        2.0 * forward(model, None, x),
        rtol=1e-6,
    )


def test_activation_shapes_chain(cnn, golden):
    shapes = layer_output_shapes(cnn)
    assert [list(s) for s in shapes] == golden["cnn_layer_shapes"]
    acts = forward_all_activations(cnn, None, np.zeros(cnn.input_shape, np.float32))
    assert [a.shape for a in acts] == shapes


def test_cnn_scores_match_scalar_reference_golden(cnn, shapes_test, golden):
    scores = forward(cnn, None, shapes_test.samples[0])
    np.testing.assert_allclose(scores, golden["cnn_sample0_scores"], rtol=1e-5)


def test_mlp_scores_match_scalar_reference_golden(mlp, blobs_test, golden):
    scores = forward(mlp, None, blobs_test.samples[0])
    np.testing.assert_allclose(scores, golden["mlp_sample0_scores"], rtol=1e-5)


def test_avg_kernel_conv_matches_golden(shapes_test, golden):
    weight = np.full((1, 1, 3, 3), 1.0 / 9.0, dtype=np.float32)
    out = conv2d_forward(weight, np.zeros(1, np.float32), 1, 0, shapes_test.samples[0])
    np.testing.assert_allclose(out, golden["avg3x3_sample0"], rtol=1e-5)


def test_engine_matches_scalar_reference_on_random_cnn():
    rng = np.random.default_rng(3)
    layers = [
        LayerSpec("conv2d", weight=rng.standard_normal((3, 2, 3, 3)).astype(np.float32),
                  bias=rng.standard_normal(3).astype(np.float32), stride=1, padding=1),
        LayerSpec("relu"),
        LayerSpec("maxpool2d", window=2, stride=2),
        LayerSpec("flatten"),
        dense(rng.standard_normal((4, 3 * 3 * 3))),
    ]
    model = Model("rc", (2, 6, 6), layers)
    x = rng.standard_normal((2, 6, 6)).astype(np.float32)
    fast = forward_all_activations(model, None, x)
    slow = ref_forward_all(model, None, x)
    for f, s in zip(fast, slow):
        np.testing.assert_allclose(f, s, rtol=1e-5, atol=1e-6)


def test_engine_outputs_are_finite(cnn, shapes_test):
    acts = forward_all_activations(cnn, None, shapes_test.samples[0])
    for a in acts:
        assert np.isfinite(a).all()
