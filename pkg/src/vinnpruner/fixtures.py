"""Deterministic fixture generation: synthetic datasets, small trained models,
and golden evaluation values.

All randomness comes from a self-contained xoshiro256** generator (seeded via
splitmix64), so the same seed always produces byte-identical archives. The
built-in trainer is plain full-batch gradient descent over dense layers only;
the fixture CNN's conv kernels are hand-designed and frozen.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .metrics import evaluate
from .model import Dataset, LayerSpec, Model, forward_all_activations
from .pruning import MaskEdit, PruneSettings, mask_view_layout
from .reference import ref_conv2d, ref_forward_all
from .session import Session
from .persistence import save_dataset, save_model

_MASK64 = (1 << 64) - 1

MLP_MIN_ACCURACY = 0.90
CNN_MIN_ACCURACY = 0.90
MAP_HALF_MAX_DROP = 0.10
DEAD_CHANNEL_MAX_DELTA = 0.02


class FixtureError(RuntimeError):
    pass


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** 1.0 (Blackman & Vigna), state seeded with splitmix64."""

    def __init__(self, seed: int):
        s = seed & _MASK64
        self.state = []
        for _ in range(4):
            s = (s + 0x9E3779B97F4A7C15) & _MASK64
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            self.state.append(z ^ (z >> 31))

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.state
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.state = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def normal(self) -> float:
        # Box-Muller; discard the second deviate to keep the stream simple
        u1 = max(self.random(), 2.0**-53)
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        return np.asarray([self.normal() for _ in range(n)], dtype=np.float64).reshape(shape)


# --------------------------------------------------------------------------
# synthetic datasets

BLOB_CLASSES = ["blob-a", "blob-b", "blob-c", "blob-d"]
SHAPE_CLASSES = ["horizontal", "vertical", "diagonal", "blank"]


def make_blob_datasets(rng: Xoshiro256StarStar) -> tuple[Dataset, Dataset]:
    """4 Gaussian blobs in 16-d: 100 train + 50 test samples per class."""
    n_features, n_classes = 16, 4
    centers = []
    for _ in range(n_classes):
        v = rng.normals(n_features)
        centers.append(4.0 * v / np.linalg.norm(v))

    def draw(per_class: int) -> tuple[np.ndarray, np.ndarray]:
        samples, labels = [], []
        for i in range(per_class):
            for c in range(n_classes):  # interleave classes
                samples.append(centers[c] + rng.normals(n_features))
                labels.append(c)
        return np.asarray(samples, dtype=np.float32), np.asarray(labels, dtype=np.int64)

    xs_tr, ys_tr = draw(100)
    xs_te, ys_te = draw(50)
    return (
        Dataset("blobs-train", xs_tr, ys_tr, list(BLOB_CLASSES)),
        Dataset("blobs-test", xs_te, ys_te, list(BLOB_CLASSES)),
    )


def _shape_image(rng: Xoshiro256StarStar, label: int) -> np.ndarray:
    img = np.zeros((8, 8), dtype=np.float64)
    pos = 1 + int(rng.random() * 6)  # keep bars off the border
    if label == 0:
        img[pos, :] = 1.0
    elif label == 1:
        img[:, pos] = 1.0
    elif label == 2:
        for i in range(8):
            img[i, i] = 1.0
    img += 0.1 * rng.normals((8, 8))
    return img


def make_shape_datasets(rng: Xoshiro256StarStar) -> tuple[Dataset, Dataset]:
    """8x8 images of bars/diagonals/noise: 100 train + 50 test per class."""

    def draw(per_class: int) -> tuple[np.ndarray, np.ndarray]:
        samples, labels = [], []
        for i in range(per_class):
            for c in range(4):
                samples.append(_shape_image(rng, c)[None, :, :])
                labels.append(c)
        return np.asarray(samples, dtype=np.float32), np.asarray(labels, dtype=np.int64)

    xs_tr, ys_tr = draw(100)
    xs_te, ys_te = draw(50)
    return (
        Dataset("shapes-train", xs_tr, ys_tr, list(SHAPE_CLASSES)),
        Dataset("shapes-test", xs_te, ys_te, list(SHAPE_CLASSES)),
    )


# --------------------------------------------------------------------------
# plain-gradient-descent trainer (dense layers only)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_dense_stack(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    x: np.ndarray,
    labels: np.ndarray,
    lr: float,
    epochs: int,
) -> None:
    """Full-batch gradient descent on a dense/relu/.../dense stack, in place.

    ReLU between every pair of consecutive dense layers, softmax cross-entropy
    at the end. float64 throughout; the caller casts to float32 for storage.
    """
    n = len(x)
    onehot = np.zeros((n, weights[-1].shape[0]))
    onehot[np.arange(n), labels] = 1.0
    for _ in range(epochs):
        pre, post = [], [x]
        a = x
        for li, (w, b) in enumerate(zip(weights, biases)):
            z = a @ w.T + b
            pre.append(z)
            a = np.maximum(z, 0.0) if li < len(weights) - 1 else z
            post.append(a)
        dz = (_softmax_rows(post[-1]) - onehot) / n
        for li in range(len(weights) - 1, -1, -1):
            dw = dz.T @ post[li]
            db = dz.sum(axis=0)
            if li > 0:
                dz = (dz @ weights[li]) * (pre[li - 1] > 0.0)
            weights[li] -= lr * dw
            biases[li] -= lr * db


def train_mlp(rng: Xoshiro256StarStar, train: Dataset) -> Model:
    sizes = [16, 32, 32, 4]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = math.sqrt(2.0 / fan_in)
        weights.append(scale * rng.normals((fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    x = train.samples.reshape(len(train.samples), -1).astype(np.float64)
    train_dense_stack(weights, biases, x, train.labels, lr=0.05, epochs=1500)
    layers = []
    for i, (w, b) in enumerate(zip(weights, biases)):
        layers.append(LayerSpec("dense", weight=w.astype(np.float32), bias=b.astype(np.float32)))
        if i < len(weights) - 1:
            layers.append(LayerSpec("relu"))
    return Model(name="mlp", input_shape=(16,), layers=layers)


# --------------------------------------------------------------------------
# fixture CNN: hand-designed frozen conv kernels + trained dense head


def _conv1_kernels() -> np.ndarray:
    horizontal = 0.5 * np.array([[-1, -1, -1], [2, 2, 2], [-1, -1, -1]], dtype=np.float64)
    vertical = horizontal.T
    diagonal = 0.5 * np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]], dtype=np.float64)
    faint = np.full((3, 3), 0.001)  # deliberately near-dead channel
    return np.stack([horizontal, vertical, diagonal, faint])[:, None, :, :]


def _conv2_kernels(rng: Xoshiro256StarStar) -> np.ndarray:
    horizontal = 0.35 * np.array([[-1, -1, -1], [2, 2, 2], [-1, -1, -1]], dtype=np.float64)
    vertical = horizontal.T
    diagonal = 0.35 * np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]], dtype=np.float64)
    w = np.asarray(
        [rng.uniform(-0.02, 0.02) for _ in range(8 * 4 * 9)], dtype=np.float64
    ).reshape(8, 4, 3, 3)
    for o in range(3):  # pass-through of each informative input channel
        w[o, o, 1, 1] += 1.0
    w[3, 0] += horizontal
    w[4, 1] += vertical
    w[5, 2] += diagonal
    w[6, 0, 1, 1] += 0.5
    w[6, 1, 1, 1] += 0.5
    w[6, 2, 1, 1] -= 0.5
    # channel 7 taps only the faint input channel: large weight, tiny output
    w[7] = np.asarray(
        [rng.uniform(-0.005, 0.005) for _ in range(4 * 9)], dtype=np.float64
    ).reshape(4, 3, 3)
    w[7, 3, 1, 1] = 0.9
    return w


def build_cnn(rng: Xoshiro256StarStar, train: Dataset) -> Model:
    conv1 = _conv1_kernels().astype(np.float32)
    conv2 = _conv2_kernels(rng).astype(np.float32)
    frozen = [
        LayerSpec("conv2d", weight=conv1, bias=np.zeros(4, np.float32), stride=1, padding=1),
        LayerSpec("relu"),
        LayerSpec("maxpool2d", window=2, stride=2),
        LayerSpec("conv2d", weight=conv2, bias=np.zeros(8, np.float32), stride=1, padding=1),
        LayerSpec("relu"),
        LayerSpec("flatten"),
    ]
    # features from the frozen stack, then train the dense head only
    probe = Model("cnn-headless", (1, 8, 8), frozen + [
        LayerSpec("dense", weight=np.zeros((4, 128), np.float32), bias=np.zeros(4, np.float32))
    ])
    features = np.asarray(
        [forward_all_activations(probe, None, s)[5] for s in train.samples], dtype=np.float64
    )
    head_w = [0.01 * rng.normals((4, 128))]
    head_b = [np.zeros(4)]
    train_dense_stack(head_w, head_b, features, train.labels, lr=0.2, epochs=1200)
    layers = frozen + [
        LayerSpec("dense", weight=head_w[0].astype(np.float32), bias=head_b[0].astype(np.float32))
    ]
    return Model(name="cnn", input_shape=(1, 8, 8), layers=layers)


# --------------------------------------------------------------------------
# derived facts shared by the generator and the acceptance suite

CNN_SECOND_CONV = 3
CNN_LAST_RELU = 4


def full_zero_rows(mask: np.ndarray, layer: LayerSpec) -> list[int]:
    """Mask-view rows (out-channels) with every cell pruned."""
    layout = mask_view_layout(layer)
    grid = mask.reshape(layout.rows, layout.cols)
    return [r for r in range(layout.rows) if not grid[r].any()]


def low_activation_channels(
    model: Model, dataset: Dataset, layer_index: int, n_samples: int = 50
) -> list[int]:
    """Channels whose mean |activation| falls in the bottom decile."""
    n_samples = min(n_samples, len(dataset.samples))
    sums = None
    for i in range(n_samples):
        act = forward_all_activations(model, None, dataset.samples[i])[layer_index]
        per_channel = np.abs(act).mean(axis=(1, 2))
        sums = per_channel if sums is None else sums + per_channel
    means = sums / n_samples
    cutoff = np.percentile(means, 10)
    return [c for c in range(len(means)) if means[c] <= cutoff]


def _prune_once(model: Model, dataset: Dataset, algorithm: str, ratio: float) -> Session:
    session = Session(session_id=f"fixture-{algorithm}", model=model, dataset=dataset)
    session.run_prune_step(PruneSettings(algorithm=algorithm, global_ratio=ratio))
    return session


# --------------------------------------------------------------------------
# generation


def generate_fixtures(output_dir: str | Path, seed: int) -> dict:
    out = Path(output_dir)
    rng = Xoshiro256StarStar(seed)

    blobs_train, blobs_test = make_blob_datasets(rng)
    shapes_train, shapes_test = make_shape_datasets(rng)
    mlp = train_mlp(rng, blobs_train)
    cnn = build_cnn(rng, shapes_train)

    golden: dict = {"seed": seed}

    # baseline evaluations
    mlp_base = evaluate(mlp, mlp.all_ones_masks(), blobs_test)
    cnn_base = evaluate(cnn, cnn.all_ones_masks(), shapes_test)
    if mlp_base.accuracy < MLP_MIN_ACCURACY:
        raise FixtureError(f"fixture MLP only reached {mlp_base.accuracy:.3f} test accuracy")
    if cnn_base.accuracy < CNN_MIN_ACCURACY:
        raise FixtureError(f"fixture CNN only reached {cnn_base.accuracy:.3f} test accuracy")
    golden["mlp_baseline_report"] = mlp_base.to_dict()
    golden["cnn_baseline_report"] = cnn_base.to_dict()

    # MAP at 0.5 on the MLP must stay within 10 points of baseline
    map_half = _prune_once(mlp, blobs_test, "map", 0.5)
    map_half_report = map_half.current_step.report
    if abs(map_half_report.accuracy - mlp_base.accuracy) > MAP_HALF_MAX_DROP:
        raise FixtureError(
            f"MAP@0.5 dropped accuracy {mlp_base.accuracy:.3f} -> {map_half_report.accuracy:.3f}"
        )
    golden["mlp_map_half_report"] = map_half_report.to_dict()

    # LAP and MAP must rank differently on the trained MLP
    lap_half = _prune_once(mlp, blobs_test, "lap", 0.5)
    if all(
        np.array_equal(map_half.current_masks[i], lap_half.current_masks[i])
        for i in mlp.weighted_indices()
    ):
        raise FixtureError("MAP and LAP produced identical masks on the fixture MLP")

    # structural contrast on the CNN's second conv layer at ratio 0.7
    lap_cnn = _prune_once(cnn, shapes_test, "lap", 0.7)
    map_cnn = _prune_once(cnn, shapes_test, "map", 0.7)
    lap_rows = full_zero_rows(lap_cnn.current_masks[CNN_SECOND_CONV], cnn.layers[CNN_SECOND_CONV])
    map_rows = full_zero_rows(map_cnn.current_masks[CNN_SECOND_CONV], cnn.layers[CNN_SECOND_CONV])
    if not lap_rows:
        raise FixtureError("LAP@0.7 left no fully pruned out-channel on the second conv layer")
    if map_rows:
        raise FixtureError(f"MAP@0.7 fully pruned out-channels {map_rows} on the second conv layer")
    golden["lap_07_conv2_full_rows"] = lap_rows
    golden["map_07_conv2_full_rows"] = map_rows

    # channel-elimination use case: prune the lowest-activation channels
    dead = low_activation_channels(cnn, shapes_test, CNN_LAST_RELU)
    session = Session(session_id="fixture-dead", model=cnn, dataset=shapes_test)
    session.apply_manual_edits(
        [MaskEdit(CNN_SECOND_CONV, "prune_channel", c) for c in dead]
    )
    delta = abs(session.current_step.report.accuracy - cnn_base.accuracy)
    if delta > DEAD_CHANNEL_MAX_DELTA:
        raise FixtureError(
            f"pruning low-activation channels {dead} moved accuracy by {delta:.3f}"
        )
    golden["dead_channels"] = dead
    golden["dead_channel_layer"] = CNN_LAST_RELU
    golden["dead_channel_pruned_accuracy"] = session.current_step.report.accuracy

    # golden values from the scalar reference implementation
    ref_acts = ref_forward_all(cnn, None, shapes_test.samples[0])
    golden["cnn_sample0_scores"] = [float(v) for v in ref_acts[-1]]
    golden["cnn_layer_shapes"] = [list(a.shape) for a in ref_acts]
    golden["cnn_sample0_layer0_maps"] = np.asarray(ref_acts[0], dtype=np.float64).tolist()
    avg_kernel = np.full((1, 1, 3, 3), 1.0 / 9.0, dtype=np.float32)
    golden["avg3x3_sample0"] = np.asarray(
        ref_conv2d(avg_kernel, np.zeros(1, np.float32), 1, 0, shapes_test.samples[0]),
        dtype=np.float64,
    ).tolist()
    ref_mlp_scores = ref_forward_all(mlp, None, blobs_test.samples[0])[-1]
    golden["mlp_sample0_scores"] = [float(v) for v in ref_mlp_scores]
    golden["mlp_layer0_abs_scores"] = np.abs(
        mlp.layers[0].weight.astype(np.float64)
    ).tolist()

    # write archives
    save_model(mlp, out / "models" / "mlp")
    save_model(cnn, out / "models" / "cnn")
    save_dataset(blobs_train, out / "datasets" / "blobs-train")
    save_dataset(blobs_test, out / "datasets" / "blobs-test")
    save_dataset(shapes_train, out / "datasets" / "shapes-train")
    save_dataset(shapes_test, out / "datasets" / "shapes-test")
    golden_dir = out / "golden"
    golden_dir.mkdir(parents=True, exist_ok=True)
    (golden_dir / "golden.json").write_text(
        json.dumps(golden, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return golden
