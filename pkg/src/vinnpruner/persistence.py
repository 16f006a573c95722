"""Bit-exact file formats.

Model archive:   model.json manifest + weights.bin (raw little-endian float32,
                 tensors concatenated in manifest order, row-major).
Dataset archive: data.json + samples.bin (float32) + labels.bin (uint8).
Session archive: session.json; masks stored as packed bits, little-endian bit
                 order within each byte, flat-index order, zero-padded.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .metrics import EvalReport
from .model import Dataset, LayerSpec, Masks, Model
from .pruning import MaskEdit, PruneSettings
from .session import PruneStep, Session


class ArchiveError(ValueError):
    pass


# --------------------------------------------------------------------------
# mask bit packing


def pack_mask(mask: np.ndarray) -> bytes:
    return np.packbits(mask.reshape(-1).astype(np.uint8), bitorder="little").tobytes()


def unpack_mask(data: bytes, shape: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(shape))
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    if len(bits) < n:
        raise ArchiveError(f"packed mask too short for shape {shape}")
    return bits[:n].reshape(shape)


# --------------------------------------------------------------------------
# model archive


def _tensor_entry(arr: np.ndarray, offset: int) -> tuple[dict, int]:
    length = arr.size * 4
    return {"shape": list(arr.shape), "offset": offset, "length": length}, offset + length


def save_model(model: Model, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    layers = []
    blobs = []
    offset = 0
    for layer in model.layers:
        entry: dict = {"kind": layer.kind}
        if layer.kind == "conv2d":
            entry["stride"] = layer.stride
            entry["padding"] = layer.padding
        elif layer.kind == "maxpool2d":
            entry["window"] = layer.window
            entry["stride"] = layer.stride
        if layer.weighted:
            entry["weight"], offset = _tensor_entry(layer.weight, offset)
            entry["bias"], offset = _tensor_entry(layer.bias, offset)
            blobs.append(layer.weight)
            blobs.append(layer.bias)
        layers.append(entry)
    manifest = {"name": model.name, "input_shape": list(model.input_shape), "layers": layers}
    (path / "model.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    with open(path / "weights.bin", "wb") as f:
        for arr in blobs:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_tensor(blob: bytes, entry: dict, layer_index: int, expected_offset: int) -> tuple[np.ndarray, int]:
    shape = tuple(entry["shape"])
    offset, length = int(entry["offset"]), int(entry["length"])
    if offset != expected_offset:
        raise ArchiveError(
            f"layer {layer_index}: tensor offset {offset}, expected {expected_offset}"
        )
    if length != int(np.prod(shape)) * 4:
        raise ArchiveError(f"layer {layer_index}: length {length} does not match shape {shape}")
    if offset + length > len(blob):
        raise ArchiveError(
            f"layer {layer_index}: tensor [{offset}, {offset + length}) exceeds blob "
            f"of {len(blob)} bytes"
        )
    arr = np.frombuffer(blob[offset : offset + length], dtype="<f4").reshape(shape)
    return arr.astype(np.float32), offset + length


def load_model(path: str | Path) -> Model:
    path = Path(path)
    try:
        manifest = json.loads((path / "model.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArchiveError(f"no model.json in {path}")
    blob = (path / "weights.bin").read_bytes()
    layers = []
    offset = 0
    for i, entry in enumerate(manifest["layers"]):
        kind = entry["kind"]
        kwargs: dict = {}
        if kind in ("dense", "conv2d"):
            weight, offset = _read_tensor(blob, entry["weight"], i, offset)
            bias, offset = _read_tensor(blob, entry["bias"], i, offset)
            kwargs.update(weight=weight, bias=bias)
            if kind == "conv2d":
                kwargs.update(stride=int(entry["stride"]), padding=int(entry["padding"]))
        elif kind == "maxpool2d":
            kwargs.update(window=int(entry["window"]), stride=int(entry["stride"]))
        elif kind not in ("relu", "flatten"):
            raise ArchiveError(f"layer {i}: unknown layer kind {kind!r}")
        layers.append(LayerSpec(kind=kind, **kwargs))
    if offset != len(blob):
        raise ArchiveError(f"weights.bin has {len(blob)} bytes, manifest covers {offset}")
    return Model(
        name=manifest["name"], input_shape=tuple(manifest["input_shape"]), layers=layers
    )


# --------------------------------------------------------------------------
# dataset archive


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": dataset.name,
        "shape": list(dataset.samples.shape[1:]),
        "num_samples": int(len(dataset.samples)),
        "num_classes": dataset.num_classes,
        "class_names": dataset.class_names,
    }
    (path / "data.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    (path / "samples.bin").write_bytes(
        np.ascontiguousarray(dataset.samples, dtype="<f4").tobytes()
    )
    (path / "labels.bin").write_bytes(dataset.labels.astype(np.uint8).tobytes())


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    try:
        manifest = json.loads((path / "data.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArchiveError(f"no data.json in {path}")
    n = int(manifest["num_samples"])
    shape = (n, *manifest["shape"])
    samples_raw = (path / "samples.bin").read_bytes()
    if len(samples_raw) != int(np.prod(shape)) * 4:
        raise ArchiveError(
            f"samples.bin has {len(samples_raw)} bytes, manifest declares "
            f"{int(np.prod(shape)) * 4}"
        )
    labels_raw = (path / "labels.bin").read_bytes()
    if len(labels_raw) != n:
        raise ArchiveError(f"labels.bin has {len(labels_raw)} bytes, expected {n}")
    return Dataset(
        name=manifest["name"],
        samples=np.frombuffer(samples_raw, dtype="<f4").reshape(shape).astype(np.float32),
        labels=np.frombuffer(labels_raw, dtype=np.uint8).astype(np.int64),
        class_names=list(manifest["class_names"]),
    )


# --------------------------------------------------------------------------
# session archive


def _edit_to_dict(edit: MaskEdit) -> dict:
    payload = edit.payload
    if isinstance(payload, (tuple, np.ndarray)):
        payload = [int(v) for v in payload]
    elif isinstance(payload, list):
        payload = [int(v) for v in payload]
    else:
        payload = int(payload)
    return {"layer_index": edit.layer_index, "kind": edit.kind, "payload": payload}


def _edit_from_dict(d: dict) -> MaskEdit:
    payload = d["payload"]
    if d["kind"] in ("prune_rect", "restore_rect"):
        payload = tuple(int(v) for v in payload)
    return MaskEdit(layer_index=int(d["layer_index"]), kind=d["kind"], payload=payload)


def _settings_to_dict(s: PruneSettings) -> dict:
    return {
        "algorithm": s.algorithm,
        "global_ratio": s.global_ratio,
        "per_layer_ratio": {str(k): v for k, v in s.per_layer_ratio.items()},
    }


def _settings_from_dict(d: dict) -> PruneSettings:
    return PruneSettings(
        algorithm=d["algorithm"],
        global_ratio=float(d["global_ratio"]),
        per_layer_ratio={int(k): float(v) for k, v in d.get("per_layer_ratio", {}).items()},
    )


def step_to_dict(step: PruneStep) -> dict:
    return {
        "step_id": step.step_id,
        "parent_id": step.parent_id,
        "created_at": step.created_at,
        "settings": _settings_to_dict(step.settings),
        "manual_edits": [_edit_to_dict(e) for e in step.manual_edits],
        "report": step.report.to_dict(),
        "masks": [
            {
                "layer_index": i,
                "shape": list(step.masks[i].shape),
                "bits": base64.b64encode(pack_mask(step.masks[i])).decode("ascii"),
            }
            for i in sorted(step.masks)
        ],
    }


def step_from_dict(d: dict) -> PruneStep:
    masks: Masks = {}
    for m in d["masks"]:
        masks[int(m["layer_index"])] = unpack_mask(
            base64.b64decode(m["bits"]), tuple(m["shape"])
        )
    return PruneStep(
        step_id=int(d["step_id"]),
        parent_id=None if d["parent_id"] is None else int(d["parent_id"]),
        settings=_settings_from_dict(d["settings"]),
        masks=masks,
        manual_edits=[_edit_from_dict(e) for e in d["manual_edits"]],
        report=EvalReport.from_dict(d["report"]),
        created_at=float(d["created_at"]),
    )


def save_session(session: Session, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    doc = {
        "session_id": session.session_id,
        "model": session.model.name,
        "dataset": session.dataset.name,
        "current_id": session.current_id,
        "next_id": session._next_id,
        "steps": [step_to_dict(session.steps[k]) for k in sorted(session.steps)],
    }
    (path / "session.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_session(path: str | Path, model: Model, dataset: Dataset) -> Session:
    path = Path(path)
    try:
        doc = json.loads((path / "session.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArchiveError(f"no session.json in {path}")
    steps = {int(s["step_id"]): step_from_dict(s) for s in doc["steps"]}
    session = Session(
        session_id=doc["session_id"], model=model, dataset=dataset, steps=steps
    )
    session.current_id = int(doc["current_id"])
    session._next_id = int(doc["next_id"])
    for step in steps.values():
        for idx, mask in step.masks.items():
            if mask.shape != model.layers[idx].weight.shape:
                raise ArchiveError(
                    f"step {step.step_id} layer {idx}: mask shape {mask.shape} "
                    f"!= weight shape {model.layers[idx].weight.shape}"
                )
    return session


def load_session_doc(path: str | Path) -> dict:
    """Raw session document, for consumers that do not need a live session."""
    path = Path(path)
    try:
        return json.loads((path / "session.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArchiveError(f"no session.json in {path}")
