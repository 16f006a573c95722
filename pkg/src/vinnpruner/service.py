"""HTTP/JSON service exposing sessions, pruning, metrics, masks and feature maps.

Sessions are single-writer: a mutation arriving while another is in flight is
rejected with 409 rather than queued. Every successful mutation is written
through to the session archive so runs stay replayable.
"""

from __future__ import annotations

import base64
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import featuremaps, persistence
from .model import Dataset, Model, ModelError
from .pruning import MaskEdit, PruneError, PruneSettings, mask_view_layout
from .session import Session, SessionError


class ApiError(Exception):
    def __init__(self, status: int, message: str, field: str | None = None):
        self.status = status
        self.message = message
        self.field = field


class SettingsBody(BaseModel):
    algorithm: str = "lap"
    global_ratio: float = 0.5
    per_layer_ratio: dict[str, float] = Field(default_factory=dict)


class EditBody(BaseModel):
    layer_index: int
    kind: str
    payload: list[int] | int


class CreateSessionBody(BaseModel):
    model: str
    dataset: str


class EditsBody(BaseModel):
    edits: list[EditBody]


class RevertBody(BaseModel):
    step_id: int


class SessionStore:
    def __init__(self, models_dir: Path, datasets_dir: Path, sessions_dir: Path):
        self.models_dir = models_dir
        self.datasets_dir = datasets_dir
        self.sessions_dir = sessions_dir
        self.sessions: dict[str, Session] = {}
        self.locks: dict[str, threading.Lock] = {}

    def create(self, model_name: str, dataset_name: str) -> Session:
        model_path = self.models_dir / model_name
        dataset_path = self.datasets_dir / dataset_name
        if not model_path.is_dir():
            raise ApiError(404, f"unknown model {model_name!r}", field="model")
        if not dataset_path.is_dir():
            raise ApiError(404, f"unknown dataset {dataset_name!r}", field="dataset")
        try:
            model = persistence.load_model(model_path)
            dataset = persistence.load_dataset(dataset_path)
        except (persistence.ArchiveError, ModelError) as exc:
            raise ApiError(422, str(exc))
        session = Session(session_id=uuid.uuid4().hex[:12], model=model, dataset=dataset)
        self.sessions[session.session_id] = session
        self.locks[session.session_id] = threading.Lock()
        self.persist(session)
        return session

    def get(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise ApiError(404, f"unknown session {session_id!r}")
        return self.sessions[session_id]

    def persist(self, session: Session) -> None:
        persistence.save_session(session, self.sessions_dir / session.session_id)


def _settings_from_body(body: SettingsBody) -> PruneSettings:
    try:
        per_layer = {int(k): float(v) for k, v in body.per_layer_ratio.items()}
    except ValueError:
        raise ApiError(422, "per_layer_ratio keys must be layer indices", field="per_layer_ratio")
    try:
        return PruneSettings(
            algorithm=body.algorithm, global_ratio=body.global_ratio, per_layer_ratio=per_layer
        )
    except PruneError as exc:
        raise ApiError(422, str(exc), field="settings")


def _edit_from_body(body: EditBody) -> MaskEdit:
    payload = body.payload
    if body.kind in ("prune_rect", "restore_rect"):
        if not isinstance(payload, list) or len(payload) != 4:
            raise ApiError(422, "rect payload must be [row0, col0, row1, col1]", field="payload")
        payload = tuple(payload)
    elif body.kind in ("prune_channel", "restore_channel"):
        if not isinstance(payload, int):
            raise ApiError(422, "channel payload must be an integer", field="payload")
    elif body.kind in ("prune_indices", "restore_indices"):
        if not isinstance(payload, list):
            raise ApiError(422, "indices payload must be a list", field="payload")
    try:
        return MaskEdit(layer_index=body.layer_index, kind=body.kind, payload=payload)
    except PruneError as exc:
        raise ApiError(422, str(exc), field="kind")


def _step_json(step) -> dict:
    return persistence.step_to_dict(step)


def _geometry_json(layout) -> dict:
    return {
        "kind": layout.kind,
        "rows": layout.rows,
        "cols": layout.cols,
        "row_span": layout.row_span,
        "in_ch": layout.in_ch,
        "kh": layout.kh,
        "kw": layout.kw,
    }


def _rle_runs(bits: np.ndarray) -> list[list[int]]:
    runs: list[list[int]] = []
    for v in bits:
        v = int(v)
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
    return runs


def _archive_listing(root: Path, loader) -> list[dict]:
    entries = []
    if not root.is_dir():
        return entries
    for child in sorted(root.iterdir()):
        if not child.is_dir():
            continue
        try:
            loaded = loader(child)
            entry = {"name": loaded.name, "status": "ok"}
            if isinstance(loaded, Model):
                entry["input_shape"] = list(loaded.input_shape)
                entry["num_layers"] = len(loaded.layers)
                entry["weighted_layers"] = loaded.weighted_indices()
                entry["layers"] = [
                    {
                        "kind": l.kind,
                        "weight_shape": list(l.weight.shape) if l.weighted else None,
                    }
                    for l in loaded.layers
                ]
            elif isinstance(loaded, Dataset):
                entry["num_samples"] = int(len(loaded.samples))
                entry["num_classes"] = loaded.num_classes
                entry["class_names"] = loaded.class_names
                entry["sample_shape"] = list(loaded.samples.shape[1:])
        except Exception as exc:  # a malformed archive is listed, not hidden
            entry = {"name": child.name, "status": "invalid", "reason": str(exc)}
        entries.append(entry)
    return entries


def create_app(
    models_dir: str | Path,
    datasets_dir: str | Path,
    sessions_dir: str | Path,
    static_dir: str | Path | None = None,
) -> FastAPI:
    models_dir, datasets_dir = Path(models_dir), Path(datasets_dir)
    sessions_dir = Path(sessions_dir)
    sessions_dir.mkdir(parents=True, exist_ok=True)
    store = SessionStore(models_dir, datasets_dir, sessions_dir)
    app = FastAPI(title="vinnpruner")
    app.state.store = store

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        detail: dict = {"message": exc.message}
        if exc.field:
            detail["field"] = exc.field
        return JSONResponse(status_code=exc.status, content={"detail": detail})

    def mutate(session_id: str, fn):
        session = store.get(session_id)
        lock = store.locks[session_id]
        if not lock.acquire(blocking=False):
            raise ApiError(409, "another mutation is in flight for this session")
        try:
            result = fn(session)
            store.persist(session)
            return result
        except (PruneError, SessionError, ModelError) as exc:
            if isinstance(exc, SessionError) and "unknown step" in str(exc):
                raise ApiError(404, str(exc))
            raise ApiError(422, str(exc))
        finally:
            lock.release()

    @app.get("/api/models")
    def list_models():
        return _archive_listing(models_dir, persistence.load_model)

    @app.get("/api/datasets")
    def list_datasets():
        return _archive_listing(datasets_dir, persistence.load_dataset)

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody):
        session = store.create(body.model, body.dataset)
        return {"session_id": session.session_id, "step": _step_json(session.steps[0])}

    @app.get("/api/sessions/{session_id}/steps")
    def list_steps(session_id: str):
        session = store.get(session_id)
        return {
            "session_id": session.session_id,
            "model": session.model.name,
            "dataset": session.dataset.name,
            "current_id": session.current_id,
            "steps": [_step_json(s) for s in session.list_steps()],
        }

    @app.post("/api/sessions/{session_id}/prune")
    def prune(session_id: str, body: SettingsBody):
        settings = _settings_from_body(body)
        step = mutate(session_id, lambda s: s.run_prune_step(settings))
        return {"step": _step_json(step)}

    @app.post("/api/sessions/{session_id}/edits")
    def edits(session_id: str, body: EditsBody):
        parsed = [_edit_from_body(e) for e in body.edits]
        step = mutate(session_id, lambda s: s.apply_manual_edits(parsed))
        return {"step": _step_json(step)}

    @app.post("/api/sessions/{session_id}/revert")
    def revert(session_id: str, body: RevertBody):
        step = mutate(session_id, lambda s: s.revert_to(body.step_id))
        return {"step": _step_json(step), "current_id": step.step_id}

    @app.delete("/api/sessions/{session_id}/steps/{step_id}")
    def remove_step(session_id: str, step_id: int):
        removed = mutate(session_id, lambda s: s.remove_step(step_id))
        session = store.get(session_id)
        return {"removed": removed, "current_id": session.current_id}

    @app.get("/api/sessions/{session_id}/layers/{layer_index}/mask")
    def get_mask(session_id: str, layer_index: int, format: str = "bits"):
        session = store.get(session_id)
        if layer_index not in session.current_masks:
            raise ApiError(404, f"layer {layer_index} is not a weighted layer")
        if format not in ("bits", "rle"):
            raise ApiError(422, f"unknown mask format {format!r}", field="format")
        mask = session.current_masks[layer_index]
        layout = mask_view_layout(session.model.layers[layer_index])
        grid_bits = mask.reshape(-1)  # weight flat order == grid row-major order
        out: dict = {
            "layer_index": layer_index,
            "geometry": _geometry_json(layout),
            "pruned": int((mask == 0).sum()),
            "total": int(mask.size),
            "format": format,
        }
        if format == "bits":
            out["bits"] = base64.b64encode(persistence.pack_mask(mask)).decode("ascii")
        else:
            out["runs"] = _rle_runs(grid_bits)
        return out

    @app.get("/api/sessions/{session_id}/metrics")
    def get_metrics(session_id: str, step: int | None = None):
        session = store.get(session_id)
        step_id = session.current_id if step is None else step
        if step_id not in session.steps:
            raise ApiError(404, f"unknown step {step_id}")
        return {"step_id": step_id, "report": session.steps[step_id].report.to_dict()}

    @app.get("/api/sessions/{session_id}/featuremaps")
    def get_featuremaps(
        session_id: str, sample: int, layer: int, variant: str = "current"
    ):
        session = store.get(session_id)
        try:
            maps = featuremaps.feature_maps(session, sample, layer, variant)
        except (IndexError, SessionError) as exc:
            status = 422 if isinstance(exc, SessionError) else 404
            raise ApiError(status, str(exc))
        return {
            "layer_index": maps.layer_index,
            "sample_index": sample,
            "variant": variant,
            "maps": [m.astype(np.float64).tolist() for m in maps.maps],
            "stats": [
                {
                    "channel": s.channel,
                    "min": s.min,
                    "max": s.max,
                    "mean": s.mean,
                    "is_dead": s.is_dead,
                }
                for s in maps.stats
            ],
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
