"""Record real API responses into JSON fixtures for the UI contract tests.

Run from the repo root after the Python package is installed:
    python3 frontend/scripts/record_api_fixtures.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from vinnpruner.service import create_app

ROOT = Path(__file__).resolve().parents[2]
FIXTURES = ROOT / "fixtures"
OUT = ROOT / "frontend" / "tests" / "fixtures"


def rects_for_pixel_rect(geo, pr0, pc0, pr1, pc1):
    """Mirror of the UI's pixel-rect -> grid-rect decomposition (maskGrid.ts)."""
    if geo["kind"] == "dense":
        return [[pr0, pc0, pr1, pc1]]
    kh, kw, row_span = geo["kh"], geo["kw"], geo["row_span"]
    rects = []
    r0, r1 = pr0 // row_span, pr1 // row_span
    i0, i1 = pc0 // kw, pc1 // kw
    for r in range(r0, r1 + 1):
        ky_lo = pr0 - r * row_span if r == r0 else 0
        ky_hi = pr1 - r * row_span if r == r1 else row_span - 1
        for i in range(i0, i1 + 1):
            kx0 = pc0 - i * kw if i == i0 else 0
            kx1 = pc1 - i * kw if i == i1 else kw - 1
            for ky in range(ky_lo, ky_hi + 1):
                base = i * kh * kw + ky * kw
                rects.append([r, base + kx0, r, base + kx1])
    return rects


def save(name, obj):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def main():
    app = create_app(FIXTURES / "models", FIXTURES / "datasets", "/tmp/record-sessions")
    client = TestClient(app)

    save("models.json", client.get("/api/models").json())
    save("datasets.json", client.get("/api/datasets").json())

    created = client.post(
        "/api/sessions", json={"model": "cnn", "dataset": "shapes-test"}
    ).json()
    sid = created["session_id"]
    created["session_id"] = "recorded"  # stable fixture id
    save("session_create.json", created)

    prune = client.post(
        f"/api/sessions/{sid}/prune", json={"algorithm": "lap", "global_ratio": 0.5}
    ).json()
    save("prune_lap05.json", prune)
    save("steps_after_prune.json", _strip_sid(client.get(f"/api/sessions/{sid}/steps").json()))
    save("metrics_step1.json", client.get(f"/api/sessions/{sid}/metrics", params={"step": 1}).json())

    mask_bits = client.get(f"/api/sessions/{sid}/layers/3/mask").json()
    mask_rle = client.get(f"/api/sessions/{sid}/layers/3/mask", params={"format": "rle"}).json()
    save("mask_layer3_bits.json", mask_bits)
    save("mask_layer3_rle.json", mask_rle)

    # rectangle-brush scenario: a pixel drag over the conv mask view
    geo = mask_bits["geometry"]
    pixel_rect = [1, 2, 4, 7]  # pixel rows 1..4, pixel cols 2..7
    rects = rects_for_pixel_rect(geo, *pixel_rect)
    edits = [{"layer_index": 3, "kind": "prune_rect", "payload": r} for r in rects]
    response = client.post(f"/api/sessions/{sid}/edits", json={"edits": edits}).json()
    mask_after = client.get(f"/api/sessions/{sid}/layers/3/mask").json()
    save(
        "rect_scenario.json",
        {
            "geometry": geo,
            "pixel_rect": pixel_rect,
            "edits": edits,
            "mask_before": mask_bits,
            "mask_after": mask_after,
            "response": response,
        },
    )

    revert = client.post(f"/api/sessions/{sid}/revert", json={"step_id": 0}).json()
    save("revert_to_0.json", revert)
    save("steps_after_revert.json", _strip_sid(client.get(f"/api/sessions/{sid}/steps").json()))

    rect_step_id = response["step"]["step_id"]
    deleted = client.delete(f"/api/sessions/{sid}/steps/{rect_step_id}").json()
    save("delete_rect_step.json", deleted)
    save("steps_after_delete.json", _strip_sid(client.get(f"/api/sessions/{sid}/steps").json()))

    fmaps = client.get(
        f"/api/sessions/{sid}/featuremaps", params={"sample": 0, "layer": 3, "variant": "current"}
    ).json()
    save("featuremaps_s0_l3.json", fmaps)


def _strip_sid(doc):
    doc["session_id"] = "recorded"
    return doc


if __name__ == "__main__":
    main()
