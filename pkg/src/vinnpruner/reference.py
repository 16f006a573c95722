"""Scalar (pure-loop) forward pass, independent of the vectorized engine.

Only used to produce golden files at fixture-generation time and as the
second route in engine tests. Deliberately avoids numpy vector ops for the
arithmetic itself so the two implementations share no code path.
"""

from __future__ import annotations

import numpy as np

from .model import Masks, Model


def ref_dense(weight, bias, x):
    out = []
    for i in range(len(weight)):
        acc = np.float32(0.0)
        for j in range(len(x)):
            acc = np.float32(acc + np.float32(weight[i][j] * x[j]))
        out.append(float(acc + bias[i]))
    return np.asarray(out, dtype=np.float32)


def ref_conv2d(weight, bias, stride, padding, x):
    out_ch, in_ch, kh, kw = weight.shape
    _, h, w = x.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((out_ch, ho, wo), dtype=np.float32)
    for o in range(out_ch):
        for oy in range(ho):
            for ox in range(wo):
                acc = 0.0
                for c in range(in_ch):
                    for ky in range(kh):
                        for kx in range(kw):
                            iy = oy * stride + ky - padding
                            ix = ox * stride + kx - padding
                            if 0 <= iy < h and 0 <= ix < w:
                                acc += float(weight[o][c][ky][kx]) * float(x[c][iy][ix])
                out[o][oy][ox] = acc + float(bias[o])
    return out


def ref_maxpool2d(window, stride, x):
    ch, h, w = x.shape
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    out = np.zeros((ch, ho, wo), dtype=np.float32)
    for c in range(ch):
        for oy in range(ho):
            for ox in range(wo):
                best = float("-inf")
                for ky in range(window):
                    for kx in range(window):
                        v = float(x[c][oy * stride + ky][ox * stride + kx])
                        if v > best:
                            best = v
                out[c][oy][ox] = best
    return out


def ref_forward_all(model: Model, masks: Masks | None, x: np.ndarray) -> list[np.ndarray]:
    x = np.asarray(x, dtype=np.float32)
    activations = []
    for i, layer in enumerate(model.layers):
        mask = masks.get(i) if masks is not None else None
        if layer.kind == "dense":
            w = layer.weight if mask is None else layer.weight * mask
            x = ref_dense(w, layer.bias, x)
        elif layer.kind == "conv2d":
            w = layer.weight if mask is None else layer.weight * mask
            x = ref_conv2d(w, layer.bias, layer.stride, layer.padding, x)
        elif layer.kind == "relu":
            x = np.where(x > 0, x, np.float32(0.0)).astype(np.float32)
        elif layer.kind == "maxpool2d":
            x = ref_maxpool2d(layer.window, layer.stride, x)
        elif layer.kind == "flatten":
            x = x.reshape(-1)
        activations.append(x)
    return activations


def ref_forward(model: Model, masks: Masks | None, x: np.ndarray) -> np.ndarray:
    return ref_forward_all(model, masks, x)[-1]
