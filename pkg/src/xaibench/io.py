"""File formats: the ``.t3`` binary tensor format, JSON sidecar
manifests, model directories and corpus directories.

``.t3`` layout: three unsigned 32-bit little-endian integers (h, w, c)
followed by h*w*c little-endian float32 values in row-major order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from xaibench import patterns
from xaibench.network import Conv2D, Dense, Flatten, MaxPool, Network

T3_MAGICLESS_HEADER = struct.Struct("<III")

ROLES = ("input", "gt3d", "gt2d", "explanation")


class FormatError(ValueError):
    pass


def write_t3(path, tensor: np.ndarray) -> None:
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim == 1:
        tensor = tensor.reshape(1, 1, -1)
    if tensor.ndim == 2:
        tensor = tensor[:, :, None]
    if tensor.ndim != 3:
        raise FormatError(f"cannot store {tensor.ndim}-d tensor as .t3")
    h, w, c = tensor.shape
    with open(path, "wb") as fh:
        fh.write(T3_MAGICLESS_HEADER.pack(h, w, c))
        fh.write(tensor.astype("<f4").tobytes(order="C"))


def read_t3(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(T3_MAGICLESS_HEADER.size)
        if len(header) != T3_MAGICLESS_HEADER.size:
            raise FormatError(f"{path}: truncated header")
        h, w, c = T3_MAGICLESS_HEADER.unpack(header)
        payload = fh.read()
    expected = h * w * c * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return data.reshape(h, w, c)


def write_sidecar(t3_path, example_id: str, model_id: int, class_label: int,
                  role: str) -> None:
    if role not in ROLES:
        raise FormatError(f"unknown tensor role {role!r}")
    meta = {"example_id": example_id, "class_label": class_label,
            "model_id": model_id, "role": role}
    Path(str(t3_path) + ".json").write_text(_dumps(meta))


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------- models

def save_model(net: Network, out_dir) -> None:
    """JSON manifest plus one .t3 per weight/bias array."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    layers = []
    for i, layer in enumerate(net.layers):
        entry: dict = {"name": layer.name, "kind": type(layer).__name__}
        if isinstance(layer, MaxPool):
            entry["kernel"] = list(layer.kernel)
            entry["stride"] = list(layer.stride)
        elif isinstance(layer, Conv2D):
            entry["stride"] = list(layer.stride)
            entry["weights"] = f"layer{i:02d}_weights.t3"
            entry["bias"] = f"layer{i:02d}_bias.t3"
            kh, kw, cin, cout = layer.weights.shape
            entry["kernel_shape"] = [kh, kw, cin, cout]
            write_t3(out / entry["weights"], layer.weights.reshape(kh * kw, cin, cout))
            write_t3(out / entry["bias"], layer.bias)
        elif isinstance(layer, Dense):
            entry["weights"] = f"layer{i:02d}_weights.t3"
            entry["bias"] = f"layer{i:02d}_bias.t3"
            write_t3(out / entry["weights"], layer.weights)
            write_t3(out / entry["bias"], layer.bias)
        layers.append(entry)
    manifest = {
        "concept_id": net.concept_id,
        "input_shape": list(net.input_shape),
        "pattern_set_version": patterns.pattern_set_version(),
        "layers": layers,
        "term_map": net.term_map,
    }
    (out / "model.json").write_text(_dumps(manifest))


def load_model(model_dir) -> Network:
    path = Path(model_dir)
    manifest = json.loads((path / "model.json").read_text())
    layers = []
    for entry in manifest["layers"]:
        kind = entry["kind"]
        if kind == "MaxPool":
            layers.append(MaxPool(kernel=tuple(entry["kernel"]),
                                  stride=tuple(entry["stride"]), name=entry["name"]))
        elif kind == "Flatten":
            layers.append(Flatten(name=entry["name"]))
        elif kind == "Conv2D":
            kh, kw, cin, cout = entry["kernel_shape"]
            w = read_t3(path / entry["weights"]).reshape(kh, kw, cin, cout)
            b = read_t3(path / entry["bias"]).reshape(-1)
            layers.append(Conv2D(np.ascontiguousarray(w), b,
                                 stride=tuple(entry["stride"]), name=entry["name"]))
        elif kind == "Dense":
            w = read_t3(path / entry["weights"])[:, :, 0]
            b = read_t3(path / entry["bias"]).reshape(-1)
            layers.append(Dense(np.ascontiguousarray(w), b, name=entry["name"]))
        else:
            raise FormatError(f"unknown layer kind {kind!r}")
    return Network(layers=tuple(layers),
                   input_shape=tuple(manifest["input_shape"]),
                   concept_id=manifest["concept_id"],
                   term_map=manifest.get("term_map", {}))


# ---------------------------------------------------------------- corpora

def example_id(model_id: int, class_label: int, index: int) -> str:
    return f"m{model_id}_c{class_label}_{index:03d}"


def save_corpus(corpus: dict, root_seed: int, out_dir) -> None:
    """corpus: {model_id: [dataset.Example, ...]}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for model_id, examples in sorted(corpus.items()):
        for ex in examples:
            eid = example_id(ex.model_id, ex.class_label, ex.index)
            for role, tensor in (("input", ex.image), ("gt3d", ex.gt.gt3d),
                                 ("gt2d", ex.gt.gt2d)):
                t3 = out / f"{eid}_{role}.t3"
                write_t3(t3, tensor)
                write_sidecar(t3, eid, ex.model_id, ex.class_label, role)
            entries.append({
                "example_id": eid, "model_id": ex.model_id,
                "class_label": ex.class_label, "index": ex.index,
                "offsets": list(ex.offsets), "seed_key": list(ex.seed_key),
            })
    manifest = {
        "root_seed": root_seed,
        "pattern_set_version": patterns.pattern_set_version(),
        "count": len(entries),
        "examples": entries,
    }
    (out / "manifest.json").write_text(_dumps(manifest))


def load_corpus(corpus_dir) -> list[dict]:
    """Loads manifest entries with their tensors attached.

    Returns a list of dicts with keys example_id, model_id, class_label,
    offsets, image, gt3d, gt2d."""
    path = Path(corpus_dir)
    manifest = json.loads((path / "manifest.json").read_text())
    out = []
    for entry in manifest["examples"]:
        eid = entry["example_id"]
        record = dict(entry)
        record["image"] = read_t3(path / f"{eid}_input.t3")
        record["gt3d"] = read_t3(path / f"{eid}_gt3d.t3")
        record["gt2d"] = read_t3(path / f"{eid}_gt2d.t3")
        out.append(record)
    return out


# ----------------------------------------------------------- explanations

def save_explanations(records: list[dict], out_dir) -> None:
    """records: dicts with example_id, model_id, class_label, method,
    dims, values (tensor), elapsed_ms."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in records:
        name = f"{rec['example_id']}_{rec['method']}.t3"
        write_t3(out / name, rec["values"])
        write_sidecar(out / name, rec["example_id"], rec["model_id"],
                      rec["class_label"], "explanation")
        entries.append({k: rec[k] for k in
                        ("example_id", "model_id", "class_label", "method",
                         "dims", "elapsed_ms")} | {"file": name})
    (out / "explanations.json").write_text(_dumps({"explanations": entries}))


def load_explanations(expl_dir) -> list[dict]:
    path = Path(expl_dir)
    manifest = json.loads((path / "explanations.json").read_text())
    out = []
    for entry in manifest["explanations"]:
        record = dict(entry)
        record["values"] = read_t3(path / entry["file"])
        out.append(record)
    return out
