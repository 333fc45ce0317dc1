"""Batch drivers: read inputs, call an encoder, check shapes, write records."""

import json
import logging

import numpy as np
from PIL import Image

from .config import CODE_MODELS, VISION_MODELS
from .records import CODE, IMAGE, Record, write_records

log = logging.getLogger(__name__)

_FILTERS = {
    "bilinear": Image.BILINEAR,
    "bicubic": Image.BICUBIC,
    "nearest": Image.NEAREST,
}


class DimensionError(ValueError):
    pass


def read_manifest(path):
    """JSON lines with at least ``id``; image manifests also carry
    ``image_path``, source manifests ``source_path``."""
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def read_labels(path):
    with open(path) as f:
        raw = json.load(f)
    return {k: int(v) for k, v in raw.items()}


def _batches(items, n):
    for i in range(0, len(items), n):
        yield items[i:i + n]


def _check(rid, arr, info, pooling):
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != info.dim:
        raise DimensionError(f"{rid}: encoder produced shape {arr.shape}, expected (*, {info.dim})")
    if pooling == "pooled" and arr.shape[0] != 1:
        raise DimensionError(f"{rid}: pooled output must have one token, got {arr.shape[0]}")
    return arr


def _sidecar(out_path, cfg, info, modality, n, skipped, resize_policy):
    meta = {
        "model_id": info.hub_id,
        "revision": cfg.revision,
        "pooling": cfg.pooling,
        "pooling_detail": info.pooling,
        "resize_policy": resize_policy,
        "modality": modality,
        "dim": info.dim,
        "n_records": n,
        "skipped": skipped,
    }
    with open(out_path + ".meta.json", "w") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")
    return meta


def _label(labels, rid):
    if rid not in labels:
        raise KeyError(f"no label for id {rid}")
    return labels[rid]


def extract_code(entries, labels, encoder, cfg, out_path):
    """``entries``: dicts with ``id`` and ``source_path``. ``encoder.encode``
    maps a list of source texts to one (T, d) array each."""
    cfg.validate()
    info = CODE_MODELS[cfg.code_model]
    records = []
    for batch in _batches(entries, cfg.batch_size):
        texts = []
        for e in batch:
            with open(e["source_path"], "rb") as f:
                texts.append(f.read().decode("utf-8", errors="replace"))
        for e, arr in zip(batch, encoder.encode(texts), strict=True):
            arr = _check(e["id"], arr, info, cfg.pooling)
            records.append(Record(e["id"], _label(labels, e["id"]), CODE, arr))
    write_records(records, out_path)
    return _sidecar(out_path, cfg, info, "code", len(records), [], None)


def load_image(path, size, resize):
    img = Image.open(path)
    img.load()
    return img.convert("RGB").resize((size, size), _FILTERS[resize])


def extract_image(entries, labels, encoder, cfg, out_path):
    """``entries``: dicts with ``id`` and ``image_path``. Images are resized
    to the backbone's square input before ``encoder.encode`` sees them;
    files that do not decode are skipped and listed in the sidecar."""
    cfg.validate()
    info = VISION_MODELS[cfg.vision_model]
    records, skipped = [], []
    for batch in _batches(entries, cfg.batch_size):
        ok, images = [], []
        for e in batch:
            try:
                images.append(load_image(e["image_path"], info.input_size, cfg.resize))
                ok.append(e)
            except (OSError, ValueError) as err:
                log.warning("skipping %s: %s", e["id"], err)
                skipped.append(e["id"])
        if not ok:
            continue
        for e, arr in zip(ok, encoder.encode(images), strict=True):
            arr = _check(e["id"], arr, info, cfg.pooling)
            records.append(Record(e["id"], _label(labels, e["id"]), IMAGE, arr))
    write_records(records, out_path)
    policy = f"{cfg.resize} to {info.input_size}x{info.input_size}, RGB"
    return _sidecar(out_path, cfg, info, "image", len(records), skipped, policy)
