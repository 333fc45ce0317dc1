"""``gocoma-extract code|image --manifest M --labels L --out F``."""

import argparse
import json
import logging
import sys

from .config import CODE_MODELS, VISION_MODELS, ExtractorConfig
from .extract import extract_code, extract_image, read_labels, read_manifest


def main(argv=None):
    p = argparse.ArgumentParser(prog="gocoma-extract")
    p.add_argument("modality", choices=["code", "image"])
    p.add_argument("--manifest", required=True, help="JSON lines with id and source_path/image_path")
    p.add_argument("--labels", required=True, help="JSON object mapping id to integer label")
    p.add_argument("--out", required=True, help="EMBR0001 output file")
    p.add_argument("--code-model", default="codebert", choices=sorted(CODE_MODELS))
    p.add_argument("--vision-model", default="vit-base-patch16-224", choices=sorted(VISION_MODELS))
    p.add_argument("--pooling", default="pooled", choices=["pooled", "tokens"])
    p.add_argument("--resize", default="bilinear", choices=["bilinear", "bicubic", "nearest"])
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--device", default="cpu")
    p.add_argument("--revision", default="main")
    a = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    cfg = ExtractorConfig(
        code_model=a.code_model,
        vision_model=a.vision_model,
        pooling=a.pooling,
        resize=a.resize,
        batch_size=a.batch_size,
        device=a.device,
        revision=a.revision,
    ).validate()
    from . import models

    entries = read_manifest(a.manifest)
    labels = read_labels(a.labels)
    if a.modality == "code":
        meta = extract_code(entries, labels, models.CodeEncoder(cfg.code_model, cfg), cfg, a.out)
    else:
        meta = extract_image(entries, labels, models.VisionEncoder(cfg.vision_model, cfg), cfg, a.out)
    json.dump(meta, sys.stderr, indent=2)
    sys.stderr.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
