"""Batch export of an image folder into an embedding bundle."""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifiers import make_classifier
from .encoders import make_encoder
from .format import write_bundle_dir

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


class ExportError(RuntimeError):
    pass


@dataclass
class ExportSpec:
    image_dir: str
    concept_file: str
    output: str
    classifier: str = "builtin"          # "builtin" or a TorchScript path
    layer: int = -1                      # last layer before the logits
    backend: str = "tiny"                # "tiny" or "clip"
    clip_model: str | None = None
    batch_size: int = 8
    device: str = "cpu"
    annotations_csv: str | None = None
    metadata: dict = field(default_factory=dict)


def load_concepts(path) -> list[str]:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    concepts = [ln for ln in lines if ln]
    if not concepts:
        raise ExportError("concept list is empty")
    if len(set(concepts)) != len(concepts):
        raise ExportError("concept list has duplicate lines")
    return concepts


def list_images(image_dir) -> list[Path]:
    root = Path(image_dir)
    if not root.is_dir():
        raise ExportError(f"image directory not found: {root}")
    return sorted(
        p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )


def _read_annotations(path, image_names, concepts) -> np.ndarray:
    table = np.zeros((len(image_names), len(concepts)), dtype=np.uint8)
    img_index = {name: i for i, name in enumerate(image_names)}
    con_index = {name: j for j, name in enumerate(concepts)}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise ExportError(f"annotation rows need (image, concept, 0/1): {row}")
            image, concept, value = (cell.strip() for cell in row)
            if image in img_index and concept in con_index:
                table[img_index[image], con_index[concept]] = int(value) != 0
    return table


def _batched(items, size):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def export(spec: ExportSpec, log=sys.stderr) -> Path:
    """Encode every readable image and concept; write the bundle directory.

    Unreadable images are skipped with a warning and recorded in the
    manifest metadata; exporting fails if no image is usable.
    """
    concepts = load_concepts(spec.concept_file)
    candidates = list_images(spec.image_dir)
    encoder = make_encoder(spec.backend, spec.clip_model, spec.device)
    classifier = make_classifier(spec.classifier, device=spec.device,
                                 layer=spec.layer)

    usable, skipped = [], []
    from PIL import Image, UnidentifiedImageError

    for path in candidates:
        try:
            with Image.open(path) as img:
                img.verify()
            usable.append(path)
        except (UnidentifiedImageError, OSError) as exc:
            skipped.append(path.name)
            print(f"warning: skipping unreadable image {path.name}: {exc}",
                  file=log)
    if not usable:
        raise ExportError("no usable images in the input directory")

    mm_rows, repr_rows, logit_rows = [], [], []
    for batch in _batched(usable, spec.batch_size):
        mm_rows.append(encoder.encode_images(batch))
        reprs, logits = classifier.forward(batch)
        repr_rows.append(reprs)
        logit_rows.append(logits)
    mm_image = np.concatenate(mm_rows)
    repr_matrix = np.concatenate(repr_rows)
    logits = np.concatenate(logit_rows)
    concept_text = encoder.encode_texts(concepts)

    image_names = [p.name for p in usable]
    annotations = None
    if spec.annotations_csv:
        annotations = _read_annotations(spec.annotations_csv, image_names, concepts)

    label_names = classifier.label_names or [
        f"label_{i:03d}" for i in range(logits.shape[1])
    ]
    metadata = {
        "tool": "uace-export",
        "encoder": encoder.name,
        "classifier": classifier.name,
        "layer": spec.layer,
        "images": image_names,
        "skipped": skipped,
        **spec.metadata,
    }
    return write_bundle_dir(
        spec.output,
        repr_matrix=repr_matrix,
        logits=logits,
        mm_image=mm_image,
        concept_text=concept_text,
        concept_names=concepts,
        label_names=label_names,
        annotations=annotations,
        metadata=metadata,
    )
