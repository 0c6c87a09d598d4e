"""Writer for the embedding-bundle directory format.

Implemented against the published format contract rather than the consumer
package: matrices as raw little-endian float32 row-major files, names as
UTF-8 lines, a JSON manifest with dims and 64-bit BLAKE2b checksums.  The
consumer's `validate` subcommand is the compatibility oracle.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _digest(data: bytes) -> str:
    return hashlib.blake2b(data, digest_size=8).hexdigest()


def write_bundle_dir(
    path,
    repr_matrix: np.ndarray,
    logits: np.ndarray,
    mm_image: np.ndarray,
    concept_text: np.ndarray,
    concept_names: list[str],
    label_names: list[str],
    annotations: np.ndarray | None = None,
    metadata: dict | None = None,
) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)

    matrices = {
        "repr": ("repr.f32", repr_matrix),
        "logits": ("logits.f32", logits),
        "mm_image": ("mm_image.f32", mm_image),
        "concept_text": ("concept_text.f32", concept_text),
    }
    entries = {}
    for name, (fname, arr) in matrices.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        if not np.isfinite(arr).all():
            raise ValueError(f"non-finite values in {name}")
        data = arr.tobytes()
        (out / fname).write_bytes(data)
        entries[name] = {
            "file": fname,
            "rows": arr.shape[0],
            "cols": arr.shape[1],
            "dtype": "float32",
            "checksum": _digest(data),
        }
    if annotations is not None:
        ann = np.ascontiguousarray(annotations, dtype=np.uint8)
        data = ann.tobytes()
        (out / "annotations.u8").write_bytes(data)
        entries["annotations"] = {
            "file": "annotations.u8",
            "rows": ann.shape[0],
            "cols": ann.shape[1],
            "dtype": "uint8",
            "checksum": _digest(data),
        }

    names = {}
    for kind, fname, values in (
        ("concept_names", "concept_names.txt", concept_names),
        ("label_names", "label_names.txt", label_names),
    ):
        data = ("\n".join(values) + "\n").encode("utf-8")
        (out / fname).write_bytes(data)
        names[kind] = {"file": fname, "checksum": _digest(data)}

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "endianness": "little",
        "order": "row-major",
        "dims": {
            "n_examples": repr_matrix.shape[0],
            "n_labels": logits.shape[1],
            "n_concepts": concept_text.shape[0],
            "d_repr": repr_matrix.shape[1],
            "d_mm": mm_image.shape[1],
        },
        "matrices": entries,
        "names": names,
        "metadata": metadata or {},
    }
    (out / "manifest.json").write_bytes(
        (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode("utf-8")
    )
    return out
