"""On-disk embedding-bundle format.

A bundle directory decouples the numerical core from whatever framework
produced the embeddings.  Layout:

    manifest.json       dims, per-file roles, dtype, endianness, checksums
    repr.f32            N x d_f task-model representations (last layer)
    logits.f32          N x L task-model logits
    mm_image.f32        N x d_g multimodal image embeddings
    concept_text.f32    K x d_g concept text embeddings
    annotations.u8      optional N x K binary concept labels
    concept_names.txt   K lines, UTF-8
    label_names.txt     L lines, UTF-8

Matrices are raw little-endian float32, row-major.  Checksums are 64-bit
BLAKE2b digests, which guard against silent truncation.  Writing the same
bundle twice produces byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumError,
    DimensionError,
    MissingFileError,
    ValidationError,
)

SCHEMA_VERSION = 1

_MATRIX_FILES = {
    "repr": "repr.f32",
    "logits": "logits.f32",
    "mm_image": "mm_image.f32",
    "concept_text": "concept_text.f32",
}


def _digest(data: bytes) -> str:
    return hashlib.blake2b(data, digest_size=8).hexdigest()


def _as_f64(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d matrix, got ndim={arr.ndim}")
    return np.ascontiguousarray(arr)


@dataclass
class ProbeBundle:
    """All per-example matrices plus concept metadata for one explanation problem.

    Arrays are held as float64 in memory; storage is float32, so generators
    should emit float32-representable values if bit-exact round trips matter.
    """

    repr: np.ndarray          # N x d_f
    logits: np.ndarray        # N x L
    mm_image: np.ndarray      # N x d_g
    concept_text: np.ndarray  # K x d_g
    concept_names: list[str]
    label_names: list[str]
    annotations: np.ndarray | None = None  # N x K uint8 in {0, 1}
    metadata: dict = field(default_factory=dict)

    @property
    def n_examples(self) -> int:
        return self.repr.shape[0]

    @property
    def n_labels(self) -> int:
        return self.logits.shape[1]

    @property
    def n_concepts(self) -> int:
        return self.concept_text.shape[0]

    @property
    def d_repr(self) -> int:
        return self.repr.shape[1]

    @property
    def d_mm(self) -> int:
        return self.mm_image.shape[1]


def _check_finite(name: str, arr: np.ndarray) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        row = int(np.nonzero(bad.any(axis=1))[0][0])
        raise ValidationError(f"non-finite value in {name}[{row}]")


def _check_names(kind: str, names: list[str], expected: int) -> None:
    if len(names) != expected:
        raise DimensionError(f"expected {expected} {kind}, got {len(names)}")
    for i, name in enumerate(names):
        if not name:
            raise ValidationError(f"{kind}[{i}] is empty")
        if "\n" in name or "\r" in name:
            raise ValidationError(f"{kind}[{i}] contains a line break")
    if kind == "concept_names" and len(set(names)) != len(names):
        raise ValidationError("concept_names are not unique")


def validate_bundle(bundle: ProbeBundle) -> None:
    """Raise ValidationError naming the offending field and row on any violation."""
    n, d_f = bundle.repr.shape
    if bundle.logits.shape[0] != n:
        raise DimensionError(
            f"logits has {bundle.logits.shape[0]} rows, expected {n}"
        )
    if bundle.mm_image.shape[0] != n:
        raise DimensionError(
            f"mm_image has {bundle.mm_image.shape[0]} rows, expected {n}"
        )
    if bundle.concept_text.shape[1] != bundle.mm_image.shape[1]:
        raise DimensionError(
            "concept_text and mm_image embedding dimensions differ: "
            f"{bundle.concept_text.shape[1]} vs {bundle.mm_image.shape[1]}"
        )
    if min(n, d_f, bundle.n_labels, bundle.n_concepts, bundle.d_mm) < 1:
        raise DimensionError("all dimensions must be at least 1")

    for name in _MATRIX_FILES:
        _check_finite(name, getattr(bundle, name))

    for name in ("mm_image", "concept_text"):
        arr = getattr(bundle, name)
        norms = np.linalg.norm(arr, axis=1)
        if (norms == 0.0).any():
            row = int(np.nonzero(norms == 0.0)[0][0])
            raise ValidationError(
                f"all-zero row in {name}[{row}]: cosine similarity undefined"
            )

    _check_names("concept_names", bundle.concept_names, bundle.n_concepts)
    _check_names("label_names", bundle.label_names, bundle.n_labels)

    if bundle.annotations is not None:
        ann = np.asarray(bundle.annotations)
        if ann.shape != (n, bundle.n_concepts):
            raise DimensionError(
                f"annotations shape {ann.shape} does not match "
                f"(n_examples, n_concepts)=({n}, {bundle.n_concepts})"
            )
        if not np.isin(ann, (0, 1)).all():
            bad = np.nonzero(~np.isin(ann, (0, 1)).all(axis=1))[0][0]
            raise ValidationError(f"annotations[{int(bad)}] has values outside {{0, 1}}")


def make_bundle(
    repr,
    logits,
    mm_image,
    concept_text,
    concept_names,
    label_names,
    annotations=None,
    metadata=None,
) -> ProbeBundle:
    """Construct and validate a ProbeBundle from array-likes."""
    ann = None
    if annotations is not None:
        ann = np.ascontiguousarray(np.asarray(annotations, dtype=np.uint8))
    bundle = ProbeBundle(
        repr=_as_f64(repr, "repr"),
        logits=_as_f64(logits, "logits"),
        mm_image=_as_f64(mm_image, "mm_image"),
        concept_text=_as_f64(concept_text, "concept_text"),
        concept_names=list(concept_names),
        label_names=list(label_names),
        annotations=ann,
        metadata=dict(metadata or {}),
    )
    validate_bundle(bundle)
    return bundle


def _matrix_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _names_bytes(names: list[str]) -> bytes:
    return ("\n".join(names) + "\n").encode("utf-8")


def write_bundle(bundle: ProbeBundle, path) -> None:
    """Write a validated bundle; repeated writes are byte-identical."""
    validate_bundle(bundle)
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)

    files: dict[str, bytes] = {}
    matrices = {}
    for name, fname in _MATRIX_FILES.items():
        arr = getattr(bundle, name)
        data = _matrix_bytes(arr)
        files[fname] = data
        matrices[name] = {
            "file": fname,
            "rows": arr.shape[0],
            "cols": arr.shape[1],
            "dtype": "float32",
            "checksum": _digest(data),
        }
    if bundle.annotations is not None:
        data = np.ascontiguousarray(bundle.annotations, dtype=np.uint8).tobytes()
        files["annotations.u8"] = data
        matrices["annotations"] = {
            "file": "annotations.u8",
            "rows": bundle.annotations.shape[0],
            "cols": bundle.annotations.shape[1],
            "dtype": "uint8",
            "checksum": _digest(data),
        }
    for fname, names in (
        ("concept_names.txt", bundle.concept_names),
        ("label_names.txt", bundle.label_names),
    ):
        files[fname] = _names_bytes(names)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "endianness": "little",
        "order": "row-major",
        "dims": {
            "n_examples": bundle.n_examples,
            "n_labels": bundle.n_labels,
            "n_concepts": bundle.n_concepts,
            "d_repr": bundle.d_repr,
            "d_mm": bundle.d_mm,
        },
        "matrices": matrices,
        "names": {
            "concept_names": {
                "file": "concept_names.txt",
                "checksum": _digest(files["concept_names.txt"]),
            },
            "label_names": {
                "file": "label_names.txt",
                "checksum": _digest(files["label_names.txt"]),
            },
        },
        "metadata": bundle.metadata,
    }
    files["manifest.json"] = (
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    ).encode("utf-8")

    for fname, data in files.items():
        (out / fname).write_bytes(data)


def _read_file(root: Path, fname: str) -> bytes:
    fpath = root / fname
    if not fpath.is_file():
        raise MissingFileError(f"missing bundle file: {fpath}")
    return fpath.read_bytes()


def _read_matrix(root: Path, entry: dict, np_dtype) -> np.ndarray:
    data = _read_file(root, entry["file"])
    if _digest(data) != entry["checksum"]:
        raise ChecksumError(f"checksum mismatch for {entry['file']}")
    rows, cols = int(entry["rows"]), int(entry["cols"])
    arr = np.frombuffer(data, dtype=np_dtype)
    if arr.size != rows * cols:
        raise DimensionError(
            f"{entry['file']} holds {arr.size} values, manifest declares {rows}x{cols}"
        )
    return arr.reshape(rows, cols).copy()


def read_bundle(path) -> ProbeBundle:
    """Read and validate a bundle directory written by write_bundle."""
    root = Path(path)
    if not root.is_dir():
        raise MissingFileError(f"bundle directory not found: {root}")
    try:
        manifest = json.loads(_read_file(root, "manifest.json"))
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"manifest.json is not valid JSON: {exc}") from exc

    dims = manifest["dims"]
    matrices = manifest["matrices"]
    arrays = {}
    for name in _MATRIX_FILES:
        if name not in matrices:
            raise BundleFormatError(f"manifest lacks matrix entry for {name}")
        arrays[name] = _read_matrix(root, matrices[name], "<f4").astype(np.float64)

    if arrays["repr"].shape[0] != dims["n_examples"]:
        raise DimensionError(
            f"manifest declares n_examples={dims['n_examples']} "
            f"but repr has {arrays['repr'].shape[0]} rows"
        )

    annotations = None
    if "annotations" in matrices:
        annotations = _read_matrix(root, matrices["annotations"], np.uint8)

    names = {}
    for kind in ("concept_names", "label_names"):
        entry = manifest["names"][kind]
        data = _read_file(root, entry["file"])
        if _digest(data) != entry["checksum"]:
            raise ChecksumError(f"checksum mismatch for {entry['file']}")
        names[kind] = data.decode("utf-8").splitlines()

    bundle = ProbeBundle(
        repr=arrays["repr"],
        logits=arrays["logits"],
        mm_image=arrays["mm_image"],
        concept_text=arrays["concept_text"],
        concept_names=names["concept_names"],
        label_names=names["label_names"],
        annotations=annotations,
        metadata=manifest.get("metadata", {}),
    )
    validate_bundle(bundle)
    return bundle


def write_matrix_dir(path, matrices: dict[str, np.ndarray], metadata=None) -> None:
    """Dump named float matrices in the bundle file style (used by `stats`)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, arr in matrices.items():
        a = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        data = _matrix_bytes(a)
        fname = f"{name}.f32"
        (out / fname).write_bytes(data)
        entries[name] = {
            "file": fname,
            "rows": a.shape[0],
            "cols": a.shape[1],
            "dtype": "float32",
            "checksum": _digest(data),
        }
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "endianness": "little",
        "order": "row-major",
        "matrices": entries,
        "metadata": dict(metadata or {}),
    }
    (out / "manifest.json").write_bytes(
        (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode("utf-8")
    )
