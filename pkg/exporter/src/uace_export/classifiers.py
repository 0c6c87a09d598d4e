"""Task-classifier backends producing (representation, logits) per image.

The exporter consumes a user-supplied TorchScript checkpoint whose forward
pass returns a ``(representation, logits)`` pair for a float image batch of
shape N x 3 x H x W in [0, 1]; the representation is the selected layer's
output (the checkpoint owner decides which layer that is; by convention the
last layer before the logits).  A deterministic builtin head exists for
pipelines without a trained model.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

_BUILTIN_SEED = 0xC1A55
BUILTIN_DIM = 48
BUILTIN_LABELS = ["class_a", "class_b"]


class ClassifierError(RuntimeError):
    pass


def _load_image_batch(paths, size):
    batch = []
    for path in paths:
        with Image.open(path) as img:
            small = img.convert("RGB").resize((size, size), Image.BILINEAR)
        batch.append(np.asarray(small, dtype=np.float32).transpose(2, 0, 1) / 255.0)
    return np.stack(batch)


class BuiltinClassifier:
    """Seeded random projection plus linear head; deterministic stand-in."""

    name = "builtin"
    image_size = 32
    label_names = BUILTIN_LABELS

    def __init__(self):
        rng = np.random.default_rng(_BUILTIN_SEED)
        in_dim = 3 * self.image_size * self.image_size
        self.proj = rng.standard_normal((in_dim, BUILTIN_DIM)).astype(np.float32)
        self.proj /= np.sqrt(in_dim)
        self.head = rng.standard_normal((BUILTIN_DIM, 2)).astype(np.float32)

    def forward(self, paths):
        batch = _load_image_batch(paths, self.image_size)
        flat = batch.reshape(batch.shape[0], -1)
        reprs = np.maximum(flat @ self.proj, 0.0) + 1e-3
        return reprs, reprs @ self.head


class TorchScriptClassifier:
    """User checkpoint: torch.jit archive returning (representation, logits)."""

    name = "torchscript"

    def __init__(self, checkpoint, image_size: int = 32, device: str = "cpu",
                 layer: int = -1):
        try:
            import torch
        except ImportError as exc:
            raise ClassifierError("torch is required for checkpoint classifiers") from exc
        if layer != -1:
            raise ClassifierError(
                "only the last pre-logit layer (layer -1) is supported; the "
                "checkpoint's returned representation defines it"
            )
        self.torch = torch
        try:
            self.model = torch.jit.load(str(checkpoint), map_location=device)
        except Exception as exc:
            raise ClassifierError(f"could not load checkpoint {checkpoint}: {exc}") from exc
        self.model.eval()
        self.image_size = image_size
        self.device = device
        self.label_names = None  # resolved from the first batch

    def forward(self, paths):
        torch = self.torch
        batch = torch.from_numpy(_load_image_batch(paths, self.image_size))
        with torch.no_grad():
            out = self.model(batch.to(self.device))
        if not (isinstance(out, (tuple, list)) and len(out) == 2):
            raise ClassifierError(
                "checkpoint forward must return (representation, logits)"
            )
        reprs, logits = (t.cpu().numpy().astype(np.float32) for t in out)
        if self.label_names is None:
            self.label_names = [f"label_{i:03d}" for i in range(logits.shape[1])]
        return reprs, logits


def make_classifier(spec: str, image_size: int = 32, device: str = "cpu",
                    layer: int = -1):
    if spec == "builtin":
        return BuiltinClassifier()
    return TorchScriptClassifier(spec, image_size=image_size, device=device,
                                 layer=layer)
