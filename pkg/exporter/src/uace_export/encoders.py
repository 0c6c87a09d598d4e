"""Image/text encoder backends.

Two backends share one interface: `encode_images(paths) -> N x d_g` and
`encode_texts(lines) -> K x d_g`.

* ``clip``: a pretrained contrastive image/text model loaded through the
  transformers library.  Needs the model weights to be available (cached or
  downloadable); raises a clear error otherwise.
* ``tiny``: a deterministic, dependency-light stand-in built from color
  histograms, downsampled luminance and hashed character trigrams.  It is
  not a semantic model; it exists so pipelines can be exercised and bundles
  produced bit-reproducibly on machines without model weights.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

TINY_DIM = 64
_TINY_SEED = 0x7ACE


class EncoderError(RuntimeError):
    pass


def _tiny_projection(in_dim: int) -> np.ndarray:
    rng = np.random.default_rng(_TINY_SEED + in_dim)
    return rng.standard_normal((in_dim, TINY_DIM)).astype(np.float32) / np.sqrt(in_dim)


class TinyEncoder:
    """Deterministic toy multimodal encoder; see module docstring."""

    name = "tiny"
    dim = TINY_DIM

    def encode_images(self, paths) -> np.ndarray:
        feats = []
        for path in paths:
            with Image.open(path) as img:
                small = img.convert("RGB").resize((16, 16), Image.BILINEAR)
            arr = np.asarray(small, dtype=np.float32) / 255.0
            hist = [
                np.histogram(arr[..., c], bins=8, range=(0.0, 1.0))[0]
                for c in range(3)
            ]
            hist = np.concatenate(hist).astype(np.float32) / arr[..., 0].size
            gray = arr.mean(axis=2).reshape(-1)  # 256 values
            feats.append(np.concatenate([hist, gray, [1.0]]))
        raw = np.stack(feats)
        out = raw @ _tiny_projection(raw.shape[1])
        # histogram mass guarantees a nonzero raw vector; keep unnormalized,
        # normalization is the consumer's job
        return out.astype(np.float32)

    def encode_texts(self, lines) -> np.ndarray:
        out = np.zeros((len(lines), TINY_DIM), dtype=np.float32)
        for i, line in enumerate(lines):
            data = f"##{line.lower()}##".encode("utf-8")
            for j in range(len(data) - 2):
                tri = data[j : j + 3]
                seed = int.from_bytes(
                    hashlib.blake2b(tri, digest_size=8).digest(), "little"
                )
                rng = np.random.default_rng(seed)
                out[i] += rng.standard_normal(TINY_DIM).astype(np.float32)
            out[i] /= max(1, len(data) - 2)
        return out


class ClipEncoder:
    """Pretrained contrastive encoder via transformers; weights required."""

    name = "clip"

    def __init__(self, model_id: str = "openai/clip-vit-base-patch32",
                 device: str = "cpu"):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderError(
                "the clip backend needs torch and transformers installed"
            ) from exc
        try:
            self.model = CLIPModel.from_pretrained(model_id)
            self.processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise EncoderError(
                f"could not load pretrained weights for {model_id!r}; "
                "use --backend tiny on machines without model access"
            ) from exc
        self.device = device
        self.model.eval().to(device)
        self.dim = self.model.config.projection_dim

    def encode_images(self, paths) -> np.ndarray:
        import torch

        images = []
        for path in paths:
            with Image.open(path) as img:
                images.append(img.convert("RGB"))
        with torch.no_grad():
            inputs = self.processor(images=images, return_tensors="pt").to(self.device)
            feats = self.model.get_image_features(**inputs)
        return feats.cpu().numpy().astype(np.float32)

    def encode_texts(self, lines) -> np.ndarray:
        import torch

        with torch.no_grad():
            inputs = self.processor(
                text=list(lines), return_tensors="pt", padding=True,
                truncation=True,
            ).to(self.device)
            feats = self.model.get_text_features(**inputs)
        return feats.cpu().numpy().astype(np.float32)


def make_encoder(backend: str, model_id=None, device: str = "cpu"):
    if backend == "tiny":
        return TinyEncoder()
    if backend == "clip":
        return ClipEncoder(model_id or "openai/clip-vit-base-patch32", device)
    raise EncoderError(f"unknown encoder backend: {backend}")
