"""Embedding backbones: a deterministic stand-in plus real CLIP checkpoints.

An encoder exposes ``dim``, ``encode_images(batch) -> (len(batch), dim)`` and
``encode_texts(prompts) -> (len(prompts), dim)``.  Outputs may be any float
dtype and need not be unit-norm; the pipeline normalizes before writing.

Backbone identifiers:

* ``fake`` or ``fake:<dim>`` — content-addressed pseudo-embeddings, always
  available, deterministic across processes; for tests and format checks.
* ``clip:<model-id>`` — a CLIP checkpoint loaded through ``transformers``
  (e.g. ``clip:openai/clip-vit-base-patch32``).  Requires ``torch`` and
  ``transformers`` plus locally available weights; both are imported lazily
  so minimal installs still run everything else.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["BackboneUnavailableError", "FakeEncoder", "HFClipEncoder", "resolve_encoder"]


class BackboneUnavailableError(RuntimeError):
    """Raised when a requested backbone's dependencies or weights are missing."""


class FakeEncoder:
    """Deterministic content-addressed embeddings for exercising the pipeline.

    Every input (an image's raw bytes, a prompt's UTF-8 bytes) is hashed and
    the digest seeds a generator that emits one unit vector, so equal inputs
    map to equal rows in any process while distinct inputs almost surely
    differ.
    """

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")
        self.dim = dim

    def _vector(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vector = rng.standard_normal(self.dim)
        return vector / np.linalg.norm(vector)

    def encode_images(self, batch) -> np.ndarray:
        batch = np.asarray(batch)
        return np.stack([self._vector(b"image:" + frame.tobytes()) for frame in batch])

    def encode_texts(self, prompts) -> np.ndarray:
        return np.stack([self._vector(b"text:" + p.encode("utf-8")) for p in prompts])


class HFClipEncoder:
    """CLIP image/text towers loaded from a Hugging Face checkpoint.

    Not exercised by the test suite (weights are environment-dependent);
    errors while importing or loading surface as
    :class:`BackboneUnavailableError` so callers can exit cleanly.
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise BackboneUnavailableError(
                f"backbone {model_id!r} needs torch and transformers installed: {exc}"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id).to(device).eval()
            self._processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise BackboneUnavailableError(
                f"could not load weights for {model_id!r}: {exc}"
            ) from exc
        self._torch = torch
        self._device = device
        self.dim = int(self._model.config.projection_dim)

    def encode_images(self, batch) -> np.ndarray:
        inputs = self._processor(images=list(batch), return_tensors="pt")
        inputs = {k: v.to(self._device) for k, v in inputs.items()}
        with self._torch.no_grad():
            features = self._model.get_image_features(**inputs)
        return features.cpu().numpy()

    def encode_texts(self, prompts) -> np.ndarray:
        inputs = self._processor(text=list(prompts), padding=True, return_tensors="pt")
        inputs = {k: v.to(self._device) for k, v in inputs.items()}
        with self._torch.no_grad():
            features = self._model.get_text_features(**inputs)
        return features.cpu().numpy()


def resolve_encoder(backbone: str, device: str = "cpu"):
    """Map a backbone identifier to an encoder instance."""
    if backbone == "fake":
        return FakeEncoder()
    if backbone.startswith("fake:"):
        suffix = backbone.split(":", 1)[1]
        try:
            dim = int(suffix)
        except ValueError as exc:
            raise ValueError(f"bad fake-backbone dimension {suffix!r}") from exc
        return FakeEncoder(dim)
    if backbone.startswith("clip:"):
        model_id = backbone.split(":", 1)[1]
        if not model_id:
            raise ValueError("clip backbone needs a model id, e.g. clip:openai/clip-vit-base-patch32")
        return HFClipEncoder(model_id, device=device)
    raise ValueError(
        f"unknown backbone {backbone!r}; expected 'fake', 'fake:<dim>' or 'clip:<model-id>'"
    )
