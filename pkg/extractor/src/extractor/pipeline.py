"""Run one extraction job: encode, normalize, and write interchange files.

Output directory contents: ``embeddings.onz`` (one unit row per image, in
dataset order), ``proxies.onz`` (one unit row per class), ``labels.txt`` and
``manifest.json``.  Everything is deterministic given a fixed dataset order
and fixed encoder weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import resolve_encoder
from .formats import require_unit_rows, write_labels, write_manifest, write_matrix
from .job import ExtractionJob
from .sources import resolve_source

__all__ = ["ExtractionResult", "build_class_proxies", "extract"]


@dataclass
class ExtractionResult:
    output_dir: str
    manifest_path: str
    num_samples: int
    num_classes: int
    dim: int


def _normalized_rows(rows, what: str) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError(f"{what}: encoder must return a matrix, got shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ValueError(f"{what}: encoder returned non-finite values")
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise ValueError(f"{what}: encoder returned a zero vector (row {int(np.argmin(norms))})")
    return rows / norms[:, None]


def build_class_proxies(encoder, class_names, templates) -> np.ndarray:
    """One unit proxy row per class: the L2-normalized mean of the
    per-template normalized text embeddings."""
    rows = []
    for name in class_names:
        prompts = [template.format(name) for template in templates]
        per_template = _normalized_rows(
            encoder.encode_texts(prompts), f"text embeddings for {name!r}"
        )
        if per_template.shape[0] != len(prompts):
            raise ValueError(
                f"encoder returned {per_template.shape[0]} rows "
                f"for {len(prompts)} prompts"
            )
        mean = per_template.mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            raise ValueError(f"template embeddings for {name!r} cancel to zero")
        rows.append(mean / norm)
    return np.stack(rows)


def extract(job: ExtractionJob, encoder=None, source=None) -> ExtractionResult:
    """Encode ``job``'s dataset and write the four interchange files.

    ``encoder`` and ``source`` default to what ``job.backbone`` and
    ``job.dataset`` name; tests inject their own.
    """
    if encoder is None:
        encoder = resolve_encoder(job.backbone, device=job.device)
    if source is None:
        source = resolve_source(job.dataset, data_dir=job.data_dir)

    class_names = list(source.class_names)
    if len(class_names) == 0:
        raise ValueError("source provides no class names")
    if len(source) == 0:
        raise ValueError("source provides no images")

    proxies = build_class_proxies(encoder, class_names, job.templates)

    chunks = []
    label_chunks = []
    for images, labels in source.iter_batches(job.batch_size):
        features = _normalized_rows(encoder.encode_images(images), "image embeddings")
        if features.shape[0] != len(images):
            raise ValueError(
                f"encoder returned {features.shape[0]} rows for {len(images)} images"
            )
        if features.shape[1] != proxies.shape[1]:
            raise ValueError(
                f"image embedding width {features.shape[1]} does not match "
                f"text embedding width {proxies.shape[1]}"
            )
        labels = np.asarray(labels)
        if labels.shape != (len(images),):
            raise ValueError(
                f"batch has {len(images)} images but labels shape {labels.shape}"
            )
        if np.any((labels < 0) | (labels >= len(class_names))):
            bad = int(labels[np.argmax((labels < 0) | (labels >= len(class_names)))])
            raise ValueError(
                f"label {bad} out of range for {len(class_names)} class names"
            )
        chunks.append(features)
        label_chunks.append(labels.astype(np.int64))

    embeddings = np.vstack(chunks)
    labels = np.concatenate(label_chunks)
    if embeddings.shape[0] != len(source):
        raise ValueError(
            f"source yielded {embeddings.shape[0]} rows but declares {len(source)}"
        )

    require_unit_rows(embeddings, "image embeddings")
    require_unit_rows(proxies, "class proxies")

    output_dir = Path(job.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    write_matrix(embeddings, output_dir / "embeddings.onz")
    write_matrix(proxies, output_dir / "proxies.onz")
    write_labels(labels, output_dir / "labels.txt")
    manifest_path = output_dir / "manifest.json"
    write_manifest(
        manifest_path,
        embeddings_path="embeddings.onz",
        proxies_path="proxies.onz",
        class_names=class_names,
        n_declared=embeddings.shape[0],
        labels_path="labels.txt",
        notes=f"backbone={job.backbone}; prompt templates: {len(job.templates)}",
    )
    return ExtractionResult(
        output_dir=str(output_dir),
        manifest_path=str(manifest_path),
        num_samples=int(embeddings.shape[0]),
        num_classes=len(class_names),
        dim=int(embeddings.shape[1]),
    )
