"""Embedding files, dataset manifests, labels, and the synthetic generator.

Binary embedding format ("ONZ1"):

    bytes 0..3    magic ``b"ONZ1"``
    bytes 4..7    row count ``n``  (little-endian uint32)
    bytes 8..11   dimension ``d``  (little-endian uint32)
    bytes 12..    ``n * d`` little-endian float32 values, row-major

Rows are not required to be unit-norm on disk; the loader, by default,
renormalizes every row whose norm is off by more than ``NORM_TOLERANCE`` and
reports how many, so the payload itself is always preserved bit-exactly
(pass ``normalize=False`` to get it back untouched).

A dataset is tied together by a small JSON manifest pointing at the embedding
file, the class-proxy file, and an optional labels file (newline-separated
base-10 class ids, one per embedding row, in row order).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "MAGIC",
    "NORM_TOLERANCE",
    "EmbeddingFormatError",
    "write_embeddings",
    "read_embeddings",
    "write_labels",
    "read_labels",
    "Manifest",
    "save_manifest",
    "load_manifest",
    "LoadedDataset",
    "load_dataset",
    "SyntheticSpec",
    "SyntheticDataset",
    "generate_synthetic",
    "write_synthetic_dataset",
]

MAGIC = b"ONZ1"
NORM_TOLERANCE = 1e-3
_HEADER = struct.Struct("<4sII")


class EmbeddingFormatError(ValueError):
    """Raised for malformed embedding files (bad magic, bad sizes)."""


def write_embeddings(rows, path) -> None:
    """Write a matrix to ``path`` in the ONZ1 format (float32 payload)."""
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {rows.shape}")
    if rows.shape[0] == 0 or rows.shape[1] == 0:
        raise ValueError(f"refusing to write an empty matrix of shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("embedding matrix contains non-finite values")
    rows = np.ascontiguousarray(rows, dtype="<f4")
    n, d = rows.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, d))
        fh.write(rows.tobytes(order="C"))


def read_embeddings(path, normalize: bool = True, return_renormalized: bool = False):
    """Read an ONZ1 file.

    With ``normalize=True`` (the default) rows whose L2 norm deviates from 1
    by more than ``NORM_TOLERANCE`` are renormalized, and the matrix comes
    back as float64 ready for accumulation; ``return_renormalized=True``
    additionally returns how many rows were touched.  With
    ``normalize=False`` the stored float32 payload is returned bit-exactly.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise EmbeddingFormatError(
            f"{path}: file holds {len(data)} bytes, shorter than the 12-byte header"
        )
    magic, n, d = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if n == 0 or d == 0:
        raise EmbeddingFormatError(f"{path}: empty embedding file (n={n}, d={d})")
    expected = n * d * 4
    actual = len(data) - _HEADER.size
    if actual != expected:
        raise EmbeddingFormatError(
            f"{path}: header implies {expected} payload bytes (n={n}, d={d}), found {actual}"
        )
    raw = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n, d)
    if not normalize:
        return raw.copy()
    rows = raw.astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms < 1e-12):
        bad = int(np.argmin(norms))
        raise EmbeddingFormatError(f"{path}: row {bad} has zero norm, cannot normalize")
    deviant = np.abs(norms - 1.0) > NORM_TOLERANCE
    count = int(deviant.sum())
    if count:
        rows[deviant] /= norms[deviant, None]
    if return_renormalized:
        return rows, count
    return rows


def write_labels(labels, path) -> None:
    """Write integer class ids, one per line, aligned with embedding rows."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be a vector, got shape {labels.shape}")
    with open(path, "w") as fh:
        for value in labels:
            fh.write(f"{int(value)}\n")


def read_labels(path) -> np.ndarray:
    lines = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
    try:
        return np.array([int(line) for line in lines], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: labels must be base-10 integers ({exc})") from exc


@dataclass
class Manifest:
    """Pointers and metadata tying one dataset together.

    Relative paths are resolved against the manifest's own directory.
    """

    embeddings_path: str
    proxies_path: str
    class_names: list
    n_declared: int
    labels_path: str | None = None
    notes: str = ""

    def __post_init__(self):
        if len(self.class_names) == 0:
            raise ValueError("manifest needs at least one class name")
        if self.n_declared < 1:
            raise ValueError(f"n_declared must be >= 1, got {self.n_declared}")


def save_manifest(manifest: Manifest, path) -> None:
    with open(path, "w") as fh:
        json.dump(dataclasses.asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> Manifest:
    with open(path) as fh:
        payload = json.load(fh)
    missing = {"embeddings_path", "proxies_path", "class_names", "n_declared"} - payload.keys()
    if missing:
        raise ValueError(f"{path}: manifest missing keys {sorted(missing)}")
    return Manifest(
        embeddings_path=payload["embeddings_path"],
        proxies_path=payload["proxies_path"],
        class_names=list(payload["class_names"]),
        n_declared=int(payload["n_declared"]),
        labels_path=payload.get("labels_path"),
        notes=payload.get("notes", ""),
    )


@dataclass
class LoadedDataset:
    embeddings: np.ndarray
    proxies: np.ndarray
    class_names: list
    n_declared: int
    labels: np.ndarray | None = None
    notes: str = ""
    renormalized_rows: int = 0


def load_dataset(manifest_path) -> LoadedDataset:
    """Load everything a manifest points at, with cross-checks.

    Validates that the proxy row count matches the class-name list and that
    labels, when present, align with the embedding rows and stay in range.
    """
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent

    def _resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    embeddings, renorm_x = read_embeddings(_resolve(manifest.embeddings_path), return_renormalized=True)
    proxies, renorm_z = read_embeddings(_resolve(manifest.proxies_path), return_renormalized=True)
    num_classes = len(manifest.class_names)
    if proxies.shape[0] != num_classes:
        raise ValueError(
            f"manifest lists {num_classes} classes but proxy file has {proxies.shape[0]} rows"
        )
    if proxies.shape[1] != embeddings.shape[1]:
        raise ValueError(
            f"proxy dimension {proxies.shape[1]} does not match embedding dimension {embeddings.shape[1]}"
        )
    labels = None
    if manifest.labels_path is not None:
        labels = read_labels(_resolve(manifest.labels_path))
        if labels.shape[0] != embeddings.shape[0]:
            raise ValueError(
                f"labels file has {labels.shape[0]} entries for {embeddings.shape[0]} embeddings"
            )
        if labels.min() < 0 or labels.max() >= num_classes:
            raise ValueError(
                f"label ids must lie in [0, {num_classes}), found range "
                f"[{labels.min()}, {labels.max()}]"
            )
    return LoadedDataset(
        embeddings=embeddings,
        proxies=proxies,
        class_names=manifest.class_names,
        n_declared=manifest.n_declared,
        labels=labels,
        notes=manifest.notes,
        renormalized_rows=renorm_x + renorm_z,
    )


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


@dataclass
class SyntheticSpec:
    """Recipe for a synthetic embedding stream with a controlled proxy bias.

    Per-class points are unit-sphere cluster draws around random centroids;
    the "text" proxies are the centroids rotated by ``text_proxy_bias_angle``
    inside a random 2-plane, so the gap between the proxy set and the actual
    data clusters is known exactly.
    """

    num_classes: int
    dim: int
    num_samples: int
    cluster_concentration: float = 4.0
    text_proxy_bias_angle: float = 0.3
    class_prior: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("need at least one class")
        if self.num_classes > self.num_samples:
            raise ValueError(
                f"more classes ({self.num_classes}) than samples ({self.num_samples})"
            )
        if self.dim < 2:
            raise ValueError("dimension must be >= 2 to define rotation planes")
        if self.cluster_concentration <= 0:
            raise ValueError("cluster_concentration must be positive")
        if not 0.0 <= self.text_proxy_bias_angle <= np.pi / 2:
            raise ValueError(
                f"bias angle must lie in [0, pi/2], got {self.text_proxy_bias_angle}"
            )
        if self.class_prior is None:
            self.class_prior = np.full(self.num_classes, 1.0 / self.num_classes)
        self.class_prior = np.asarray(self.class_prior, dtype=np.float64)
        if self.class_prior.shape != (self.num_classes,):
            raise ValueError("class_prior length must equal num_classes")
        if np.any(self.class_prior < 0) or abs(self.class_prior.sum() - 1.0) > 1e-9:
            raise ValueError("class_prior must be a distribution over the classes")


@dataclass
class SyntheticDataset:
    embeddings: np.ndarray   # (n, d) float32, unit rows, arrival order
    labels: np.ndarray       # (n,) int64 ground truth
    text_proxies: np.ndarray  # (C, d) float32, unit rows, rotated centroids
    centroids: np.ndarray    # (C, d) float64, the true vision-space anchors


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    """Deterministically sample a stream from a SyntheticSpec (same seed, same bytes)."""
    rng = np.random.default_rng(spec.seed)
    centroids = _unit_rows(rng.standard_normal((spec.num_classes, spec.dim)))

    # Rotate each centroid inside the plane it spans with a random orthogonal
    # direction; the resulting proxy keeps unit norm and sits at exactly the
    # requested angle from its cluster center.
    ortho = rng.standard_normal((spec.num_classes, spec.dim))
    ortho -= (ortho * centroids).sum(axis=1, keepdims=True) * centroids
    ortho = _unit_rows(ortho)
    angle = spec.text_proxy_bias_angle
    text_proxies = np.cos(angle) * centroids + np.sin(angle) * ortho

    labels = rng.choice(spec.num_classes, size=spec.num_samples, p=spec.class_prior)
    noise = rng.standard_normal((spec.num_samples, spec.dim)) / spec.cluster_concentration
    embeddings = _unit_rows(centroids[labels] + noise)

    return SyntheticDataset(
        embeddings=embeddings.astype(np.float32),
        labels=labels.astype(np.int64),
        text_proxies=text_proxies.astype(np.float32),
        centroids=centroids,
    )


def write_synthetic_dataset(data: SyntheticDataset, out_dir, notes: str = "") -> Path:
    """Write a synthetic dataset in the on-disk formats; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_embeddings(data.embeddings, out_dir / "embeddings.onz")
    write_embeddings(data.text_proxies, out_dir / "proxies.onz")
    write_embeddings(data.centroids, out_dir / "centroids.onz")
    write_labels(data.labels, out_dir / "labels.txt")
    num_classes = data.text_proxies.shape[0]
    manifest = Manifest(
        embeddings_path="embeddings.onz",
        proxies_path="proxies.onz",
        labels_path="labels.txt",
        class_names=[f"class_{j}" for j in range(num_classes)],
        n_declared=data.embeddings.shape[0],
        notes=notes or "synthetic stream; centroids.onz holds the true cluster centers",
    )
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest_path
