"""Image sources: fixed-order streams of (images, labels) with class names.

A source exposes ``class_names``, ``__len__`` and
``iter_batches(batch_size)`` yielding ``(images, labels)`` pairs in dataset
order — shuffling is the downstream pipeline's job, not ours.

Dataset identifiers:

* ``npz:<file>`` — a NumPy archive with ``images`` (n leading rows),
  ``labels`` (n integers) and ``class_names`` (strings) arrays.
* ``cifar10`` — the torchvision CIFAR-10 test split from an existing local
  download under ``data_dir`` (torchvision imported lazily; nothing is
  downloaded).
"""

from __future__ import annotations

import numpy as np

__all__ = ["DatasetUnavailableError", "ArraySource", "Cifar10Source", "resolve_source"]


class DatasetUnavailableError(RuntimeError):
    """Raised when a dataset's dependencies or local files are missing."""


class ArraySource:
    """In-memory images + labels + class names, served in fixed order."""

    def __init__(self, images, labels, class_names):
        self.images = np.asarray(images)
        self.labels = np.asarray(labels)
        self.class_names = [str(name) for name in class_names]
        if self.images.ndim < 2:
            raise ValueError(
                f"images must have at least 2 dimensions, got shape {self.images.shape}"
            )
        if self.labels.ndim != 1:
            raise ValueError(f"labels must be a vector, got shape {self.labels.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        if len(self.class_names) == 0:
            raise ValueError("at least one class name is required")

    def __len__(self) -> int:
        return self.images.shape[0]

    def iter_batches(self, batch_size: int):
        for start in range(0, len(self), batch_size):
            stop = start + batch_size
            yield self.images[start:stop], self.labels[start:stop]


class Cifar10Source:
    """CIFAR-10 test split via torchvision, without downloading anything."""

    def __init__(self, data_dir: str):
        try:
            from torchvision.datasets import CIFAR10
        except ImportError as exc:
            raise DatasetUnavailableError(
                f"cifar10 needs torchvision installed: {exc}"
            ) from exc
        try:
            self._dataset = CIFAR10(root=data_dir, train=False, download=False)
        except RuntimeError as exc:
            raise DatasetUnavailableError(
                f"cifar10 data not found under {data_dir!r}: {exc}"
            ) from exc
        self.class_names = list(self._dataset.classes)

    def __len__(self) -> int:
        return len(self._dataset)

    def iter_batches(self, batch_size: int):
        for start in range(0, len(self), batch_size):
            stop = min(start + batch_size, len(self))
            pairs = [self._dataset[i] for i in range(start, stop)]
            images = np.stack([np.asarray(image) for image, _ in pairs])
            labels = np.array([label for _, label in pairs], dtype=np.int64)
            yield images, labels


def _load_npz(path: str) -> ArraySource:
    archive = np.load(path)
    missing = {"images", "labels", "class_names"} - set(archive.files)
    if missing:
        raise ValueError(f"{path}: archive missing arrays {sorted(missing)}")
    return ArraySource(archive["images"], archive["labels"], archive["class_names"])


def resolve_source(dataset: str, data_dir: str | None = None):
    """Map a dataset identifier to a source instance."""
    if dataset.startswith("npz:"):
        path = dataset.split(":", 1)[1]
        if not path:
            raise ValueError("npz dataset needs a file path, e.g. npz:images.npz")
        return _load_npz(path)
    if dataset == "cifar10":
        if data_dir is None:
            raise ValueError("cifar10 needs data_dir pointing at an existing download")
        return Cifar10Source(data_dir)
    raise ValueError(f"unknown dataset {dataset!r}; expected 'npz:<file>' or 'cifar10'")
