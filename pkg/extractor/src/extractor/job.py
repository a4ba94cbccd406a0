"""Extraction job description and the default prompt ensemble."""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["DEFAULT_PROMPT_TEMPLATES", "ExtractionJob"]

# Seven-template prompt ensemble, the widely circulated set from the public
# CLIP prompt-engineering recipe.  Each template must contain exactly one
# ``{}`` placeholder for the class name.
DEFAULT_PROMPT_TEMPLATES = (
    "itap of a {}.",
    "a bad photo of the {}.",
    "a origami {}.",
    "a photo of the large {}.",
    "a {} in a video game.",
    "art of the {}.",
    "a photo of the small {}.",
)


@dataclass
class ExtractionJob:
    """Everything needed to turn one dataset into interchange files.

    ``dataset`` picks an image source (``"npz:<file>"`` or ``"cifar10"``),
    ``backbone`` picks an encoder (``"fake[:dim]"`` or
    ``"clip:<model-id>"``), and the per-class proxies are built from
    ``templates`` — the L2-normalized mean of the per-template normalized
    text embeddings.
    """

    dataset: str
    backbone: str
    output_dir: str
    data_dir: str | None = None
    templates: tuple = field(default=DEFAULT_PROMPT_TEMPLATES)
    batch_size: int = 256
    device: str = "cpu"

    def __post_init__(self):
        if not self.dataset:
            raise ValueError("dataset must be a non-empty identifier")
        if not self.backbone:
            raise ValueError("backbone must be a non-empty identifier")
        if not self.output_dir:
            raise ValueError("output_dir must be a non-empty path")
        self.templates = tuple(self.templates)
        if len(self.templates) == 0:
            raise ValueError("at least one prompt template is required")
        for template in self.templates:
            if template.count("{}") != 1:
                raise ValueError(
                    f"template {template!r} must contain exactly one {{}} placeholder"
                )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
