"""Dataset and configuration I/O.

Page annotations travel in a JSON manifest::

    {"pages": [{"id": "p01", "image": "p01.png",
                "words": [{"x": 10, "y": 20, "w": 80, "h": 30, "label": "the"}],
                "transcription": ["the", "court", ...]}]}

Word boxes are corner-form integers (x, y = top-left) for annotation-tool
friendliness and are converted to center form internally. Image paths are
relative to the manifest's directory. Run configuration is a TOML
document whose canonical serialization is hashed into index metadata.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import cv2
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .dtp import DtpConfig
from .geometry import Box
from .localization import AnchorGrid
from .embeddings import EMBEDDING_DIMS, normalize_label

__all__ = [
    "GtWord",
    "PageRecord",
    "TrainConfig",
    "RunConfig",
    "ManifestError",
    "load_manifest",
    "save_manifest",
    "load_image",
    "save_image",
    "load_page_image",
    "resize_page",
    "resize_page_record",
    "filter_degenerate_gt",
    "load_config",
    "dump_config",
]

log = logging.getLogger(__name__)


class ManifestError(ValueError):
    """Raised for malformed manifests, with page/field context."""


@dataclass(frozen=True)
class GtWord:
    box: Box
    label: str


@dataclass
class PageRecord:
    """One manuscript page: image reference, ground-truth words, and an
    optional unaligned transcription token list. The pixel data is attached
    lazily via ``load_page_image`` and never serialized."""

    page_id: str
    image_path: str | None
    words: list[GtWord] = field(default_factory=list)
    transcription: list[str] | None = None
    image: np.ndarray | None = None


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the embedding + wordness head training loop."""

    hidden_width: int = 4096
    iterations: int = 2000
    batch_pairs: int = 64
    batch_wordness: int = 64
    learning_rate: float = 1e-3
    lr_decay_every: int = 10000
    lr_decay: float = 0.1
    val_every: int = 200
    jitters_per_word: int = 3
    jitter_frac: float = 0.08
    negatives_per_page: int = 40
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs: embedding choice, resize target, proposal
    and anchor geometry, training hyperparameters and pipeline thresholds."""

    embedding_kind: str = "dctow"
    resize_long_side: int = 1720
    wordness_threshold: float = 0.01
    score_nms_overlap: float = 0.4
    query_nms_overlap: float = 0.01
    seed: int = 0
    dtp: DtpConfig = DtpConfig()
    anchors: AnchorGrid = AnchorGrid()
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.embedding_kind not in EMBEDDING_DIMS:
            raise ValueError(f"unknown embedding kind {self.embedding_kind!r}")
        for name in ("wordness_threshold", "score_nms_overlap", "query_nms_overlap"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.resize_long_side < 64:
            raise ValueError("resize_long_side must be >= 64")

    def config_hash(self) -> str:
        return hashlib.sha256(dump_config(self).encode()).hexdigest()[:16]


# -- manifests -------------------------------------------------------------

_WORD_KEYS = {"x", "y", "w", "h", "label"}
_PAGE_KEYS = {"id", "image", "words", "transcription"}


def _parse_word(obj, page_id: str, i: int) -> GtWord:
    if not isinstance(obj, dict):
        raise ManifestError(f"page {page_id!r}: word {i} is not an object")
    unknown = set(obj) - _WORD_KEYS
    if unknown:
        raise ManifestError(f"page {page_id!r}: word {i} has unknown fields {sorted(unknown)}")
    missing = _WORD_KEYS - set(obj)
    if missing:
        raise ManifestError(f"page {page_id!r}: word {i} missing fields {sorted(missing)}")
    x, y, w, h = (obj[k] for k in ("x", "y", "w", "h"))
    for name, v in (("x", x), ("y", y), ("w", w), ("h", h)):
        if not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ManifestError(f"page {page_id!r}: word {i} field {name!r} is not a finite number")
    if w <= 0 or h <= 0:
        raise ManifestError(f"page {page_id!r}: word {i} has non-positive size {w}x{h}")
    return GtWord(Box.from_corners(x, y, x + w, y + h), normalize_label(str(obj["label"])))


def load_manifest(path: str | Path) -> list[PageRecord]:
    """Parse and validate a manifest; image paths are resolved relative to
    the manifest location and must exist."""
    path = Path(path)
    base = path.parent
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(doc, dict) or "pages" not in doc:
        raise ManifestError(f"{path}: expected an object with a 'pages' array")
    pages = []
    seen_ids = set()
    for n, entry in enumerate(doc["pages"]):
        if not isinstance(entry, dict):
            raise ManifestError(f"pages[{n}] is not an object")
        unknown = set(entry) - _PAGE_KEYS
        if unknown:
            raise ManifestError(f"pages[{n}] has unknown fields {sorted(unknown)}")
        page_id = entry.get("id")
        if not page_id or not isinstance(page_id, str):
            raise ManifestError(f"pages[{n}] needs a non-empty string 'id'")
        if page_id in seen_ids:
            raise ManifestError(f"duplicate page id {page_id!r}")
        seen_ids.add(page_id)
        image = entry.get("image")
        if not isinstance(image, str):
            raise ManifestError(f"page {page_id!r}: 'image' must be a path string")
        image_path = str((base / image).resolve())
        if not Path(image_path).is_file():
            raise ManifestError(f"page {page_id!r}: image file not found: {image_path}")
        words = [_parse_word(w, page_id, i) for i, w in enumerate(entry.get("words", []))]
        transcription = entry.get("transcription")
        if transcription is not None:
            if not isinstance(transcription, list) or not all(isinstance(t, str) for t in transcription):
                raise ManifestError(f"page {page_id!r}: 'transcription' must be a list of strings")
        pages.append(PageRecord(page_id, image_path, words, transcription))
    return pages


def save_manifest(pages: list[PageRecord], path: str | Path) -> None:
    """Write a manifest next to its images; box corners are rounded to the
    integer grid (annotations are pixel-aligned)."""
    path = Path(path)
    base = path.parent
    doc = {"pages": []}
    for p in pages:
        image = p.image_path or ""
        try:
            image = str(Path(image).resolve().relative_to(base.resolve()))
        except ValueError:
            pass  # image outside the manifest dir: keep as-is
        entry = {
            "id": p.page_id,
            "image": image,
            "words": [
                {
                    "x": int(round(w.box.x0)),
                    "y": int(round(w.box.y0)),
                    "w": int(round(w.box.w)),
                    "h": int(round(w.box.h)),
                    "label": w.label,
                }
                for w in p.words
            ],
        }
        if p.transcription is not None:
            entry["transcription"] = p.transcription
        doc["pages"].append(entry)
    path.write_text(json.dumps(doc, indent=2) + "\n")


# -- images ----------------------------------------------------------------


def load_image(path: str | Path) -> np.ndarray:
    """Read a grayscale image (PNG/PGM; color converted by luminance) as a
    float array in [0, 1]."""
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise IOError(f"cannot read image: {path}")
    return img.astype(np.float64) / 255.0


def save_image(path: str | Path, img: np.ndarray) -> None:
    u8 = np.clip(np.asarray(img) * 255.0, 0, 255).round().astype(np.uint8)
    if not cv2.imwrite(str(path), u8):
        raise IOError(f"cannot write image: {path}")


def load_page_image(record: PageRecord) -> PageRecord:
    """Attach pixel data and clamp ground-truth boxes to the image bounds."""
    if record.image is not None:
        return record
    img = load_image(record.image_path)
    h, w = img.shape
    words = []
    for gw in record.words:
        b = gw.box
        x0, y0 = max(b.x0, 0.0), max(b.y0, 0.0)
        x1, y1 = min(b.x1, float(w)), min(b.y1, float(h))
        if x1 <= x0 or y1 <= y0:
            raise ManifestError(f"page {record.page_id!r}: box for {gw.label!r} lies outside the image")
        words.append(GtWord(Box.from_corners(x0, y0, x1, y1), gw.label))
    record.image = img
    record.words = words
    return record


def resize_page(img: np.ndarray, target_long_side: int = 1720) -> tuple[np.ndarray, float]:
    """Aspect-preserving bilinear resize so the longest side hits the
    target; returns the image and the applied scale factor."""
    h, w = img.shape
    if h == 0 or w == 0:
        raise ValueError("empty image")
    scale = target_long_side / max(h, w)
    if scale == 1.0:
        return img, 1.0
    new_w = max(1, int(round(w * scale)))
    new_h = max(1, int(round(h * scale)))
    resized = cv2.resize(img, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    return resized.astype(np.float64), scale


def resize_page_record(record: PageRecord, target_long_side: int = 1720) -> PageRecord:
    """Resize a loaded page and scale its ground-truth boxes to match."""
    record = load_page_image(record)
    img, scale = resize_page(record.image, target_long_side)
    words = [
        GtWord(Box(gw.box.xc * scale, gw.box.yc * scale, gw.box.w * scale, gw.box.h * scale), gw.label)
        for gw in record.words
    ]
    return PageRecord(record.page_id, record.image_path, words, record.transcription, img)


def filter_degenerate_gt(pages: list[PageRecord], downsample: int = 8) -> list[PageRecord]:
    """Drop ground-truth boxes that collapse to zero width or height when
    downsampled by the given factor."""
    out = []
    dropped = 0
    for p in pages:
        kept = [gw for gw in p.words if int(gw.box.w // downsample) > 0 and int(gw.box.h // downsample) > 0]
        dropped += len(p.words) - len(kept)
        out.append(PageRecord(p.page_id, p.image_path, kept, p.transcription, p.image))
    if dropped:
        log.info("filtered %d degenerate ground-truth boxes (downsample %d)", dropped, downsample)
    return out


# -- run configuration -------------------------------------------------------


def _toml_value(v):
    if isinstance(v, tuple):
        return json.dumps([list(x) if isinstance(x, tuple) else x for x in v])
    return json.dumps(v)


def dump_config(cfg: RunConfig) -> str:
    """Canonical TOML serialization (stable field order, JSON-style values);
    its hash identifies the configuration."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if not hasattr(v, "__dataclass_fields__"):
            lines.append(f"{f.name} = {_toml_value(v)}")
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if hasattr(v, "__dataclass_fields__"):
            lines.append("")
            lines.append(f"[{f.name}]")
            lines.extend(f"{g.name} = {_toml_value(getattr(v, g.name))}" for g in fields(v))
    return "\n".join(lines) + "\n"


_SECTION_TYPES = {"dtp": DtpConfig, "anchors": AnchorGrid, "train": TrainConfig}


def _build_section(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"config section [{section}]: unknown keys {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        kwargs[k] = v
    return cls(**kwargs)


def load_config(path: str | Path) -> RunConfig:
    """Parse a TOML run-configuration file."""
    with open(path, "rb") as f:
        doc = tomllib.load(f)
    top = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    known = {f.name for f in fields(RunConfig)}
    unknown = set(top) - known
    if unknown:
        raise ValueError(f"config: unknown keys {sorted(unknown)}")
    kwargs: dict = dict(top)
    for name, v in doc.items():
        if isinstance(v, dict):
            if name not in _SECTION_TYPES:
                raise ValueError(f"config: unknown section [{name}]")
            kwargs[name] = _build_section(_SECTION_TYPES[name], v, name)
    return RunConfig(**kwargs)
