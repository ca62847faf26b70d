"""Dataset ingestion and image-batch handling.

Supports the two on-disk formats the experiments need, parsed strictly so
malformed files fail loudly with byte-level diagnostics:

* IDX image/label pairs (big-endian magics 0x00000803 / 0x00000801, u8
  payload, 28x28 enforced),
* NPZ archives holding ``{split}_images.npy`` / ``{split}_labels.npy`` NPY
  v1.0 entries of dtype ``|u1``, C order, shaped (N, 28, 28) or
  (N, 28, 28, 3).

Batches track their normalization state explicitly; re-normalizing an
already signed batch is a contract error rather than a silent double scale.
"""

from __future__ import annotations

import ast
import math
import struct
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, DataFormatError
from .png import encode_png

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

NORMALIZATIONS = ("raw_u8", "unit", "signed")
GRID_GUTTER = 2


@dataclass(eq=False)
class ImageBatch:
    """(N, C, 28, 28) float64 pixels plus labels and normalization state."""

    data: np.ndarray
    labels: np.ndarray
    normalization: str = "raw_u8"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 4:
            raise ContractError(f"ImageBatch data must be NCHW, got {self.data.shape}")
        if self.labels.shape != (self.data.shape[0],):
            raise ContractError(
                f"ImageBatch labels {self.labels.shape} do not match N={self.data.shape[0]}")
        if self.normalization not in NORMALIZATIONS:
            raise ContractError(f"unknown normalization state {self.normalization!r}")

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]


# -- IDX --------------------------------------------------------------------


def _read_exact(f, count: int, path, what: str) -> bytes:
    buf = f.read(count)
    if len(buf) != count:
        raise DataFormatError(
            f"{path}: truncated while reading {what} at byte offset {f.tell() - len(buf)} "
            f"(wanted {count}, got {len(buf)})")
    return buf


def load_idx(images_path, labels_path) -> ImageBatch:
    """Load an IDX image/label file pair as a raw_u8 single-channel batch."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as f:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, images_path, "header"))
        if magic != IDX_IMAGES_MAGIC:
            raise DataFormatError(
                f"{images_path}: bad magic 0x{magic:08x} at byte offset 0 "
                f"(expected 0x{IDX_IMAGES_MAGIC:08x})")
        if rows != 28 or cols != 28:
            raise DataFormatError(f"{images_path}: expected 28x28 images, header says {rows}x{cols}")
        payload = _read_exact(f, count * rows * cols, images_path, "pixel payload")
        if f.read(1):
            raise DataFormatError(f"{images_path}: trailing bytes after pixel payload")
    images = np.frombuffer(payload, dtype=np.uint8).reshape(count, 1, rows, cols)

    with open(labels_path, "rb") as f:
        magic, label_count = struct.unpack(">II", _read_exact(f, 8, labels_path, "header"))
        if magic != IDX_LABELS_MAGIC:
            raise DataFormatError(
                f"{labels_path}: bad magic 0x{magic:08x} at byte offset 0 "
                f"(expected 0x{IDX_LABELS_MAGIC:08x})")
        labels = np.frombuffer(_read_exact(f, label_count, labels_path, "label payload"), dtype=np.uint8)
    if label_count != count:
        raise DataFormatError(
            f"{labels_path}: {label_count} labels for {count} images in {images_path}")
    return ImageBatch(images.astype(np.float64), labels.astype(np.int64), "raw_u8")


# -- NPZ / NPY ----------------------------------------------------------------


def _parse_npy(blob: bytes, entry: str, path) -> np.ndarray:
    if blob[:6] != b"\x93NUMPY":
        raise DataFormatError(f"{path}:{entry}: bad NPY magic at byte offset 0")
    if len(blob) < 10:
        raise DataFormatError(f"{path}:{entry}: truncated NPY header")
    major, minor = blob[6], blob[7]
    if (major, minor) != (1, 0):
        raise DataFormatError(f"{path}:{entry}: unsupported NPY version {major}.{minor}")
    (hlen,) = struct.unpack("<H", blob[8:10])
    header_end = 10 + hlen
    if len(blob) < header_end:
        raise DataFormatError(f"{path}:{entry}: truncated NPY header (wanted {hlen} bytes)")
    try:
        header = ast.literal_eval(blob[10:header_end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise DataFormatError(f"{path}:{entry}: unparseable NPY header: {exc}") from exc
    if not isinstance(header, dict):
        raise DataFormatError(f"{path}:{entry}: NPY header is not a dict")
    descr, fortran, shape = header.get("descr"), header.get("fortran_order"), header.get("shape")
    if descr not in ("|u1", "u1"):
        raise DataFormatError(f"{path}:{entry}: dtype {descr!r} not supported (only |u1)")
    if fortran:
        raise DataFormatError(f"{path}:{entry}: Fortran-order arrays not supported")
    if (not isinstance(shape, tuple) or not shape
            or not all(isinstance(d, int) and d >= 0 for d in shape)):
        raise DataFormatError(f"{path}:{entry}: malformed shape {shape!r}")
    size = math.prod(shape)
    payload = blob[header_end:]
    if len(payload) < size:
        raise DataFormatError(
            f"{path}:{entry}: payload holds {len(payload)} bytes, shape {shape} needs {size}")
    return np.frombuffer(payload[:size], dtype=np.uint8).reshape(shape)


def load_npz(path, split: str = "train") -> ImageBatch:
    """Load one split of a MedMNIST-style NPZ archive as a raw_u8 batch."""
    path = Path(path)
    if split not in ("train", "test"):
        raise ContractError(f"split must be 'train' or 'test', got {split!r}")
    try:
        archive = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise DataFormatError(f"{path}: not a ZIP archive: {exc}") from exc
    with archive:
        names = set(archive.namelist())
        arrays = {}
        for kind in ("images", "labels"):
            entry = f"{split}_{kind}.npy"
            if entry not in names:
                raise DataFormatError(f"{path}: missing entry {entry!r} (has {sorted(names)})")
            arrays[kind] = _parse_npy(archive.read(entry), entry, path)

    images, labels = arrays["images"], arrays["labels"]
    if images.ndim == 3:
        n, h, w = images.shape
        images = images[:, None, :, :]
    elif images.ndim == 4 and images.shape[3] == 3:
        n, h, w = images.shape[:3]
        images = images.transpose(0, 3, 1, 2)  # HWC -> CHW
    else:
        raise DataFormatError(
            f"{path}:{split}_images.npy: shape {images.shape} is neither (N,28,28) nor (N,28,28,3)")
    if (h, w) != (28, 28):
        raise DataFormatError(f"{path}:{split}_images.npy: expected 28x28 images, got {h}x{w}")
    labels = labels.reshape(-1)
    if labels.shape[0] != n:
        raise DataFormatError(
            f"{path}:{split}_labels.npy: {labels.shape[0]} labels for {n} images")
    return ImageBatch(images.astype(np.float64), labels.astype(np.int64), "raw_u8")


# -- transforms ----------------------------------------------------------------


def filter_class(batch: ImageBatch, label: int) -> ImageBatch:
    """Subset of the batch whose labels equal ``label``, order preserved."""
    mask = batch.labels == label
    return ImageBatch(batch.data[mask].copy(), batch.labels[mask].copy(), batch.normalization)


def normalize(batch: ImageBatch, target: str = "signed") -> ImageBatch:
    """Map raw u8 pixels to [0, 1] (``unit``) or [-1, 1] (``signed``)."""
    if target not in ("unit", "signed"):
        raise ContractError(f"normalize target must be 'unit' or 'signed', got {target!r}")
    if batch.normalization == "signed":
        raise ContractError("batch is already signed-normalized; refusing to re-normalize")
    if batch.normalization == "unit":
        data = batch.data if target == "unit" else batch.data * 2.0 - 1.0
    else:
        data = batch.data / 255.0 if target == "unit" else batch.data / 127.5 - 1.0
    return ImageBatch(data, batch.labels.copy(), target)


def denormalize(batch: ImageBatch) -> ImageBatch:
    """Invert normalize back to raw u8 scale (values may be fractional)."""
    if batch.normalization == "raw_u8":
        return ImageBatch(batch.data.copy(), batch.labels.copy(), "raw_u8")
    scale = {"unit": 255.0, "signed": 127.5}[batch.normalization]
    offset = {"unit": 0.0, "signed": 1.0}[batch.normalization]
    return ImageBatch((batch.data + offset) * scale, batch.labels.copy(), "raw_u8")


def to_unit(batch: ImageBatch) -> ImageBatch:
    """Batch rescaled to [0, 1] regardless of its current state."""
    if batch.normalization == "unit":
        return batch
    if batch.normalization == "signed":
        return ImageBatch((batch.data + 1.0) / 2.0, batch.labels.copy(), "unit")
    return ImageBatch(batch.data / 255.0, batch.labels.copy(), "unit")


def batch_from_samples(samples: np.ndarray, label: int = -1,
                       normalization: str = "signed") -> ImageBatch:
    """Wrap raw sampler output (N, C, H, W) as an ImageBatch."""
    samples = np.asarray(samples, dtype=np.float64)
    return ImageBatch(samples, np.full(samples.shape[0], label), normalization)


# -- PNG grid ----------------------------------------------------------------


def write_png_grid(batch: ImageBatch, cols: int, path) -> None:
    """Tile the batch row-major into a PNG with 2 px black gutters."""
    if len(batch) == 0:
        raise ContractError("write_png_grid: empty batch")
    if cols < 1:
        raise ContractError(f"write_png_grid: cols must be >= 1, got {cols}")
    unit = to_unit(batch)
    pixels = np.clip(np.rint(unit.data * 255.0), 0, 255).astype(np.uint8)

    n, c, h, w = pixels.shape
    cols = min(cols, n)
    rows = (n + cols - 1) // cols
    canvas_h = rows * h + (rows - 1) * GRID_GUTTER
    canvas_w = cols * w + (cols - 1) * GRID_GUTTER
    canvas = np.zeros((c, canvas_h, canvas_w), dtype=np.uint8)
    for i in range(n):
        r, col = divmod(i, cols)
        y = r * (h + GRID_GUTTER)
        x = col * (w + GRID_GUTTER)
        canvas[:, y:y + h, x:x + w] = pixels[i]

    image = canvas[0] if c == 1 else canvas.transpose(1, 2, 0)
    blob = encode_png(image)
    path = Path(path)
    try:
        path.write_bytes(blob)
    except OSError as exc:
        raise DataFormatError(f"failed to write PNG grid to {path}: {exc}") from exc
