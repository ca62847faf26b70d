"""Run configuration: defaults, JSON round-trip, validation.

Defaults mirror the experimental setup the engine reproduces: 30 epochs,
batch 64, Adam at 3e-4, signed [-1, 1] pixel normalization, native 28x28
resolution, 16-qubit / 3-layer circuit in the quantum bottleneck. Every run
echoes its fully resolved config next to its outputs.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractError

DATA_DIR_ENV = "QCDIFF_DATA_DIR"

MNIST_IMAGES_DEFAULT = "train-images-idx3-ubyte"
MNIST_LABELS_DEFAULT = "train-labels-idx1-ubyte"

DATASETS = ("mnist", "medmnist")
MODELS = ("classical", "quantum")


@dataclass
class RunConfig:
    dataset: str = "mnist"
    images_path: str | None = None
    labels_path: str | None = None
    npz_path: str | None = None
    split: str = "train"
    class_label: int = 0
    model: str = "classical"
    ansatz: str = "ry_variational"
    epochs: int = 30
    batch_size: int = 64
    lr: float = 3e-4
    timesteps: int = 1000
    s: float = 0.008
    beta_clip: float = 0.999
    normalize_alpha_bar: bool = False
    ema_beta: float = 0.999
    seed: int = 0
    max_train_images: int | None = None
    output_dir: str = "runs"
    n_qubits: int = 16
    n_layers: int = 3
    skip_connections: bool = False
    init_gain: float = 1.7
    sample_grid_n: int = 16
    sample_cols: int = 4
    workers: int = 1
    extractor: str = "pixel_pca"
    eval_samples: int = 64

    def validate(self) -> "RunConfig":
        if self.dataset not in DATASETS:
            raise ContractError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.model not in MODELS:
            raise ContractError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.ansatz not in ("paper_literal", "ry_variational"):
            raise ContractError(f"unknown ansatz {self.ansatz!r}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.timesteps < 1:
            raise ContractError(f"timesteps must be >= 1, got {self.timesteps}")
        if self.s <= 0:
            raise ContractError(f"s must be > 0, got {self.s}")
        if not (0.0 < self.beta_clip <= 1.0):
            raise ContractError(f"beta_clip must lie in (0, 1], got {self.beta_clip}")
        if not (0.0 < self.ema_beta < 1.0):
            raise ContractError(f"ema_beta must lie in (0, 1), got {self.ema_beta}")
        if self.lr <= 0:
            raise ContractError(f"lr must be > 0, got {self.lr}")
        if self.max_train_images is not None and self.max_train_images < 1:
            raise ContractError(f"max_train_images must be >= 1, got {self.max_train_images}")
        if self.sample_grid_n < 1 or self.sample_cols < 1:
            raise ContractError("sample_grid_n and sample_cols must be >= 1")
        if self.workers < 1:
            raise ContractError(f"workers must be >= 1, got {self.workers}")
        if self.eval_samples < 2:
            raise ContractError(f"eval_samples must be >= 2, got {self.eval_samples}")
        return self

    # -- path resolution --------------------------------------------------

    def resolved_data_paths(self) -> tuple[Path, ...]:
        """Dataset file paths, falling back to the data-dir env variable."""
        base = Path(os.environ.get(DATA_DIR_ENV, "."))
        if self.dataset == "mnist":
            images = Path(self.images_path) if self.images_path else base / MNIST_IMAGES_DEFAULT
            labels = Path(self.labels_path) if self.labels_path else base / MNIST_LABELS_DEFAULT
            return images, labels
        if not self.npz_path:
            raise ContractError("medmnist dataset requires npz_path")
        return (Path(self.npz_path),)

    def run_id(self, model: str | None = None) -> str:
        model = model or self.model
        tag = f"-{self.ansatz}" if model == "quantum" else ""
        return f"{self.dataset}-c{self.class_label}-{model}{tag}-seed{self.seed}"

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_json_file(cls, path) -> "RunConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ContractError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ContractError(f"config file {path} must hold a JSON object")
        return cls.from_dict(payload)

    def replace(self, **kwargs) -> "RunConfig":
        return dataclasses.replace(self, **kwargs)
