"""Generation-quality metrics: global-statistics SSIM and a Frechet distance
over substitute features.

The Frechet metric fits one Gaussian per image set in a 64-d feature space
and evaluates |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). A real
pretrained Inception embedding is out of reach for a self-contained engine,
so two deterministic substitutes are provided: PCA on raw pixels (fit on the
reference set) and a frozen randomly initialized conv stack. Absolute values
are therefore NOT comparable to published FID numbers; only orderings and
relative gaps within one extractor are meaningful, and every emitted record
carries the extractor provenance.

All metrics consume images in [0, 1]; batches are rescaled on entry.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .data import ImageBatch, to_unit
from .errors import ContractError, DimensionError, NumericalDegeneracyError
from .ops import conv2d_raw
from .rng import stream_rng

FEATURE_DIM = 64
COV_SHRINKAGE = 1e-6
EXTRACTORS = ("pixel_pca", "fixed_random_conv")

SSIM_K1 = 0.01
SSIM_K2 = 0.03


# -- SSIM ---------------------------------------------------------------------


def ssim(x: np.ndarray, y: np.ndarray, dynamic_range: float = 1.0,
         c1: float | None = None, c2: float | None = None) -> float:
    """Global-statistics structural similarity of two images in [0, L].

    Accepts (H, W) or (C, H, W); multi-channel scores are averaged over
    channels. Population (biased) moments throughout.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ContractError(f"ssim: shape mismatch {x.shape} vs {y.shape}")
    if c1 is None:
        c1 = (SSIM_K1 * dynamic_range) ** 2
    if c2 is None:
        c2 = (SSIM_K2 * dynamic_range) ** 2
    if x.ndim == 2:
        x = x[None]
        y = y[None]

    scores = []
    for xc, yc in zip(x, y):
        mx, my = xc.mean(), yc.mean()
        vx, vy = xc.var(), yc.var()
        cov = ((xc - mx) * (yc - my)).mean()
        scores.append(((2 * mx * my + c1) * (2 * cov + c2))
                      / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(scores))


def set_ssim(generated: ImageBatch, reference: ImageBatch, seed: int,
             k: int = 64) -> float:
    """Mean SSIM of each generated image against a seeded reference sample.

    One subset of K = min(k, |reference|) reference images is drawn from the
    metrics rng stream and shared by every generated image.
    """
    if len(generated) == 0 or len(reference) == 0:
        raise ContractError("set_ssim: both image sets must be non-empty")
    gen = to_unit(generated).data
    ref = to_unit(reference).data
    if gen.shape[1:] != ref.shape[1:]:
        raise ContractError(
            f"set_ssim: image shapes differ: {gen.shape[1:]} vs {ref.shape[1:]}")
    k = min(k, ref.shape[0])
    rng = stream_rng(seed, "metrics", key="set_ssim")
    picks = rng.choice(ref.shape[0], size=k, replace=False)
    subset = ref[picks]
    return float(np.mean([[ssim(g, r) for r in subset] for g in gen]))


# -- Frechet distance -----------------------------------------------------------


@dataclass
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.mu.ndim != 1 or self.sigma.shape != (self.mu.size, self.mu.size):
            raise DimensionError(
                f"GaussianStats: mu {self.mu.shape} incompatible with sigma {self.sigma.shape}")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-12):
            raise NumericalDegeneracyError("covariance is not symmetric within 1e-12")


def _psd_eigvals(m: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(m)
    if vals.min() < -1e-6:
        raise NumericalDegeneracyError(
            f"{what} has eigenvalue {vals.min():.3e} below -1e-6; not PSD")
    return np.maximum(vals, 0.0), vecs


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Frechet distance between two Gaussians.

    The trace term uses Tr((S_a S_b)^(1/2)) = Tr((S_a^(1/2) S_b S_a^(1/2))^(1/2)),
    computed by symmetric eigendecomposition; slightly negative eigenvalues
    from round-off are clamped to zero.
    """
    if a.mu.shape != b.mu.shape:
        raise DimensionError(f"frechet_distance: dims differ: {a.mu.shape} vs {b.mu.shape}")
    va, ua = _psd_eigvals(a.sigma, "first covariance")
    root_a = (ua * np.sqrt(va)) @ ua.T
    inner = root_a @ b.sigma @ root_a
    inner = (inner + inner.T) / 2.0
    vals, _ = _psd_eigvals(inner, "cross covariance product")
    _psd_eigvals(b.sigma, "second covariance")

    delta = a.mu - b.mu
    dist = float(delta @ delta + np.trace(a.sigma) + np.trace(b.sigma) - 2.0 * np.sqrt(vals).sum())
    if dist < -1e-6:
        raise NumericalDegeneracyError(f"Frechet distance degenerate: {dist:.3e}")
    return max(dist, 0.0)


def fit_gaussian(features: np.ndarray, shrinkage: float = COV_SHRINKAGE) -> GaussianStats:
    """Sample mean/covariance with a small ridge for PSD-ness."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise ContractError(f"fit_gaussian needs (N>=2, D) features, got {features.shape}")
    mu = features.mean(axis=0)
    centered = features - mu
    sigma = centered.T @ centered / (features.shape[0] - 1)
    sigma[np.diag_indices_from(sigma)] += shrinkage
    return GaussianStats(mu, sigma)


# -- feature extractors ----------------------------------------------------------


class FeatureExtractor:
    """Deterministic image-set embedding into FEATURE_DIM dimensions.

    ``pixel_pca`` projects flattened pixels onto the top principal components
    of the reference set; ``fixed_random_conv`` pushes images through three
    frozen random stride-2 convolutions with tanh and global average pooling.
    """

    def __init__(self, kind: str = "pixel_pca", seed: int = 0, dim: int = FEATURE_DIM):
        if kind not in EXTRACTORS:
            raise ContractError(f"unknown extractor {kind!r}; expected one of {EXTRACTORS}")
        self.kind = kind
        self.seed = int(seed)
        self.dim = int(dim)
        self._components: np.ndarray | None = None
        self._mean: np.ndarray | None = None
        self._conv_stack: list[tuple[np.ndarray, np.ndarray]] | None = None

    # pixel_pca needs a fit set; fixed_random_conv only needs channel count.
    def fit(self, reference: ImageBatch) -> "FeatureExtractor":
        images = to_unit(reference).data
        if self.kind == "pixel_pca":
            flat = images.reshape(images.shape[0], -1)
            self._mean = flat.mean(axis=0)
            centered = flat - self._mean
            _, _, vt = np.linalg.svd(centered, full_matrices=False)
            comps = np.zeros((self.dim, flat.shape[1]))
            avail = min(self.dim, vt.shape[0])
            comps[:avail] = vt[:avail]
            # fix the SVD sign ambiguity: largest-magnitude entry positive
            for row in comps[:avail]:
                pivot = np.argmax(np.abs(row))
                if row[pivot] < 0:
                    row *= -1.0
            self._components = comps
        else:
            rng = stream_rng(self.seed, "extractor", key="fixed_random_conv")
            chans = [images.shape[1], 16, 32, self.dim]
            stack = []
            for cin, cout in zip(chans[:-1], chans[1:]):
                w = rng.normal(0.0, np.sqrt(2.0 / (cin * 9)), size=(cout, cin, 3, 3))
                stack.append((w, np.zeros(cout)))
            self._conv_stack = stack
        return self

    def transform(self, batch: ImageBatch) -> np.ndarray:
        images = to_unit(batch).data
        if self.kind == "pixel_pca":
            if self._components is None:
                raise ContractError("pixel_pca extractor used before fit()")
            flat = images.reshape(images.shape[0], -1)
            return (flat - self._mean) @ self._components.T
        if self._conv_stack is None:
            raise ContractError("fixed_random_conv extractor used before fit()")
        h = images
        for w, b in self._conv_stack:
            h = np.tanh(conv2d_raw(h, w, b, stride=2, pad=1))
        return h.mean(axis=(2, 3))


def fid_like(generated: ImageBatch, reference: ImageBatch,
             extractor: FeatureExtractor) -> float:
    """Frechet distance between feature Gaussians of the two image sets."""
    if len(generated) < 2 or len(reference) < 2:
        raise ContractError(
            f"fid_like needs at least 2 images per side, got {len(generated)} / {len(reference)}")
    feats_ref = extractor.transform(reference)
    feats_gen = extractor.transform(generated)
    return frechet_distance(fit_gaussian(feats_gen), fit_gaussian(feats_ref))


# -- report records ---------------------------------------------------------------


@dataclass
class MetricRecord:
    metric: str
    dataset: str
    class_label: int
    model_variant: str
    value: float
    seed: int
    extractor: str

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def write_records(records: Iterable[MetricRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(record.to_json_line() + "\n")
