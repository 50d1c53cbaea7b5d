"""Ground-truth-relative metrics: matched IoU, DocSim, and the Fréchet
distance between Gaussian summaries of embedding sets.

Matching uses optimal (Hungarian) assignment so small cases can be verified
against brute-force permutation enumeration. The deep-feature stage of FID
is external: embeddings arrive as files, this module owns only the math.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core import Element, LayoutRecord
from .geometry import iou

EMBEDDING_MAGIC = b"EMB1"


class EmbeddingFormatError(Exception):
    pass


@dataclass(frozen=True)
class EmbeddingSet:
    """A nonempty batch of equal-dimension real vectors."""

    vectors: np.ndarray  # (n, d) float64
    note: str = ""

    def __post_init__(self):
        arr = np.asarray(self.vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"embeddings must be a nonempty (n, d) array, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embeddings contain non-finite values")
        object.__setattr__(self, "vectors", arr)
        self.vectors.setflags(write=False)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray  # (d,)
    cov: np.ndarray  # (d, d), symmetric

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def gaussian_summary(embeddings: EmbeddingSet) -> GaussianSummary:
    """Sample mean and unbiased (n-1 divisor) covariance, symmetrized."""
    if len(embeddings) < 2:
        raise ValueError(f"need at least 2 vectors, got {len(embeddings)}")
    mean = embeddings.vectors.mean(axis=0)
    cov = np.cov(embeddings.vectors, rowvar=False, ddof=1).reshape(
        embeddings.dim, embeddings.dim
    )
    return GaussianSummary(mean=mean, cov=(cov + cov.T) / 2.0)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, small negatives clamped."""
    eigvals, eigvecs = np.linalg.eigh((matrix + matrix.T) / 2.0)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """Squared Fréchet distance between two Gaussian summaries.

    d^2 = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}). The cross term
    is evaluated as Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}), which is symmetric
    PSD and therefore safe for eigendecomposition; eigenvalues pushed slightly
    negative by roundoff are clamped to zero, and so is the final value.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    for summary in (a, b):
        if not (np.all(np.isfinite(summary.mean)) and np.all(np.isfinite(summary.cov))):
            raise ValueError("non-finite values in Gaussian summary")
    sqrt_a = _psd_sqrt(a.cov)
    inner = sqrt_a @ b.cov @ sqrt_a
    eigvals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    trace_sqrt = float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())
    diff = a.mean - b.mean
    d2 = float(diff @ diff) + float(np.trace(a.cov) + np.trace(b.cov)) - 2.0 * trace_sqrt
    return max(0.0, d2)


def save_embeddings(embeddings: EmbeddingSet, path: str | Path) -> None:
    """Write the binary format: "EMB1", u32 count, u32 dim, count*dim f32 LE."""
    vectors = embeddings.vectors.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<II", vectors.shape[0], vectors.shape[1]))
        fh.write(vectors.tobytes())


def load_embeddings(path: str | Path, note: str = "") -> EmbeddingSet:
    """Read an embedding set: binary "EMB1" file or a JSON array-of-arrays."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == EMBEDDING_MAGIC:
        if len(data) < 12:
            raise EmbeddingFormatError(f"{path}: truncated header")
        count, dim = struct.unpack("<II", data[4:12])
        expected = 12 + count * dim * 4
        if len(data) != expected:
            raise EmbeddingFormatError(
                f"{path}: expected {expected} bytes for {count}x{dim}, got {len(data)}"
            )
        vectors = np.frombuffer(data, dtype="<f4", offset=12).reshape(count, dim)
        return EmbeddingSet(vectors.astype(np.float64), note=note or str(path))
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EmbeddingFormatError(f"{path}: neither EMB1 binary nor JSON ({exc})")
    if not isinstance(doc, list):
        raise EmbeddingFormatError(f"{path}: JSON payload must be an array of arrays")
    return EmbeddingSet(np.asarray(doc, dtype=np.float64), note=note or str(path))


def _match_total(weight: np.ndarray) -> float:
    """Total weight of a maximum-weight bipartite matching."""
    if weight.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(-weight)
    return float(weight[rows, cols].sum())


def matched_iou(pred: LayoutRecord, gt: LayoutRecord) -> float:
    """Per-category optimal IoU matching, normalized by max element count.

    Identical layouts score 1; two empty layouts score 1 by convention,
    and an empty layout against a nonempty one scores 0.
    """
    n_pred, n_gt = len(pred.elements), len(gt.elements)
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0
    total = 0.0
    categories = {e.category for e in pred.elements} & {e.category for e in gt.elements}
    for category in categories:
        p = [e.box for e in pred.elements if e.category == category]
        g = [e.box for e in gt.elements if e.category == category]
        weight = np.array([[iou(pb, gb) for gb in g] for pb in p], dtype=np.float64)
        total += _match_total(weight)
    return total / max(n_pred, n_gt)


def docsim_pair_weight(a: Element, b: Element) -> float:
    """Similarity of two elements: size-scaled, decaying with center/shape gaps.

    Zero across categories; otherwise min(sqrt(area)) damped by
    2^(-|center gap| - 2 * (|dw| + |dh|)).
    """
    if a.category != b.category:
        return 0.0
    wa, ha = a.box.width(), a.box.height()
    wb, hb = b.box.width(), b.box.height()
    size = min(math.sqrt(max(0.0, wa * ha)), math.sqrt(max(0.0, wb * hb)))
    ca, cb = a.box.center(), b.box.center()
    delta_center = math.hypot(ca[0] - cb[0], ca[1] - cb[1])
    delta_shape = abs(wa - wb) + abs(ha - hb)
    return size * 2.0 ** (-delta_center - 2.0 * delta_shape)


def docsim(pred: LayoutRecord, gt: LayoutRecord) -> float:
    """Optimal-assignment DocSim, normalized by max element count.

    Empty-layout conventions match matched_iou.
    """
    n_pred, n_gt = len(pred.elements), len(gt.elements)
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0
    weight = np.array(
        [[docsim_pair_weight(p, g) for g in gt.elements] for p in pred.elements],
        dtype=np.float64,
    )
    return _match_total(weight) / max(n_pred, n_gt)
