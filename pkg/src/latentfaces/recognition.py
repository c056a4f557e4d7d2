"""Black-box face matcher interface plus a local eigenfaces simulator.

The simulator stands in for a remote scored matcher: it projects images
onto a PCA basis of the gallery pixels ("eigenfaces"), converts cosine
similarity of projections to a 0-100 score through a logistic calibrated
on the gallery itself, and reports the same quality metrics the remote
service would (confidence, brightness, sharpness). Attack evaluation
depends only on the compare() contract, never on these internals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import (
    CannotCalibrateError,
    DegenerateGalleryError,
    InsufficientDataError,
    InvalidInputError,
    ShapeError,
)
from .imaging import FaceImage, brightness, laplacian_variance, sharpness
from .latentpca import jacobi_eigh

EIGENFACE_COMPONENTS = 32
INTRA_ANCHOR = 99.0  # calibrated similarity at the median intra-label cosine
INTER_ANCHOR = 2.0  # calibrated similarity at the median inter-label cosine


@dataclass(frozen=True)
class GalleryEntry:
    entry_id: str
    label: str
    image: FaceImage


@dataclass(frozen=True)
class MatchResult:
    entry_id: str
    entry_label: str
    similarity: float
    confidence: float
    brightness: float
    sharpness: float

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "entry_label": self.entry_label,
            "similarity": self.similarity,
            "confidence": self.confidence,
            "brightness": self.brightness,
            "sharpness": self.sharpness,
        }


class RecognitionClient(Protocol):
    """The black-box contract: a probe in, one scored row per gallery entry out."""

    def compare(self, probe: FaceImage) -> list["MatchResult"]: ...

    @property
    def labels(self) -> list[str]: ...


@dataclass(frozen=True)
class BaselineStats:
    """Per label-pair similarity statistics and overall quality statistics."""

    similarity: dict  # (probe_label, gallery_label) -> {"mean","stddev","count"}
    quality: dict  # metric name -> {"mean","stddev"}

    def to_dict(self) -> dict:
        return {
            "similarity": [
                {
                    "probe_label": pl,
                    "gallery_label": gl,
                    "mean": st["mean"],
                    "stddev": st["stddev"],
                    "count": st["count"],
                }
                for (pl, gl), st in sorted(self.similarity.items())
            ],
            "quality": self.quality,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BaselineStats":
        sim = {
            (row["probe_label"], row["gallery_label"]): {
                "mean": row["mean"],
                "stddev": row["stddev"],
                "count": row["count"],
            }
            for row in data["similarity"]
        }
        return cls(similarity=sim, quality=dict(data["quality"]))


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class EigenfacesSimulator:
    """Enrolled matcher state; immutable after enroll()."""

    basis: np.ndarray  # (k, pixels) eigenface rows
    mean_face: np.ndarray  # (pixels,)
    entry_ids: list[str]
    entry_labels: list[str]
    projections: np.ndarray  # (n, k)
    steepness: float  # a > 0
    midpoint: float  # b, cosine mapped to the 50-point score
    reference_scale: float
    image_side: int

    @property
    def labels(self) -> list[str]:
        return sorted(set(self.entry_labels))

    def compare(self, probe: FaceImage) -> list[MatchResult]:
        return compare(self, probe)


def _similarity_from_cosine(model: EigenfacesSimulator, cos: np.ndarray) -> np.ndarray:
    return 100.0 * _logistic(model.steepness * (cos - model.midpoint))


def _pairwise_cosines(projections: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(projections, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = projections / safe[:, None]
    cos = unit @ unit.T
    cos[norms == 0.0, :] = 0.0
    cos[:, norms == 0.0] = 0.0
    return cos


def enroll(gallery: list[GalleryEntry]) -> EigenfacesSimulator:
    """Fit the eigenface basis on the gallery and calibrate the score map.

    The logistic (a, b) is solved so the median intra-label gallery-pair
    similarity is 99.0 and the median inter-label similarity is 2.0;
    coincident (or inverted) medians mean the gallery cannot anchor a
    score scale. reference_scale is the 95th percentile of the gallery's
    Laplacian variances.
    """
    if len(gallery) < 2:
        raise InsufficientDataError("enroll needs at least 2 gallery entries")
    ids = [e.entry_id for e in gallery]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("entry_id values must be unique")
    sides = {(e.image.height, e.image.width) for e in gallery}
    if len(sides) != 1:
        raise ShapeError(f"gallery images differ in size: {sorted(sides)}")
    side = gallery[0].image.height
    if gallery[0].image.width != side:
        raise ShapeError("gallery images must be square")
    labels = [e.label for e in gallery]
    if len(set(labels)) < 2:
        raise CannotCalibrateError("gallery has a single label; cannot calibrate scores")

    x = np.stack([e.image.pixels.ravel() for e in gallery])
    mean_face = x.mean(axis=0)
    centered = x - mean_face

    # Eigenfaces via the n x n Gram matrix: for n << pixel count the top
    # covariance eigenvectors are centered.T @ u_i, identically.
    n = len(gallery)
    gram = centered @ centered.T / (n - 1)
    eigvals, eigvecs = jacobi_eigh(gram)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    positive = eigvals > max(eigvals[0], 0.0) * 1e-12
    k = min(EIGENFACE_COMPONENTS, int(np.count_nonzero(positive)))
    if k == 0:
        raise DegenerateGalleryError("gallery pixel covariance has no positive spectrum")
    rows = centered.T @ eigvecs[:, :k]  # (pixels, k), unnormalized
    rows /= np.linalg.norm(rows, axis=0)
    basis = rows.T
    # deterministic sign: largest-magnitude pixel positive
    for i in range(k):
        j = int(np.argmax(np.abs(basis[i])))
        if basis[i, j] < 0:
            basis[i] = -basis[i]

    projections = centered @ basis.T
    cos = _pairwise_cosines(projections)
    same = np.array([[la == lb for lb in labels] for la in labels])
    iu = np.triu_indices(n, 1)
    intra = cos[iu][same[iu]]
    inter = cos[iu][~same[iu]]
    if intra.size == 0 or inter.size == 0:
        raise CannotCalibrateError("need at least one intra-label and one inter-label pair")
    m_intra = float(np.median(intra))
    m_inter = float(np.median(inter))
    if m_intra == m_inter:
        raise DegenerateGalleryError("intra- and inter-label cosine medians coincide")
    if m_intra < m_inter:
        raise DegenerateGalleryError(
            "inter-label cosine median exceeds intra-label; gallery labels are not separable"
        )
    l_intra = float(np.log(INTRA_ANCHOR / (100.0 - INTRA_ANCHOR)))
    l_inter = float(np.log(INTER_ANCHOR / (100.0 - INTER_ANCHOR)))
    steepness = (l_intra - l_inter) / (m_intra - m_inter)
    midpoint = m_intra - l_intra / steepness

    lap_vars = np.array([laplacian_variance(e.image) for e in gallery])
    reference_scale = float(np.percentile(lap_vars, 95))
    if reference_scale <= 0.0:
        raise DegenerateGalleryError("gallery images are all flat; sharpness scale is zero")

    return EigenfacesSimulator(
        basis=basis,
        mean_face=mean_face,
        entry_ids=ids,
        entry_labels=labels,
        projections=projections,
        steepness=steepness,
        midpoint=midpoint,
        reference_scale=reference_scale,
        image_side=side,
    )


def compare(model: EigenfacesSimulator, probe: FaceImage) -> list[MatchResult]:
    """Score a probe against every gallery entry, ordered by entry_id.

    Zero-norm projections (a flat probe, or a degenerate entry) are given
    similarity 0 rather than an undefined cosine.
    """
    if (probe.height, probe.width) != (model.image_side, model.image_side):
        raise ShapeError(
            f"probe is {probe.width}x{probe.height}, gallery is "
            f"{model.image_side}x{model.image_side}"
        )
    flat = probe.pixels.ravel()
    # A constant probe carries no facial structure: treat its projection as
    # degenerate (zero) rather than matching whatever offset it has from the
    # mean face.
    if float(np.ptp(flat)) == 0.0:
        proj = np.zeros(model.basis.shape[0])
    else:
        proj = model.basis @ (flat - model.mean_face)
    p_norm = float(np.linalg.norm(proj))
    e_norms = np.linalg.norm(model.projections, axis=1)
    if p_norm == 0.0:
        sims = np.zeros(len(model.entry_ids))
    else:
        safe = np.where(e_norms == 0.0, 1.0, e_norms)
        cos = (model.projections @ proj) / (safe * p_norm)
        sims = _similarity_from_cosine(model, cos)
        sims[e_norms == 0.0] = 0.0

    # probe-level quality metrics, shared across rows
    rho = _pearson(flat, model.mean_face)
    conf = 100.0 * max(0.0, rho) ** 0.25
    bri = brightness(probe)
    sha = sharpness(probe, model.reference_scale)

    rows = [
        MatchResult(
            entry_id=model.entry_ids[i],
            entry_label=model.entry_labels[i],
            similarity=float(sims[i]),
            confidence=conf,
            brightness=bri,
            sharpness=sha,
        )
        for i in range(len(model.entry_ids))
    ]
    rows.sort(key=lambda r: r.entry_id)
    return rows


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = float(np.linalg.norm(da) * np.linalg.norm(db))
    if denom == 0.0:
        return 0.0
    return float(da @ db / denom)


def compute_baselines(client: RecognitionClient, probes: list[GalleryEntry]) -> BaselineStats:
    """Probe every image against the gallery; aggregate by label pair.

    Similarity gets a sample mean and stddev (n-1; a single pair reports
    0) per (probe_label, gallery_label); confidence/brightness/sharpness
    aggregate over the probes themselves.
    """
    if not probes:
        raise InsufficientDataError("no probes to compute baselines from")
    sim_values: dict = {}
    quality_rows = []
    for probe in probes:
        results = client.compare(probe.image)
        quality_rows.append(
            (results[0].confidence, results[0].brightness, results[0].sharpness)
        )
        for r in results:
            sim_values.setdefault((probe.label, r.entry_label), []).append(r.similarity)

    def stats(values):
        arr = np.asarray(values, dtype=np.float64)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return {"mean": float(arr.mean()), "stddev": std, "count": int(arr.size)}

    similarity = {pair: stats(vals) for pair, vals in sim_values.items()}
    q = np.asarray(quality_rows)
    quality = {
        name: {
            "mean": float(q[:, i].mean()),
            "stddev": float(q[:, i].std(ddof=1)) if len(q) > 1 else 0.0,
        }
        for i, name in enumerate(("confidence", "brightness", "sharpness"))
    }
    return BaselineStats(similarity=similarity, quality=quality)
