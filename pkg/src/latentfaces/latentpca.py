"""PCA over the 64-d latent space, plus the per-component separation diagnostic.

The eigendecomposition is a cyclic Jacobi iteration: the latent dimension
is tiny, the full spectrum is needed (every component can be steered),
and Jacobi stays robust when eigenvalues cluster.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InsufficientDataError, InvalidInputError

LATENT_DIM = 64
PCA_MAGIC = b"LFPC"
FISHER_EPS = 1e-12
FISHER_CAP = 1e12

_ORTHO_TOL_FIT = 1e-8
_ORTHO_TOL_LOADED = 1e-4  # float32 storage cannot hold 1e-8 dot products


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps the upper triangle in row order, zeroing one off-diagonal entry
    per rotation, until the off-diagonal Frobenius norm drops below tol or
    max_sweeps pass. Returns (eigenvalues, eigenvectors-as-columns),
    unsorted.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise InvalidInputError(f"matrix must be square, got {a.shape}")
    v = np.eye(n)

    def off_norm():
        return np.sqrt(max(np.sum(a**2) - np.sum(np.diag(a) ** 2), 0.0))

    # Rotations on entries below this cannot lift the off-diagonal norm
    # above tol; skipping them stops roundoff churn once converged.
    skip = tol / n

    for _ in range(max_sweeps):
        if off_norm() < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                # Classic stable rotation: tan via the smaller root.
                diff = a[q, q] - a[p, p]
                if abs(apq) < abs(diff) * 1e-36:
                    t = apq / diff
                elif diff == 0.0:
                    t = 1.0
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1.0))
                c = 1.0 / np.sqrt(t**2 + 1.0)
                s = t * c
                rp, rq = a[p].copy(), a[q].copy()
                a[p] = c * rp - s * rq
                a[q] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def _sign_fix(rows: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    out = rows.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


@dataclass(frozen=True)
class PcaModel:
    """Sample mean, orthonormal components (rows, descending eigenvalue), eigenvalues."""

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        if self.basis.shape != (LATENT_DIM, LATENT_DIM):
            raise InvalidInputError(f"basis must be {LATENT_DIM}x{LATENT_DIM}")
        if np.any(np.diff(self.eigenvalues) > 0):
            raise InvalidInputError("eigenvalues must be non-increasing")

    def check_orthonormal(self, tol: float = _ORTHO_TOL_FIT) -> float:
        err = float(np.abs(self.basis @ self.basis.T - np.eye(LATENT_DIM)).max())
        if err > tol:
            raise InvalidInputError(f"basis not orthonormal: max deviation {err:.3g}")
        return err


def _as_matrix(latents) -> np.ndarray:
    z = np.asarray(latents, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.shape[1] != LATENT_DIM:
        raise InvalidInputError(f"latents must have {LATENT_DIM} columns, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("non-finite latent values")
    return z


def fit(latents) -> PcaModel:
    """Fit PCA on latent vectors: sample mean, covariance eigenbasis (n-1 divisor).

    Eigenvalue ties keep their original index order; any roundoff-negative
    eigenvalue is clamped to zero; each component's sign is fixed so its
    largest-magnitude entry is positive, making "increase PC1" stable
    across refits.
    """
    z = _as_matrix(latents)
    if z.shape[0] < 2:
        raise InsufficientDataError("PCA needs at least 2 latent vectors")
    mean = z.mean(axis=0)
    centered = z - mean
    cov = centered.T @ centered / (z.shape[0] - 1)
    eigvals, eigvecs = jacobi_eigh(cov)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = np.clip(eigvals[order], 0.0, None)
    basis = _sign_fix(eigvecs[:, order].T)
    model = PcaModel(mean=mean, basis=basis, eigenvalues=eigvals)
    model.check_orthonormal()
    return model


def _as_vector(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (LATENT_DIM,):
        raise InvalidInputError(f"expected {LATENT_DIM} values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("non-finite values")
    return v


def transform(model: PcaModel, z) -> np.ndarray:
    """Latent vector -> PCA coordinates (index 0 is PC1)."""
    return model.basis @ (_as_vector(z) - model.mean)


def inverse(model: PcaModel, coords) -> np.ndarray:
    """PCA coordinates -> latent vector."""
    return model.mean + model.basis.T @ _as_vector(coords)


def transform_many(model: PcaModel, latents) -> np.ndarray:
    return (_as_matrix(latents) - model.mean) @ model.basis.T


@dataclass(frozen=True)
class SeparationReport:
    """Per-component Fisher ratios between two labels, plus the class stats."""

    labels: tuple[str, str]
    fisher_ratios: np.ndarray
    means: dict  # label -> per-component means
    variances: dict  # label -> per-component variances (n-1)
    argmax_component: int

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "fisher_ratios": self.fisher_ratios.tolist(),
            "means": {k: v.tolist() for k, v in self.means.items()},
            "variances": {k: v.tolist() for k, v in self.variances.items()},
            "argmax_component": self.argmax_component,
        }


def separation(coords_by_label: dict) -> SeparationReport:
    """Fisher ratio per component for exactly two labels.

    ratio_k = (mu_Ak - mu_Bk)^2 / (var_Ak + var_Bk + eps), capped at 1e12.
    """
    if len(coords_by_label) != 2:
        raise InvalidInputError(
            f"separation needs exactly 2 labels, got {len(coords_by_label)}"
        )
    stats = {}
    for label, coords in coords_by_label.items():
        m = np.asarray(coords, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 2:
            raise InsufficientDataError(f"label {label!r} needs at least 2 samples")
        stats[label] = (m.mean(axis=0), m.var(axis=0, ddof=1))
    (la, (mu_a, var_a)), (lb, (mu_b, var_b)) = sorted(stats.items())
    ratios = np.minimum((mu_a - mu_b) ** 2 / (var_a + var_b + FISHER_EPS), FISHER_CAP)
    return SeparationReport(
        labels=(la, lb),
        fisher_ratios=ratios,
        means={la: mu_a, lb: mu_b},
        variances={la: var_a, lb: var_b},
        argmax_component=int(np.argmax(ratios)),
    )


def separation_pairwise(coords_by_label: dict) -> dict:
    """Separation reports for every unordered label pair."""
    labels = sorted(coords_by_label)
    out = {}
    for i, la in enumerate(labels):
        for lb in labels[i + 1 :]:
            out[(la, lb)] = separation({la: coords_by_label[la], lb: coords_by_label[lb]})
    return out


def save_pca(model: PcaModel, path) -> None:
    """Write magic "LFPC" + mean + eigenvalues + basis as float32 LE."""
    with open(path, "wb") as fh:
        fh.write(PCA_MAGIC)
        fh.write(model.mean.astype("<f4").tobytes())
        fh.write(model.eigenvalues.astype("<f4").tobytes())
        fh.write(model.basis.astype("<f4").tobytes())


def load_pca(path) -> PcaModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != PCA_MAGIC:
        raise FormatError(f"bad PCA magic {data[:4]!r}")
    expected = 4 + 4 * (LATENT_DIM + LATENT_DIM + LATENT_DIM * LATENT_DIM)
    if len(data) != expected:
        raise FormatError(f"PCA file is {len(data)} bytes, expected {expected}")
    floats = np.frombuffer(data[4:], dtype="<f4").astype(np.float64)
    mean = floats[:LATENT_DIM]
    eigenvalues = floats[LATENT_DIM : 2 * LATENT_DIM]
    basis = floats[2 * LATENT_DIM :].reshape(LATENT_DIM, LATENT_DIM)
    model = PcaModel(mean=mean, basis=basis, eigenvalues=eigenvalues)
    model.check_orthonormal(_ORTHO_TOL_LOADED)
    return model
