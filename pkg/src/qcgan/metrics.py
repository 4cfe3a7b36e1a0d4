"""Frechet distance between image sets and PGM grid output.

FID here uses pixel features (8x8 images) or a fixed random projection to
64 dimensions (larger images) instead of Inception embeddings, so values
are only comparable within this package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DomainError, StructuralError

FEATURE_DIM = 64
PROJECTION_SEED = 0x51DE
SYMMETRY_TOL = 1e-8
EIG_CLAMP = 1e-10
GUTTER = 2


@dataclass
class FidReport:
    mu_x: np.ndarray
    mu_g: np.ndarray
    sigma_x: np.ndarray
    sigma_g: np.ndarray
    fid: float


def projection_matrix(d_in: int, d_out: int = FEATURE_DIM) -> np.ndarray:
    rng = np.random.default_rng(PROJECTION_SEED)
    return rng.uniform(-1.0, 1.0, size=(d_in, d_out)) / np.sqrt(d_in)


def features(images, image_size: int) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64).reshape(-1, image_size * image_size)
    if image_size * image_size <= FEATURE_DIM:
        return images
    return images @ projection_matrix(image_size * image_size)


def mean_cov(feats) -> tuple[np.ndarray, np.ndarray]:
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    n = feats.shape[0]
    if n < 2:
        raise DomainError(f"need at least 2 samples for a covariance, got {n}")
    mu = feats.mean(axis=0)
    centred = feats - mu
    sigma = centred.T @ centred / (n - 1)
    return mu, 0.5 * (sigma + sigma.T)


def jacobi_eigh(a, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, Q)`` with eigenvectors as columns of ``Q`` and
    eigenvalues in ascending order.
    """
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise DomainError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
    a = 0.5 * (a + a.T)
    v = np.eye(a.shape[0])
    tol = 1e-12 * np.linalg.norm(a)
    kernels.jacobi_sweeps(a, v, tol, max_sweeps)
    evals = np.diag(a).copy()
    order = np.argsort(evals, kind="stable")
    return evals[order], np.ascontiguousarray(v[:, order])


def sqrtm_psd(a) -> np.ndarray:
    evals, q = jacobi_eigh(a)
    floor = EIG_CLAMP * max(1.0, float(np.linalg.norm(a)))
    if evals.size and evals[0] < -floor:
        raise DomainError(f"matrix is not positive semidefinite (eigenvalue {evals[0]:.3e})")
    root = np.sqrt(np.clip(evals, 0.0, None))
    s = (q * root) @ q.T
    return 0.5 * (s + s.T)


def frechet_distance(mu_x, sigma_x, mu_g, sigma_g, sqrt_sigma_x=None) -> float:
    """``|mu_x - mu_g|^2 + Tr(S_x + S_g - 2 sqrt(S_x^1/2 S_g S_x^1/2))``, clamped at 0.

    ``sqrt_sigma_x`` may be passed in when the same reference set is reused.
    """
    mu_x, mu_g = np.asarray(mu_x, dtype=np.float64), np.asarray(mu_g, dtype=np.float64)
    sigma_x, sigma_g = np.atleast_2d(sigma_x), np.atleast_2d(sigma_g)
    if mu_x.shape != mu_g.shape or sigma_x.shape != sigma_g.shape:
        raise StructuralError(f"feature dimensions differ: {mu_x.shape} vs {mu_g.shape}")
    root_x = sqrtm_psd(sigma_x) if sqrt_sigma_x is None else sqrt_sigma_x
    inner = root_x @ sigma_g @ root_x
    cross = sqrtm_psd(0.5 * (inner + inner.T))
    diff = mu_x - mu_g
    value = diff @ diff + np.trace(sigma_x) + np.trace(sigma_g) - 2.0 * np.trace(cross)
    return max(float(value), 0.0)


def fid_report(features_x, features_g) -> FidReport:
    features_x, features_g = np.atleast_2d(features_x), np.atleast_2d(features_g)
    if features_x.shape[1] != features_g.shape[1]:
        raise StructuralError(f"feature dimensions differ: {features_x.shape[1]} vs {features_g.shape[1]}")
    mu_x, sigma_x = mean_cov(features_x)
    mu_g, sigma_g = mean_cov(features_g)
    return FidReport(mu_x, mu_g, sigma_x, sigma_g, frechet_distance(mu_x, sigma_x, mu_g, sigma_g))


def fid(features_x, features_g) -> float:
    return fid_report(features_x, features_g).fid


class FidReference:
    """Caches the statistics of a fixed real set for repeated FID evaluations."""

    def __init__(self, real_images, image_size: int):
        self.image_size = image_size
        self.mu, self.sigma = mean_cov(features(real_images, image_size))
        self.sqrt_sigma = sqrtm_psd(self.sigma)

    def __call__(self, generated_images) -> float:
        mu_g, sigma_g = mean_cov(features(generated_images, self.image_size))
        return frechet_distance(self.mu, self.sigma, mu_g, sigma_g, sqrt_sigma_x=self.sqrt_sigma)


def to_bytes(pixels) -> np.ndarray:
    # round half up
    return np.floor(255.0 * np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0) + 0.5).astype(np.uint8)


def grid_canvas(images, rows: int, cols: int, h: int, w: int) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64).reshape(-1, h, w)
    if rows * cols < len(images):
        raise StructuralError(f"{rows}x{cols} grid cannot hold {len(images)} images")
    canvas = np.zeros((rows * h + (rows - 1) * GUTTER, cols * w + (cols - 1) * GUTTER), dtype=np.uint8)
    for k, img in enumerate(images):
        r, c = divmod(k, cols)
        top, left = r * (h + GUTTER), c * (w + GUTTER)
        canvas[top : top + h, left : left + w] = to_bytes(img)
    return canvas


def write_pgm_grid(images, rows: int, cols: int, path, h: int | None = None, w: int | None = None) -> Path:
    """Tile images row-major into a binary P5 PGM with black gutters.

    ``images`` is ``(n, h, w)``, or ``(n, h*w)`` with square images assumed
    unless ``h``/``w`` are given.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        h, w = images.shape[1:]
    elif h is None or w is None:
        side = int(round(np.sqrt(images.shape[-1])))
        if side * side != images.shape[-1]:
            raise StructuralError(f"cannot infer image shape from {images.shape[-1]} pixels")
        h = w = side
    canvas = grid_canvas(images, rows, cols, h, w)
    path = Path(path)
    with open(path, "wb") as f:
        f.write(f"P5\n{canvas.shape[1]} {canvas.shape[0]}\n255\n".encode("ascii"))
        f.write(canvas.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    """Minimal P5 reader (used to inspect emitted grids)."""
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise DomainError(f"{path} is not a binary PGM")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise DomainError(f"unsupported maxval {maxval}")
    payload = data[m.end() : m.end() + width * height]
    if len(payload) != width * height:
        raise DomainError(f"{path}: truncated pixel data")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
