"""Reproducing-kernel evaluation on complex vectors and kernel-matrix assembly.

Three kernel families are supported:

* linear          k(l, l') = l^H l'
* gaussian        k(l, l') = exp(-gamma * (l - conj(l'))^T (l - conj(l')))
* polynomial      k(l, l') = (l^H l' + c)^r

The gaussian form uses a plain (unconjugated) transpose on the displacement,
so it may return complex values for complex inputs; on real inputs it reduces
to exp(-gamma * ||l - l'||^2).  Gaussian widths are commonly quoted as sigma;
the conversion used throughout is gamma = 1 / (2 * sigma^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

LINEAR = "linear"
GAUSSIAN = "gaussian"
POLYNOMIAL = "polynomial"

_KINDS = (LINEAR, GAUSSIAN, POLYNOMIAL)


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of one reproducing kernel.

    Parameters
    ----------
    kind : str
        One of ``"linear"``, ``"gaussian"``, ``"polynomial"``.
    gamma : float
        Gaussian rate, required > 0 for the gaussian kind.
    degree : int
        Polynomial degree r >= 1.
    intercept : complex
        Polynomial intercept c.
    """

    kind: str
    gamma: float = 1.0
    degree: int = 1
    intercept: complex = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError(f"unknown kernel kind {self.kind!r}")
        if self.kind == GAUSSIAN and not self.gamma > 0:
            raise InputError(f"gaussian kernel needs gamma > 0, got {self.gamma}")
        if self.kind == POLYNOMIAL and self.degree < 1:
            raise InputError(f"polynomial kernel needs degree >= 1, got {self.degree}")


def gaussian_spec(sigma: float) -> KernelSpec:
    """Gaussian kernel from a width sigma, via gamma = 1 / (2 sigma^2)."""
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    return KernelSpec(GAUSSIAN, gamma=1.0 / (2.0 * sigma**2))


def median_distance_gaussian(points: np.ndarray) -> KernelSpec:
    """Gaussian kernel with the median pairwise distance of the given points
    (as columns) for sigma, the usual bandwidth heuristic."""
    pts = np.atleast_2d(np.asarray(points))
    n = pts.shape[1]
    if n < 2:
        return gaussian_spec(1.0)
    dists = [
        float(np.linalg.norm(pts[:, i] - pts[:, j]))
        for i in range(n) for j in range(i + 1, n)
    ]
    med = float(np.median(dists))
    return gaussian_spec(med if med > 0 else 1.0)


def default_kernel_dictionary(landmarks: np.ndarray) -> list[KernelSpec]:
    """Seven-kernel default dictionary: gaussian sigma in {0.2, 0.4, 0.8} and
    polynomial degree in {1, 2, 3, 4} with intercept = entry-wise mean of the
    landmark points."""
    c = complex(np.mean(landmarks))
    gauss = [gaussian_spec(s) for s in (0.2, 0.4, 0.8)]
    poly = [KernelSpec(POLYNOMIAL, degree=r, intercept=c) for r in (1, 2, 3, 4)]
    return gauss + poly


@dataclass
class KernelMatrix:
    """Square kernel matrix over one landmark set."""

    entries: np.ndarray
    spec: KernelSpec
    landmark_count: int = field(default=0)

    def __post_init__(self):
        n = self.entries.shape[0]
        if self.entries.shape != (n, n):
            raise InputError("kernel matrix must be square")
        self.landmark_count = n


def eval_kernel(spec: KernelSpec, l: np.ndarray, l_prime: np.ndarray) -> complex:
    """Evaluate one kernel on a pair of equal-length vectors."""
    l = np.asarray(l).ravel()
    l_prime = np.asarray(l_prime).ravel()
    if l.shape != l_prime.shape or l.size < 1:
        raise InputError(f"vector length mismatch: {l.shape} vs {l_prime.shape}")
    if spec.kind == LINEAR:
        return complex(np.vdot(l, l_prime))
    if spec.kind == GAUSSIAN:
        d = l - np.conj(l_prime)
        return complex(np.exp(-spec.gamma * np.sum(d * d)))
    d = np.vdot(l, l_prime) + spec.intercept
    return complex(d**spec.degree)


def build_kernel_matrix(landmarks: np.ndarray, spec: KernelSpec) -> KernelMatrix:
    """Assemble the N_l x N_l matrix with entries k(l_k, l_k').

    ``landmarks`` holds the points as columns (nu x N_l).
    """
    landmarks = np.atleast_2d(np.asarray(landmarks))
    if landmarks.shape[1] < 1:
        raise InputError("need at least one landmark")
    gram = landmarks.conj().T @ landmarks  # (k,k') entry = l_k^H l_k'
    if spec.kind == LINEAR:
        entries = gram
    elif spec.kind == POLYNOMIAL:
        entries = (gram + spec.intercept) ** spec.degree
    else:
        # (l - conj(l'))^T (l - conj(l')) expanded to avoid the nu x N_l x N_l
        # displacement tensor:  sum l^2 + sum conj(l')^2 - 2 l^T conj(l')
        sq = np.sum(landmarks * landmarks, axis=0)
        cross = landmarks.T @ np.conj(landmarks)
        entries = np.exp(-spec.gamma * (sq[:, None] + np.conj(sq)[None, :] - 2.0 * cross))
    return KernelMatrix(entries=np.ascontiguousarray(entries), spec=spec)


def build_kernel_supermatrix(mats: list[KernelMatrix]) -> np.ndarray:
    """Block-diagonal stack of M kernel matrices; off-diagonal blocks exactly zero."""
    if not mats:
        raise InputError("need at least one kernel matrix")
    n = mats[0].landmark_count
    for km in mats:
        if km.landmark_count != n:
            raise InputError(
                f"mixed landmark counts in supermatrix: {km.landmark_count} vs {n}"
            )
    m = len(mats)
    dtype = np.result_type(*(km.entries.dtype for km in mats))
    out = np.zeros((m * n, m * n), dtype=dtype)
    for i, km in enumerate(mats):
        out[i * n : (i + 1) * n, i * n : (i + 1) * n] = km.entries
    return out
