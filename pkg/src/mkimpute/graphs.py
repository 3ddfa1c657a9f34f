"""Graph construction and the operators used by the spatio-temporal regularizer.

The regularizer couples a graph operator acting on node space with one-step
temporal differences:  tr(Delta^T X^T S X Delta)  with S = (L + eps*I)^beta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InputError


@dataclass
class GraphOperators:
    """Adjacency, Laplacian, smoothed Laplacian power and temporal difference.

    ``neighbors[i]`` is the directed k-nearest-neighbor index list of node i
    (excluding i itself); W is the OR-symmetrized weighted adjacency.
    """

    W: np.ndarray
    L: np.ndarray
    L_sobolev: np.ndarray
    delta: np.ndarray
    eps: float
    beta: float
    neighbors: list[np.ndarray]


def knn_graph(coords: np.ndarray, k: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Inverse-square-distance kNN adjacency from point coordinates.

    ``coords`` is p x I0 (points as columns).  Each node connects to its k
    nearest neighbors in Euclidean distance; an edge exists if either endpoint
    selects the other, with weight w_ij = 1 / d_ij^2 and zero diagonal.
    Returns (W, neighbors).
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    n = coords.shape[1]
    if not 1 <= k < n:
        raise InputError(f"need 1 <= k < {n}, got k={k}")
    diff = coords[:, :, None] - coords[:, None, :]
    d2 = np.sum(diff * diff, axis=0)
    off = ~np.eye(n, dtype=bool)
    if np.any(d2[off] == 0.0):
        raise DataError("duplicate coordinates produce zero distances")
    neighbors = []
    sel = np.zeros((n, n), dtype=bool)
    for i in range(n):
        order = np.argsort(d2[i], kind="stable")
        order = order[order != i][:k]
        neighbors.append(order)
        sel[i, order] = True
    sel |= sel.T  # edge if either endpoint selects the other
    W = np.zeros((n, n))
    W[sel] = 1.0 / d2[sel]
    return W, neighbors


def laplacian(W: np.ndarray) -> np.ndarray:
    """Combinatorial Laplacian diag(W 1) - W of a symmetric non-negative W."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InputError("adjacency must be square")
    if not np.allclose(W, W.T, atol=1e-12):
        raise InputError("adjacency must be symmetric")
    if np.any(W < 0) or np.any(np.diag(W) != 0):
        raise InputError("adjacency must be non-negative with zero diagonal")
    return np.diag(W.sum(axis=1)) - W


def sobolev_operator(L: np.ndarray, eps: float, beta: float) -> np.ndarray:
    """(L + eps*I)^beta: repeated products for integer beta, symmetric
    eigendecomposition otherwise."""
    if not eps > 0:
        raise InputError(f"eps must be positive, got {eps}")
    if not beta > 0:
        raise InputError(f"beta must be positive, got {beta}")
    A = np.asarray(L, dtype=float) + eps * np.eye(L.shape[0])
    if float(beta).is_integer():
        out = np.eye(A.shape[0])
        for _ in range(int(beta)):
            out = out @ A
        return 0.5 * (out + out.T)
    lam, U = np.linalg.eigh(A)
    lam = np.maximum(lam, 0.0)
    return (U * lam**beta) @ U.T


def diff_operator(n_time: int) -> np.ndarray:
    """One-step difference matrix of shape I_N x (I_N - 1); X @ delta yields
    the column differences x_{t+1} - x_t."""
    if n_time < 2:
        raise InputError(f"need at least two time points, got {n_time}")
    delta = np.zeros((n_time, n_time - 1))
    idx = np.arange(n_time - 1)
    delta[idx, idx] = -1.0
    delta[idx + 1, idx] = 1.0
    return delta


def build_graph_operators(
    coords: np.ndarray, k: int, eps: float, beta: float, n_time: int
) -> GraphOperators:
    """Assemble every operator needed by the graph-signal pipeline."""
    W, neighbors = knn_graph(coords, k)
    L = laplacian(W)
    return GraphOperators(
        W=W,
        L=L,
        L_sobolev=sobolev_operator(L, eps, beta),
        delta=diff_operator(n_time),
        eps=eps,
        beta=beta,
        neighbors=neighbors,
    )
