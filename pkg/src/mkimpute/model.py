"""Multilinear factor model X ~ D^(1) ... D^(Q) K B summed over M kernels.

Factors are stored per kernel block (never as materialized supermatrices):
for each m, D_m^(q) has shape d_{q-1} x d_q with d_0 = I0 and d_Q = N_l,
K_m is N_l x N_l and B_m is N_l x I_N.  The block-diagonal supermatrix
product equals the per-m sum implemented here; keeping blocks is what makes
the parameter count M * (sum_q d_{q-1} d_q + I_N N_l) instead of the dense
M * (I0 + I_N) * N_l.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ModelDims:
    n_rows: int  # I0
    n_cols: int  # I_N
    n_landmarks: int  # N_l
    n_kernels: int = 1  # M
    depth: int = 1  # Q
    inner: tuple[int, ...] = ()  # d_1 .. d_{Q-1}

    def __post_init__(self):
        if self.depth < 1 or self.n_kernels < 1:
            raise InputError("need Q >= 1 and M >= 1")
        if len(self.inner) != self.depth - 1:
            raise InputError(
                f"depth {self.depth} needs {self.depth - 1} inner dims, got {self.inner}"
            )
        if any(d < 1 for d in self.inner):
            raise InputError("inner dimensions must be positive")

    @property
    def d_list(self) -> tuple[int, ...]:
        """(d_0, d_1, ..., d_Q) = (I0, inner..., N_l)."""
        return (self.n_rows, *self.inner, self.n_landmarks)


@dataclass
class SolverConfig:
    """All weights, proximal constants and schedule knobs of the solver."""

    lambda1: float = 0.0  # l1 weight on the coefficient supermatrix
    lambda2: float = 0.0  # Tikhonov weight on factor supermatrices (graph problem)
    lambda3: float = 0.0  # l1 weight on the temporal spectrum Z (k-space problem)
    lambda4: float = 0.0  # Tikhonov weight on factors (k-space problem)
    lambda_L: float = 0.0  # spatio-temporal smoothness weight
    tau_X: float = 1.0
    tau_D: float = 1.0
    tau_B: float = 1.0
    tau_Z: float = 1.0
    gamma0: float = 1.0  # in (0, 1]
    zeta: float = 0.5  # in (0, 1)
    outer_iters: int = 300
    tol_objective: float = 1e-6
    cg_tol: float = 1e-9
    cg_max: int | None = None  # defaults to 10 * sqrt(free-entry count)
    inner_tol: float = 1e-8
    inner_max: int = 500
    z_rule: str = "ratio"  # "ratio": Soft[F_t(X) + (tau_Z/l2) Z, l3/l2]
    #                        "prox":  Soft[(l2 F_t(X) + tau_Z Z)/(l2+tau_Z), l3/(l2+tau_Z)]
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma0 <= 1.0:
            raise InputError(f"gamma0 must lie in (0, 1], got {self.gamma0}")
        if not 0.0 < self.zeta < 1.0:
            raise InputError(f"zeta must lie in (0, 1), got {self.zeta}")
        for name in ("tau_X", "tau_D", "tau_B", "tau_Z"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda_L"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be non-negative")
        if self.z_rule not in ("ratio", "prox"):
            raise InputError(f"unknown z_rule {self.z_rule!r}")


@dataclass
class FactorModel:
    """Per-block factors; ``mmf`` marks the reduction that skips the kernel,
    affine-constraint and l1 machinery."""

    dims: ModelDims
    factors: list[list[np.ndarray]]  # factors[m][q-1] = D_m^(q)
    kernels: list[np.ndarray]  # K_m
    coeffs: list[np.ndarray]  # B_m
    mmf: bool = False

    def copy(self) -> "FactorModel":
        return FactorModel(
            dims=self.dims,
            factors=[[d.copy() for d in row] for row in self.factors],
            kernels=[k.copy() for k in self.kernels],
            coeffs=[b.copy() for b in self.coeffs],
            mmf=self.mmf,
        )

    def block_basis(self, m: int) -> np.ndarray:
        """A_m = D_m^(1) ... D_m^(Q) K_m, the I0 x N_l regression basis."""
        out = self.factors[m][0]
        for d in self.factors[m][1:]:
            out = out @ d
        return out @ self.kernels[m]


def predict(model: FactorModel) -> np.ndarray:
    """Evaluate the factorization: sum over m of D_m^(1)...D_m^(Q) K_m B_m."""
    dims = model.dims
    out = np.zeros(
        (dims.n_rows, dims.n_cols),
        dtype=np.result_type(*(f[0].dtype for f in model.factors), model.coeffs[0].dtype),
    )
    for m in range(dims.n_kernels):
        left = model.block_basis(m)
        chain = left @ model.coeffs[m]
        if chain.shape != out.shape:
            raise InputError(f"block {m} product has shape {chain.shape}, expected {out.shape}")
        out = out + chain
    return out


def count_unknowns(dims: ModelDims) -> int:
    """Exact number of free parameters: M * (sum_q d_{q-1} d_q + I_N N_l)."""
    d = dims.d_list
    pairs = sum(d[q - 1] * d[q] for q in range(1, dims.depth + 1))
    return dims.n_kernels * (pairs + dims.n_cols * dims.n_landmarks)


def init_factors(
    dims: ModelDims,
    seed: int,
    dtype=np.complex128,
    kernels: list[np.ndarray] | None = None,
) -> FactorModel:
    """Random Gaussian factors scaled by 1/sqrt(fan-in); coefficient columns
    are shifted so each block satisfies 1^H B_m = 1^H at initialization.

    Kernels default to identity matrices and are normally replaced with the
    actual kernel matrices by the caller.
    """
    rng = np.random.default_rng(seed)
    complex_out = np.issubdtype(np.dtype(dtype), np.complexfloating)

    def draw(rows, cols, std):
        if complex_out:
            z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
            return (std / np.sqrt(2.0)) * z
        return std * rng.standard_normal((rows, cols))

    d = dims.d_list
    m_count = dims.n_kernels
    factors = []
    coeffs = []
    for _ in range(m_count):
        row = [
            draw(d[q - 1], d[q], 1.0 / np.sqrt(d[q] * m_count))
            for q in range(1, dims.depth + 1)
        ]
        factors.append(row)
        b = draw(dims.n_landmarks, dims.n_cols, 1.0 / np.sqrt(dims.n_landmarks * m_count))
        b += (1.0 - b.sum(axis=0)) / dims.n_landmarks  # affine feasibility
        coeffs.append(b)
    if kernels is None:
        eye = np.eye(dims.n_landmarks, dtype=dtype)
        kernels = [eye.copy() for _ in range(m_count)]
    else:
        if len(kernels) != m_count:
            raise InputError(f"expected {m_count} kernel matrices, got {len(kernels)}")
        kernels = [np.asarray(k) for k in kernels]
    return FactorModel(dims=dims, factors=factors, kernels=kernels, coeffs=coeffs)


def reduce_to_mmf(model: FactorModel) -> FactorModel:
    """Drop the latent-geometry machinery: identity kernels, no affine or
    sparsity handling in the solver.  Dimensions (and the unknown count) are
    unchanged."""
    out = model.copy()
    eye = np.eye(model.dims.n_landmarks, dtype=model.kernels[0].dtype)
    out.kernels = [eye.copy() for _ in range(model.dims.n_kernels)]
    out.mmf = True
    return out


def save_model(model: FactorModel, path) -> None:
    """Checkpoint format: one .npz with a JSON header entry ``meta`` plus one
    array per block (``D_{m}_{q}``, ``K_{m}``, ``B_{m}``)."""
    dims = model.dims
    meta = {
        "n_rows": dims.n_rows,
        "n_cols": dims.n_cols,
        "n_landmarks": dims.n_landmarks,
        "n_kernels": dims.n_kernels,
        "depth": dims.depth,
        "inner": list(dims.inner),
        "mmf": model.mmf,
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for m in range(dims.n_kernels):
        for q, d in enumerate(model.factors[m], start=1):
            arrays[f"D_{m}_{q}"] = d
        arrays[f"K_{m}"] = model.kernels[m]
        arrays[f"B_{m}"] = model.coeffs[m]
    np.savez(path, **arrays)


def load_model(path) -> FactorModel:
    data = np.load(path)
    meta = json.loads(bytes(data["meta"]).decode())
    dims = ModelDims(
        n_rows=meta["n_rows"],
        n_cols=meta["n_cols"],
        n_landmarks=meta["n_landmarks"],
        n_kernels=meta["n_kernels"],
        depth=meta["depth"],
        inner=tuple(meta["inner"]),
    )
    factors = [
        [data[f"D_{m}_{q}"] for q in range(1, dims.depth + 1)]
        for m in range(dims.n_kernels)
    ]
    kernels = [data[f"K_{m}"] for m in range(dims.n_kernels)]
    coeffs = [data[f"B_{m}"] for m in range(dims.n_kernels)]
    return FactorModel(dims=dims, factors=factors, kernels=kernels, coeffs=coeffs,
                       mmf=bool(meta["mmf"]))


def with_config(config: SolverConfig, **updates) -> SolverConfig:
    return replace(config, **updates)
