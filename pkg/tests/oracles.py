"""Dense brute-force oracles for the sub-task solvers.

Every routine here re-derives the optimality system from scratch (explicit
Kronecker matrices, bordered KKT systems, affine residual stacking) so the
fast block implementations are checked against an independent path.
"""

import numpy as np

from mkimpute.mri import dft_temporal, ifft2_frames


def _chain(mats):
    out = mats[0]
    for a in mats[1:]:
        out = out @ a
    return out


def dense_x_oracle(Y, mask, target, X_prev, L_sob, delta, lam_l, tau):
    """Solve the consistency-constrained smooth X sub-task by building the
    restricted Kronecker system explicitly (column-major vectorization)."""
    n, t = Y.shape
    ddt = delta @ delta.T
    A_full = (1.0 + tau) * np.eye(n * t) + lam_l * np.kron(ddt, L_sob)
    free = ~mask
    fidx = np.where(free.ravel(order="F"))[0]
    S_y = np.where(mask, Y, 0)
    rhs = (-lam_l * (L_sob @ S_y @ ddt) + target + tau * X_prev).ravel(order="F")
    u = np.linalg.solve(A_full[np.ix_(fidx, fidx)], rhs[fidx])
    out = S_y.astype(np.result_type(S_y.dtype, u.dtype)).ravel(order="F")
    out[fidx] = u
    return out.reshape(Y.shape, order="F")


def _supermatrix_wings(model, q_index):
    """Left/right supermatrices around layer q_index, built from scratch."""
    dims = model.dims
    lefts, rights = [], []
    for m in range(dims.n_kernels):
        row = model.factors[m]
        lefts.append(_chain(row[:q_index]) if q_index > 0 else None)
        rights.append(_chain(list(row[q_index + 1:]) + [model.kernels[m], model.coeffs[m]]))
    if q_index == 0:
        L_sup = np.eye(dims.n_rows, dtype=model.coeffs[0].dtype)
    else:
        L_sup = np.concatenate(lefts, axis=1)
    R_sup = np.concatenate(rights, axis=0)
    return L_sup, R_sup


def dense_d_oracle(q_index, X_hat, model, lam, tau):
    """Support-restricted normal equations of the factor sub-task, assembled
    as one explicit Kronecker system over the supermatrix unknown."""
    dims = model.dims
    M = dims.n_kernels
    L_sup, R_sup = _supermatrix_wings(model, q_index)
    blocks = [model.factors[m][q_index] for m in range(M)]
    p, r = blocks[0].shape
    if q_index == 0:
        rows, cols = dims.n_rows, r * M
        support = np.ones((rows, cols), dtype=bool)
        D_hat = np.concatenate(blocks, axis=1)
    else:
        rows, cols = p * M, r * M
        support = np.zeros((rows, cols), dtype=bool)
        D_hat = np.zeros((rows, cols), dtype=blocks[0].dtype)
        for m in range(M):
            support[m * p:(m + 1) * p, m * r:(m + 1) * r] = True
            D_hat[m * p:(m + 1) * p, m * r:(m + 1) * r] = blocks[m]
    G = L_sup.conj().T @ L_sup
    H = R_sup @ R_sup.conj().T
    A_full = np.kron(H.T, G) + (lam + tau) * np.eye(rows * cols)
    b_full = (L_sup.conj().T @ X_hat @ R_sup.conj().T + tau * D_hat).ravel(order="F")
    sidx = np.where(support.ravel(order="F"))[0]
    u = np.linalg.solve(A_full[np.ix_(sidx, sidx)], b_full[sidx])
    D = np.zeros(rows * cols, dtype=u.dtype)
    D[sidx] = u
    D = D.reshape(rows, cols, order="F")
    if q_index == 0:
        return [D[:, m * r:(m + 1) * r] for m in range(M)]
    return [D[m * p:(m + 1) * p, m * r:(m + 1) * r] for m in range(M)]


def dense_b_oracle(X_hat, model, tau):
    """Equality-constrained least squares (no l1 term): bordered KKT system
    solved densely, one column at a time."""
    dims = model.dims
    M, n_l = dims.n_kernels, dims.n_landmarks
    A = np.concatenate(
        [_chain(model.factors[m]) @ model.kernels[m] for m in range(M)], axis=1
    )
    B_hat = np.concatenate(model.coeffs, axis=0)
    G = A.conj().T @ A + tau * np.eye(M * n_l, dtype=A.dtype)
    E = np.zeros((M, M * n_l), dtype=A.dtype)
    for m in range(M):
        E[m, m * n_l:(m + 1) * n_l] = 1.0
    kkt = np.block([[G, E.conj().T], [E, np.zeros((M, M), dtype=A.dtype)]])
    rhs_top = A.conj().T @ X_hat + tau * B_hat
    out = np.empty_like(B_hat)
    for t in range(dims.n_cols):
        rhs = np.concatenate([rhs_top[:, t], np.ones(M, dtype=A.dtype)])
        sol = np.linalg.solve(kkt, rhs)
        out[:, t] = sol[: M * n_l]
    return out


def dense_dmri_x_oracle(Y, mask, target, X_prev, Z_hat, lam2, tau, frame_dims):
    """Quadratic minimization over the free k-space entries, done by stacking
    the affine residual map and solving one least-squares problem; uses the
    transforms only as black boxes."""
    i1, i2, i3 = frame_dims
    free = ~mask
    fidx = np.where(free.ravel(order="F"))[0]
    S_y = np.where(mask, Y, 0)

    def residual(u):
        K = S_y.ravel(order="F").astype(complex).copy()
        K[fidx] = K[fidx] + u
        X = ifft2_frames(K.reshape(Y.shape, order="F"), i1, i2)
        return np.concatenate([
            (X - target).ravel(),
            np.sqrt(lam2) * (Z_hat - dft_temporal(X)).ravel(),
            np.sqrt(tau) * (X - X_prev).ravel(),
        ])

    r0 = residual(np.zeros(len(fidx), dtype=complex))
    J = np.empty((len(r0), len(fidx)), dtype=complex)
    for j in range(len(fidx)):
        e = np.zeros(len(fidx), dtype=complex)
        e[j] = 1.0
        J[:, j] = residual(e) - r0
    u, *_ = np.linalg.lstsq(J, -r0, rcond=None)
    K = S_y.ravel(order="F").astype(complex).copy()
    K[fidx] = K[fidx] + u
    return ifft2_frames(K.reshape(Y.shape, order="F"), i1, i2)


def random_model(dims, seed, dtype=np.float64, kernel_scale=0.6):
    """Small random model with non-trivial kernels and feasible coefficients."""
    from mkimpute.model import init_factors

    model = init_factors(dims, seed, dtype)
    rng = np.random.default_rng(seed + 1000)
    n_l = dims.n_landmarks
    for m in range(dims.n_kernels):
        raw = rng.standard_normal((n_l, n_l))
        if np.issubdtype(np.dtype(dtype), np.complexfloating):
            raw = raw + 1j * rng.standard_normal((n_l, n_l))
        model.kernels[m] = np.eye(n_l, dtype=dtype) + kernel_scale * raw.astype(dtype)
    return model
