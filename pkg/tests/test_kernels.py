import numpy as np
import pytest

from mkimpute.errors import InputError
from mkimpute.kernels import (
    KernelSpec,
    build_kernel_matrix,
    build_kernel_supermatrix,
    default_kernel_dictionary,
    eval_kernel,
    gaussian_spec,
)


def test_linear_complex_pair():
    val = eval_kernel(KernelSpec("linear"), np.array([1 + 1j]), np.array([2.0]))
    assert val == pytest.approx(2 - 2j)


def test_gaussian_zero_displacement():
    val = eval_kernel(KernelSpec("gaussian", gamma=0.5), [3.0, 4.0], [3.0, 4.0])
    assert val == pytest.approx(1.0)


def test_polynomial_by_hand():
    val = eval_kernel(KernelSpec("polynomial", degree=2, intercept=0.0), [1.0, 1.0], [1.0, 1.0])
    assert val == pytest.approx(4.0)


def test_gaussian_real_reduces_to_squared_distance():
    rng = np.random.default_rng(3)
    spec = KernelSpec("gaussian", gamma=0.7)
    for _ in range(20):
        a, b = rng.standard_normal(4), rng.standard_normal(4)
        expected = np.exp(-0.7 * np.sum((a - b) ** 2))
        assert eval_kernel(spec, a, b) == pytest.approx(expected)


def test_dimension_mismatch_rejected():
    with pytest.raises(InputError):
        eval_kernel(KernelSpec("linear"), [1.0, 2.0], [1.0])


def test_spec_validation():
    with pytest.raises(InputError):
        KernelSpec("gaussian", gamma=0.0)
    with pytest.raises(InputError):
        KernelSpec("polynomial", degree=0)
    with pytest.raises(InputError):
        KernelSpec("sinc")


def test_matrix_single_landmark():
    km = build_kernel_matrix(np.array([[1.5]]), gaussian_spec(0.4))
    assert km.entries.shape == (1, 1)
    assert km.entries[0, 0] == pytest.approx(1.0)


def test_matrix_linear_two_landmarks():
    km = build_kernel_matrix(np.array([[0.0, 1.0]]), KernelSpec("linear"))
    assert np.allclose(km.entries, [[0.0, 0.0], [0.0, 1.0]])


def test_matrix_gaussian_two_landmarks():
    km = build_kernel_matrix(np.array([[0.0, 1.0]]), KernelSpec("gaussian", gamma=1.0))
    e = np.exp(-1.0)
    assert np.allclose(km.entries, [[1.0, e], [e, 1.0]])


def test_matrix_agrees_with_pairwise_eval():
    rng = np.random.default_rng(11)
    pts = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    for spec in (KernelSpec("linear"), KernelSpec("gaussian", gamma=0.3),
                 KernelSpec("polynomial", degree=3, intercept=0.5 + 0.1j)):
        km = build_kernel_matrix(pts, spec)
        for i in range(5):
            for j in range(5):
                assert km.entries[i, j] == pytest.approx(
                    eval_kernel(spec, pts[:, i], pts[:, j]), abs=1e-10
                )


@pytest.mark.parametrize("spec", [
    KernelSpec("linear"),
    KernelSpec("gaussian", gamma=0.9),
    KernelSpec("polynomial", degree=2, intercept=0.3),
])
def test_symmetry_on_real_inputs(spec):
    rng = np.random.default_rng(5)
    for _ in range(25):
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        assert eval_kernel(spec, a, b) == pytest.approx(eval_kernel(spec, b, a))


def test_linear_matrix_hermitian_on_complex_landmarks():
    rng = np.random.default_rng(21)
    pts = rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6))
    km = build_kernel_matrix(pts, KernelSpec("linear"))
    assert np.allclose(km.entries, km.entries.conj().T)


def test_gaussian_matrix_psd_on_real_landmarks():
    rng = np.random.default_rng(9)
    for trial in range(4):
        pts = rng.standard_normal((4, 6 + trial))
        km = build_kernel_matrix(pts, KernelSpec("gaussian", gamma=0.5 + trial))
        eigs = np.linalg.eigvalsh(km.entries.real)
        assert eigs.min() >= -1e-10


def test_supermatrix_single_block_unchanged():
    km = build_kernel_matrix(np.array([[0.0, 1.0]]), KernelSpec("gaussian", gamma=1.0))
    sup = build_kernel_supermatrix([km])
    assert np.array_equal(sup, km.entries)


def test_supermatrix_two_blocks():
    from mkimpute.kernels import KernelMatrix
    k1 = KernelMatrix(np.array([[1.0]]), KernelSpec("linear"))
    k2 = KernelMatrix(np.array([[2.0]]), KernelSpec("linear"))
    sup = build_kernel_supermatrix([k1, k2])
    assert np.array_equal(sup, [[1.0, 0.0], [0.0, 2.0]])


def test_supermatrix_support_count():
    rng = np.random.default_rng(2)
    n_l, m = 70, 7
    mats = [build_kernel_matrix(rng.standard_normal((3, n_l)),
                                KernelSpec("gaussian", gamma=0.2)) for _ in range(m)]
    sup = build_kernel_supermatrix(mats)
    assert sup.shape == (m * n_l, m * n_l)
    off_block = np.ones_like(sup, dtype=bool)
    for i in range(m):
        off_block[i * n_l:(i + 1) * n_l, i * n_l:(i + 1) * n_l] = False
    assert np.all(sup[off_block] == 0.0)
    assert np.count_nonzero(~off_block) == m * n_l * n_l


def test_supermatrix_mixed_sizes_rejected():
    from mkimpute.kernels import KernelMatrix
    k1 = KernelMatrix(np.eye(2), KernelSpec("linear"))
    k2 = KernelMatrix(np.eye(3), KernelSpec("linear"))
    with pytest.raises(InputError):
        build_kernel_supermatrix([k1, k2])


def test_default_dictionary_layout():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((4, 10))
    specs = default_kernel_dictionary(pts)
    assert len(specs) == 7
    assert [s.kind for s in specs[:3]] == ["gaussian"] * 3
    assert specs[0].gamma == pytest.approx(1.0 / (2 * 0.2**2))
    assert [s.degree for s in specs[3:]] == [1, 2, 3, 4]
    assert specs[4].intercept == pytest.approx(complex(pts.mean()))
