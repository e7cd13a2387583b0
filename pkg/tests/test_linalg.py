import mpmath
import numpy as np
import pytest

from semlink import linalg
from semlink.errors import DimensionMismatch, IllConditioned
from semlink.rng import substream


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_hermitian_1x1_conjugate():
    out = linalg.hermitian(np.array([[1j]]))
    assert out == np.array([[-1j]])


def test_hermitian_identity_fixed_point():
    eye = np.eye(2, dtype=complex)
    assert np.array_equal(linalg.hermitian(eye), eye)


def test_hermitian_involution_elementwise():
    rng = substream(11, "hermitian")
    a = crandn(rng, 3, 2)
    back = linalg.hermitian(linalg.hermitian(a))
    for i in range(3):
        for j in range(2):
            assert back[i, j] == a[i, j]


def test_matmul_identity():
    rng = substream(12, "matmul-id")
    a = crandn(rng, 3, 3)
    assert np.allclose(linalg.matmul(np.eye(3, dtype=complex), a), a, atol=1e-15)


def test_matmul_hand_sum():
    out = linalg.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0], [1.0]]))
    assert np.array_equal(out, np.array([[3.0], [7.0]]))


def test_matmul_vs_naive_triple_loop():
    rng = substream(13, "matmul-oracle")
    a = crandn(rng, 4, 3)
    b = crandn(rng, 3, 2)
    expected = np.zeros((4, 2), dtype=complex)
    for i in range(4):
        for j in range(2):
            for k in range(3):
                expected[i, j] += a[i, k] * b[k, j]
    assert np.abs(linalg.matmul(a, b) - expected).max() <= 1e-12


def test_matmul_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        linalg.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_associativity():
    rng = substream(14, "matmul-assoc")
    for _ in range(20):
        a, b, c = crandn(rng, 3, 4), crandn(rng, 4, 5), crandn(rng, 5, 2)
        left = linalg.matmul(linalg.matmul(a, b), c)
        right = linalg.matmul(a, linalg.matmul(b, c))
        assert np.abs(left - right).max() <= 1e-10 * max(1.0, np.abs(left).max())


def test_solve_identity_system():
    rng = substream(15, "solve-id")
    b = crandn(rng, 3, 2)
    assert np.allclose(linalg.solve_hermitian_system(np.eye(3, dtype=complex), b), b)


def test_solve_diagonal():
    a = np.array([[2.0, 0.0], [0.0, 4.0]], dtype=complex)
    b = np.array([[2.0], [4.0]], dtype=complex)
    assert np.allclose(linalg.solve_hermitian_system(a, b), np.ones((2, 1)), atol=1e-14)


def test_solve_reconstruction_residual():
    rng = substream(16, "solve-recon")
    for _ in range(25):
        m = crandn(rng, 4, 4)
        a = linalg.hermitian(m) @ m + 0.1 * np.eye(4)
        b = crandn(rng, 4, 3)
        x = linalg.solve_hermitian_system(a, b)
        resid = np.linalg.norm(a @ x - b)
        assert resid <= 1e-8 * np.linalg.norm(b)


def test_solve_recovers_solution_up_to_cond_1e6():
    rng = substream(17, "solve-cond")
    for cond in (1e2, 1e4, 1e6):
        q, _ = np.linalg.qr(crandn(rng, 4, 4))
        eig = np.geomspace(1.0, 1.0 / cond, 4)
        a = q @ np.diag(eig) @ linalg.hermitian(q)
        a = (a + linalg.hermitian(a)) / 2
        x_true = crandn(rng, 4, 2)
        x = linalg.solve_hermitian_system(a, a @ x_true)
        assert np.linalg.norm(x - x_true) <= 1e-8 * np.linalg.norm(x_true) * cond


def test_solve_ill_conditioned_raises():
    a = np.diag([1.0, 1e-14]).astype(complex)
    with pytest.raises(IllConditioned):
        linalg.solve_hermitian_system(a, np.ones((2, 1), dtype=complex))


def test_solve_indefinite_raises():
    a = np.diag([1.0, -1.0]).astype(complex)
    with pytest.raises(IllConditioned):
        linalg.solve_hermitian_system(a, np.ones((2, 1), dtype=complex))


def test_sample_cn_zero_variance():
    out = linalg.sample_cn(substream(18, "cn0"), 3, 4, 0.0)
    assert np.array_equal(out, np.zeros((3, 4), dtype=complex))


def test_sample_cn_moments():
    out = linalg.sample_cn(substream(19, "cn-moments"), 100, 1000, 1.0)
    assert abs(out.mean()) <= 0.02
    assert 0.98 <= np.mean(np.abs(out) ** 2) <= 1.02


def test_sample_cn_deterministic():
    a = linalg.sample_cn(substream(20, "cn-det"), 5, 5, 2.0)
    b = linalg.sample_cn(substream(20, "cn-det"), 5, 5, 2.0)
    assert a.tobytes() == b.tobytes()


def test_row_l1_hand_case():
    assert np.allclose(linalg.row_l1_normalize(np.array([[1.0, 3.0]])), [[0.25, 0.75]])


def test_row_l1_zero_row_unchanged():
    assert np.array_equal(linalg.row_l1_normalize(np.zeros((1, 2))), np.zeros((1, 2)))


def test_row_l1_row_sums():
    rng = substream(21, "l1-rows")
    a = rng.random((5, 5))
    out = linalg.row_l1_normalize(a)
    assert np.abs(out.sum(axis=-1) - 1.0).max() <= 1e-12


def test_relu_hand_case():
    assert np.array_equal(linalg.elementwise(np.array([-1.0, 2.0]), "relu"), [0.0, 2.0])


def test_softmax_symmetry():
    assert np.allclose(linalg.elementwise(np.array([0.0, 0.0]), "softmax_row"), [0.5, 0.5])


def test_softmax_rows_sum_to_one():
    rng = substream(22, "softmax-rows")
    out = linalg.softmax_row(10 * rng.standard_normal((6, 9)))
    assert np.abs(out.sum(axis=-1) - 1.0).max() <= 1e-12


def test_tanh_vs_high_precision_reference():
    mpmath.mp.dps = 50
    pts = np.linspace(-3.0, 3.0, 20)
    ours = linalg.elementwise(pts, "tanh")
    for x, y in zip(pts, ours):
        assert abs(y - float(mpmath.tanh(mpmath.mpf(x)))) <= 1e-12


def test_elementwise_unknown_fn():
    with pytest.raises(ValueError):
        linalg.elementwise(np.ones(3), "gelu")
