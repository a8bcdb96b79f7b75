import numpy as np
import pytest

from spreadsense.errors import InvalidArgument_Error
from spreadsense.operators import dot_test
from spreadsense.sparsity import (BASIS_KINDS, SynthesisOp, analyze, divergence, gradient, hard_threshold,
                                  make_basis, synthesize, tv_norm)


def _crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _haar_matrix(n):
    """orthonormal periodic Haar synthesis matrix, columns ordered [A_J, D_J, ..., D_1]"""
    cols = [np.ones(n) / np.sqrt(n)]
    for level in range(int(np.log2(n)), 0, -1):
        width = 2 ** level
        for start in range(0, n, width):
            v = np.zeros(n)
            v[start:start + width // 2] = 1
            v[start + width // 2:start + width] = -1
            cols.append(v / np.sqrt(width))
    return np.array(cols).T


def test_dirac_identity(rng):
    b = make_basis('dirac', 16)
    a = _crandn(rng, 16)
    np.testing.assert_array_equal(synthesize(b, a), a)


def test_haar_two_points():
    np.testing.assert_allclose(synthesize(make_basis('haar', 2), [1, 0]), [1 / np.sqrt(2), 1 / np.sqrt(2)])


@pytest.mark.parametrize("kind", BASIS_KINDS)
@pytest.mark.parametrize("shape", [(16,), (8, 4), (4, 4, 2)])
def test_round_trip_and_isometry(rng, kind, shape):
    b = make_basis(kind, shape)
    a = _crandn(rng, shape)
    x = synthesize(b, a)
    np.testing.assert_allclose(analyze(b, x), a, atol=1e-12)
    assert np.linalg.norm(analyze(b, a)) == pytest.approx(np.linalg.norm(a), rel=1e-12)
    assert dot_test(SynthesisOp(b)) < 1e-10


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_haar_matches_explicit_basis(rng, n):
    x = _crandn(rng, n)
    np.testing.assert_allclose(analyze(make_basis('haar', n), x), _haar_matrix(n).T @ x, atol=1e-12)


def test_haar_partial_depth(rng):
    b = make_basis('haar', 24, depth=3)
    x = _crandn(rng, 24)
    np.testing.assert_allclose(synthesize(b, analyze(b, x)), x, atol=1e-12)
    with pytest.raises(InvalidArgument_Error):
        make_basis('haar', 24)
    with pytest.raises(InvalidArgument_Error):
        make_basis('haar', 24, depth=4)


def test_size_mismatch():
    with pytest.raises(InvalidArgument_Error):
        analyze(make_basis('fourier', 8), np.zeros(7))
    with pytest.raises(InvalidArgument_Error):
        make_basis('curvelet', 8)


def test_hard_threshold():
    a = np.array([3., -5., 1.])
    np.testing.assert_array_equal(hard_threshold(a, 3), a)
    np.testing.assert_array_equal(hard_threshold(a, 1), [0, -5, 0])
    np.testing.assert_array_equal(hard_threshold(np.array([2., 2., 0.]), 1), [2, 0, 0])
    assert np.count_nonzero(hard_threshold(np.array([1., 0., 0., 2.]), 3)) == 2
    with pytest.raises(InvalidArgument_Error):
        hard_threshold(a, 0)
    with pytest.raises(InvalidArgument_Error):
        hard_threshold(a, 4)


def test_hard_threshold_keeps_exactly_K(rng):
    a = _crandn(rng, 64)
    assert np.count_nonzero(hard_threshold(a, 10)) == 10


def test_gradient_examples():
    np.testing.assert_array_equal(gradient(np.array([0., 1., 2., 3.]))[0], [1, 1, 1, 0])
    assert not np.any(gradient(np.full((5, 4), 2 + 1j)))


@pytest.mark.parametrize("shape", [(9,), (6, 7), (4, 5, 3)])
def test_divergence_is_negative_adjoint(rng, shape):
    u = _crandn(rng, shape)
    v = _crandn(rng, (len(shape),) + shape)
    lhs = np.vdot(v, gradient(u))
    rhs = -np.vdot(divergence(v), u)
    assert abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v)) < 1e-10


def test_tv_norm_examples(rng):
    assert tv_norm(np.full((6, 6), 1 - 2j)) == 0.
    img = np.zeros((5, 8))
    img[:, 4:] = 3.
    assert tv_norm(img) == pytest.approx(5 * 3.)
    x = _crandn(rng, (7, 6))
    assert tv_norm(x) >= 0
    assert tv_norm((2 - 1j) * x) == pytest.approx(abs(2 - 1j) * tv_norm(x))
    assert tv_norm(x + (3 + 4j)) == pytest.approx(tv_norm(x))
