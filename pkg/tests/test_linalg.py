import numpy as np
import pytest

from mfcp import linalg

from helpers import jacobi_eigenvalues


def test_svd_identity():
    res = linalg.thin_svd(np.eye(2))
    assert np.allclose(res.sigma, [1.0, 1.0], atol=0)


def test_svd_rank_one_outer_product():
    u = np.array([2.0, 2.0, 1.0])  # norm 3
    v = np.array([0.6, 0.8])  # norm 1
    res = linalg.thin_svd(np.outer(u, v))
    assert abs(res.sigma[0] - 3.0) < 1e-12
    assert abs(res.sigma[1]) < 1e-12


def test_svd_matches_jacobi_eigen_oracle():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(5, 4))
    evals = jacobi_eigenvalues(a.T @ a)
    sigma = linalg.thin_svd(a).sigma
    assert np.all(np.abs(sigma**2 - evals) <= 1e-8 * np.abs(evals))


def test_svd_sign_convention_and_determinism():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(8, 6))
    res = linalg.thin_svd(a)
    for k in range(res.sigma.size):
        j = np.argmax(np.abs(res.u[:, k]))
        assert res.u[j, k] > 0
    res2 = linalg.thin_svd(a)
    assert np.array_equal(res.u, res2.u)
    assert np.array_equal(res.vt, res2.vt)


def test_svd_roundtrip_orthonormality_energy():
    rng = np.random.default_rng(3)
    for _ in range(10):
        d, n = rng.integers(2, 65, size=2)
        a = rng.normal(size=(d, n))
        res = linalg.thin_svd(a)
        r = min(d, n)
        assert res.sigma.size == r
        assert np.all(np.diff(res.sigma) <= 0)
        recon = res.reconstruct()
        assert np.linalg.norm(a - recon) <= 1e-8 * np.linalg.norm(a)
        assert np.allclose(res.u.T @ res.u, np.eye(r), atol=1e-8)
        assert np.allclose(res.vt @ res.vt.T, np.eye(r), atol=1e-8)
        # energy identity
        fro2 = np.sum(a * a)
        assert abs(np.sum(res.sigma**2) - fro2) <= 1e-10 * fro2


def test_svd_rejects_bad_input():
    with pytest.raises(ValueError):
        linalg.thin_svd(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        linalg.thin_svd(np.zeros((0, 3)))


def test_pairwise_two_points():
    d = linalg.pairwise_sq_dist(np.array([[0.0], [3.0]]))
    assert np.array_equal(d, [[0.0, 9.0], [9.0, 0.0]])


def test_pairwise_single_point():
    assert np.array_equal(linalg.pairwise_sq_dist([[1.0, 2.0, 3.0]]), [[0.0]])


def test_pairwise_matches_double_loop_exactly():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(10, 3))
    d = linalg.pairwise_sq_dist(pts)
    for i in range(10):
        for j in range(10):
            expected = 0.0
            if i != j:
                for k in range(3):
                    expected += (pts[i, k] - pts[j, k]) ** 2
            assert d[i, j] == expected
    assert np.array_equal(d, d.T)


def test_pairwise_triangle_inequality():
    rng = np.random.default_rng(13)
    pts = rng.normal(size=(12, 3))
    dist = np.sqrt(linalg.pairwise_sq_dist(pts))
    for _ in range(200):
        i, j, k = rng.integers(0, 12, size=3)
        assert dist[i, j] <= dist[i, k] + dist[k, j] + 1e-12


def test_pca_single_direction():
    pts = np.column_stack([np.zeros(5), np.linspace(-2, 2, 5), np.zeros(5)])
    _, rot = linalg.pca_axes(pts)
    assert abs(abs(rot[1, 0]) - 1.0) < 1e-12


def test_pca_planar_normal():
    # equilateral triangle in the z=1 plane: third axis is the plane normal
    ang = 2.0 * np.pi * np.arange(3) / 3.0
    pts = np.column_stack([np.cos(ang), np.sin(ang), np.ones(3)])
    _, rot = linalg.pca_axes(pts)
    assert abs(abs(rot[2, 2]) - 1.0) < 1e-12
    assert np.linalg.det(rot) > 0


def test_pca_covariance_reconstruction():
    rng = np.random.default_rng(21)
    pts = rng.normal(size=(50, 3)) @ np.diag([3.0, 1.0, 0.2])
    centroid, rot = linalg.pca_axes(pts)
    centered = pts - centroid
    evals = ((centered @ rot) ** 2).sum(axis=0) / (len(pts) - 1)
    cov = (centered.T @ centered) / (len(pts) - 1)
    rebuilt = rot @ np.diag(evals) @ rot.T
    assert np.linalg.norm(rebuilt - cov) <= 1e-8 * np.linalg.norm(cov)


def test_pca_degenerate_warns_identity():
    pts = np.ones((4, 3))
    with pytest.warns(UserWarning):
        _, rot = linalg.pca_axes(pts)
    assert np.array_equal(rot, np.eye(3))
