"""Covariance construction, estimation, square roots, serialization."""

import numpy as np
import pytest

import transcorr as tc
from transcorr.blocks import BlockPartition
from transcorr.errors import DataError, NotPositiveDefiniteError, StateError
from transcorr.ld import read_covariance, write_covariance


def test_ar_zero_is_identity():
    cov = tc.build_ar_covariance(0.0, 3)
    np.testing.assert_array_equal(cov.block_values[0], np.eye(3))


def test_ar_half_definition():
    cov = tc.build_ar_covariance(0.5, 2)
    np.testing.assert_allclose(cov.block_values[0], [[1, 0.5], [0.5, 1]])


def test_ar_large_is_positive_definite():
    cov = tc.build_ar_covariance(0.9, 200)
    ev = cov.eigenvalues()
    assert ev.min() > 0
    cov.validate_spd()


def test_ar_domain_errors():
    with pytest.raises(DataError):
        tc.build_ar_covariance(1.0, 5)
    with pytest.raises(DataError):
        tc.build_ar_covariance(-0.1, 5)
    with pytest.raises(DataError):
        tc.build_ar_covariance(0.5, 0)


def test_block_assembly_identity():
    part = BlockPartition.from_sizes([1, 1])
    cov = tc.build_block_covariance(part, [np.array([[1.0]]), np.array([[1.0]])])
    np.testing.assert_array_equal(cov.to_dense(), np.eye(2))


def test_block_assembly_paper_scale_dims():
    # 7 blocks of 2000 variants each: stored blockwise, never densified
    part = BlockPartition.from_sizes([2000] * 7)
    blocks = [tc.build_ar_covariance(0.5, 2000).block_values[0]] * 7
    cov = tc.build_block_covariance(part, blocks)
    assert cov.dim == 14000
    assert len(cov.partition) == 7
    with pytest.raises(DataError):
        cov.to_dense()


def test_cross_block_entries_are_zero():
    part = BlockPartition.from_sizes([3, 2])
    cov = tc.build_block_covariance(part, [
        tc.build_ar_covariance(0.8, 3), tc.build_ar_covariance(0.2, 2)])
    dense = cov.to_dense()
    np.testing.assert_array_equal(dense[:3, 3:], np.zeros((3, 2)))
    np.testing.assert_array_equal(dense[3:, :3], np.zeros((2, 3)))


def test_block_assembly_shape_error():
    part = BlockPartition.from_sizes([3, 2])
    with pytest.raises(DataError):
        tc.build_block_covariance(part, [np.eye(3), np.eye(3)])


def test_estimate_covariance_identical_columns():
    values = np.repeat(np.random.default_rng(0).standard_normal((50, 1)), 2, axis=1)
    geno = tc.GenotypeMatrix(values=tc.simulate.standardize_columns(values),
                             maf=np.full(2, 0.2), standardized=True)
    est = tc.estimate_covariance(geno)
    assert abs(est.block_values[0][0, 1] - 1.0) < 1e-12
    assert est.source == "sample-estimate"


def test_estimate_covariance_concentrates(mixed_blocks):
    x_cov, _ = mixed_blocks
    eye = tc.build_block_covariance(
        BlockPartition.single(50), [np.eye(50)])
    geno = tc.sample_genotypes(5000, 50, 0.05, 0.45, eye, seed=3)
    est = tc.estimate_covariance(geno)
    off = est.block_values[0] - np.eye(50)
    assert np.abs(off).max() < 0.08


def test_estimate_covariance_small_n_flagged_singular():
    values = np.random.default_rng(1).standard_normal((2, 3))
    geno = tc.GenotypeMatrix(values=tc.simulate.standardize_columns(values),
                             maf=np.full(3, 0.2), standardized=True)
    est = tc.estimate_covariance(geno)
    assert est.singular
    # rank at most n: smallest eigenvalue numerically zero
    assert est.eigenvalues().min() < 1e-10


def test_estimate_covariance_requires_standardized():
    geno = tc.GenotypeMatrix(values=np.random.default_rng(2).standard_normal((10, 3)),
                             maf=np.full(3, 0.2), standardized=False)
    with pytest.raises(StateError):
        tc.estimate_covariance(geno)


def test_estimate_covariance_blockwise_restriction():
    part = BlockPartition.from_sizes([2, 2])
    eye = tc.build_block_covariance(part, [np.eye(2), np.eye(2)])
    geno = tc.sample_genotypes(200, 4, 0.1, 0.4, eye, seed=9)
    est = tc.estimate_covariance(geno, part)
    assert est.partition.ranges == part.ranges
    # diagonal exactly one under divisor-n convention
    np.testing.assert_allclose(est.diagonal(), np.ones(4), atol=1e-12)


def test_estimate_covariance_error_decreases_with_n():
    cov = tc.build_ar_covariance(0.5, 50)
    dense = cov.to_dense()
    hits = 0
    for seed in range(100):
        geno = tc.sample_genotypes(10000, 50, 0.05, 0.45, cov, seed=seed)
        est = tc.estimate_covariance(geno)
        if np.abs(est.block_values[0] - dense).max() < 0.06:
            hits += 1
    assert hits >= 95


def test_matrix_sqrt_scaled_identity():
    part = BlockPartition.single(3)
    cov = tc.CovarianceMatrix(part, [4.0 * np.eye(3)], source="synthetic-block")
    root = tc.matrix_sqrt(cov)
    np.testing.assert_allclose(root.block_values[0], 2.0 * np.eye(3), atol=1e-12)


def test_matrix_sqrt_multiply_back():
    cov = tc.CovarianceMatrix(BlockPartition.single(2), [np.array([[2.0, 1.0], [1.0, 2.0]])],
                              source="synthetic-block")
    s = tc.matrix_sqrt(cov).block_values[0]
    np.testing.assert_allclose(s @ s, cov.block_values[0], atol=1e-10)


def test_matrix_sqrt_blockwise_equals_dense(rng):
    part = BlockPartition.from_sizes([4, 6])
    blocks = []
    for size in part.sizes:
        a = rng.standard_normal((size, size + 3))
        blocks.append(a @ a.T / (size + 3))
    cov = tc.build_block_covariance(part, blocks)
    dense_root = tc.matrix_sqrt(
        tc.CovarianceMatrix(BlockPartition.single(10), [cov.to_dense()],
                            source="synthetic-block"))
    np.testing.assert_allclose(tc.matrix_sqrt(cov).to_dense(),
                               dense_root.to_dense(), atol=1e-10)


def test_matrix_sqrt_random_psd_relative_error(rng):
    for _ in range(100):
        size = int(rng.integers(2, 100))
        a = rng.standard_normal((size, size + 5))
        block = a @ a.T / (size + 5)
        cov = tc.CovarianceMatrix(BlockPartition.single(size), [block],
                                  source="synthetic-block")
        s = tc.matrix_sqrt(cov).block_values[0]
        err = np.linalg.norm(s @ s - block) / np.linalg.norm(block)
        assert err < 1e-8


def test_matrix_sqrt_rejects_indefinite():
    block = np.array([[1.0, 0.0], [0.0, -0.5]])
    cov = tc.CovarianceMatrix(BlockPartition.single(2), [block],
                              source="sample-estimate")
    with pytest.raises(NotPositiveDefiniteError):
        tc.matrix_sqrt(cov)


def test_matrix_sqrt_clips_noise_negatives():
    # eigenvalue at -1e-12 * trace/p is inside the clipping band
    eps = -1e-12
    block = np.diag([1.0, eps])
    cov = tc.CovarianceMatrix(BlockPartition.single(2), [block],
                              source="sample-estimate")
    s = tc.matrix_sqrt(cov).block_values[0]
    np.testing.assert_allclose(s @ s, np.diag([1.0, 0.0]), atol=1e-10)


def test_synthetic_conditioning_bound(mixed_blocks):
    x_cov, z_cov = mixed_blocks
    for cov in (x_cov, z_cov):
        ev = cov.eigenvalues()
        assert ev.min() > 0
        assert ev.max() / ev.min() <= 1e6


def test_covariance_file_roundtrip(tmp_path, mixed_blocks):
    x_cov, _ = mixed_blocks
    path = tmp_path / "cov.csv"
    write_covariance(x_cov, path)
    back = read_covariance(path)
    assert back.partition.ranges == x_cov.partition.ranges
    for a, b in zip(back.block_values, x_cov.block_values):
        np.testing.assert_array_equal(a, b)


def test_covariance_file_bad_header(tmp_path):
    path = tmp_path / "cov.csv"
    path.write_text("not a header\n")
    with pytest.raises(DataError):
        read_covariance(path)


def test_symmetry_enforced():
    bad = np.array([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(DataError):
        tc.CovarianceMatrix(BlockPartition.single(2), [bad], source="synthetic-block")
