"""Block-diagonal LD covariance matrices: construction, estimation, square roots.

Matrices are stored blockwise (one dense symmetric array per partition range);
cross-block entries are structurally zero.  All moment and solve operations
downstream are blockwise-separable, so nothing ever materializes a large dense
matrix unless explicitly asked to.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockPartition
from .errors import DataError, NotPositiveDefiniteError, StateError

MAX_BLOCK_DIM = 5000   # dense per-block storage cap
SYMMETRY_RTOL = 1e-12

SOURCE_AR = "synthetic-AR"
SOURCE_BLOCK = "synthetic-block"
SOURCE_SAMPLE = "sample-estimate"
_SOURCES = (SOURCE_AR, SOURCE_BLOCK, SOURCE_SAMPLE)


@dataclass
class CovarianceMatrix:
    """Symmetric p x p covariance with block partition metadata.

    block_values holds one dense symmetric array per partition range; entries
    across distinct blocks are exactly zero by construction.  `singular`
    flags sample estimates whose rank is capped by the sample size.
    """

    partition: BlockPartition
    block_values: list[np.ndarray]
    source: str
    singular: bool = False
    _sqrt_blocks: list[np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.source not in _SOURCES:
            raise DataError(f"unknown covariance source {self.source!r}")
        if len(self.block_values) != len(self.partition):
            raise DataError("one dense array per partition range required")
        blocks = []
        for (size, arr) in zip(self.partition.sizes, self.block_values):
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != (size, size):
                raise DataError(f"block shape {arr.shape} does not match range size {size}")
            if size > MAX_BLOCK_DIM:
                raise DataError(f"block of size {size} exceeds dense cap {MAX_BLOCK_DIM}")
            scale = np.abs(arr).max()
            if scale > 0 and np.abs(arr - arr.T).max() > SYMMETRY_RTOL * scale:
                raise DataError("block is not symmetric within tolerance")
            blocks.append((arr + arr.T) / 2.0)
        self.block_values = blocks

    @property
    def dim(self) -> int:
        return self.partition.p

    @property
    def blocks(self) -> tuple[tuple[int, int], ...]:
        return self.partition.ranges

    def trace(self) -> float:
        return float(sum(np.trace(b) for b in self.block_values))

    def diagonal(self) -> np.ndarray:
        return np.concatenate([np.diag(b) for b in self.block_values])

    def to_dense(self) -> np.ndarray:
        if self.dim > 8000:
            raise DataError(f"refusing to materialize {self.dim}x{self.dim} dense matrix")
        out = np.zeros((self.dim, self.dim))
        for sl, b in zip(self.partition.slices(), self.block_values):
            out[sl, sl] = b
        return out

    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([np.linalg.eigvalsh(b) for b in self.block_values])

    def validate_spd(self, max_condition: float = 1e6) -> None:
        """Assert positive definiteness and bounded conditioning (synthetic sources)."""
        ev = self.eigenvalues()
        if ev.min() <= 0:
            raise NotPositiveDefiniteError(f"min eigenvalue {ev.min():.3e} <= 0")
        if ev.max() / ev.min() > max_condition:
            raise NotPositiveDefiniteError(
                f"condition number {ev.max() / ev.min():.3e} exceeds {max_condition:.1e}"
            )

    def sqrt_blocks(self) -> list[np.ndarray]:
        """Symmetric PSD square root of each block (cached)."""
        if self._sqrt_blocks is None:
            self._sqrt_blocks = [_psd_sqrt(b) for b in self.block_values]
        return self._sqrt_blocks


def _psd_sqrt(block: np.ndarray) -> np.ndarray:
    """Eigendecomposition square root with noise-level clipping.

    Eigenvalues in [-1e-10 * tr/p, 0] are clipped to zero; anything below
    that is treated as genuinely indefinite and rejected.
    """
    vals, vecs = np.linalg.eigh(block)
    floor = -1e-10 * np.trace(block) / block.shape[0]
    if vals.min() < floor:
        raise NotPositiveDefiniteError(
            f"eigenvalue {vals.min():.6e} below PSD tolerance {floor:.6e}"
        )
    vals = np.clip(vals, 0.0, None)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    return (root + root.T) / 2.0


def build_ar_covariance(rho: float, p: int) -> CovarianceMatrix:
    """Autocorrelation covariance: entry (i, j) = rho^|i-j|, a single block."""
    if not 0.0 <= rho < 1.0:
        raise DataError(f"rho must lie in [0, 1), got {rho}")
    if p < 1:
        raise DataError(f"p must be positive, got {p}")
    idx = np.arange(p)
    block = rho ** np.abs(idx[:, None] - idx[None, :])
    return CovarianceMatrix(BlockPartition.single(p), [block], source=SOURCE_AR)


def build_block_covariance(partition: BlockPartition, per_block) -> CovarianceMatrix:
    """Assemble a block-diagonal covariance from per-block matrices.

    Each element of per_block may be a CovarianceMatrix (single block) or a
    dense symmetric array matching the corresponding range size.
    """
    if len(per_block) != len(partition):
        raise DataError(
            f"{len(per_block)} blocks supplied for {len(partition)} partition ranges"
        )
    arrays = []
    for size, item in zip(partition.sizes, per_block):
        if isinstance(item, CovarianceMatrix):
            if len(item.partition) != 1:
                raise DataError("per-block covariances must be single-block")
            arr = item.block_values[0]
        else:
            arr = np.asarray(item, dtype=np.float64)
        if arr.shape != (size, size):
            raise DataError(f"block shape {arr.shape} does not match range size {size}")
        arrays.append(arr)
    return CovarianceMatrix(partition, arrays, source=SOURCE_BLOCK)


def estimate_covariance(geno, partition: BlockPartition | None = None) -> CovarianceMatrix:
    """Sample covariance n^-1 X'X of standardized genotypes.

    With a partition, only within-block entries are computed (entries outside
    blocks are structurally zero); otherwise a single dense block is returned.
    Divisor is n, matching the summary-statistic convention beta_hat = X'y/n,
    so the diagonal of a standardized panel is exactly 1.
    """
    if not geno.standardized:
        raise StateError("estimate_covariance requires standardized genotypes")
    n = geno.n
    if n < 2:
        raise DataError(f"need at least 2 samples, got {n}")
    if partition is None:
        partition = BlockPartition.single(geno.p)
    if partition.p != geno.p:
        raise DataError(f"partition covers 1..{partition.p} but panel has p={geno.p}")
    blocks = []
    for sl in partition.slices():
        cols = geno.values[:, sl]
        blocks.append(cols.T @ cols / n)
    singular = n < max(partition.sizes)
    return CovarianceMatrix(partition, blocks, source=SOURCE_SAMPLE, singular=singular)


def matrix_sqrt(cov: CovarianceMatrix) -> CovarianceMatrix:
    """Symmetric PSD square root, computed independently per block."""
    return CovarianceMatrix(
        cov.partition, [b.copy() for b in cov.sqrt_blocks()], source=cov.source,
        singular=cov.singular,
    )


def write_covariance(cov: CovarianceMatrix, path) -> None:
    """Export: header `p=<int> blocks=<int>`, then blockwise dense rows as CSV."""
    with open(path, "wt", encoding="utf-8", newline="") as fh:
        fh.write(f"p={cov.dim} blocks={len(cov.partition)}\n")
        writer = csv.writer(fh)
        for (start, end), arr in zip(cov.blocks, cov.block_values):
            writer.writerow([start, end])
            for row in arr:
                writer.writerow([format(v, ".17g") for v in row])


def read_covariance(path, source: str = SOURCE_SAMPLE) -> CovarianceMatrix:
    with open(path, "rt", encoding="utf-8") as fh:
        header = fh.readline().strip()
        try:
            fields = dict(part.split("=") for part in header.split())
            p, n_blocks = int(fields["p"]), int(fields["blocks"])
        except (ValueError, KeyError) as exc:
            raise DataError(f"{path}: bad covariance header {header!r}") from exc
        reader = csv.reader(fh)
        ranges, arrays = [], []
        for _ in range(n_blocks):
            try:
                start, end = (int(v) for v in next(reader))
            except StopIteration as exc:
                raise DataError(f"{path}: truncated covariance file") from exc
            size = end - start + 1
            rows = [next(reader) for _ in range(size)]
            ranges.append((start, end))
            arrays.append(np.array(rows, dtype=np.float64))
    partition = BlockPartition(tuple(ranges), label=str(path))
    if partition.p != p:
        raise DataError(f"{path}: blocks cover 1..{partition.p}, header says p={p}")
    return CovarianceMatrix(partition, arrays, source=source)
