"""Spectral-moment functionals of LD matrices and their sample debiasing.

All quantities are normalized traces tr(.)/p of products of per-population
covariances, aggregated blockwise.  Sample versions are debiased with the
closed-form moment links between a covariance and its n-sample estimate:

    m1_hat = m1
    m2_hat = m2 + w * m1^2          (w = p/n of the estimated submatrix)
    m3_hat = m3 + 3w * m1 * m2 + w^2 * m1^3

and, for the mixed trace with an independent second-population estimate,

    tr_hat(Sx^2 Sz) ~= tr(Sx^2 Sz) + tr(Sx Sz) * tr(Sx) / n.

Only the first-population side is corrected; the second-population estimate
enters as a plug-in, so its own finite-sample noise is not removed.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataError, SmallSampleWarning
from .ld import CovarianceMatrix

PROVENANCE_EXACT = "population-exact"
PROVENANCE_SAMPLE = "sample-debiased"

MOMENTS_CSV_HEADER = "b1_xz,b1_x2z,b1_sqrtxz,b2_x,b3_x,b2_z,p,provenance"


@dataclass
class MomentEstimates:
    """The five trace functionals driving every correction formula."""

    b1_xz: float        # tr(Sx Sz) / p
    b1_x2z: float       # tr(Sx^2 Sz) / p
    b1_sqrtxz: float    # tr(Sx^{1/2} Sz^{1/2}) / p
    b2_x: float         # tr(Sx^2) / p
    b3_x: float         # tr(Sx^3) / p
    b2_z: float | None
    p: int
    provenance: str
    warned: bool = False

    def validate(self) -> None:
        if self.b1_xz <= 0 or self.b1_x2z <= 0:
            raise DataError("product moments must be positive for PD inputs")
        if self.b2_z is not None:
            # sharper product form of the cross-moment bound
            if self.b1_xz > np.sqrt(self.b2_x * self.b2_z) * (1 + 1e-12):
                raise DataError(
                    f"b1_xz={self.b1_xz:.6g} violates Cauchy-Schwarz bound "
                    f"sqrt(b2_x*b2_z)={np.sqrt(self.b2_x * self.b2_z):.6g}"
                )

    def csv_row(self) -> str:
        b2z = "" if self.b2_z is None else format(self.b2_z, ".17g")
        vals = [format(v, ".17g") for v in
                (self.b1_xz, self.b1_x2z, self.b1_sqrtxz, self.b2_x, self.b3_x)]
        return ",".join(vals + [b2z, str(self.p), self.provenance])


def write_moments(m: MomentEstimates, path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write(MOMENTS_CSV_HEADER + "\n")
        fh.write(m.csv_row() + "\n")


def read_moments(path) -> MomentEstimates:
    with open(path, "rt", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(h.strip() for h in header) != MOMENTS_CSV_HEADER:
            raise DataError(f"{path}: expected header {MOMENTS_CSV_HEADER!r}")
        row = next(reader, None)
        if row is None or len(row) != 8:
            raise DataError(f"{path}: expected one 8-field moment row")
    return MomentEstimates(
        b1_xz=float(row[0]), b1_x2z=float(row[1]), b1_sqrtxz=float(row[2]),
        b2_x=float(row[3]), b3_x=float(row[4]),
        b2_z=float(row[5]) if row[5] != "" else None,
        p=int(row[6]), provenance=row[7],
    )


_ALLOWED_KX = (0, 0.5, 1, 2, 3)
_ALLOWED_KZ = (0, 0.5, 1)


def _block_power(cov: CovarianceMatrix, i: int, k) -> np.ndarray | None:
    """k-th power of block i; None stands for the identity (k = 0)."""
    b = cov.block_values[i]
    if k == 0:
        return None
    if k == 0.5:
        return cov.sqrt_blocks()[i]
    if k == 1:
        return b
    if k == 2:
        return b @ b
    if k == 3:
        return b @ b @ b
    raise DataError(f"unsupported power {k}")


def product_moment(x: CovarianceMatrix, z: CovarianceMatrix, powers) -> float:
    """tr(Sx^kx Sz^kz) / p computed blockwise and summed.

    Half powers use the eigendecomposition square root and require PSD input.
    """
    kx, kz = powers
    if kx not in _ALLOWED_KX or kz not in _ALLOWED_KZ:
        raise DataError(f"unsupported powers {powers}")
    if x.partition.ranges != z.partition.ranges:
        raise DataError("covariances have incompatible block partitions")
    total = 0.0
    for i in range(len(x.partition)):
        a = _block_power(x, i, kx)
        b = _block_power(z, i, kz)
        if a is None and b is None:
            total += x.partition.sizes[i]
        elif a is None:
            total += np.trace(b)
        elif b is None:
            total += np.trace(a)
        else:
            # tr(A @ B) for symmetric factors
            total += float(np.sum(a * b.T))
    return total / x.partition.p


class DebiasedMoments(NamedTuple):
    b1: float
    b2: float
    b3: float | None
    warned: bool


def debias_sample_moments(b1_hat: float, b2_hat: float, b3_hat: float | None,
                          omega: float) -> DebiasedMoments:
    """Invert the sample-moment inflation at aspect ratio omega = p/n.

    A non-positive debiased b2 is returned as-is with warned=True: the
    signal that n is too small for reliable debiasing, not a crash.
    """
    if omega <= 0:
        raise DataError(f"omega must be positive, got {omega}")
    b1 = b1_hat
    b2 = b2_hat - omega * b1 ** 2
    warned = False
    if b2 <= 0:
        warnings.warn(
            f"debiased b2 = {b2:.6g} <= 0; sample too small for reliable debiasing",
            SmallSampleWarning,
        )
        warned = True
    b3 = None
    if b3_hat is not None:
        b3 = b3_hat - 3.0 * omega * b1 * b2 - omega ** 2 * b1 ** 3
        if b3 <= 0 and not warned:
            warnings.warn(
                f"debiased b3 = {b3:.6g} <= 0; sample too small for reliable debiasing",
                SmallSampleWarning,
            )
            warned = True
    return DebiasedMoments(b1, b2, b3, warned)


def debias_cross_trace(tr_hat_x2z: float, tr_xz: float, tr_x: float, n: int) -> float:
    """Remove the first-population sampling inflation from tr_hat(Sx^2 Sz)."""
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    out = tr_hat_x2z - tr_xz * tr_x / n
    if out < 0:
        warnings.warn(
            f"debiased cross trace {out:.6g} < 0; small-n regime", SmallSampleWarning
        )
    return out


def blockwise_moments(x_cov: CovarianceMatrix, z_cov: CovarianceMatrix,
                      n_x: int, mode: str = PROVENANCE_EXACT) -> MomentEstimates:
    """Aggregate per-block traces into MomentEstimates.

    population-exact: inputs are the true covariances; traces are exact.
    sample-debiased: inputs are blockwise sample covariances; the mixed trace
    is corrected per block with n = n_x and b2_x/b3_x are debiased per block
    at the block's own aspect ratio p_block/n_x.  b2_z is left unset (the
    second-population sample size is not an input here) and b1_sqrtxz is the
    uncorrected plug-in, whose finite-sample bias is uncharacterized.
    """
    if x_cov.partition.ranges != z_cov.partition.ranges:
        raise DataError("covariances have incompatible block partitions")
    p = x_cov.dim
    if mode == PROVENANCE_EXACT:
        m = MomentEstimates(
            b1_xz=product_moment(x_cov, z_cov, (1, 1)),
            b1_x2z=product_moment(x_cov, z_cov, (2, 1)),
            b1_sqrtxz=product_moment(x_cov, z_cov, (0.5, 0.5)),
            b2_x=product_moment(x_cov, x_cov, (2, 0)),
            b3_x=product_moment(x_cov, x_cov, (3, 0)),
            b2_z=product_moment(z_cov, z_cov, (2, 0)),
            p=p, provenance=PROVENANCE_EXACT,
        )
        m.validate()
        return m
    if mode != PROVENANCE_SAMPLE:
        raise DataError(f"unknown moment mode {mode!r}")

    b1_xz = b1_x2z = b2_x = b3_x = 0.0
    warned = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SmallSampleWarning)
        for i, size in enumerate(x_cov.partition.sizes):
            bx = x_cov.block_values[i]
            bz = z_cov.block_values[i]
            tr_xz_i = float(np.sum(bx * bz))
            bx2 = bx @ bx
            tr_hat_x2z_i = float(np.sum(bx2 * bz))
            tr_x_i = float(np.trace(bx))
            b1_xz += tr_xz_i
            b1_x2z += debias_cross_trace(tr_hat_x2z_i, tr_xz_i, tr_x_i, n_x)
            omega_i = size / n_x
            d = debias_sample_moments(
                b1_hat=tr_x_i / size,
                b2_hat=float(np.trace(bx2)) / size,
                b3_hat=float(np.sum(bx2 * bx)) / size,
                omega=omega_i,
            )
            b2_x += size * d.b2
            b3_x += size * d.b3
        b1_sqrtxz = product_moment(x_cov, z_cov, (0.5, 0.5))
        warned = any(issubclass(w.category, SmallSampleWarning) for w in caught)
    return MomentEstimates(
        b1_xz=b1_xz / p, b1_x2z=b1_x2z / p, b1_sqrtxz=b1_sqrtxz,
        b2_x=b2_x / p, b3_x=b3_x / p, b2_z=None,
        p=p, provenance=PROVENANCE_SAMPLE, warned=warned,
    )
