"""Paired two-population GWAS simulation: genotypes, correlated sparse effects, traits.

Genotypes follow the discrete {0,1,2} allele-count model with per-variant MAF,
are column-standardized exactly (sample mean 0, sample variance 1 with divisor
n), colored by a block-diagonal LD square root, and re-standardized.  Effect
pairs are drawn from a diagonal (co)variance model with configurable sparsity
and support overlap; traits calibrate the noise variance against the realized
genetic variance so heritability holds in the ratio-of-sample-variances sense.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InfeasibleModelError
from .ld import CovarianceMatrix
from .rng import generator

_RESAMPLE_TRIES = 10


@dataclass
class GenotypeMatrix:
    """n x p genotype panel with per-variant MAF record."""

    values: np.ndarray
    maf: np.ndarray
    standardized: bool

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass
class TraitVector:
    """Observed or predicted trait values plus the noise variance used."""

    values: np.ndarray
    h2_target: float | None
    noise_var: float

    @property
    def n(self) -> int:
        return self.values.shape[0]


def standardize_columns(values: np.ndarray) -> np.ndarray:
    """Exact column standardization: sample mean 0, variance 1 (divisor n)."""
    out = np.array(values, dtype=np.float64, copy=True)
    _standardize_inplace(out)
    return out


def _standardize_inplace(values: np.ndarray, recenter: bool = True) -> None:
    # recenter=False skips the mean pass for columns already centered to
    # floating-point noise (e.g. linear images of exactly centered columns)
    n = values.shape[0]
    if recenter:
        values -= values.mean(axis=0)
    norm2 = np.einsum("ij,ij->j", values, values)
    if np.any(norm2 == 0):
        raise DataError("cannot standardize a constant column")
    values /= np.sqrt(norm2 / n)


def _is_identity(block: np.ndarray) -> bool:
    return bool((block == np.eye(block.shape[0])).all())


def sample_genotypes(n: int, p: int, maf_low: float, maf_high: float,
                     cov: CovarianceMatrix, seed: int) -> GenotypeMatrix:
    """Draw an n x p standardized genotype panel with LD structure `cov`.

    Per variant, MAF f ~ Uniform[maf_low, maf_high] and raw counts come from
    {0,1,2} with probabilities {(1-f)^2, 2f(1-f), f^2}.  The standardized raw
    panel is multiplied blockwise by cov^{1/2} and re-standardized, so the
    output has exactly unit sample variance per column.  Deterministic in seed.
    """
    if n < 2:
        raise DataError(f"need n >= 2 samples, got {n}")
    if not (0.0 < maf_low <= maf_high <= 0.5):
        raise DataError(f"need 0 < maf_low <= maf_high <= 0.5, got [{maf_low}, {maf_high}]")
    if cov.dim != p:
        raise DataError(f"covariance dim {cov.dim} != p = {p}")
    rng = generator(seed)
    maf = rng.uniform(maf_low, maf_high, size=p)
    raw = _draw_counts(rng, n, maf)
    # expected number of monomorphic columns is at most 3p(1-maf_low)^(2n);
    # when that is negligible, skip the scan (standardization still errors on
    # the astronomically unlikely constant column)
    if 3.0 * p * (1.0 - maf_low) ** (2 * n) >= 1e-12:
        for _ in range(_RESAMPLE_TRIES):
            mono = np.flatnonzero(raw.min(axis=0) == raw.max(axis=0))
            if mono.size == 0:
                break
            raw[:, mono] = _draw_counts(rng, n, maf[mono])
        else:
            raise DataError(
                f"monomorphic columns persist after {_RESAMPLE_TRIES} resamples"
            )
    _standardize_inplace(raw)
    colored = False
    for sl, root in zip(cov.partition.slices(), cov.sqrt_blocks()):
        if not _is_identity(root):
            raw[:, sl] = raw[:, sl] @ root
            colored = True
    if colored:
        # coloring maps exactly centered columns to columns centered up to
        # floating-point noise, so only the variance needs re-fixing
        _standardize_inplace(raw, recenter=False)
    return GenotypeMatrix(values=raw, maf=maf, standardized=True)


def _draw_counts(rng: np.random.Generator, n: int, maf: np.ndarray) -> np.ndarray:
    # single-precision uniforms are plenty for {0,1,2} thresholding and halve
    # the bandwidth of the dominant allocation
    p0 = ((1.0 - maf) ** 2).astype(np.float32)
    p01 = (1.0 - maf ** 2).astype(np.float32)     # P(0) + P(1) under HWE
    u = rng.random((n, maf.size), dtype=np.float32)
    return np.add(u >= p0, u >= p01, dtype=np.float64)


@dataclass
class EffectModel:
    """Diagonal (co)variance specification for the paired effect vectors.

    Per-variant effect variances are phi^2/p so dense vectors have the usual
    1/p scale.  `overlap` is the shared-support fraction; None draws the two
    supports independently and places the cross term on their intersection.
    Explicit per-variant profiles (var_beta, var_alpha, cov_cross) pin the
    supports; otherwise supports are drawn per seed at sampling time.
    """

    p: int
    sparsity_beta: float = 1.0
    sparsity_alpha: float = 1.0
    target_corr: float = 0.0
    overlap: float | None = None
    distribution: str = "gaussian"
    df: float | None = None
    var_beta: np.ndarray | None = None
    var_alpha: np.ndarray | None = None
    cov_cross: np.ndarray | None = None

    def __post_init__(self):
        if self.p < 1:
            raise DataError(f"p must be positive, got {self.p}")
        if not -1.0 <= self.target_corr <= 1.0:
            raise DataError(f"target_corr must lie in [-1, 1], got {self.target_corr}")
        if self.distribution not in ("gaussian", "student-t"):
            raise DataError(f"unknown effect distribution {self.distribution!r}")
        if self.distribution == "student-t":
            if self.df is None or self.df < 5:
                raise DataError("student-t effects need df >= 5 (finite 4th moments)")
        explicit = [self.var_beta, self.var_alpha, self.cov_cross]
        if any(v is not None for v in explicit):
            if any(v is None for v in explicit):
                raise DataError("explicit profiles need var_beta, var_alpha and cov_cross")
            self._init_explicit()
            return
        for name, s in (("sparsity_beta", self.sparsity_beta),
                        ("sparsity_alpha", self.sparsity_alpha)):
            if not 0.0 < s <= 1.0:
                raise DataError(f"{name} must lie in (0, 1], got {s}")
        if self.overlap is not None:
            if not 0.0 <= self.overlap <= min(self.sparsity_beta, self.sparsity_alpha):
                raise DataError(
                    f"overlap {self.overlap} exceeds min sparsity "
                    f"{min(self.sparsity_beta, self.sparsity_alpha)}"
                )
            self._check_feasible(self.m_cross)

    def _init_explicit(self):
        vb = np.asarray(self.var_beta, dtype=np.float64)
        va = np.asarray(self.var_alpha, dtype=np.float64)
        cc = np.asarray(self.cov_cross, dtype=np.float64)
        if vb.shape != (self.p,) or va.shape != (self.p,) or cc.shape != (self.p,):
            raise DataError("per-variant profiles must have length p")
        if vb.min() < 0 or va.min() < 0:
            raise DataError("effect variances must be nonnegative")
        dead = (vb == 0) | (va == 0)
        if np.any(cc[dead] != 0):
            raise DataError("cov_cross must be zero wherever either variance is zero")
        bound = np.sqrt(vb * va)
        if np.any(np.abs(cc) > bound + 1e-12):
            raise DataError("per-variant |cov_cross| exceeds sqrt(var_beta*var_alpha)")
        self.var_beta, self.var_alpha, self.cov_cross = vb, va, cc
        self.sparsity_beta = float((vb > 0).sum()) / self.p
        self.sparsity_alpha = float((va > 0).sum()) / self.p
        self.overlap = float((cc != 0).sum()) / self.p
        denom = np.sqrt(vb.sum() * va.sum())
        self.target_corr = float(cc.sum() / denom) if denom > 0 else 0.0

    @property
    def explicit(self) -> bool:
        return self.var_beta is not None

    @property
    def m_beta(self) -> int:
        return int(round(self.sparsity_beta * self.p))

    @property
    def m_alpha(self) -> int:
        return int(round(self.sparsity_alpha * self.p))

    @property
    def m_cross(self) -> int | None:
        if self.overlap is None:
            return None
        return int(round(self.overlap * self.p))

    @property
    def kappa_beta(self) -> float:
        return self.m_beta / self.p

    @property
    def kappa_alpha(self) -> float:
        return self.m_alpha / self.p

    @property
    def delta(self) -> float | None:
        return None if self.m_cross is None else self.m_cross / self.p

    @property
    def kappa_cross(self) -> float | None:
        """m_cross / sqrt(m_beta * m_alpha), the hard cap on target_corr."""
        if self.m_cross is None:
            return None
        return self.m_cross / np.sqrt(self.m_beta * self.m_alpha)

    def _check_feasible(self, m_cross: int) -> float:
        kappa = m_cross / np.sqrt(self.m_beta * self.m_alpha)
        if abs(self.target_corr) > kappa + 1e-12:
            raise InfeasibleModelError(
                f"target_corr {self.target_corr} exceeds the support bound "
                f"kappa_cross = m_cross/sqrt(m_beta*m_alpha) = {kappa:.6g}"
            )
        return 0.0 if kappa == 0 else float(np.clip(self.target_corr / kappa, -1.0, 1.0))


@dataclass
class EffectPair:
    """Sampled effect vectors with their realized diagonal profiles.

    phi_beta/phi_alpha/phi_cross are the per-variant phi^2 (resp. phi) values
    actually used, on the convention Var(beta_i) = phi_beta_i / p.
    """

    beta: np.ndarray
    alpha: np.ndarray
    phi_beta: np.ndarray
    phi_alpha: np.ndarray
    phi_cross: np.ndarray


def sample_effect_pair(model: EffectModel, seed: int) -> EffectPair:
    """Draw (beta, alpha) under the model; pure function of (model, seed).

    On the shared causal support the per-pair correlation is
    target_corr / kappa_cross, so the realized Pearson correlation over all p
    coordinates converges to target_corr.  Requests that would need a per-pair
    correlation above 1 raise InfeasibleModelError naming the bound.
    """
    rng = generator(seed)
    p = model.p
    if model.explicit:
        vb, va, cc = model.var_beta, model.var_alpha, model.cov_cross
    else:
        supp_b, supp_a, shared = _draw_supports(model, rng)
        r = model._check_feasible(shared.size)
        vb = np.zeros(p)
        va = np.zeros(p)
        cc = np.zeros(p)
        vb[supp_b] = 1.0
        va[supp_a] = 1.0
        cc[shared] = r
    beta = np.zeros(p)
    alpha = np.zeros(p)
    scale_b = np.sqrt(vb / p)
    scale_a = np.sqrt(va / p)
    both = np.flatnonzero((vb > 0) & (va > 0))
    only_b = np.flatnonzero((vb > 0) & (va == 0))
    only_a = np.flatnonzero((va > 0) & (vb == 0))
    if both.size:
        rho = cc[both] / np.sqrt(vb[both] * va[both])
        z1 = rng.standard_normal(both.size)
        z2 = rng.standard_normal(both.size)
        if model.distribution == "student-t":
            # common chi-square scale keeps the pair jointly heavy-tailed
            # while preserving the requested correlation
            mix = np.sqrt(model.df / rng.chisquare(model.df, size=both.size))
            mix *= np.sqrt((model.df - 2.0) / model.df)
        else:
            mix = 1.0
        u1 = z1 * mix
        u2 = (rho * z1 + np.sqrt(1.0 - rho ** 2) * z2) * mix
        beta[both] = scale_b[both] * u1
        alpha[both] = scale_a[both] * u2
    if only_b.size:
        beta[only_b] = scale_b[only_b] * _unit_draws(model, rng, only_b.size)
    if only_a.size:
        alpha[only_a] = scale_a[only_a] * _unit_draws(model, rng, only_a.size)
    return EffectPair(beta=beta, alpha=alpha, phi_beta=vb, phi_alpha=va, phi_cross=cc)


def _draw_supports(model: EffectModel, rng: np.random.Generator):
    p = model.p
    m_b, m_a = model.m_beta, model.m_alpha
    if model.overlap is not None:
        m_ba = model.m_cross
        shared = rng.choice(p, size=m_ba, replace=False)
        rest = np.setdiff1d(np.arange(p), shared, assume_unique=False)
        extra_b = rng.choice(rest, size=m_b - m_ba, replace=False)
        extra_a = rng.choice(rest, size=m_a - m_ba, replace=False)
        supp_b = np.concatenate([shared, extra_b])
        supp_a = np.concatenate([shared, extra_a])
        return np.sort(supp_b), np.sort(supp_a), np.sort(shared)
    supp_b = np.sort(rng.choice(p, size=m_b, replace=False))
    supp_a = np.sort(rng.choice(p, size=m_a, replace=False))
    shared = np.intersect1d(supp_b, supp_a, assume_unique=True)
    if model.target_corr != 0.0 and shared.size == 0:
        raise InfeasibleModelError(
            "supports drawn independently share no variants; cannot realize "
            f"target_corr {model.target_corr} (kappa_cross = 0)"
        )
    return supp_b, supp_a, shared


def _unit_draws(model: EffectModel, rng: np.random.Generator, size: int) -> np.ndarray:
    if model.distribution == "student-t":
        t = rng.standard_t(model.df, size=size)
        return t * np.sqrt((model.df - 2.0) / model.df)
    return rng.standard_normal(size)


def synthesize_traits(geno: GenotypeMatrix, effects: np.ndarray, h2: float,
                      seed: int) -> TraitVector:
    """Trait = genetic value + calibrated Gaussian noise.

    noise_var = var(g) * (1 - h2) / h2 against the realized sample variance of
    g, so the realized heritability matches h2 in the ratio-of-variances sense
    up to noise-independence fluctuation.  h2 = 1 means zero noise exactly.
    """
    effects = np.asarray(effects, dtype=np.float64)
    if effects.shape != (geno.p,):
        raise DataError(f"effects length {effects.shape} != p = {geno.p}")
    if not 0.0 < h2 <= 1.0:
        raise DataError(f"h2 must lie in (0, 1], got {h2}")
    g = geno.values @ effects
    var_g = float(g.var())
    if var_g == 0.0:
        raise DataError("null effects: genetic values have zero variance")
    if h2 == 1.0:
        return TraitVector(values=g, h2_target=1.0, noise_var=0.0)
    noise_var = var_g * (1.0 - h2) / h2
    eps = generator(seed).normal(0.0, np.sqrt(noise_var), size=geno.n)
    return TraitVector(values=g + eps, h2_target=h2, noise_var=noise_var)


def variant_ids(p: int) -> list[str]:
    width = max(6, len(str(p)))
    return [f"v{i:0{width}d}" for i in range(1, p + 1)]


def write_genotypes(geno: GenotypeMatrix, path, maf_path=None) -> None:
    """CSV with a header row of variant IDs, one sample per row."""
    ids = variant_ids(geno.p)
    with open(path, "wt", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ids)
        for row in geno.values:
            writer.writerow([format(v, ".17g") for v in row])
    if maf_path is not None:
        with open(maf_path, "wt", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variant_id", "maf"])
            for vid, f in zip(ids, geno.maf):
                writer.writerow([vid, format(f, ".17g")])


def read_genotypes(path, maf_path=None):
    """Read a genotype CSV; returns (GenotypeMatrix, variant_id list)."""
    with open(path, "rt", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        ids = next(reader, None)
        if not ids:
            raise DataError(f"{path}: missing variant-ID header row")
        rows = [[float(v) for v in row] for row in reader if row]
    values = np.array(rows, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(ids):
        raise DataError(f"{path}: ragged genotype rows")
    maf = np.full(len(ids), np.nan)
    if maf_path is not None:
        with open(maf_path, "rt", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["variant_id", "maf"]:
                raise DataError(f"{maf_path}: expected header variant_id,maf")
            table = {row[0]: float(row[1]) for row in reader if row}
        try:
            maf = np.array([table[vid] for vid in ids])
        except KeyError as exc:
            raise DataError(f"{maf_path}: missing MAF for variant {exc}") from exc
    col_means = values.mean(axis=0)
    col_vars = values.var(axis=0)
    standardized = bool(
        np.abs(col_means).max() < 1e-8 and np.abs(col_vars - 1.0).max() < 1e-8
    )
    return GenotypeMatrix(values=values, maf=maf, standardized=standardized), ids


def write_traits(trait: TraitVector, path) -> None:
    with open(path, "wt", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "value"])
        for i, v in enumerate(trait.values, 1):
            writer.writerow([f"s{i}", format(v, ".17g")])


def read_traits(path) -> np.ndarray:
    with open(path, "rt", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "value"]:
            raise DataError(f"{path}: expected header sample_id,value")
        values = [float(row[1]) for row in reader if row]
    return np.array(values, dtype=np.float64)
