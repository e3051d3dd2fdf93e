"""Summary statistics, predicted traits, and bias-corrected correlation estimators.

The naive estimator is the cosine of observed second-population traits with
genetic-predicted traits built from first-population marginal summary
statistics.  Its asymptotic shrinkage is inverted by a multiplicative
correction driven by spectral moments (marginal route) or by the ridge
resolvent traces V1/V2/V3 (reference-panel route).  The closed-form variance
of the corrected estimator is evaluated from the model's trace functionals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DataError, NumericalInconsistencyError, StateError
from .ld import CovarianceMatrix
from .moments import MomentEstimates
from .simulate import GenotypeMatrix, TraitVector

KIND_MARGINAL = "marginal"
KIND_RIDGE = "ridge-adjusted"

EXTREME_CORRECTED = 1.5   # |corrected value| above this flags the result

RESULTS_CSV_HEADER = (
    "config_id,replicate,g_naive,g_corrected,g_w,g_mw,"
    "h2_beta,h2_alpha,omega,lambda,status"
)


@dataclass
class EffectEstimate:
    """Per-variant effect estimates: marginal or ridge reference-panel adjusted."""

    values: np.ndarray
    kind: str
    n_source: int
    lam: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise DataError("effect estimates must be finite")
        if self.kind == KIND_RIDGE and self.lam <= 0.0:
            raise DataError("ridge-adjusted estimates need lam > 0")


@dataclass
class VParams:
    """Ridge resolvent traces V1, V2, V3 at penalty lam."""

    v1: float
    v2: float
    v3: float
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise DataError(f"lam must be positive, got {self.lam}")
        if min(self.v1, self.v2, self.v3) <= 0:
            raise DataError("V parameters must be positive for PD inputs")


@dataclass
class EstimationResult:
    """One replicate's estimators plus the plug-in parameters that produced them."""

    g_naive: float
    g_corrected: float
    h2_beta: float
    h2_alpha: float
    omega: float
    moments: MomentEstimates | None = None
    g_w: float | None = None
    g_mw: float | None = None
    lam: float | None = None
    variance_estimate: float | None = None
    status: str = "ok"

    def __post_init__(self):
        if abs(self.g_naive) > 1.0 + 1e-12:
            raise DataError(f"|g_naive| = {abs(self.g_naive)} > 1")
        extremes = [v for v in (self.g_corrected, self.g_mw) if v is not None]
        if any(abs(v) > EXTREME_CORRECTED for v in extremes):
            self.status = "warned"
        if self.moments is not None and self.moments.warned:
            self.status = "warned"

    def csv_row(self, config_id: str, replicate: int) -> str:
        def fmt(v):
            return "" if v is None else format(v, ".17g")

        return ",".join([
            config_id, str(replicate),
            fmt(self.g_naive), fmt(self.g_corrected), fmt(self.g_w), fmt(self.g_mw),
            fmt(self.h2_beta), fmt(self.h2_alpha), fmt(self.omega), fmt(self.lam),
            self.status,
        ])


def marginal_summary_stats(x: GenotypeMatrix, y) -> EffectEstimate:
    """Marginal per-variant regression coefficients X'y / n."""
    if not x.standardized:
        raise StateError("summary statistics require standardized genotypes")
    yv = y.values if isinstance(y, TraitVector) else np.asarray(y, dtype=np.float64)
    if yv.shape != (x.n,):
        raise DataError(f"trait length {yv.shape} != n = {x.n}")
    return EffectEstimate(values=x.values.T @ yv / x.n, kind=KIND_MARGINAL, n_source=x.n)


def predict_traits(z: GenotypeMatrix, est: EffectEstimate) -> TraitVector:
    """Genetic-predicted traits Z @ estimate (polygenic scores)."""
    if not z.standardized:
        raise StateError("prediction requires standardized genotypes")
    if est.values.shape != (z.p,):
        raise DataError(f"estimate length {est.values.shape} != p = {z.p}")
    return TraitVector(values=z.values @ est.values, h2_target=None, noise_var=0.0)


def _vector(v) -> np.ndarray:
    return v.values if isinstance(v, TraitVector) else np.asarray(v, dtype=np.float64)


def naive_correlation(y_obs, y_pred) -> float:
    """Cosine similarity of the two raw vectors (no mean-centering here).

    Callers wanting centered traits center upstream; both conventions agree
    up to O(1/n) for standardized panels.
    """
    a = _vector(y_obs)
    b = _vector(y_pred)
    if a.shape != b.shape:
        raise DataError(f"length mismatch {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DataError("degenerate input: zero-norm vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def center(values: np.ndarray) -> np.ndarray:
    return values - values.mean()


def _check_correction_args(h2_beta, h2_alpha, omega):
    if not 0.0 < h2_beta <= 1.0 or not 0.0 < h2_alpha <= 1.0:
        raise DataError(f"heritabilities must lie in (0, 1], got {h2_beta}, {h2_alpha}")
    if omega <= 0:
        raise DataError(f"omega must be positive, got {omega}")


def correction_bracket(h2_beta: float, h2_alpha: float, omega: float,
                       m: MomentEstimates) -> float:
    """Squared multiplicative correction for the marginal estimator."""
    _check_correction_args(h2_beta, h2_alpha, omega)
    if m.b1_xz <= 0 or m.b1_x2z <= 0:
        raise DataError("correction needs positive product moments")
    return (m.b1_x2z / (h2_alpha * m.b1_xz ** 2)
            + omega / (h2_beta * h2_alpha * m.b1_xz))


def correct_marginal(g: float, h2_beta: float, h2_alpha: float, omega: float,
                     m: MomentEstimates) -> float:
    """Undo prediction-noise and LD shrinkage in the naive cosine estimator.

    Values outside [-1, 1] are reported as-is; clamping is a presentation
    concern and the flagging threshold lives in EstimationResult.
    """
    return g * float(np.sqrt(correction_bracket(h2_beta, h2_alpha, omega, m)))


def ridge_adjust(est: EffectEstimate, w_cov: CovarianceMatrix, lam: float) -> EffectEstimate:
    """Reference-panel adjustment: solve (S_w + lam I) v = estimate blockwise."""
    if lam <= 0:
        raise DataError(f"ridge penalty must be positive, got {lam}")
    if w_cov.dim != est.values.shape[0]:
        raise DataError(f"panel covariance dim {w_cov.dim} != p = {est.values.shape[0]}")
    out = np.empty_like(est.values)
    for sl, block in zip(w_cov.partition.slices(), w_cov.block_values):
        system = block + lam * np.eye(block.shape[0])
        out[sl] = cho_solve(cho_factor(system, lower=True), est.values[sl])
    return EffectEstimate(values=out, kind=KIND_RIDGE, n_source=est.n_source, lam=lam)


def compute_v_params(w_cov: CovarianceMatrix, x_cov: CovarianceMatrix,
                     z_cov: CovarianceMatrix, lam: float) -> VParams:
    """Resolvent traces with R = (S_w + lam I)^-1, computed blockwise:

    v1 = tr(Sz R Sx)/p, v2 = tr(R Sz R Sx)/p, v3 = tr(R Sz R Sx^2)/p.
    """
    if lam <= 0:
        raise DataError(f"ridge penalty must be positive, got {lam}")
    base = w_cov.partition.ranges
    if x_cov.partition.ranges != base or z_cov.partition.ranges != base:
        raise DataError("covariances have incompatible block partitions")
    v1 = v2 = v3 = 0.0
    for i, size in enumerate(w_cov.partition.sizes):
        system = w_cov.block_values[i] + lam * np.eye(size)
        factor = cho_factor(system, lower=True)
        r_z = cho_solve(factor, z_cov.block_values[i])        # R Sz
        r_x = cho_solve(factor, x_cov.block_values[i])        # R Sx
        v1 += float(np.sum(z_cov.block_values[i] * r_x.T))    # tr(Sz R Sx)
        v2 += float(np.sum(r_z * r_x.T))                      # tr(R Sz R Sx)
        v3 += float(np.sum(r_z * (r_x @ x_cov.block_values[i]).T))
    p = w_cov.dim
    return VParams(v1=v1 / p, v2=v2 / p, v3=v3 / p, lam=lam)


def panel_adjustment(est: EffectEstimate, w_cov: CovarianceMatrix,
                     x_cov: CovarianceMatrix, z_cov: CovarianceMatrix,
                     lam: float) -> tuple[EffectEstimate, VParams]:
    """Ridge adjustment and resolvent traces sharing one factorization per block."""
    if lam <= 0:
        raise DataError(f"ridge penalty must be positive, got {lam}")
    base = w_cov.partition.ranges
    if x_cov.partition.ranges != base or z_cov.partition.ranges != base:
        raise DataError("covariances have incompatible block partitions")
    if w_cov.dim != est.values.shape[0]:
        raise DataError(f"panel covariance dim {w_cov.dim} != p = {est.values.shape[0]}")
    out = np.empty_like(est.values)
    v1 = v2 = v3 = 0.0
    for i, (sl, size) in enumerate(zip(w_cov.partition.slices(), w_cov.partition.sizes)):
        system = w_cov.block_values[i] + lam * np.eye(size)
        factor = cho_factor(system, lower=True)
        out[sl] = cho_solve(factor, est.values[sl])
        r_z = cho_solve(factor, z_cov.block_values[i])
        r_x = cho_solve(factor, x_cov.block_values[i])
        v1 += float(np.sum(z_cov.block_values[i] * r_x.T))
        v2 += float(np.sum(r_z * r_x.T))
        v3 += float(np.sum(r_z * (r_x @ x_cov.block_values[i]).T))
    p = w_cov.dim
    adjusted = EffectEstimate(values=out, kind=KIND_RIDGE, n_source=est.n_source, lam=lam)
    return adjusted, VParams(v1=v1 / p, v2=v2 / p, v3=v3 / p, lam=lam)


def correct_reference(g_w: float, h2_beta: float, h2_alpha: float, omega: float,
                      v: VParams) -> float:
    """Undo shrinkage in the ridge reference-panel estimator.

    The numerator of the underlying limit is the squared resolvent trace
    v1^2 (the quadratic-form expectation h_beta * tr(Sx R Sz)/p enters the
    cosine numerator linearly and is then squared); with a uniform panel
    (S_w = I) the correction is therefore ridge-invariant, matching the fact
    that uniform shrinkage of the estimate cannot change a cosine.
    """
    _check_correction_args(h2_beta, h2_alpha, omega)
    if v.v1 <= 0:
        raise DataError("correction needs positive v1")
    bracket = (v.v2 * omega + v.v3 * h2_beta) / (v.v1 ** 2 * h2_beta * h2_alpha)
    return g_w * float(np.sqrt(bracket))


def convert_effect_correlation(phi: float, b1_sqrtxz: float) -> float:
    """Map the effect-vector correlation to its LD-incorporating variant.

    Valid in the balanced case (co)variance profiles proportional to the
    identity, where the two definitions differ by the factor
    tr(Sx^{1/2} Sz^{1/2}) / p.
    """
    if b1_sqrtxz <= 0:
        raise DataError(f"b1_sqrtxz must be positive, got {b1_sqrtxz}")
    return phi * b1_sqrtxz


@dataclass
class VarianceInputs:
    """Trace functionals feeding the closed-form variance of the corrected estimator.

    Traces are over the diagonal effect-profile matrices Phi (per-variant
    phi^2 / phi values, not the /p-scaled effect covariances).  Omega below
    denotes the effective covariance of the marginal estimates,
    Omega = Sx P_bb Sx + Sx tr(Sx P_bb)/(n h2_beta).
    kurtosis entries are the per-variant excess-moment constants of the
    sampled effects; identically zero under Gaussian effects.
    """

    n: int
    n_z: int
    h2_beta: float
    h2_alpha: float
    p: int
    cross_quad: float          # tr(Sz Sx P_ba Sz Sx P_ba)
    effect_noise_quad: float   # tr(Sz P_aa Sz Sx P_bb Sx)
    cross_trace: float         # tr(Sz Sx P_ba)
    kurtosis_sum: float        # sum_i C_i (Sz Sx)_ii^2
    beta_signal: float         # tr(Sx P_bb)
    alpha_signal: float        # tr(Sz P_aa)
    ld_product_trace: float    # tr(Sx Sz)
    beta_quad: float           # tr(Sz Sx P_bb Sx)
    alpha_quad: float          # tr(Sx Sz P_aa Sz)
    alpha_sq_quad: float = 0.0       # tr(Sz P_aa Sz P_aa)
    score_sq_quad: float = 0.0       # tr((Sz Omega)^2)
    alpha_cross_mix: float = 0.0     # tr(Sz P_aa Sz Sx P_ba)
    score_cross_mix: float = 0.0     # tr(Sz Omega Sz Sx P_ba)
    cross_sq_mix: float = 0.0        # tr(Sz P_ba Sx Sz Sx P_ba)

    def __post_init__(self):
        for name in ("cross_quad", "effect_noise_quad", "cross_trace", "kurtosis_sum",
                     "beta_signal", "alpha_signal", "ld_product_trace",
                     "beta_quad", "alpha_quad", "alpha_sq_quad", "score_sq_quad",
                     "alpha_cross_mix", "score_cross_mix", "cross_sq_mix"):
            if not np.isfinite(getattr(self, name)):
                raise DataError(f"variance input {name} is not finite")

    def score_trace(self) -> float:
        """tr(Sz Omega): the asymptotic scale of the predicted-trait norm."""
        return (self.beta_quad
                + self.ld_product_trace * self.beta_signal / (self.n * self.h2_beta))

    def limit_sq(self) -> float:
        """Squared asymptotic value of the naive estimator under these inputs."""
        return (self.h2_alpha * self.cross_trace ** 2
                / (self.alpha_signal * self.score_trace()))


def variance_naive_linearized(inputs: VarianceInputs) -> float:
    """Variance of the linearized numerator of the cosine estimator.

    This is the classical ratio-of-expectations expression: the second moment
    of the cross product over the product of the norm expectations.  It
    ignores the fluctuation of the norms, so for nonzero correlations it
    overstates the true sampling variance; variance_naive adds the missing
    denominator terms.
    """
    p = inputs.p
    h2b, h2a = inputs.h2_beta, inputs.h2_alpha
    denom = (
        (inputs.alpha_signal / p) * (inputs.beta_signal / p)
        * inputs.ld_product_trace / (h2a * h2b)
        + inputs.n * (inputs.alpha_signal / p) * (inputs.beta_quad / p) / h2a
    )
    if denom <= 0:
        raise NumericalInconsistencyError(f"variance denominator {denom} <= 0: {inputs}")
    t_signal = inputs.n * (
        inputs.cross_quad / p ** 2
        + inputs.effect_noise_quad / p ** 2
        + inputs.kurtosis_sum
    ) / denom
    t_mixed = (
        (inputs.cross_trace / p) ** 2
        + (inputs.beta_signal / p) * (inputs.alpha_quad / p) / h2b
    ) / denom
    t_cross = (inputs.n / inputs.n_z) * (inputs.cross_trace / p) ** 2 / denom
    return t_signal + t_mixed + t_cross + 1.0 / inputs.n_z


def variance_naive(inputs: VarianceInputs) -> float:
    """Asymptotic sampling variance of the naive cosine estimator.

    Linearized-numerator variance plus the norm-fluctuation terms of the
    ratio: variances of the two squared norms, their covariances with the
    numerator, and their mutual covariance.  The norm terms account for the
    per-replicate calibration of the trait noise against the realized genetic
    variance, which couples the observed-trait norm to the genetic signal.
    All corrections carry the squared estimator limit as a factor, so they
    vanish for uncorrelated effects and the expression then reduces to the
    linearized one.
    """
    base = variance_naive_linearized(inputs)
    limit_sq = inputs.limit_sq()
    if limit_sq == 0.0:
        return base
    n_z = inputs.n_z
    h2a = inputs.h2_alpha
    score = inputs.score_trace()
    # relative variance of the observed-trait squared norm; the calibrated
    # noise tracks the realized genetic variance, inflating the row term
    var_b = (2.0 * (2.0 - h2a ** 2) / n_z
             + 2.0 * inputs.alpha_sq_quad / inputs.alpha_signal ** 2)
    # relative variance of the predicted-trait squared norm
    var_c = 2.0 / n_z + 2.0 * inputs.score_sq_quad / score ** 2
    # covariances of the numerator with each norm
    cov_nb = (2.0 * (2.0 - h2a) / n_z
              + 2.0 * inputs.alpha_cross_mix
              / (inputs.cross_trace * inputs.alpha_signal))
    cov_nc = (2.0 / n_z
              + 2.0 * inputs.score_cross_mix / (inputs.cross_trace * score))
    # covariance between the two norms
    cov_bc = (2.0 * limit_sq / (h2a * n_z)
              + 2.0 * inputs.cross_sq_mix / (inputs.alpha_signal * score))
    correction = var_b / 4.0 + var_c / 4.0 - cov_nb - cov_nc + cov_bc / 2.0
    out = base + limit_sq * correction
    if out <= 0:
        raise NumericalInconsistencyError(
            f"negative naive variance {out}; inputs: {inputs}"
        )
    return out


def variance_corrected(inputs: VarianceInputs, m: MomentEstimates, omega: float) -> float:
    """Variance limit of the corrected estimator: naive variance times the
    squared correction factor."""
    out = variance_naive(inputs) * correction_bracket(
        inputs.h2_beta, inputs.h2_alpha, omega, m
    )
    if out < 0:
        raise NumericalInconsistencyError(
            f"negative corrected variance {out}; inputs: {inputs}, moments: {m}, "
            f"omega: {omega}"
        )
    return out


def variance_inputs(x_cov: CovarianceMatrix, z_cov: CovarianceMatrix,
                    phi_beta: np.ndarray, phi_alpha: np.ndarray,
                    phi_cross: np.ndarray, n: int, n_z: int,
                    h2_beta: float, h2_alpha: float,
                    kurtosis: np.ndarray | None = None) -> VarianceInputs:
    """Compute the variance trace functionals blockwise from diagonal profiles."""
    if x_cov.partition.ranges != z_cov.partition.ranges:
        raise DataError("covariances have incompatible block partitions")
    p = x_cov.dim
    for name, arr in (("phi_beta", phi_beta), ("phi_alpha", phi_alpha),
                      ("phi_cross", phi_cross)):
        if np.shape(arr) != (p,):
            raise DataError(f"{name} must have length p = {p}")
    slices = x_cov.partition.slices()
    beta_signal = sum(
        float(np.diag(x_cov.block_values[i]) @ phi_beta[sl])
        for i, sl in enumerate(slices))
    # effective covariance scale of the marginal estimates; the second term is
    # the prediction-noise share bundled through 1/h2
    omega_noise = beta_signal / (n * h2_beta)
    cross_quad = effect_noise_quad = cross_trace = kurt_sum = 0.0
    alpha_signal = ld_product = beta_quad = alpha_quad = 0.0
    alpha_sq_quad = score_sq_quad = 0.0
    alpha_cross_mix = score_cross_mix = cross_sq_mix = 0.0
    for i, sl in enumerate(slices):
        bx = x_cov.block_values[i]
        bz = z_cov.block_values[i]
        b = phi_beta[sl]
        a = phi_alpha[sl]
        d = phi_cross[sl]
        m_zx = bz @ bx
        diag_zx = np.diag(m_zx)
        cross_quad += float(d @ (m_zx * m_zx.T) @ d)
        za_z = (bz * a[None, :]) @ bz          # Sz P_aa Sz
        xb_x = (bx * b[None, :]) @ bx          # Sx P_bb Sx
        effect_noise_quad += float(np.sum(za_z * xb_x))
        cross_trace += float(diag_zx @ d)
        if kurtosis is not None:
            kurt_sum += float(kurtosis[sl] @ diag_zx ** 2)
        alpha_signal += float(np.diag(bz) @ a)
        ld_product += float(np.sum(bx * bz))
        beta_quad += float(np.sum(bz * xb_x))
        alpha_quad += float(np.sum(bx * za_z))
        # norm-fluctuation traces
        alpha_sq_quad += float(a @ (bz * bz) @ a)
        omega_b = xb_x + omega_noise * bx      # Omega block
        z_omega = bz @ omega_b
        score_sq_quad += float(np.sum(z_omega * z_omega.T))
        # tr(M Sx P_ba) = sum_i d_i (M Sx)_ii for symmetric factors
        alpha_cross_mix += float((za_z * bx).sum(axis=1) @ d)
        score_cross_mix += float(((z_omega @ bz) * bx).sum(axis=1) @ d)
        cross_sq_mix += float(np.sum((bz @ (d[:, None] * bx)) * (m_zx * d[None, :]).T))
    return VarianceInputs(
        n=n, n_z=n_z, h2_beta=h2_beta, h2_alpha=h2_alpha, p=p,
        cross_quad=cross_quad, effect_noise_quad=effect_noise_quad,
        cross_trace=cross_trace, kurtosis_sum=kurt_sum,
        beta_signal=beta_signal, alpha_signal=alpha_signal,
        ld_product_trace=ld_product, beta_quad=beta_quad, alpha_quad=alpha_quad,
        alpha_sq_quad=alpha_sq_quad, score_sq_quad=score_sq_quad,
        alpha_cross_mix=alpha_cross_mix, score_cross_mix=score_cross_mix,
        cross_sq_mix=cross_sq_mix,
    )
