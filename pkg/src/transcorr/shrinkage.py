"""Asymptotic limits of the naive estimators and the LD-heterogeneity shrinkage path.

The shrinkage path interpolates the second-population LD toward the first:
with mixing weight t, the limit of the naive correlation is phi * h_alpha *
S(t), where S(t) = (c*t + d) / sqrt(a*t + b) for moment-driven coefficients

    a = b3_x - b1_x2z + (omega / h2_beta) * (b2_x - b1_xz)
    b = b1_x2z + (omega / h2_beta) * b1_xz
    c = b2_x - b1_xz
    d = b1_xz

t = 0 is cross-population prediction, t = 1 within-population.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .estimators import VParams, correction_bracket
from .moments import MomentEstimates


@dataclass
class ShrinkageParams:
    """Inputs to the shrinkage path: aspect ratio, heritability, moments."""

    omega: float
    h2_beta: float
    moments: MomentEstimates

    def __post_init__(self):
        if self.omega <= 0:
            raise DataError(f"omega must be positive, got {self.omega}")
        if not 0.0 < self.h2_beta <= 1.0:
            raise DataError(f"h2_beta must lie in (0, 1], got {self.h2_beta}")
        m = self.moments
        for name in ("b1_xz", "b1_x2z", "b2_x", "b3_x"):
            if getattr(m, name) <= 0:
                raise DataError(f"moment {name} must be positive, got {getattr(m, name)}")


def _coefficients(params: ShrinkageParams):
    m = params.moments
    ratio = params.omega / params.h2_beta
    a = m.b3_x - m.b1_x2z + ratio * (m.b2_x - m.b1_xz)
    b = m.b1_x2z + ratio * m.b1_xz
    c = m.b2_x - m.b1_xz
    d = m.b1_xz
    return a, b, c, d


def shrinkage_path(t: float, params: ShrinkageParams) -> float:
    """S(t): the naive estimator's asymptotic attenuation at LD mix t."""
    if not 0.0 <= t <= 1.0:
        raise DataError(f"t must lie in [0, 1], got {t}")
    a, b, c, d = _coefficients(params)
    num = c * t + d
    den = a * t + b
    if den <= 0 or num <= 0:
        raise DataError(f"shrinkage path undefined at t={t}: num={num}, den={den}")
    return float(num / np.sqrt(den))


def shrinkage_derivative(t: float, params: ShrinkageParams, approx: bool = False) -> float:
    """dS/dt, exact or in the large-omega approximation.

    The approximation drops the moment-difference terms from a and b; it is
    only trustworthy for omega above roughly 10 and visibly wrong for small
    omega, where the sign depends on unestimated constants.
    """
    if not 0.0 <= t <= 1.0:
        raise DataError(f"t must lie in [0, 1], got {t}")
    a, b, c, d = _coefficients(params)
    if approx:
        ratio = params.omega / params.h2_beta
        base = c * t + d
        if base <= 0:
            raise DataError(f"shrinkage path undefined at t={t}")
        return float(c / (2.0 * np.sqrt(ratio) * np.sqrt(base)))
    den = a * t + b
    if den <= 0:
        raise DataError(f"shrinkage path undefined at t={t}")
    return float((a * (c * t - d) + 2.0 * b * c) / (2.0 * den ** 1.5))


def marginal_limit(phi: float, h2_beta: float, h2_alpha: float, omega: float,
                   m: MomentEstimates) -> float:
    """Asymptotic value of the naive marginal-score correlation.

    Equals phi * h_alpha * S(0); always attenuated relative to phi * h_alpha
    for unit-diagonal LD.
    """
    if not -1.0 <= phi <= 1.0:
        raise DataError(f"phi must lie in [-1, 1], got {phi}")
    bracket = correction_bracket(h2_beta, h2_alpha, omega, m)      # validates args
    return phi / float(np.sqrt(bracket))


def panel_limit(phi: float, h2_beta: float, h2_alpha: float, omega: float,
                v: VParams) -> float:
    """Asymptotic value of the naive ridge reference-panel correlation.

    The resolvent trace v1 enters squared: the limit's numerator is
    h_beta * v1 before squaring, so with S_w = I the value is independent of
    the ridge penalty (uniform shrinkage leaves a cosine unchanged) and the
    lam -> infinity limit recovers the marginal-score value exactly.
    """
    if not -1.0 <= phi <= 1.0:
        raise DataError(f"phi must lie in [-1, 1], got {phi}")
    if not 0.0 < h2_beta <= 1.0 or not 0.0 < h2_alpha <= 1.0:
        raise DataError(f"heritabilities must lie in (0, 1], got {h2_beta}, {h2_alpha}")
    if omega <= 0:
        raise DataError(f"omega must be positive, got {omega}")
    bracket = v.v1 ** 2 * h2_beta / (v.v2 * omega + v.v3 * h2_beta)
    return phi * float(np.sqrt(h2_alpha)) * float(np.sqrt(bracket))


CURVE_CSV_HEADER = "omega,t,S,limit_G"


def shrinkage_curve(omega_grid, t_grid, h2_beta: float, moments: MomentEstimates,
                    phi: float = 1.0, h2_alpha: float | None = None) -> list[tuple]:
    """Tabulate (omega, t, S, limit_G) over the grids.

    limit_G = phi * sqrt(h2_alpha) * S(t), the naive-correlation limit at the
    given effect correlation; h2_alpha defaults to h2_beta.
    """
    omega_grid = list(omega_grid)
    t_grid = list(t_grid)
    if not omega_grid or not t_grid:
        raise DataError("omega and t grids must be non-empty")
    if h2_alpha is None:
        h2_alpha = h2_beta
    rows = []
    for omega in omega_grid:
        params = ShrinkageParams(omega=omega, h2_beta=h2_beta, moments=moments)
        for t in t_grid:
            s = shrinkage_path(t, params)
            rows.append((omega, t, s, phi * np.sqrt(h2_alpha) * s))
    return rows


def write_curve(rows, path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write(CURVE_CSV_HEADER + "\n")
        for omega, t, s, limit_g in rows:
            fh.write(",".join(format(v, ".17g") for v in (omega, t, s, limit_g)) + "\n")
