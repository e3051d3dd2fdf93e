"""Replicated simulation runner and the file-based estimation pipeline.

One replicate = derive seeds, simulate both cohorts (plus reference panels if
configured), run every configured estimator, emit one raw CSV row per
estimator set.  Replicates are independent and may run in worker processes;
output is sorted by replicate index so results are byte-identical regardless
of worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import ExperimentConfig, parse_config
from .dataio import (read_summary_stats, sha256_file, sha256_text, write_manifest)
from .errors import DataError, TranscorrError
from .estimators import (KIND_MARGINAL, RESULTS_CSV_HEADER, EffectEstimate,
                         EstimationResult, center, correct_marginal,
                         correct_reference, marginal_summary_stats,
                         naive_correlation, panel_adjustment, predict_traits)
from .ld import estimate_covariance
from .moments import PROVENANCE_SAMPLE, blockwise_moments, read_moments
from .rng import GENERATOR_FAMILY, derive_seed
from .simulate import (GenotypeMatrix, read_genotypes, read_traits,
                       sample_effect_pair, sample_genotypes, standardize_columns,
                       synthesize_traits)

# seed stream tags, one per stochastic component of a replicate
_SEED_EFFECTS = 0
_SEED_X = 1
_SEED_Z = 2
_SEED_NOISE_X = 3
_SEED_NOISE_Z = 4
_SEED_W = 5


@dataclass
class SummaryRow:
    config_id: str
    estimator: str
    mean: float
    se: float
    n_used: int


@dataclass
class SummaryTable:
    """Across-replicate means and dispersions, plus the raw per-replicate CSV.

    `se` is the sample standard deviation across replicates (per-replicate
    dispersion); with a single replicate it is reported as nan.
    """

    rows: list[SummaryRow]
    raw_path: str | None
    replicates: int
    n_failed: int


class _Context:
    """Per-process cache of everything shared across replicates of one config."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.x_cov = config.x_cov()
        self.z_cov = config.z_cov()
        self.x_cov.sqrt_blocks()
        self.z_cov.sqrt_blocks()
        self.model = config.effect_model()
        self.omega = config.p / config.n
        if config.moments_mode == "population-exact":
            self.moments = blockwise_moments(self.x_cov, self.z_cov, config.n)
        else:
            self.moments = None    # estimated per replicate


def _maybe_center(config: ExperimentConfig, values: np.ndarray) -> np.ndarray:
    return center(values) if config.center else values


def _sample_panel(ctx: _Context, kind: str, rep: int) -> GenotypeMatrix:
    cfg = ctx.config
    if kind == "ref-x":
        return sample_genotypes(cfg.n_w, cfg.p, cfg.maf_low, cfg.maf_high,
                                ctx.x_cov, derive_seed(cfg.base_seed, rep, _SEED_W, 0))
    if kind == "ref-z":
        return sample_genotypes(cfg.n_w, cfg.p, cfg.maf_low, cfg.maf_high,
                                ctx.z_cov, derive_seed(cfg.base_seed, rep, _SEED_W, 1))
    # mixed panel: first half of the samples carries the first population's LD
    n_first = cfg.n_w // 2
    first = sample_genotypes(n_first, cfg.p, cfg.maf_low, cfg.maf_high,
                             ctx.x_cov, derive_seed(cfg.base_seed, rep, _SEED_W, 2))
    second = sample_genotypes(cfg.n_w - n_first, cfg.p, cfg.maf_low, cfg.maf_high,
                              ctx.z_cov, derive_seed(cfg.base_seed, rep, _SEED_W, 3))
    stacked = np.vstack([first.values, second.values])
    return GenotypeMatrix(values=stacked, maf=first.maf, standardized=True)


def run_replicate(ctx: _Context, rep: int) -> list[tuple[str, EstimationResult]]:
    """All configured estimators for one replicate; pure in (config, rep)."""
    cfg = ctx.config
    pair = sample_effect_pair(ctx.model, derive_seed(cfg.base_seed, rep, _SEED_EFFECTS))
    x = sample_genotypes(cfg.n, cfg.p, cfg.maf_low, cfg.maf_high, ctx.x_cov,
                         derive_seed(cfg.base_seed, rep, _SEED_X))
    y = synthesize_traits(x, pair.beta, cfg.h2_beta,
                          derive_seed(cfg.base_seed, rep, _SEED_NOISE_X))
    bhat = marginal_summary_stats(x, y)
    moments = ctx.moments
    if moments is None:
        x_hat = estimate_covariance(x, ctx.x_cov.partition)
    del x
    z = sample_genotypes(cfg.n_z, cfg.p, cfg.maf_low, cfg.maf_high, ctx.z_cov,
                         derive_seed(cfg.base_seed, rep, _SEED_Z))
    y_z = synthesize_traits(z, pair.alpha, cfg.h2_alpha,
                            derive_seed(cfg.base_seed, rep, _SEED_NOISE_Z))
    if moments is None:
        z_hat = estimate_covariance(z, ctx.z_cov.partition)
        moments = blockwise_moments(x_hat, z_hat, cfg.n, PROVENANCE_SAMPLE)
    y_obs = _maybe_center(cfg, y_z.values)
    y_pred = _maybe_center(cfg, predict_traits(z, bhat).values)
    g = naive_correlation(y_obs, y_pred)
    g_m = correct_marginal(g, cfg.h2_beta, cfg.h2_alpha, ctx.omega, moments)
    rows = []
    if cfg.marginal:
        rows.append((cfg.config_id, EstimationResult(
            g_naive=g, g_corrected=g_m, h2_beta=cfg.h2_beta, h2_alpha=cfg.h2_alpha,
            omega=ctx.omega, moments=moments,
        )))
    for kind, lam in cfg.panels:
        w = _sample_panel(ctx, kind, rep)
        w_cov = estimate_covariance(w, ctx.x_cov.partition)
        del w
        b_w, v = panel_adjustment(bhat, w_cov, ctx.x_cov, ctx.z_cov, lam)
        yw_pred = _maybe_center(cfg, predict_traits(z, b_w).values)
        g_w = naive_correlation(y_obs, yw_pred)
        g_mw = correct_reference(g_w, cfg.h2_beta, cfg.h2_alpha, ctx.omega, v)
        rows.append((f"{cfg.config_id}:{kind}", EstimationResult(
            g_naive=g, g_corrected=g_m, g_w=g_w, g_mw=g_mw, lam=lam,
            h2_beta=cfg.h2_beta, h2_alpha=cfg.h2_alpha, omega=ctx.omega,
            moments=moments,
        )))
    return rows


_WORKER_CTX: dict[str, _Context] = {}


def _worker_run(config_text: str, rep: int):
    with threadpool_limits(limits=1):
        ctx = _WORKER_CTX.get(config_text)
        if ctx is None:
            ctx = _Context(parse_config(config_text))
            _WORKER_CTX.clear()
            _WORKER_CTX[config_text] = ctx
        try:
            rows = run_replicate(ctx, rep)
            return rep, [(cid, _result_fields(res)) for cid, res in rows], None
        except TranscorrError as exc:
            return rep, [], f"{type(exc).__name__}: {exc}"


def _result_fields(res: EstimationResult) -> dict:
    return {
        "g_naive": res.g_naive, "g_corrected": res.g_corrected,
        "g_w": res.g_w, "g_mw": res.g_mw,
        "h2_beta": res.h2_beta, "h2_alpha": res.h2_alpha,
        "omega": res.omega, "lambda": res.lam, "status": res.status,
    }


_ESTIMATOR_COLUMNS = ("g_naive", "g_corrected", "g_w", "g_mw")


def run_experiment(config: ExperimentConfig, out_dir: str | None = None,
                   workers: int | None = None) -> SummaryTable:
    """Run all replicates, write raw/summary CSVs and a manifest, aggregate.

    Deterministic given config and base_seed regardless of worker count:
    replicate seeds are derived, not shared, rows are written in replicate
    order, and BLAS is pinned to one thread per process so summation order
    does not depend on the threading environment.  Failed replicates are
    recorded with status=failed and excluded from aggregates.
    """
    out_dir = out_dir or config.output_dir or "."
    workers = workers if workers is not None else config.workers
    os.makedirs(out_dir, exist_ok=True)
    config_text = config.to_text()

    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_worker_run, config_text, rep)
                       for rep in range(config.replicates)]
            results = [f.result() for f in futures]
    else:
        with threadpool_limits(limits=1):
            ctx = _Context(config)
            for rep in range(config.replicates):
                try:
                    rows = run_replicate(ctx, rep)
                    results.append(
                        (rep, [(cid, _result_fields(r)) for cid, r in rows], None))
                except TranscorrError as exc:
                    results.append((rep, [], f"{type(exc).__name__}: {exc}"))
    results.sort(key=lambda item: item[0])

    raw_path = os.path.join(out_dir, "raw.csv")
    n_failed = 0
    groups: dict[str, dict[str, list[float]]] = {}
    with open(raw_path, "wt", encoding="utf-8") as fh:
        fh.write(RESULTS_CSV_HEADER + "\n")
        for rep, rows, error in results:
            if error is not None:
                n_failed += 1
                fh.write(f"{config.config_id},{rep},,,,,,,,,failed\n")
                continue
            for cid, fields in rows:
                fh.write(_format_row(cid, rep, fields) + "\n")
                bucket = groups.setdefault(cid, {c: [] for c in _ESTIMATOR_COLUMNS})
                for col in _ESTIMATOR_COLUMNS:
                    if fields[col] is not None:
                        bucket[col].append(fields[col])

    summary_rows = []
    for cid in sorted(groups):
        for col in _ESTIMATOR_COLUMNS:
            vals = groups[cid][col]
            if not vals:
                continue
            arr = np.asarray(vals)
            se = float(arr.std(ddof=1)) if arr.size > 1 else float("nan")
            summary_rows.append(SummaryRow(
                config_id=cid, estimator=col, mean=float(arr.mean()), se=se,
                n_used=arr.size,
            ))
    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "wt", encoding="utf-8") as fh:
        fh.write("config_id,estimator,mean,se,n_used,n_failed\n")
        for row in summary_rows:
            fh.write(",".join([
                row.config_id, row.estimator, format(row.mean, ".17g"),
                format(row.se, ".17g"), str(row.n_used), str(n_failed),
            ]) + "\n")

    config_path = os.path.join(out_dir, "config.txt")
    with open(config_path, "wt", encoding="utf-8") as fh:
        fh.write(config_text)
    manifest = {
        "config.id": config.config_id,
        "config.hash": sha256_text(config_text),
        "seed.base": str(config.base_seed),
        "seed.generator": GENERATOR_FAMILY,
        "replicates": str(config.replicates),
        "replicates.failed": str(n_failed),
        "version.transcorr": __version__,
        "version.numpy": np.__version__,
        "file.raw.csv.sha256": sha256_file(raw_path),
        "file.summary.csv.sha256": sha256_file(summary_path),
        "file.config.txt.sha256": sha256_file(config_path),
    }
    write_manifest(manifest, os.path.join(out_dir, "manifest.txt"))
    return SummaryTable(rows=summary_rows, raw_path=raw_path,
                        replicates=config.replicates, n_failed=n_failed)


def _format_row(config_id: str, rep: int, fields: dict) -> str:
    def fmt(v):
        return "" if v is None else format(v, ".17g")

    return ",".join([
        config_id, str(rep),
        fmt(fields["g_naive"]), fmt(fields["g_corrected"]),
        fmt(fields["g_w"]), fmt(fields["g_mw"]),
        fmt(fields["h2_beta"]), fmt(fields["h2_alpha"]),
        fmt(fields["omega"]), fmt(fields["lambda"]), fields["status"],
    ])


def aggregate_raw_csv(path) -> dict[tuple[str, str], tuple[float, float, int]]:
    """Independent one-pass mean/SE recomputation from a raw CSV.

    Returns {(config_id, estimator): (mean, se, count)}; used to cross-check
    SummaryTable aggregation.
    """
    sums: dict[tuple[str, str], list[float]] = {}
    with open(path, "rt", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != RESULTS_CSV_HEADER:
            raise DataError(f"{path}: unexpected raw CSV header")
        col_names = header.split(",")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            row = dict(zip(col_names, parts))
            if row["status"] == "failed":
                continue
            for col in _ESTIMATOR_COLUMNS:
                if row[col] == "":
                    continue
                key = (row["config_id"], col)
                acc = sums.setdefault(key, [0.0, 0.0, 0])
                v = float(row[col])
                acc[0] += v
                acc[1] += v * v
                acc[2] += 1
    out = {}
    for key, (s, s2, count) in sums.items():
        mean = s / count
        var = (s2 - count * mean * mean) / (count - 1) if count > 1 else float("nan")
        out[key] = (mean, float(np.sqrt(max(var, 0.0))) if count > 1 else float("nan"), count)
    return out


def estimate_from_files(summary_stats_path, genotype_path, traits_path,
                        moments_path, h2_beta: float, h2_alpha: float,
                        center_traits: bool = True) -> EstimationResult:
    """Run the predict -> correlate -> correct pipeline on user-supplied files.

    The aspect ratio comes from the n recorded in the summary-statistics
    header; variant order must agree between the summary statistics and the
    genotype panel.
    """
    values, stat_ids, n = read_summary_stats(summary_stats_path)
    geno, geno_ids = read_genotypes(genotype_path)
    if stat_ids != geno_ids:
        raise DataError(
            "variant-ID mismatch between summary statistics and genotype panel "
            f"({summary_stats_path} vs {genotype_path})"
        )
    if not geno.standardized:
        geno = GenotypeMatrix(values=standardize_columns(geno.values),
                              maf=geno.maf, standardized=True)
    traits = read_traits(traits_path)
    if traits.shape != (geno.n,):
        raise DataError(
            f"trait length {traits.shape[0]} != genotype sample count {geno.n}"
        )
    moments = read_moments(moments_path)
    if moments.p != geno.p:
        raise DataError(f"moments computed for p={moments.p}, data has p={geno.p}")
    bhat = EffectEstimate(values=values, kind=KIND_MARGINAL, n_source=n)
    pred = predict_traits(geno, bhat).values
    y_obs = center(traits) if center_traits else traits
    y_pred = center(pred) if center_traits else pred
    g = naive_correlation(y_obs, y_pred)
    omega = geno.p / n
    g_m = correct_marginal(g, h2_beta, h2_alpha, omega, moments)
    return EstimationResult(
        g_naive=g, g_corrected=g_m, h2_beta=h2_beta, h2_alpha=h2_alpha,
        omega=omega, moments=moments,
    )
