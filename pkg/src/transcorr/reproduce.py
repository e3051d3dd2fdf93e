"""Desk-scale reproductions: the headline summary table and the three figures.

Desk scale trades sample size for runtime while preserving the aspect-ratio
ordering of the regimes of interest; paper scale uses the full-size study
dimensions and refuses to run without an explicit resource override.  Real
reference-panel LD is not shipped, so synthetic AR/block LD substitutes for
it; the substitution is flagged in each manifest.
"""

from __future__ import annotations

import os
from importlib import resources

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dataio import sha256_file, write_manifest
from .errors import ConfigError
from .harness import run_experiment
from .moments import MomentEstimates, read_moments
from .rng import GENERATOR_FAMILY
from .shrinkage import shrinkage_curve, write_curve

TARGETS = ("table1", "fig1", "fig2", "fig3")
SCALES = ("desk", "paper")

# block sizes used by every desk-scale synthetic LD structure
DESK_BLOCK_SIZES = (350, 310, 300, 290, 270, 250, 230)
DESK_RHO_X = "ar:0.2,0.3,0.4,0.5,0.6,0.7,0.8"
DESK_RHO_Z = "ar:0.8,0.7,0.6,0.5,0.4,0.3,0.2"


def biobank_moments() -> MomentEstimates:
    """Frozen European/Asian biobank LD moment estimates (regression fixture)."""
    path = resources.files("transcorr").joinpath("fixtures/biobank_moments.csv")
    with resources.as_file(path) as p:
        return read_moments(p)


def table1_config(scale: str = "desk") -> ExperimentConfig:
    if scale == "desk":
        return ExperimentConfig(
            config_id="table1-desk",
            n=20000, n_z=500, p=2000,
            block_sizes=DESK_BLOCK_SIZES, blocks_file=None,
            ld_x=DESK_RHO_X, ld_z=DESK_RHO_Z,
            sparsity_beta=0.1, sparsity_alpha=0.1, overlap=0.1, target_corr=0.5,
            h2_beta=0.6, h2_alpha=0.6,
            replicates=200, base_seed=20240501,
        )
    return ExperimentConfig(
        config_id="table1-paper",
        n=350000, n_z=1000, p=461488,
        block_sizes=None, blocks_file="<real-genotype-ld-blocks>",
        ld_x="file:<real-genotype-ld>", ld_z="file:<real-genotype-ld>",
        sparsity_beta=0.1, sparsity_alpha=0.1, overlap=0.1, target_corr=0.5,
        h2_beta=0.6, h2_alpha=0.6,
        replicates=500, base_seed=20240501,
    )


def fig2_config(scale: str = "desk") -> ExperimentConfig:
    # ref panels help most when the training GWAS is large relative to p;
    # omega = 0.2 keeps the panel ordering well separated at desk runtimes
    if scale == "desk":
        return ExperimentConfig(
            config_id="fig2-desk",
            n=7000, n_z=500, n_w=7000, p=1400,
            block_sizes=(200,) * 7, blocks_file=None,
            ld_x="ar:0.8", ld_z="ar:0.2",
            sparsity_beta=1.0, sparsity_alpha=1.0, overlap=1.0, target_corr=0.3,
            h2_beta=0.4, h2_alpha=0.4,
            panels=(("ref-x", 0.5), ("ref-mixed", 0.5), ("ref-z", 0.5)),
            replicates=200, base_seed=20240502,
        )
    return ExperimentConfig(
        config_id="fig2-paper",
        n=14000, n_z=500, n_w=5000, p=14000,
        block_sizes=(2000,) * 7, blocks_file=None,
        ld_x="ar:0.8", ld_z="ar:0.2",
        sparsity_beta=1.0, sparsity_alpha=1.0, overlap=1.0, target_corr=0.3,
        h2_beta=0.4, h2_alpha=0.4,
        panels=(("ref-x", 0.5), ("ref-mixed", 0.5), ("ref-z", 0.5)),
        replicates=200, base_seed=20240502,
    )


FIG1_H2_LEVELS = (0.4, 0.8)
FIG3_H2_LEVELS = (0.2, 0.4, 0.6, 0.8)
FIG3_PHI = 0.3


def _log_omega_grid(lo: float = 1e-3, hi: float = 50.0, points: int = 40):
    return list(np.geomspace(lo, hi, points))


def _estimate_paper_cost(config: ExperimentConfig) -> str:
    flops = 2.0 * config.replicates * config.p ** 2 * (
        config.n + config.n_z + (config.n_w or 0)
    )
    hours = flops / 5e10 / 3600.0
    return (f"~{flops:.2e} floating-point operations "
            f"(~{hours:.1f} h at 50 GFLOP/s), plus genotype storage of "
            f"~{8.0 * config.n * config.p / 1e9:.1f} GB per replicate")


def reproduce(target: str, scale: str = "desk", out_dir: str = ".",
              allow_paper_scale: bool = False, workers: int = 1,
              base_seed: int | None = None) -> dict[str, str]:
    """Emit the CSV artifacts for one reproduction target plus a manifest.

    Returns {artifact name: path}.  Paper scale refuses to run without
    allow_paper_scale and, for targets needing real reference LD, refuses
    outright since that data is not shipped.
    """
    if target not in TARGETS:
        raise ConfigError(f"unknown reproduction target {target!r}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}")
    os.makedirs(out_dir, exist_ok=True)
    if scale == "paper" and not allow_paper_scale:
        cost = ""
        if target in ("table1", "fig2"):
            cost = "; estimated cost " + _estimate_paper_cost(
                table1_config("paper") if target == "table1" else fig2_config("paper")
            )
        raise ConfigError(
            f"paper-scale {target} requires an explicit resource override "
            f"(--allow-paper-scale){cost}"
        )

    if target == "fig1":
        return _reproduce_fig1(out_dir)
    if target == "fig3":
        return _reproduce_fig3(out_dir)
    if target == "table1":
        config = table1_config(scale)
    else:
        config = fig2_config(scale)
    if scale == "paper" and target == "table1":
        raise ConfigError(
            "paper-scale table1 needs real-genotype LD blocks that are not "
            "shipped with this package; supply ld.x/ld.z covariance exports "
            "and run `transcorr simulate` directly"
        )
    if base_seed is not None:
        config = config.with_seed(base_seed)
    table = run_experiment(config, out_dir=out_dir, workers=workers)
    files = {
        "raw": table.raw_path,
        "summary": os.path.join(out_dir, "summary.csv"),
        "config": os.path.join(out_dir, "config.txt"),
        "manifest": os.path.join(out_dir, "manifest.txt"),
    }
    if target == "table1":
        files["headline"] = _write_headline_table(table, config, out_dir)
    _amend_manifest(files["manifest"], target, scale, extra={
        "ld.substitute": "synthetic-ar (real reference-panel LD not shipped)",
        **({"file.headline_table.csv.sha256": sha256_file(files["headline"])}
           if "headline" in files else {}),
    })
    return files


def _write_headline_table(table, config: ExperimentConfig, out_dir: str) -> str:
    """Mean (dispersion) rows per estimator, in the headline-table layout."""
    path = os.path.join(out_dir, "headline_table.csv")
    labels = {"g_naive": "naive", "g_corrected": "corrected"}
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write("estimator,n,sparsity,truth,mean,se\n")
        for row in table.rows:
            if row.estimator not in labels:
                continue
            fh.write(",".join([
                labels[row.estimator], str(config.n), str(config.sparsity_beta),
                str(config.target_corr),
                format(row.mean, ".4f"), format(row.se, ".4f"),
            ]) + "\n")
    return path


def _reproduce_fig1(out_dir: str) -> dict[str, str]:
    moments = biobank_moments()
    files = {}
    omega_grid = _log_omega_grid()
    t_grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    for h2 in FIG1_H2_LEVELS:
        rows = shrinkage_curve(omega_grid, t_grid, h2_beta=h2, moments=moments)
        path = os.path.join(out_dir, f"fig1_h2_{h2}.csv")
        write_curve(rows, path)
        files[f"curve_h2_{h2}"] = path
    files["manifest"] = os.path.join(out_dir, "manifest.txt")
    _write_curve_manifest(files, "fig1", moments)
    return files


def _reproduce_fig3(out_dir: str) -> dict[str, str]:
    moments = biobank_moments()
    files = {}
    omega_grid = _log_omega_grid()
    for h2 in FIG3_H2_LEVELS:
        # t = 1 evaluates the within-population factor (second population's LD
        # replaced by the first's), t = 0 the cross-population factor
        rows = shrinkage_curve(omega_grid, [0.0, 1.0], h2_beta=h2,
                               moments=moments, phi=FIG3_PHI, h2_alpha=h2)
        path = os.path.join(out_dir, f"fig3_h2_{h2}.csv")
        write_curve(rows, path)
        files[f"curve_h2_{h2}"] = path
    files["manifest"] = os.path.join(out_dir, "manifest.txt")
    _write_curve_manifest(files, "fig3", moments)
    return files


def _write_curve_manifest(files: dict, target: str, moments: MomentEstimates) -> None:
    manifest_path = files["manifest"]
    entries = {
        "target": target,
        "moments.fixture": moments.csv_row(),
        "seed.generator": GENERATOR_FAMILY,
        "version.transcorr": __version__,
        "version.numpy": np.__version__,
    }
    for name, path in files.items():
        if name == "manifest":
            continue
        entries[f"file.{os.path.basename(path)}.sha256"] = sha256_file(path)
    write_manifest(entries, manifest_path)


def _amend_manifest(manifest_path: str, target: str, scale: str, extra: dict) -> None:
    from .dataio import read_manifest

    entries = read_manifest(manifest_path)
    entries["target"] = target
    entries["scale"] = scale
    entries.update(extra)
    write_manifest(entries, manifest_path)
