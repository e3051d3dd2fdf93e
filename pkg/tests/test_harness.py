"""Experiment runner: config parsing, determinism, aggregation, file pipeline."""

import numpy as np
import pytest

import transcorr as tc
from transcorr.config import parse_config
from transcorr.dataio import read_manifest, sha256_file, write_summary_stats
from transcorr.errors import ConfigError, DataError
from transcorr.estimators import center, marginal_summary_stats, naive_correlation, predict_traits
from transcorr.harness import aggregate_raw_csv, estimate_from_files, run_experiment
from transcorr.moments import write_moments
from transcorr.rng import derive_seed
from transcorr.simulate import variant_ids, write_genotypes, write_traits

TINY_CONFIG = """
config_id = tiny
dims.n = 300
dims.n_z = 120
dims.n_w = 150
dims.p = 24
ld.blocks = 12,12
ld.x = ar:0.5,0.3
ld.z = ar:0.2
effects.target_corr = 0.4
effects.overlap = 1.0
traits.h2_beta = 0.6
traits.h2_alpha = 0.6
estimators.panels = ref-x:0.2,ref-z:0.2,ref-mixed:0.2
replicates = 4
base_seed = 99
"""


def tiny_config(**overrides):
    cfg = parse_config(TINY_CONFIG)
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg


def test_config_text_roundtrip():
    cfg = tiny_config()
    again = parse_config(cfg.to_text())
    assert again == cfg


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(TINY_CONFIG + "\ndims.bogus = 3\n")


def test_config_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(TINY_CONFIG + "\ndims.n = 4\n")


def test_config_missing_required():
    with pytest.raises(ConfigError, match="missing required"):
        parse_config("dims.n = 10\n")


def test_config_panels_need_n_w():
    text = TINY_CONFIG.replace("dims.n_w = 150\n", "")
    with pytest.raises(ConfigError, match="n_w"):
        parse_config(text)


def test_config_bad_panel_kind():
    with pytest.raises(ConfigError, match="panel"):
        tiny_config(panels=(("ref-q", 0.1),))
    with pytest.raises(ConfigError, match="lambda"):
        tiny_config(panels=(("ref-x", 0.0),))


def test_config_blocks_must_cover_p():
    cfg = tiny_config(block_sizes=(12, 13))
    with pytest.raises(ConfigError):
        cfg.partition()


def test_run_experiment_shapes_and_aggregation(tmp_path):
    cfg = tiny_config()
    table = run_experiment(cfg, out_dir=str(tmp_path))
    # marginal + three panels
    ids = {row.config_id for row in table.rows}
    assert ids == {"tiny", "tiny:ref-x", "tiny:ref-z", "tiny:ref-mixed"}
    assert table.n_failed == 0
    # independent one-pass recomputation matches to 1e-10
    oracle = aggregate_raw_csv(table.raw_path)
    for row in table.rows:
        mean, se, count = oracle[(row.config_id, row.estimator)]
        assert row.mean == pytest.approx(mean, abs=1e-10)
        assert row.se == pytest.approx(se, abs=1e-10)
        assert row.n_used == count


def test_run_experiment_sample_debiased_moments(tmp_path):
    # per-replicate moment estimation: corrections still finite and the run
    # stays deterministic
    cfg = tiny_config(panels=(), n_w=None, replicates=3,
                      moments_mode="sample-debiased", n=600)
    table = run_experiment(cfg, out_dir=str(tmp_path / "a"))
    assert table.n_failed == 0
    corrected = [r for r in table.rows if r.estimator == "g_corrected"]
    assert corrected and np.isfinite(corrected[0].mean)
    run_experiment(cfg, out_dir=str(tmp_path / "b"))
    assert ((tmp_path / "a" / "raw.csv").read_bytes()
            == (tmp_path / "b" / "raw.csv").read_bytes())


def test_run_experiment_single_replicate_se_sentinel(tmp_path):
    cfg = tiny_config(replicates=1, panels=(), n_w=None)
    table = run_experiment(cfg, out_dir=str(tmp_path))
    raw = (tmp_path / "raw.csv").read_text().splitlines()
    assert len(raw) == 2    # header + one row
    for row in table.rows:
        assert np.isnan(row.se)


def test_run_experiment_deterministic_across_workers(tmp_path):
    cfg = tiny_config()
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_experiment(cfg, out_dir=str(a), workers=1)
    run_experiment(cfg, out_dir=str(b), workers=2)
    assert (a / "raw.csv").read_bytes() == (b / "raw.csv").read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_run_experiment_seed_changes_results(tmp_path):
    cfg = tiny_config()
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_experiment(cfg, out_dir=str(a))
    run_experiment(cfg.with_seed(123), out_dir=str(b))
    assert (a / "raw.csv").read_bytes() != (b / "raw.csv").read_bytes()


def test_manifest_lists_every_file_with_hash(tmp_path):
    cfg = tiny_config(replicates=2)
    run_experiment(cfg, out_dir=str(tmp_path))
    manifest = read_manifest(tmp_path / "manifest.txt")
    assert manifest["seed.generator"] == "pcg64+splitmix64"
    assert manifest["seed.base"] == "99"
    for name in ("raw.csv", "summary.csv", "config.txt"):
        key = f"file.{name}.sha256"
        assert manifest[key] == sha256_file(tmp_path / name)


def test_partial_failures_recorded_and_excluded(tmp_path):
    # tiny sparse supports drawn independently: some replicates share no
    # causal variants and cannot realize the requested correlation
    cfg = tiny_config(panels=(), n_w=None, replicates=30,
                      sparsity_beta=0.1, sparsity_alpha=0.1, overlap=None,
                      target_corr=0.4)
    table = run_experiment(cfg, out_dir=str(tmp_path))
    raw_lines = (tmp_path / "raw.csv").read_text().splitlines()[1:]
    failed = [l for l in raw_lines if l.endswith(",failed")]
    assert table.n_failed == len(failed)
    assert 0 < table.n_failed < 30
    for row in table.rows:
        assert row.n_used == 30 - table.n_failed


def _export_tiny_dataset(tmp_path, n=400, n_z=150, p=16, seed=5):
    part = tc.BlockPartition.from_sizes([8, 8])
    x_cov = tc.build_block_covariance(
        part, [tc.build_ar_covariance(0.5, 8).block_values[0]] * 2)
    z_cov = tc.build_block_covariance(
        part, [tc.build_ar_covariance(0.2, 8).block_values[0]] * 2)
    model = tc.EffectModel(p=p, target_corr=0.5, overlap=1.0)
    pair = tc.sample_effect_pair(model, derive_seed(seed, 0))
    x = tc.sample_genotypes(n, p, 0.05, 0.45, x_cov, derive_seed(seed, 1))
    y = tc.synthesize_traits(x, pair.beta, 0.6, derive_seed(seed, 2))
    bhat = marginal_summary_stats(x, y)
    z = tc.sample_genotypes(n_z, p, 0.05, 0.45, z_cov, derive_seed(seed, 3))
    y_z = tc.synthesize_traits(z, pair.alpha, 0.6, derive_seed(seed, 4))
    moments = tc.blockwise_moments(x_cov, z_cov, n_x=n)

    stats_path = tmp_path / "stats.csv"
    geno_path = tmp_path / "geno.csv"
    traits_path = tmp_path / "traits.csv"
    moments_path = tmp_path / "moments.csv"
    write_summary_stats(bhat.values, variant_ids(p), n, stats_path)
    write_genotypes(z, geno_path)
    write_traits(y_z, traits_path)
    write_moments(moments, moments_path)

    g = naive_correlation(center(y_z.values), center(predict_traits(z, bhat).values))
    expected = tc.correct_marginal(g, 0.6, 0.6, p / n, moments)
    return stats_path, geno_path, traits_path, moments_path, g, expected


def test_estimate_from_files_matches_in_memory(tmp_path):
    stats, geno, traits, moments, g, expected = _export_tiny_dataset(tmp_path)
    result = estimate_from_files(stats, geno, traits, moments,
                                 h2_beta=0.6, h2_alpha=0.6)
    assert result.g_naive == pytest.approx(g, abs=1e-12)
    assert result.g_corrected == pytest.approx(expected, abs=1e-12)
    assert result.omega == pytest.approx(16 / 400)


def test_estimate_from_files_detects_shuffled_variants(tmp_path):
    stats, geno, traits, moments, _, _ = _export_tiny_dataset(tmp_path)
    lines = stats.read_text().splitlines()
    # swap two variant rows
    lines[2], lines[3] = lines[3], lines[2]
    stats.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="variant-ID mismatch"):
        estimate_from_files(stats, geno, traits, moments, 0.6, 0.6)


def test_estimate_from_files_requires_n_header(tmp_path):
    stats, geno, traits, moments, _, _ = _export_tiny_dataset(tmp_path)
    lines = [l for l in stats.read_text().splitlines() if not l.startswith("#")]
    stats.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="n="):
        estimate_from_files(stats, geno, traits, moments, 0.6, 0.6)


def test_estimate_from_files_length_mismatch(tmp_path):
    stats, geno, traits, moments, _, _ = _export_tiny_dataset(tmp_path)
    lines = traits.read_text().splitlines()
    traits.write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(DataError, match="length"):
        estimate_from_files(stats, geno, traits, moments, 0.6, 0.6)
