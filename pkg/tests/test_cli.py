"""Command-line interface: subcommands, exit codes, reproduction targets."""

import pytest

import transcorr as tc
from transcorr.cli import main
from transcorr.dataio import read_manifest
from transcorr.errors import ConfigError
from transcorr.ld import write_covariance
from transcorr.moments import read_moments, write_moments
from transcorr.reproduce import reproduce

from test_harness import TINY_CONFIG, _export_tiny_dataset


def test_simulate_command(tmp_path, capsys):
    cfg = tmp_path / "config.txt"
    cfg.write_text(TINY_CONFIG.replace("replicates = 4", "replicates = 2"))
    out = tmp_path / "out"
    code = main(["simulate", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    assert (out / "raw.csv").exists()
    assert (out / "manifest.txt").exists()
    assert "tiny" in capsys.readouterr().out


def test_simulate_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "config.txt"
    cfg.write_text("dims.bogus = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_estimate_command(tmp_path, capsys):
    stats, geno, traits, moments, _, expected = _export_tiny_dataset(tmp_path)
    out = tmp_path / "result.csv"
    code = main([
        "estimate", "--summary-stats", str(stats), "--genotypes", str(geno),
        "--traits", str(traits), "--moments", str(moments),
        "--h2-beta", "0.6", "--h2-alpha", "0.6", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("config_id,replicate,g_naive,g_corrected")
    row = lines[1].split(",")
    assert float(row[3]) == pytest.approx(expected, abs=1e-12)


def test_estimate_command_data_error_exit_3(tmp_path):
    stats, geno, traits, moments, _, _ = _export_tiny_dataset(tmp_path)
    bad = tmp_path / "bad_traits.csv"
    bad.write_text("sample_id,value\ns1,0.5\n")
    code = main([
        "estimate", "--summary-stats", str(stats), "--genotypes", str(geno),
        "--traits", str(bad), "--moments", str(moments),
        "--h2-beta", "0.6", "--h2-alpha", "0.6",
    ])
    assert code == 3


def test_moments_command(tmp_path, capsys):
    x = tc.build_ar_covariance(0.5, 6)
    z = tc.build_ar_covariance(0.2, 6)
    xp, zp = tmp_path / "x.csv", tmp_path / "z.csv"
    write_covariance(x, xp)
    write_covariance(z, zp)
    out = tmp_path / "moments.csv"
    assert main(["moments", "--x-cov", str(xp), "--z-cov", str(zp),
                 "--out", str(out)]) == 0
    m = read_moments(out)
    assert m.b1_xz == pytest.approx(tc.product_moment(x, z, (1, 1)))
    # sample-debiased mode requires --n
    assert main(["moments", "--x-cov", str(xp), "--z-cov", str(zp),
                 "--mode", "sample-debiased", "--out", str(out)]) == 2


def test_merge_blocks_command(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("1\t100\n101\t200\n")
    b.write_text("1\t150\n151\t200\n")
    out = tmp_path / "merged.txt"
    assert main(["merge-blocks", "--a", str(a), "--b", str(b), "--out", str(out)]) == 0
    merged = tc.read_block_file(out)
    assert merged.ranges == ((1, 200),)


def test_shrinkage_curve_command(tmp_path):
    mpath = tmp_path / "m.csv"
    write_moments(tc.biobank_moments(), mpath)
    out = tmp_path / "curve.csv"
    code = main(["shrinkage-curve", "--moments", str(mpath), "--h2-beta", "0.4",
                 "--omega-points", "5", "--t", "0,1", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "omega,t,S,limit_G"
    assert len(lines) == 11


def test_reproduce_fig1_cli(tmp_path):
    assert main(["reproduce", "--target", "fig1", "--out", str(tmp_path)]) == 0
    manifest = read_manifest(tmp_path / "manifest.txt")
    assert manifest["target"] == "fig1"
    assert (tmp_path / "fig1_h2_0.4.csv").exists()
    assert (tmp_path / "fig1_h2_0.8.csv").exists()


def test_reproduce_paper_scale_refused(tmp_path):
    code = main(["reproduce", "--target", "fig2", "--scale", "paper",
                 "--out", str(tmp_path)])
    assert code == 2


def test_reproduce_fig1_curves(tmp_path):
    files = reproduce("fig1", "desk", out_dir=str(tmp_path))
    for h2 in (0.4, 0.8):
        path = files[f"curve_h2_{h2}"]
        rows = [l.split(",") for l in open(path).read().splitlines()[1:]]
        by_omega = {}
        for omega, t, s, _ in rows:
            by_omega.setdefault(float(omega), {})[float(t)] = float(s)
        for omega, vals in by_omega.items():
            if omega >= 10:
                assert vals[1.0] > vals[0.0]
            if omega <= 1:
                assert vals[0.0] >= vals[1.0]


def test_reproduce_fig3_within_above_cross_at_large_omega(tmp_path):
    files = reproduce("fig3", "desk", out_dir=str(tmp_path))
    path = files["curve_h2_0.4"]
    rows = [l.split(",") for l in open(path).read().splitlines()[1:]]
    for omega, t, s, limit_g in rows:
        if float(omega) >= 10 and float(t) == 1.0:
            within = float(limit_g)
        if float(omega) >= 10 and float(t) == 0.0:
            cross = float(limit_g)
    assert within > cross
    # limit overlay carries the requested effect correlation scale
    assert 0 < cross < 0.3


def test_reproduce_rejects_unknown_target(tmp_path):
    with pytest.raises(ConfigError):
        reproduce("fig9", "desk", out_dir=str(tmp_path))


def test_numerical_inconsistency_exit_4(monkeypatch, tmp_path):
    import transcorr.cli as cli
    from transcorr.errors import NumericalInconsistencyError

    def boom(args):
        raise NumericalInconsistencyError("impossible value")

    monkeypatch.setitem(cli._COMMANDS, "merge-blocks", boom)
    a = tmp_path / "a.txt"
    a.write_text("1\t5\n")
    code = cli.main(["merge-blocks", "--a", str(a), "--b", str(a),
                     "--out", str(tmp_path / "o.txt")])
    assert code == 4
