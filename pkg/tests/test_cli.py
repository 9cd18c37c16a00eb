import json

import numpy as np
import pytest

import subfrac
from subfrac.cli import build_parser, config_from_args, main, report_json, run


def run_cli(argv):
    return main(argv)


def test_no_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["limit", "--does-not-exist", "1"])
    assert exc.value.code == 2


def test_assemble_writes_matrix_market(tmp_path):
    code = run_cli([
        "assemble", "--mode", "euclidean_box", "--n", "9", "--L", "1", "--dims", "1",
        "--out", str(tmp_path),
    ])
    assert code == 0
    mtx = (tmp_path / "assemble" / "operator.mtx").read_text().splitlines()
    assert mtx[0] == "%%MatrixMarket matrix coordinate real symmetric"
    assert (tmp_path / "assemble" / "results.json").exists()


def test_spectrum_csv_output(tmp_path):
    code = run_cli([
        "spectrum", "--mode", "euclidean_torus", "--n", "32", "--L", "1", "--dims", "1",
        "--out", str(tmp_path),
    ])
    assert code == 0
    lines = (tmp_path / "spectrum" / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "index,eigenvalue"
    assert len(lines) == 33


def test_limit_run_passes_and_exports(tmp_path, capsys):
    code = run_cli([
        "limit", "--mode", "euclidean_torus", "--n", "64", "--L", "10",
        "--s", "0.5", "--t", "0.2,0.1,0.05", "--out", str(tmp_path),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "C_s_closed_vs_quadrature_s=0.5" in out
    assert "boundary_limit_rel_error_s=0.5" in out
    f = subfrac.read_gf1(tmp_path / "limit" / "limit_extrapolated_s0.5.gf1")
    assert f.spec.n_per_axis == 64
    sweep = (tmp_path / "limit" / "limit_sweep_s0.5.csv").read_text().splitlines()
    assert sweep[0] == "t,rel_distance_to_extrapolant"
    assert len(sweep) == 4


def test_failing_tolerance_exits_one(tmp_path, capsys):
    code = run_cli([
        "limit", "--mode", "euclidean_torus", "--n", "32", "--L", "10",
        "--s", "0.5", "--t", "0.4,0.2,0.1", "--tol", "1e-18", "--out", str(tmp_path),
    ])
    out = capsys.readouterr().out
    assert code == 1
    assert any(line.startswith("FAIL") for line in out.splitlines())


def test_limit_spec_example_defaults(tmp_path):
    # the documented one-liner, with no --L: defaults must make it pass
    code = run_cli([
        "limit", "--mode", "euclidean_torus", "--n", "64",
        "--s", "0.5", "--t", "0.2,0.1,0.05", "--out", str(tmp_path),
    ])
    assert code == 0


def test_heat_subcommand(tmp_path, capsys):
    code = run_cli([
        "heat", "--mode", "euclidean_torus", "--n", "32", "--L", "10",
        "--t", "0.3,0.1", "--quad-nodes", "200", "--out", str(tmp_path),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "heat_identity_at_t0" in out
    assert "kernel_mass_gap_t=0.3" in out
    u = subfrac.read_gf1(tmp_path / "heat" / "heat_t0.3.gf1")
    assert u.spec.n_per_axis == 32


def test_extend_manifest(tmp_path):
    code = run_cli([
        "extend", "--mode", "euclidean_torus", "--n", "32", "--L", "10",
        "--s", "0.4", "--t", "0.3,0.1", "--out", str(tmp_path),
    ])
    assert code == 0
    manifest = json.loads((tmp_path / "extend" / "extend_manifest_s0.4.json").read_text())
    assert manifest["s"] == 0.4
    assert manifest["t_values"] == [0.3, 0.1]
    assert manifest["path_agreement"] <= 1e-6
    assert manifest["C_s_used"] == pytest.approx(subfrac.extension_constant(0.4))
    u = subfrac.read_gf1(tmp_path / "extend" / "extend_u_s0.4_t0.3.gf1")
    assert u.spec.mode == "euclidean_torus"


def test_verify_all_passes_on_small_heisenberg(tmp_path):
    code = run_cli([
        "verify-all", "--mode", "heisenberg", "--n", "7", "--L", "2",
        "--s", "0.5", "--t", "0.2,0.1,0.05", "--out", str(tmp_path),
    ])
    assert code == 0
    payload = json.loads((tmp_path / "verify-all" / "results.json").read_text())
    assert payload["report"]["passed"] is True
    names = [c["name"] for c in payload["report"]["checks"]]
    assert "group_associativity" in names
    assert "commutator_equals_T" in names
    assert "heat_identity_at_t0" in names


def test_results_json_deterministic(tmp_path):
    argv = [
        "frac", "--mode", "euclidean_torus", "--n", "32", "--L", "1",
        "--s", "0.5,0.3", "--seed", "77", "--out", None,
    ]
    reports = []
    for sub in ("a", "b"):
        argv[-1] = str(tmp_path / sub)
        assert run_cli(argv) == 0
        payload = json.loads((tmp_path / sub / "frac" / "results.json").read_text())
        reports.append(json.dumps(payload["report"], sort_keys=True))
    assert reports[0] == reports[1]


def test_report_json_round_trips_bitwise(tmp_path):
    parser = build_parser()
    args = parser.parse_args([
        "spectrum", "--mode", "euclidean_torus", "--n", "16", "--L", "1",
        "--out", str(tmp_path),
    ])
    config = config_from_args(args)
    report = run(config)
    body = report_json(report)
    assert json.dumps(json.loads(body), sort_keys=True, indent=2) == body


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("mode=euclidean_torus\nn=32\nL=1\ns=0.5\nt=0.3,0.1\nseed=5\n")
    parser = build_parser()
    args = parser.parse_args(["frac", "--config", str(cfg), "--n", "16",
                              "--out", str(tmp_path)])
    config = config_from_args(args)
    assert config.n == 16          # CLI wins
    assert config.mode == "euclidean_torus"
    assert config.s_values == (0.5,)
    assert config.seed == 5


def test_config_file_bad_key(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("frobnicate=1\n")
    code = run_cli(["frac", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 2
    assert "frobnicate" in capsys.readouterr().err


def test_config_hash_stability():
    parser = build_parser()
    args = parser.parse_args(["limit", "--mode", "euclidean_torus", "--n", "64",
                              "--L", "10", "--s", "0.5"])
    c1 = config_from_args(args)
    c2 = config_from_args(args)
    assert c1.hash() == c2.hash()
    args2 = parser.parse_args(["limit", "--mode", "euclidean_torus", "--n", "32",
                               "--L", "10", "--s", "0.5"])
    assert config_from_args(args2).hash() != c1.hash()
