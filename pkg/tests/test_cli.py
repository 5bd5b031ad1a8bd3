import json

import numpy as np
import pytest

import detjump as dj
from detjump.cli import main


def write_config(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


def mixing_config(tmp_path, name="cfg.json", n=31, bijection=None, kmax=40, **extra):
    cfg = {
        "chain": {"family": "lazy_cycle", "n": n},
        "analysis": [{"type": "mixing", "kmax": kmax, **extra}],
    }
    if bijection is not None:
        cfg["bijection"] = bijection
    return write_config(tmp_path, name, cfg)


def test_mix_row_count_and_header(tmp_path):
    cfg = mixing_config(tmp_path, n=101, bijection={"kind": "random", "seed": 1}, kmax=100)
    out = tmp_path / "mix.csv"
    assert main(["mix", "--config", cfg, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k,worst_tv"
    assert len(lines) == 1 + 101  # header + k = 0..100
    assert lines[1].startswith("0,")


def test_mix_bound_columns(tmp_path):
    cfg = mixing_config(tmp_path, n=13, bijection={"kind": "doubling"},
                        kmax=10, epsilon=0.25, spectral_bound=True)
    out = tmp_path / "mix.csv"
    assert main(["mix", "--config", cfg, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k,worst_tv,bound_expansion,bound_spectral"
    # bounds are only defined from k = 1 and k = 2 respectively
    assert lines[1].split(",")[2] == "" and lines[1].split(",")[3] == ""
    assert lines[2].split(",")[2] != "" and lines[2].split(",")[3] == ""
    assert lines[3].split(",")[2] != "" and lines[3].split(",")[3] != ""


def test_identical_runs_identical_bytes(tmp_path):
    cfg = mixing_config(tmp_path, n=41, bijection={"kind": "random", "seed": 5}, kmax=30)
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["mix", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["mix", "--config", cfg, "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_missing_matrix_file_exits_2_with_path(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "file", "path": str(tmp_path / "nope.csv")},
        "analysis": [{"type": "mixing", "kmax": 5}],
    })
    assert main(["mix", "--config", cfg]) == 2
    assert "nope.csv" in capsys.readouterr().err


def test_invalid_json_reports_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "chain": oops\n}')
    assert main(["mix", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "broken.json:2" in err


def test_compare_jump_chain_dominates(tmp_path):
    plain = mixing_config(tmp_path, "plain.json", n=101, kmax=100)
    jumped = mixing_config(tmp_path, "jump.json", n=101,
                           bijection={"kind": "random", "seed": 1}, kmax=100)
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--config-a", plain, "--config-b", jumped,
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k,worst_tv_A,worst_tv_B"
    for line in lines[1:]:
        k, tva, tvb = line.split(",")
        if int(k) >= 20:
            assert float(tvb) < float(tva), k


def test_compare_identical_configs_equal_columns(tmp_path):
    cfg = mixing_config(tmp_path, n=21, bijection={"kind": "random", "seed": 2}, kmax=25)
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--config-a", cfg, "--config-b", cfg, "--out", str(out)]) == 0
    for line in out.read_text().splitlines()[1:]:
        _, a, b = line.split(",")
        assert a == b


def test_compare_kmax_mismatch_exits_2(tmp_path, capsys):
    a = mixing_config(tmp_path, "a.json", kmax=10)
    b = mixing_config(tmp_path, "b.json", kmax=20)
    assert main(["compare", "--config-a", a, "--config-b", b]) == 2
    assert "kmax" in capsys.readouterr().err


def test_validate_subcommand_good_chain(tmp_path, capsys):
    cfg = mixing_config(tmp_path)
    assert main(["validate", "--config", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] and report["aperiodic"]
    assert report["delta"] == pytest.approx(1 / 3)


def test_validate_subcommand_flags_violations(tmp_path, capsys):
    # plain (non-lazy) cycle: zero diagonal
    n = 6
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, (idx + 1) % n] = 0.5
    a[idx, (idx - 1) % n] = 0.5
    matrix = tmp_path / "plain.csv"
    dj.save_matrix_csv(matrix, dj.TransitionMatrix(a))
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "file", "path": str(matrix)},
        "analysis": [],
    })
    assert main(["validate", "--config", cfg]) == 4
    report = json.loads(capsys.readouterr().out)
    assert not report["ok"]
    assert report["violations"]["positive_diagonal"] == [0, 0]


def test_expansion_json_payload(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "lazy_cycle", "n": 12},
        "bijection": {"kind": "identity"},
        "analysis": [{"type": "expansion"}],
    })
    out = tmp_path / "exp.json"
    assert main(["expansion", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert set(payload) == {"epsilon_star", "witness", "mode", "sets_checked"}
    assert payload["epsilon_star"] == pytest.approx(2 / 3)
    assert payload["witness"] == [0, 1, 2, 3, 4, 5]
    assert payload["mode"] == "exhaustive"


def test_expansion_capacity_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "lazy_cycle", "n": 101},
        "analysis": [{"type": "expansion"}],
    })
    assert main(["expansion", "--config", cfg]) == 3
    assert "n <= 24" in capsys.readouterr().err


def test_scan_csv_payload(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "lazy_cycle", "n": 10},
        "analysis": [{"type": "scan", "epsilon": 0.2, "trials": 8, "seed": 3}],
    })
    out = tmp_path / "scan.csv"
    assert main(["scan", "--config", cfg, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "seed,epsilon_star,good"
    assert len(lines) == 9
    assert lines[1].startswith("3,")
    assert lines[8].startswith("10,")


def test_scan_requires_seed(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "lazy_cycle", "n": 10},
        "analysis": [{"type": "scan", "epsilon": 0.2, "trials": 8}],
    })
    assert main(["scan", "--config", cfg]) == 2
    assert "seed" in capsys.readouterr().err


def test_spectral_json_payload(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "lazy_cycle", "n": 12},
        "bijection": {"kind": "random", "seed": 1},
        "analysis": [{"type": "spectral", "compute_epsilon": True}],
    })
    out = tmp_path / "spec.json"
    assert main(["spectral", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["n"] == 12
    assert 0.0 <= payload["lambda2"] < 1.0
    assert payload["cheeger"] > 0.0
    assert payload["expansion_epsilon"] > 0.0
    assert payload["cheeger"] >= payload["expansion_epsilon"] * (1 / 3) ** 4 - 1e-9


def test_fibonacci_subcommand(tmp_path):
    out = tmp_path / "fib.csv"
    assert main(["fibonacci", "--n", "22", "--kmax", "12", "--c", "1",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k,tv_exact,tv_fourier_bound"
    assert len(lines) == 1 + 12 + 1  # header, rows, guarantee summary
    assert lines[-1].startswith("# guarantee")
    for line in lines[1:-1]:
        _, tv, bound = line.split(",")
        assert float(tv) <= float(bound) + 1e-9


def test_fibonacci_small_modulus_has_no_summary(tmp_path):
    out = tmp_path / "fib.csv"
    assert main(["fibonacci", "--n", "10", "--kmax", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 6
    assert not lines[-1].startswith("#")


def test_hof_subcommand(tmp_path):
    kernel = tmp_path / "base.csv"
    dj.save_matrix_csv(kernel, dj.build_lazy_cycle_walk(3))
    spec = write_config(tmp_path, "hof.json", {
        "base_n": 3,
        "order": 2,
        "update": "additive",
        "base_kernel_csv": str(kernel),
    })
    out = tmp_path / "hof.json.out"
    assert main(["hof", "--config", spec, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload == {"states": 9, "ergodic": True, "uniform_stationary": True}


def test_hof_rejects_bad_update(tmp_path, capsys):
    kernel = tmp_path / "base.csv"
    dj.save_matrix_csv(kernel, dj.build_lazy_cycle_walk(5))
    table = [(x * x + y) % 5 for x in range(5) for y in range(5)]
    spec = write_config(tmp_path, "hof.json", {
        "base_n": 5, "order": 2, "update": table, "base_kernel_csv": str(kernel),
    })
    assert main(["hof", "--config", spec]) == 2
    assert "bijection" in capsys.readouterr().err


def test_unknown_analysis_type_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "lazy_cycle", "n": 9},
        "analysis": [{"type": "frobnicate"}],
    })
    assert main(["mix", "--config", cfg]) == 2
    assert "frobnicate" in capsys.readouterr().err


def test_subcommand_requires_matching_analysis(tmp_path, capsys):
    cfg = mixing_config(tmp_path)
    assert main(["scan", "--config", cfg]) == 2
    assert "scan" in capsys.readouterr().err


def test_random_bijection_requires_seed_in_config(tmp_path, capsys):
    cfg = mixing_config(tmp_path, bijection={"kind": "random"})
    assert main(["mix", "--config", cfg]) == 2
    assert "seed" in capsys.readouterr().err


def test_comment_keys_are_ignored(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", {
        "_note": "underscore keys are comments",
        "chain": {"family": "lazy_cycle", "n": 9, "_why": "small"},
        "analysis": [{"type": "mixing", "kmax": 4, "_todo": True}],
    })
    out = tmp_path / "mix.csv"
    assert main(["mix", "--config", cfg, "--out", str(out)]) == 0


def test_threads_flag_changes_nothing(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", {
        "chain": {"family": "lazy_cycle", "n": 14},
        "bijection": {"kind": "random", "seed": 6},
        "analysis": [{"type": "expansion"}],
    })
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["expansion", "--config", cfg, "--out", str(a)]) == 0
    assert main(["expansion", "--config", cfg, "--out", str(b), "--threads", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_stdout_fallback_when_no_out(tmp_path, capsys):
    cfg = mixing_config(tmp_path, kmax=3)
    assert main(["mix", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert out.startswith("k,worst_tv")


def test_run_executes_analyses_in_order_with_own_outputs(tmp_path):
    from detjump.cli import load_config, run

    mix_out = tmp_path / "artifacts" / "mix.csv"
    exp_out = tmp_path / "artifacts" / "exp.json"
    cfg_path = write_config(tmp_path, "multi.json", {
        "chain": {"family": "lazy_cycle", "n": 12},
        "bijection": {"kind": "random", "seed": 4},
        "analysis": [
            {"type": "mixing", "kmax": 10, "output": {"path": str(mix_out)}},
            {"type": "expansion", "output": {"path": str(exp_out)}},
        ],
    })
    written = run(load_config(cfg_path))
    assert [p.name for p in written] == ["mix.csv", "exp.json"]
    assert mix_out.read_text().startswith("k,worst_tv")
    assert "epsilon_star" in json.loads(exp_out.read_text())


def test_out_flag_with_multiple_selected_analyses_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, "two.json", {
        "chain": {"family": "lazy_cycle", "n": 9},
        "analysis": [{"type": "mixing", "kmax": 3}, {"type": "mixing", "kmax": 5}],
    })
    assert main(["mix", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2
    assert "exactly one" in capsys.readouterr().err


def test_output_format_mismatch_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, "fmt.json", {
        "chain": {"family": "lazy_cycle", "n": 9},
        "analysis": [{"type": "mixing", "kmax": 3,
                      "output": {"format": "json", "path": "x.json"}}],
    })
    assert main(["mix", "--config", cfg]) == 2
    assert "csv" in capsys.readouterr().err
