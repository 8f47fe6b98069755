import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import gooddeal
from gooddeal import cli, config, generators
from gooddeal.errors import ConfigError

COMMANDS = sorted(config.DEFAULT_FILES)
PKG_CONFIGS = Path(gooddeal.__file__).parent / "configs"


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    text = config.dumps(cfg) if not isinstance(cfg, dict) else json.dumps(cfg)
    p.write_text(text, encoding="utf-8")
    return p


def small_table1(**solver):
    cfg = config.default_config("table1")
    s = replace(cfg.solver, M=3000, N=4, K_per_dim=4, R=2, **solver)
    return replace(cfg, solver=s)


class TestGoldenFiles:
    @pytest.mark.parametrize("command", COMMANDS)
    def test_byte_identical(self, command):
        on_disk = (PKG_CONFIGS / config.DEFAULT_FILES[command]).read_bytes()
        assert on_disk == config.dumps(config.default_config(command)).encode("utf-8")
        assert config.golden_text(command).encode("utf-8") == on_disk
        assert b"\r" not in on_disk

    def test_table1_block(self):
        raw = json.loads(config.golden_text("table1"))
        assert raw["basket"] == {
            "sigmaS": [[0.5, 0.2], [0.0, 0.4]],
            "beta": [[0.3, 0.4, 0.2, 0.5], [0.5, 0.7, 0.3, 0.4]],
            "gamma": [0.1, 0.3],
            "S0": [1.0, 1.0],
            "H0": [1.0, 1.0],
        }
        assert raw["constraint"] == {"a": [0.5, 0.65, 0.8, 0.95], "h": 0.3}
        assert raw["option"]["kind"] == "exchange" and raw["option"]["T"] == 1.0
        assert {k: raw["solver"][k] for k in ("M", "N", "K_per_dim", "R")} == {"M": 200000, "N": 16, "K_per_dim": 12, "R": 20}

    def test_heston_block(self):
        h = json.loads(config.golden_text("heston"))["heston"]
        assert {k: h[k] for k in ("K", "a", "b", "beta", "rho", "nu0", "T")} == {
            "K": 100.0, "a": 0.12, "b": 3.0, "beta": 0.3, "rho": -0.7, "nu0": 0.04, "T": 10.0
        }
        assert h["S0"] == {"start": 50.0, "stop": 150.0, "num": 21}

    def test_figure2_block(self):
        raw = json.loads(config.golden_text("figure2"))
        p = raw["pair"]
        assert (p["gamma"], p["beta"], p["K"], p["H0"], p["T"]) == (0.05, 0.5, 1.0, 1.0, 1.0)
        fixed = {pb["name"]: pb["fixed"] for pb in raw["panels"]}
        assert fixed == {
            "2a": {"xi0S": 0.0, "delta": 0.0},
            "2b": {"xi0S": 0.2, "delta": 0.0},
            "2c": {"xi0S": 0.2, "rho": 0.6},
            "2d": {"xi0S": 0.2, "h": 0.2},
        }


class TestParsing:
    @pytest.mark.parametrize("command", COMMANDS)
    def test_round_trip(self, command):
        cfg = config.default_config(command)
        again = config.loads(config.dumps(cfg))
        assert again == cfg
        assert config.dumps(again) == config.dumps(cfg)

    @given(
        seed=st.integers(0, 2**64 - 1),
        workers=st.integers(1, 64),
        M=st.integers(1, 10**7),
        R=st.integers(1, 500),
        scheme=st.sampled_from(["mdp", "one-step"]),
        exact=st.booleans(),
    )
    def test_round_trip_random(self, seed, workers, M, R, scheme, exact):
        base = config.default_config("table1")
        cfg = replace(base, seed=seed, workers=workers, exact_only=exact, solver=replace(base.solver, M=M, R=R, scheme=scheme))
        assert config.loads(config.dumps(cfg)) == cfg

    @pytest.mark.parametrize(
        "mutate,path",
        [
            (lambda d: d.update(bogus=1), "bogus"),
            (lambda d: d["solver"].update(extra=1), "solver.extra"),
            (lambda d: d["solver"].update(M="many"), "solver.M"),
            (lambda d: d["solver"].update(M=2.5), "solver.M"),
            (lambda d: d["solver"].update(R=0), "solver.R"),
            (lambda d: d["solver"].update(scheme="lsq"), "solver.scheme"),
            (lambda d: d["constraint"].update(a=[1.0, 1.0]), "constraint.a"),
            (lambda d: d["constraint"].update(h=float("nan")), "constraint.h"),
            (lambda d: d["basket"].update(sigmaS=[[0.0, 0.0], [0.0, 0.0]]), "basket"),
            (lambda d: d.pop("solver"), "solver"),
            (lambda d: d.update(seed=-1), "seed"),
            (lambda d: d.update(workers=0), "workers"),
            (lambda d: d.update(exact_only="yes"), "exact_only"),
            (lambda d: d.update(experiment="nope"), "experiment"),
            (lambda d: d["option"].pop("T"), "option.T"),
        ],
    )
    def test_errors_carry_field_path(self, mutate, path):
        raw = config.to_dict(config.default_config("table1"))
        mutate(raw)
        with pytest.raises(ConfigError) as exc:
            config.from_dict(raw)
        assert str(exc.value).startswith(path)

    def test_bad_json_and_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="invalid JSON"):
            config.loads("{")
        with pytest.raises(ConfigError, match="cannot read"):
            config.load(tmp_path / "missing.json")

    def test_heston_feller_and_empty_grid(self):
        raw = config.to_dict(config.default_config("heston"))
        raw["heston"]["beta"] = 1.0
        with pytest.raises(ConfigError, match=r"^heston\.epsilons\[0\]"):
            config.from_dict(raw)
        raw = config.to_dict(config.default_config("heston"))
        raw["heston"]["S0"]["num"] = 0
        with pytest.raises(ConfigError, match="empty sweep grid"):
            config.from_dict(raw)

    def test_grid_values_are_decimal(self):
        assert config.Grid(-1.0, 1.0, 201).values()[130] == 0.3
        assert config.Grid(0.0, 0.4, 41).values()[7] == 0.07


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCLI:
    def test_closedform(self, tmp_path, capsys):
        code, out, _ = run(["closedform", "--out", str(tmp_path)], capsys)
        assert code == 0 and "pi_u" in out
        text = (tmp_path / "closedform.csv").read_bytes().decode("utf-8")
        assert "\r" not in text and text.endswith("\n")
        rows = dict(line.split(",") for line in text.strip().split("\n")[1:])
        assert set(rows) >= {"pi_u", "pi_l", "phi_bar_1", "Z_4"}
        assert len(rows["pi_u"].replace(".", "").lstrip("0")) <= 10
        assert (tmp_path / "summary.txt").exists()

    def test_table1_exact_only(self, tmp_path, capsys):
        code, out, _ = run(["table1", "--exact-only", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert not (tmp_path / "table1_runs.csv").exists()
        lines = (tmp_path / "table1_summary.csv").read_text().splitlines()
        assert lines[0] == "row,Y0,Z0_1,Z0_2,Z0_3,Z0_4,phi0_1,phi0_2,phi0_3,phi0_4"
        exact = [float(v) for v in lines[1].split(",")[1:]]
        np.testing.assert_allclose(exact, [0.5494, 0.3049, 0.4440, 0.2792, 0.5025, 0.3049, 0.4440, 0, 0], atol=5e-5)
        assert [line.split(",")[0] for line in lines[1:]] == ["exact", "exact_numeraire"]

    def test_table1_tiny_run(self, tmp_path, capsys):
        cfg = replace(small_table1(), solver=replace(small_table1().solver, R=1))
        p = write_cfg(tmp_path, cfg)
        code, _, _ = run(["table1", "--config", str(p), "--out", str(tmp_path / "o")], capsys)
        assert code == 0
        summary = (tmp_path / "o" / "table1_summary.csv").read_text().splitlines()
        assert [line.split(",")[0] for line in summary[1:]] == ["exact", "exact_numeraire", "mean", "rmse", "rel_rmse"]
        runs = (tmp_path / "o" / "table1_runs.csv").read_text().splitlines()
        assert runs[0].startswith("run,Y0,Z0_1") and len(runs) == 2
        assert all(len(line.split(",")) == 10 for line in summary)

    def test_seed_flag_changes_runs(self, tmp_path, capsys):
        p = write_cfg(tmp_path, small_table1())
        run(["table1", "--config", str(p), "--out", str(tmp_path / "a")], capsys)
        run(["table1", "--config", str(p), "--out", str(tmp_path / "b"), "--seed", "7"], capsys)
        run(["table1", "--config", str(p), "--out", str(tmp_path / "c"), "--seed", "7"], capsys)
        a, b, c = ((tmp_path / x / "table1_runs.csv").read_bytes() for x in "abc")
        assert a != b and b == c

    def test_workers_identical(self, tmp_path, capsys):
        p = write_cfg(tmp_path, small_table1())
        outs = []
        for w in (1, 2):
            d = tmp_path / f"w{w}"
            assert run(["table1", "--config", str(p), "--out", str(d), "--workers", str(w)], capsys)[0] == 0
            outs.append([(d / f).read_bytes() for f in ("table1_runs.csv", "table1_summary.csv")])
        assert outs[0] == outs[1]

    def test_heston_small(self, tmp_path, capsys):
        cfg = config.default_config("heston")
        cfg = replace(cfg, heston=replace(cfg.heston, epsilons=[0.0, 0.3], S0=config.Grid(80.0, 120.0, 3)))
        code, out, _ = run(["heston", "--config", str(write_cfg(tmp_path, cfg)), "--out", str(tmp_path)], capsys)
        assert code == 0 and "ordering violations: 0" in out
        lines = (tmp_path / "figure1.csv").read_text().splitlines()
        assert lines[0] == "S0,epsilon,pi_u,pi_l,base" and len(lines) == 7
        assert (tmp_path / "figure1_hedge.csv").read_text().count("\n") == 7

    def test_figure2(self, tmp_path, capsys):
        code, out, _ = run(["figure2", "--out", str(tmp_path)], capsys)
        assert code == 0
        for name, n in (("2a", 804), ("2b", 804), ("2c", 164), ("2d", 1005)):
            lines = (tmp_path / f"figure2_{name}.csv").read_text().splitlines()
            assert len(lines) == n + 1
        a = (tmp_path / "figure2_2a.csv").read_text().splitlines()
        assert a[0] == "rho,h,pi_u,pi_l" and a[1].startswith("-1,0,")

    def test_empty_grid_writes_nothing(self, tmp_path, capsys):
        raw = config.to_dict(config.default_config("figure2"))
        raw["panels"][0]["grid"]["num"] = 0
        p = write_cfg(tmp_path, raw)
        out = tmp_path / "out"
        code, _, err = run(["figure2", "--config", str(p), "--out", str(out)], capsys)
        assert code == 2 and "panels[0].grid.num" in err
        assert not out.exists()

    def test_wrong_experiment_for_command(self, tmp_path, capsys):
        p = write_cfg(tmp_path, config.default_config("heston"))
        code, _, err = run(["table1", "--config", str(p), "--out", str(tmp_path / "x")], capsys)
        assert code == 2 and err.startswith("config error: experiment")

    def test_invalid_override(self, tmp_path, capsys):
        code, _, err = run(["validate", "--workers", "0", "--out", str(tmp_path)], capsys)
        assert code == 2 and "workers" in err

    def test_validate_passes_and_is_deterministic(self, tmp_path, capsys):
        code, out1, _ = run(["validate", "--seed", "7", "--out", str(tmp_path / "a")], capsys)
        code2, out2, _ = run(["validate", "--seed", "7", "--out", str(tmp_path / "b")], capsys)
        assert code == code2 == 0 and out1 == out2
        assert "ALL PASS" in out1 and "FAIL " not in out1

    def test_validate_catches_sign_flip(self, tmp_path, capsys, monkeypatch):
        original = generators._eta_bar

        def flipped(perp_z, radius, constraint, ref):
            eta, q = original(perp_z, radius, constraint, ref)
            return -eta, q

        monkeypatch.setattr(generators, "_eta_bar", flipped)
        code, out, _ = run(["validate", "--out", str(tmp_path)], capsys)
        assert code == 1
        assert "FAIL optimizer feasibility and attainment" in out
        assert "FAILURES:" in out
