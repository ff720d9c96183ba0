from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from klsat.cli import run_cli
from klsat.config import (ConfigError, ExperimentConfig, load_config, metadata_header, parse_config,
                          parse_metadata)
from klsat.pool import format_pool, standard_pool

ROOT = Path(__file__).resolve().parents[1]
POOL = ROOT / "configs" / "standard.pool"


@pytest.fixture
def pool_file(tmp_path):
    p = tmp_path / "standard.pool"
    p.write_text(format_pool(standard_pool()))
    return p


class TestConfig:
    def test_empty_lists_required_keys(self):
        with pytest.raises(ConfigError, match="run.n, run.seeds"):
            parse_config("")

    @pytest.mark.parametrize("text, key", [
        ("[run]\nn = 10\nseeds = ten\n", "run.seeds"),
        ("[run]\nn = 10\nseeds = 2\nspeed = 3\n", "run.speed"),
        ("[run]\nn = 10\nseeds = 2\n[grid]\nc = 0.1, x\n", "grid.c"),
        ("[run]\nn = 10\nseeds = 2\nreplacement = maybe\n", "run.replacement"),
        ("[run]\nn = 0\nseeds = 2\n", "run.n"),
        ("[oops]\n", "oops"),
    ])
    def test_errors_name_the_key(self, text, key):
        with pytest.raises(ConfigError, match=key):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    @given(st.integers(1, 10**6), st.integers(1, 1000), st.integers(0, 2**63),
           st.lists(st.floats(0, 100, allow_nan=False), max_size=5), st.booleans(),
           st.floats(1e-6, 1), st.lists(st.integers(1, 10**5), max_size=4))
    def test_metadata_round_trip(self, n, seeds, base, grid, repl, eps, n_list):
        cfg = ExperimentConfig(n=n, seeds=seeds, base_seed=base, c_grid=tuple(grid), replacement=repl,
                               eps_feas=eps, n_list=tuple(n_list), pool_path="a/b.pool")
        header = metadata_header(cfg, command="scan")
        assert all(line.startswith("#") for line in header.splitlines())
        assert parse_metadata(header + "c,n\n1,2\n") == cfg
        assert parse_config(cfg.to_text()) == cfg


class TestCli:
    def test_check_pool(self, capsys):
        assert run_cli(["check-pool", "--pool", str(POOL)]) == 0
        assert capsys.readouterr().out.splitlines()[0] == \
            "condition_a=true condition_b(l=2,nu=0.25)=true b_psi=1.75"

    def test_check_pool_fails_above_quarter(self, capsys):
        assert run_cli(["check-pool", "--pool", str(POOL), "--nu", "0.26"]) == 0
        assert "condition_b(l=2,nu=0.26)=false" in capsys.readouterr().out

    def test_gen_and_solve_empty(self, tmp_path, pool_file, capsys):
        inst = tmp_path / "i.txt"
        assert run_cli(["--seed", "4", "gen", "instance", "--pool", str(pool_file), "--n", "12",
                        "--c", "0", "--out", str(inst)]) == 0
        assert inst.read_text().startswith("# artifact ")
        sol = tmp_path / "s.txt"
        assert run_cli(["solve", "--pool", str(pool_file), "--instance", str(inst), "--out", str(sol)]) == 0
        assert capsys.readouterr().out.startswith("objective=0.0 ")
        assert "SOL objective=0\n" in sol.read_text()

    @pytest.mark.parametrize("argv", [["bogus"], ["scan", "--frob"], [], ["check-pool"]])
    def test_usage_errors(self, argv, capsys):
        assert run_cli(argv) == 1
        assert "usage" in capsys.readouterr().err

    def test_bad_config_names_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[run]\nn = 50\nseeds = many\n")
        assert run_cli(["scan", "--config", str(cfg)]) == 1
        assert "run.seeds" in capsys.readouterr().err

    def test_config_equals_flags(self, tmp_path, pool_file):
        cfg = tmp_path / "scan.ini"
        cfg.write_text(f"[pool]\npath = {pool_file}\n[run]\nn = 60\nseeds = 3\n[grid]\nc = 0.5, 1.5\n")
        a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
        assert run_cli(["--out", str(a), "scan", "--config", str(cfg)]) == 0
        assert run_cli(["scan", "--pool", str(pool_file), "--n", "60", "--seeds", "3", "--c", "0.5,1.5",
                        "--out", str(b)]) == 0
        assert run_cli(["scan", "--config", str(cfg), "--out", str(c), "--workers", "1"]) == 0
        assert a.read_bytes() == b.read_bytes() == c.read_bytes()
        assert parse_metadata(a.read_text()).c_grid == (0.5, 1.5)

    def test_relative_pool_path_in_config(self, tmp_path, pool_file):
        (tmp_path / "s.ini").write_text("[pool]\npath = standard.pool\n[run]\nn = 30\nseeds = 1\n[grid]\nc = 1\n")
        assert run_cli(["scan", "--config", str(tmp_path / "s.ini"), "--out", str(tmp_path / "o.csv")]) == 0

    def test_numerical_failure_exit_code(self, monkeypatch, tmp_path, pool_file):
        from klsat import cli
        from klsat.simplex import NumericalFailure

        def boom(*a, **k):
            raise NumericalFailure("budget exhausted")
        monkeypatch.setattr(cli, "solve_glp", boom)
        inst = tmp_path / "i.txt"
        run_cli(["gen", "instance", "--pool", str(pool_file), "--n", "10", "--c", "1", "--out", str(inst)])
        assert run_cli(["solve", "--pool", str(pool_file), "--instance", str(inst)]) == 2

    def test_other_drivers(self, tmp_path, pool_file):
        common = ["--pool", str(pool_file), "--seeds", "2"]
        assert run_cli(["couple", *common, "--n", "40", "--c1", "0.5", "--c2", "1"]) == 0
        assert run_cli(["concentrate", *common, "--n", "40", "--c", "1", "--n-list", "20,40"]) == 0
        assert run_cli(["tree-stats", *common, "--n", "200", "--c", "1", "--samples", "20"]) == 0
        assert run_cli(["threshold", *common, "--n", "40", "--c-max", "3", "--tol", "0.5"]) == 0

    def test_unused_keys_not_demanded(self, pool_file):
        p = ["--pool", str(pool_file)]
        assert run_cli(["concentrate", *p, "--c", "1", "--n-list", "20,40", "--seeds", "2"]) == 0
        assert run_cli(["tree-stats", *p, "--n", "200", "--c", "1", "--samples", "20"]) == 0
        assert run_cli(["couple", *p, "--n", "40"]) == 1

    def test_matching_commands(self, tmp_path, capsys):
        g = tmp_path / "g.txt"
        assert run_cli(["gen", "graph", "--n", "12", "--c", "1", "--seed", "1", "--out", str(g)]) == 0
        for mode in ("primal", "dual", "certify", "ks"):
            assert run_cli(["matching", mode, "--graph", str(g)]) == 0
        out = capsys.readouterr().out
        primal = float(out.split("lpm0_primal=")[1].split()[0])
        dual = float(out.split("lpm0_dual=")[1].split()[0])
        assert primal == pytest.approx(dual)
        assert run_cli(["matching", "primal"]) == 1
        assert run_cli(["matching", "ks", "--c", "0,1", "--n", "200", "--seeds", "2"]) == 0
        text = capsys.readouterr().out
        assert "# @tracking: " in text and "c,n,lpm0_frac,ks_lower_frac,ks_printed,ks_degnorm" in text

    def test_ks_curve_with_svg(self, tmp_path, capsys):
        svg = tmp_path / "k.svg"
        assert run_cli(["ks-curve", "--c", "0.5,1,2", "--svg", str(svg)]) == 0
        assert "c,ks_printed,ks_degnorm" in capsys.readouterr().out
        assert svg.read_text().startswith("<svg")
