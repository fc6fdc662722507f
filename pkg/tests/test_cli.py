import json

from pdhgsdp.cli import main
from pdhgsdp.problems import gen_maxcut, write_instance


def run_cli(*args):
    return main(list(args))


class TestSolveCommand:
    def test_converged_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "trace.csv"
        code = run_cli(
            "solve", "--problem", "mc", "--policy", "fixed", "--seed", "1",
            "--n", "6", "--m", "6", "--max-iters", "20000", "--tol", "1e-6",
            "--out", str(out),
        )
        assert code == 0
        header = out.read_text().splitlines()[0]
        assert header == "iter,p_norm,d_norm,combined,objective,alpha,beta,theta,wall_ms"
        assert "converged" in capsys.readouterr().out

    def test_iteration_cap_exit_two(self, tmp_path):
        out = tmp_path / "trace.csv"
        code = run_cli(
            "solve", "--problem", "rg", "--policy", "fixed", "--seed", "1",
            "--n", "6", "--m", "6", "--max-iters", "3", "--out", str(out),
        )
        assert code == 2

    def test_error_exit_one(self, tmp_path):
        code = run_cli(
            "solve", "--problem", "file:/does/not/exist.dat-s",
            "--policy", "tf", "--out", str(tmp_path / "t.csv"),
        )
        assert code == 1

    def test_unknown_flag_exit_one(self, tmp_path, capsys):
        code = run_cli("solve", "--problem", "mc", "--policy", "tf",
                       "--bogus-flag", "1")
        capsys.readouterr()
        assert code == 1

    def test_file_problem_round_trips(self, tmp_path):
        prob = gen_maxcut(1, n=6, m_edges=6)
        path = tmp_path / "inst.dat-s"
        write_instance(prob, path)
        out = tmp_path / "trace.csv"
        code = run_cli(
            "solve", "--problem", f"file:{path}", "--policy", "fixed",
            "--max-iters", "20000", "--out", str(out),
        )
        assert code == 0

    def test_truncated_projection_flag(self, tmp_path):
        out = tmp_path / "trace.csv"
        code = run_cli(
            "solve", "--problem", "mc", "--policy", "fixed", "--seed", "1",
            "--n", "6", "--m", "6", "--max-iters", "20000",
            "--proj", "rank:6", "--out", str(out),
        )
        assert code == 0

    def test_deterministic_trace_modulo_wall_ms(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            assert run_cli(
                "solve", "--problem", "rg", "--policy", "bpdr", "--seed", "3",
                "--n", "6", "--m", "4", "--max-iters", "50", "--out", str(out),
            ) in (0, 2)
            outs.append(out.read_text())

        def strip_wall(text):
            return [",".join(line.split(",")[:-1]) for line in text.splitlines()]

        assert strip_wall(outs[0]) == strip_wall(outs[1])


class TestVerifyCommand:
    def test_constant_passes(self, tmp_path, capsys):
        out = tmp_path / "verify.json"
        code = run_cli("verify", "--n", "5", "--m", "3", "--iters", "100",
                       "--schedule", "constant", "--tol", "1e-8",
                       "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["pass"] is True
        assert payload["lifting_certificate"]["pass"] is True
        capsys.readouterr()

    def test_geometric_passes(self, tmp_path, capsys):
        out = tmp_path / "verify.json"
        code = run_cli("verify", "--schedule", "geometric", "--out", str(out))
        assert code == 0
        capsys.readouterr()

    def test_break_product_exit_three(self, tmp_path, capsys):
        out = tmp_path / "verify.json"
        code = run_cli("verify", "--break-product", "--iters", "50",
                       "--out", str(out))
        assert code == 3
        assert json.loads(out.read_text())["pass"] is False
        capsys.readouterr()


class TestBenchCommand:
    def test_tiny_sweep(self, tmp_path, capsys):
        cfg = {
            "families": ["rg"],
            "seeds": 2,
            "budgets": {"rg": [200, 2000]},
            "policies": ["fixed", "tf"],
            "sizes": {"rg": {"n": 6, "m": 4}},
        }
        cfg_path = tmp_path / "bench.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "out"
        code = run_cli("bench", "--config", str(cfg_path),
                       "--out-dir", str(out_dir))
        assert code == 0
        table = (out_dir / "table.csv").read_text()
        assert table.splitlines()[0] == "family,policy,budget,solved_fraction"
        assert (out_dir / "runs" / "rg_fixed_1.csv").exists()
        assert (out_dir / "runs" / "rg_tf_2.csv").exists()
        capsys.readouterr()

    def test_flag_overrides(self, tmp_path, capsys):
        cfg = {"sizes": {"rg": {"n": 6, "m": 4}}, "budgets": {"rg": [200, 400]}}
        cfg_path = tmp_path / "bench.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "out"
        code = run_cli("bench", "--config", str(cfg_path), "--families", "rg",
                       "--seeds", "1", "--policies", "fixed",
                       "--out-dir", str(out_dir))
        assert code == 0
        lines = (out_dir / "table.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 2  # one policy, two budgets
        capsys.readouterr()


class TestGridSearchCommand:
    def test_micro_grid(self, tmp_path, capsys, monkeypatch):
        # shrink the split so the command is fast
        import pdhgsdp.bench as bench_mod
        monkeypatch.setattr(bench_mod, "GRID_SEARCH_SPLIT", {"rg": 1})
        out = tmp_path / "grid.csv"
        code = run_cli("grid-search", "--etas", "0.9,0.95", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "policy,eta,fastest_fraction"
        assert len(lines) == 1 + 4
        capsys.readouterr()


def test_help_exits_zero(capsys):
    assert run_cli("--help") == 0
    capsys.readouterr()
