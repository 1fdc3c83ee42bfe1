import re
import sys

import numpy as np
import pytest

from test_io import hbsf_bytes
from hbs import read_dmat, read_irf, write_dmat
from hbs.cli import console_main, main

FOUR = np.array(
    [[1, 2, 0, 0], [3, 4, 0, 0], [0, 0, 5, 6], [0, 0, 7, 8]], dtype=np.float32
)


@pytest.fixture
def run(capsys):
    def _run(*args):
        rc = main([str(a) for a in args])
        cap = capsys.readouterr()
        return rc, cap.out, cap.err

    return _run


class TestPipelines:
    def test_gen_prune_reconstruct_identity(self, run, tmp_path):
        a, m, b = tmp_path / "a.dmat", tmp_path / "m.hbsf", tmp_path / "b.dmat"
        assert run("gen", "--rows", 8, "--cols", 6, "--seed", 3, "--out", a)[0] == 0
        rc, out, _ = run("prune", "--in", a, "--out", m, "--levels", "1x1:0")
        assert rc == 0
        assert "cumulative density 1" in out and f"wrote {m}" in out
        assert run("reconstruct", "--in", m, "--out", b)[0] == 0
        assert a.read_bytes()[8:] == b.read_bytes()[8:]  # same dims, same cells

    def test_gen_is_seed_deterministic(self, run, tmp_path):
        p1, p2, p3 = (tmp_path / n for n in ("1.dmat", "2.dmat", "3.dmat"))
        run("gen", "--rows", 4, "--cols", 4, "--seed", 7, "--out", p1)
        run("gen", "--rows", 4, "--cols", 4, "--seed", 7, "--out", p2)
        run("gen", "--rows", 4, "--cols", 4, "--seed", 8, "--out", p3)
        assert p1.read_bytes() == p2.read_bytes()
        assert p1.read_bytes() != p3.read_bytes()

    def test_gen_uniform(self, run, tmp_path):
        p = tmp_path / "u.dmat"
        run("gen", "--rows", 16, "--cols", 16, "--dist", "uniform", "--out", p)
        vals = read_dmat(p)
        assert (vals >= 0).all() and (vals < 1).all()

    def test_prune_reports_trace_and_summary(self, run, tmp_path):
        a, m = tmp_path / "a.dmat", tmp_path / "m.hbsf"
        write_dmat(a, FOUR)
        rc, out, _ = run("prune", "--in", a, "--out", m, "--levels", "2x2:0.75,1x1:0.875")
        assert rc == 0
        assert "level 1" in out and "level 2" in out
        assert "cumulative density 0.375" in out

    def test_matmul_oracle(self, run, tmp_path):
        a, m, b, c = (tmp_path / n for n in ("a.dmat", "m.hbsf", "b.dmat", "c.dmat"))
        run("gen", "--rows", 16, "--cols", 12, "--seed", 5, "--out", a)
        run("prune", "--in", a, "--out", m, "--levels", "4x2:0.5,1x1:0.75")
        run("gen", "--rows", 12, "--cols", 7, "--seed", 6, "--out", b)
        rc, out, _ = run("matmul", "--a", m, "--b", b, "--out", c, "--oracle")
        assert rc == 0
        got = re.search(r"max relative error vs dense oracle: (\S+)", out)
        assert got and float(got.group(1)) <= 1e-5
        assert read_dmat(c).shape == (16, 7)

    def test_topk(self, run, tmp_path):
        a, m = tmp_path / "a.dmat", tmp_path / "m.hbsf"
        write_dmat(a, FOUR)
        run("prune", "--in", a, "--out", m, "--levels", "2x2:0.75")
        rc, out, _ = run("topk", "--original", a, "--pruned", m, "--percentiles", "25,50")
        assert rc == 0
        assert "1.000000" in out and "0.500000" in out

    def test_speedup(self, run, tmp_path):
        irf = tmp_path / "t.irf"
        irf.write_text("HBS-IRF v1 analytic\n1 1 0.5 1.0\n")
        rc, out, _ = run(
            "speedup", "--dims", "64x64x64", "--levels", "1x1:0.5", "--irf", irf
        )
        assert rc == 0
        assert "speedup: 2.0000" in out

    def test_bench_calibrate(self, run, tmp_path):
        out_path = tmp_path / "m.irf"
        rc, out, _ = run(
            "bench", "calibrate",
            "--shapes", "4x1",
            "--sparsities", "0.5",
            "--dims", "32x32x16",
            "--reps", 2,
            "--out", out_path,
        )
        assert rc == 0
        assert "calibrated 1 entries at 32x32x16" in out
        table = read_irf(out_path)
        assert table.provenance == "calibrated"
        assert len(table.entries) == 1


class TestValidate:
    def test_valid_file(self, run, tmp_path):
        a, m = tmp_path / "a.dmat", tmp_path / "m.hbsf"
        run("gen", "--rows", 4, "--cols", 4, "--out", a)
        run("prune", "--in", a, "--out", m, "--levels", "2x2:0.5")
        rc, out, _ = run("validate", "--in", m)
        assert rc == 0
        assert out.count("pass") == 4 and "FAIL" not in out

    def test_invalid_file(self, run, tmp_path):
        p = tmp_path / "bad.hbsf"
        p.write_bytes(
            hbsf_bytes(
                2, 2,
                [(2, 2, [(0, 0, np.ones((2, 2)))]), (1, 1, [(0, 0, [[3.0]])])],
            )
        )
        rc, out, _ = run("validate", "--in", p)
        assert rc == 1
        assert "FAIL" in out and "disjoint" in out


class TestExitCodes:
    def test_usage_errors_exit_2(self, run, tmp_path):
        cases = [
            ("frobnicate",),
            ("gen", "--rows", 4),
            ("gen", "--rows", 4, "--cols", 4, "--out", tmp_path / "x", "--bogus"),
            ("gen", "--rows", 0, "--cols", 4, "--out", tmp_path / "x"),
            ("prune", "--in", "x", "--out", "y", "--levels", "2x2:1.5"),
            ("prune", "--in", "x", "--out", "y", "--levels", "2x2:0.5,3x3:0.1"),
            ("speedup", "--dims", "6x6", "--levels", "1x1:0.5", "--irf", "t"),
            ("topk", "--original", "a", "--pruned", "m", "--percentiles", "0"),
            ("bench", "calibrate", "--shapes", "4x1", "--sparsities", "75",
             "--dims", "8x8x8", "--out", tmp_path / "x"),
        ]
        for argv in cases:
            rc, _, err = run(*argv)
            assert rc == 2, argv
            assert "usage" in err

    def test_percentage_sparsity_hint(self, run):
        rc, _, err = run("prune", "--in", "x", "--out", "y", "--levels", "1x1:75")
        assert rc == 2
        assert "not percentages" in err

    def test_runtime_errors_exit_1(self, run, tmp_path):
        rc, _, err = run("validate", "--in", tmp_path / "missing.hbsf")
        assert rc == 1 and err.startswith("error:")

        a, m, b = tmp_path / "a.dmat", tmp_path / "m.hbsf", tmp_path / "b.dmat"
        run("gen", "--rows", 4, "--cols", 4, "--out", a)
        run("prune", "--in", a, "--out", m, "--levels", "2x2:0.5")
        run("gen", "--rows", 3, "--cols", 3, "--out", b)
        rc, _, err = run("matmul", "--a", m, "--b", b, "--out", tmp_path / "c.dmat")
        assert rc == 1 and err.startswith("error:")

    def test_console_main_raises_systemexit(self, tmp_path, monkeypatch, capsys):
        out = tmp_path / "g.dmat"
        argv = ["hbs", "gen", "--rows", "2", "--cols", "2", "--out", str(out)]
        monkeypatch.setattr(sys, "argv", argv)
        with pytest.raises(SystemExit) as exc:
            console_main()
        assert exc.value.code == 0
        assert out.exists()
        capsys.readouterr()
