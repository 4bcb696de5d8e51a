import csv
import shutil
import subprocess

import pytest

from hawkesgame.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, EXIT_PARTIAL, main
from hawkesgame.experiment import CONFIG_KEYS, read_results_csv

SMALL = ["--L", "6", "--g-end", "30", "--g-ave", "10"]


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_help_lists_every_key(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    for key, spec in CONFIG_KEYS.items():
        assert key in out
        assert f"[{spec.unit}]" in out
    assert "exit codes" in out


def test_entry_point_installed():
    exe = shutil.which("hawkesgame")
    if exe is None:
        pytest.skip("package not installed")
    res = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("hawkesgame")


class TestRun:
    def test_writes_one_row_per_generation(self, tmp_path):
        out = tmp_path / "r"
        code = main(["run", "--case", "endo", "--b", "1.5", "--alpha", "0.5", "--out", str(out), "--no-plots"] + SMALL)
        assert code == EXIT_OK
        rows = read_csv(out / "timeseries.csv")
        assert len(rows) == 30
        assert [int(r["generation"]) for r in rows] == list(range(30))
        assert "replicate_seed" in (out / "manifest.txt").read_text()

    def test_same_seed_same_bytes(self, tmp_path):
        def go(d):
            main(["run", "--case", "exo", "--b", "1.5", "--seed", "7", "--out", str(d), "--no-plots", "--dump-events"]
                 + SMALL)
            return (d / "timeseries.csv").read_bytes(), (d / "events.csv").read_bytes()

        assert go(tmp_path / "a") == go(tmp_path / "b")

    def test_events_and_grids(self, tmp_path):
        out = tmp_path / "r"
        main(["run", "--case", "poisson", "--b", "1.5", "--out", str(out), "--no-plots", "--dump-events",
              "--dump-grid", "10"] + SMALL)
        ev = read_csv(out / "events.csv")
        assert ev and set(ev[0]) == {"generation", "time", "agent_row", "agent_col"}
        assert all(0 <= int(r["agent_row"]) < 6 and 0 <= float(r["time"]) < 1 for r in ev)
        grids = sorted((out / "grids").iterdir())
        assert [g.name for g in grids] == ["gen_000000.txt", "gen_000010.txt", "gen_000020.txt"]
        lines = grids[0].read_text().splitlines()
        assert len(lines) == 6 and all(len(l) == 6 and set(l) <= {"C", "D"} for l in lines)

    def test_plot_written(self, tmp_path):
        out = tmp_path / "r"
        assert main(["run", "--case", "standard", "--b", "1.5", "--out", str(out)] + SMALL) == EXIT_OK
        assert (out / "timeseries.png").stat().st_size > 0

    def test_gershgorin_refusal(self, tmp_path, capsys):
        out = tmp_path / "r"
        code = main(["run", "--case", "exo", "--alpha", "0.9", "--beta-override", "1", "--out", str(out)] + SMALL)
        assert code == EXIT_CONFIG
        assert "Gershgorin" in capsys.readouterr().err
        assert not out.exists()

    def test_needs_single_cell(self, tmp_path, capsys):
        assert main(["run", "--b", "1.2,1.5", "--case", "endo", "--out", str(tmp_path)] + SMALL) == EXIT_CONFIG
        assert "exactly one cell" in capsys.readouterr().err

    def test_unknown_set_key(self, tmp_path, capsys):
        assert main(["run", "--set", "lattice=4", "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "valid keys" in capsys.readouterr().err


class TestSweep:
    def test_replicates_recorded(self, tmp_path):
        out = tmp_path / "s"
        code = main(["sweep", "--case", "endo,exo", "--b", "1.5", "--replicates", "2", "--out", str(out)] + SMALL)
        assert code == EXIT_OK
        assert len(read_results_csv(out / "results.csv")) == 4
        assert "replicates = 2" in (out / "manifest.txt").read_text()

    def test_report(self, tmp_path):
        out = tmp_path / "s"
        main(["sweep", "--b", "1.2,1.5", "--replicates", "2", "--out", str(out), "--report"] + SMALL)
        for name in ["summary.csv", "fc_vs_b.dat", "indices_vs_alpha.dat", "scatter.dat", "fc_vs_b.png"]:
            assert (out / name).stat().st_size > 0
        assert len(read_csv(out / "summary.csv")) == 4 * 2

    def test_partial_failure_exit_code(self, tmp_path, monkeypatch):
        from hawkesgame import experiment as ex

        real = ex.run_cell

        def flaky(config, cell, replicate):
            if cell[1] == 1.5:
                raise RuntimeError("boom")
            return real(config, cell, replicate)

        monkeypatch.setattr(ex, "run_cell", flaky)
        out = tmp_path / "s"
        code = main(["sweep", "--case", "poisson", "--b", "1.2,1.5", "--jobs", "1", "--out", str(out)] + SMALL)
        assert code == EXIT_PARTIAL
        assert {r.b for r in read_results_csv(out / "results.csv")} == {1.2}


FIXTURE = """case,b,alpha,nu,rho,replicate,seed,f_C,mean_d,sigma_d,gamma_1,r_d
endo,1.5,0.5,1.0,0.5,0,1,0.2,1.0,1.2,2.0,0.0
endo,1.5,0.5,1.0,0.5,1,2,0.4,1.0,1.4,,0.1
endo,1.5,0.5,1.0,0.5,2,3,0.9,1.0,1.3,3.0,-0.1
"""


class TestAnalyze:
    def test_hand_computed_mean(self, tmp_path):
        (tmp_path / "results.csv").write_text(FIXTURE)
        assert main(["analyze", str(tmp_path / "results.csv"), "--no-plots"]) == EXIT_OK
        (s,) = read_csv(tmp_path / "summary.csv")
        assert float(s["n"]) == 3
        assert float(s["f_C_mean"]) == pytest.approx(0.5)
        assert float(s["f_C_se"]) == pytest.approx(0.2081666, rel=1e-6)
        assert float(s["gamma_1_mean"]) == pytest.approx(2.5)

    def test_ten_replicates_one_row(self, tmp_path):
        out = tmp_path / "s"
        main(["sweep", "--case", "exo", "--b", "1.5", "--replicates", "10", "--out", str(out)] + SMALL)
        assert main(["analyze", str(out), "--out", str(tmp_path / "a"), "--no-plots"]) == EXIT_OK
        assert len(read_csv(tmp_path / "a" / "summary.csv")) == 1

    def test_missing_file(self, tmp_path, capsys):
        target = tmp_path / "nothing"
        assert main(["analyze", str(target / "results.csv")]) == EXIT_FAILURE
        assert not target.exists()
        assert capsys.readouterr().out == ""

    def test_garbage_file_writes_nothing(self, tmp_path):
        (tmp_path / "results.csv").write_text("not,a,results\nfile\n")
        assert main(["analyze", str(tmp_path)]) == EXIT_FAILURE
        assert sorted(p.name for p in tmp_path.iterdir()) == ["results.csv"]


def test_trace(tmp_path):
    out = tmp_path / "t"
    code = main(["trace", "--case", "endo", "--alpha", "0.7", "--L", "5", "--agent", "2,3", "--windows", "5",
                 "--out", str(out)])
    assert code == EXIT_OK
    lam = read_csv(out / "intensity.csv")
    assert float(lam[0]["intensity"]) == pytest.approx(0.3)
    assert min(float(r["intensity"]) for r in lam) >= 0.3 - 1e-12
    assert (out / "trace.png").stat().st_size > 0
    assert main(["trace", "--case", "standard", "--out", str(out)]) == EXIT_CONFIG
