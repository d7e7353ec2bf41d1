"""Tests for the masksat command line, driven through main()"""

import io
from pathlib import Path

import pytest

from bench import full_clause_set
from cli import EXIT_ERROR, EXIT_OK, EXIT_SAT, EXIT_UNSAT, main
from cnf import serialize_dimacs
from data_models import Decision, SolveReport
from maskset import render_tables

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def write_instance(tmp_path):
    def write(text: str, name: str = "instance.cnf") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="ascii")
        return str(path)

    return write


class TestSolve:
    """The solve subcommand and its exit codes"""

    def test_unsatisfiable(self, write_instance, capsys):
        """Test complementary units: UNSATISFIABLE with exit 20"""
        path = write_instance("p cnf 1 2\n1 0\n-1 0\n")
        assert main(["solve", path]) == EXIT_UNSAT
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "UNSATISFIABLE"
        assert "c halted_at_clause=1" in out

    def test_satisfiable(self, write_instance, capsys):
        """Test a single wide clause: SATISFIABLE with exit 10"""
        path = write_instance("(A | B | C)", "inline.txt")
        assert main(["solve", path]) == EXIT_SAT
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "SATISFIABLE"
        assert "c masks_built=1" in out

    def test_malformed_header(self, write_instance, capsys):
        """Test that a parse error names line 1 and exits 1"""
        path = write_instance("p cnf x 1\n1 0\n")
        assert main(["solve", path]) == EXIT_ERROR
        captured = capsys.readouterr()
        assert captured.out == ""
        assert f"{path}:1:1:" in captured.err
        assert captured.err.startswith("error:")

    def test_stdin(self, monkeypatch, capsys):
        """Test reading the instance from stdin"""
        monkeypatch.setattr("sys.stdin", io.TextIOWrapper(io.BytesIO(b"A & ~A")))
        assert main(["solve", "-"]) == EXIT_UNSAT
        assert capsys.readouterr().out.startswith("UNSATISFIABLE")

    def test_json_round_trip(self, write_instance, capsys):
        """Test that JSON output re-reads with the same decision and counters"""
        path = write_instance(serialize_dimacs(full_clause_set(3)))
        assert main(["solve", path, "--format", "json", "--retain"]) == EXIT_UNSAT
        report = SolveReport.model_validate_json(capsys.readouterr().out)
        assert report.decision == Decision.UNSATISFIABLE
        assert report.halted_at_clause == 7
        assert report.op_counters.clauses_processed == 8
        assert report.final_field is not None
        assert report.final_field.popcount() == 8

    def test_csv_output(self, write_instance, capsys):
        """Test the one-row CSV report"""
        path = write_instance("p cnf 2 1\n1 2 0\n")
        assert main(["solve", path, "--format", "csv", "--mode", "faithful"]) == EXIT_SAT
        header, row = capsys.readouterr().out.splitlines()
        assert header.startswith("decision,mode,var_count")
        assert row.startswith("SATISFIABLE,faithful,2,1,,")

    def test_engine_flags(self, write_instance, capsys):
        """Test that engine options do not change the decision"""
        path = write_instance(serialize_dimacs(full_clause_set(4)))
        for flags in (["--parallel", "--workers", "3"], ["--skip-absent"], ["--order", "sorted"]):
            assert main(["solve", path, *flags]) == EXIT_UNSAT
        capsys.readouterr()

    def test_strict_policy(self, write_instance, capsys):
        """Test that a tautology is an error under the strict policy"""
        path = write_instance("p cnf 2 2\n1 -1 0\n2 0\n")
        assert main(["solve", path]) == EXIT_SAT
        assert main(["solve", path, "--policy", "strict"]) == EXIT_ERROR
        assert "negation" in capsys.readouterr().err

    def test_width_cap(self, write_instance, capsys):
        """Test that exceeding the width cap is an error"""
        path = write_instance("p cnf 12 1\n1 0\n")
        assert main(["solve", path, "--max-width-bits", "1024"]) == EXIT_ERROR
        assert "exceeds the configured cap" in capsys.readouterr().err

    def test_width_cap_from_environment(self, write_instance, monkeypatch, capsys):
        """Test the width cap taken from the environment"""
        path = write_instance("p cnf 12 1\n1 0\n")
        monkeypatch.setenv("MASKSAT_MAX_WIDTH_BITS", "1024")
        assert main(["solve", path]) == EXIT_ERROR
        assert main(["solve", path, "--max-width-bits", "4096"]) == EXIT_SAT
        capsys.readouterr()

    def test_usage_errors(self, write_instance, capsys):
        """Test that usage errors exit 1 with a diagnostic"""
        path = write_instance("p cnf 1 1\n1 0\n")
        assert main(["solve"]) == EXIT_ERROR
        assert main(["solve", path, "--order", "bogus"]) == EXIT_ERROR
        assert main(["solve", path, "--mode", "quantum"]) == EXIT_ERROR
        assert main(["solve", str(Path(path).with_name("missing.cnf"))]) == EXIT_ERROR
        assert capsys.readouterr().err.count("error:") == 4


class TestModel:
    """The model subcommand"""

    def test_worked_example(self, write_instance, capsys):
        """Test the first model of A | B | C under order C,B,A"""
        path = write_instance("(A | B | C)", "inline.txt")
        assert main(["model", path, "--order", "explicit:C,B,A"]) == EXIT_SAT
        assert capsys.readouterr().out.splitlines() == ["SATISFIABLE", "A=0 B=0 C=1"]

    def test_empty_formula_all_models(self, write_instance, capsys):
        """Test that an empty formula over two variables has four models"""
        path = write_instance("p cnf 2 0\n")
        assert main(["model", path, "--limit", "4"]) == EXIT_SAT
        assert capsys.readouterr().out.splitlines() == [
            "SATISFIABLE",
            "v -1 -2 0",
            "v 1 -2 0",
            "v -1 2 0",
            "v 1 2 0",
        ]

    def test_unsatisfiable(self, write_instance, capsys):
        """Test that an unsatisfiable input prints UNSATISFIABLE"""
        path = write_instance("A & ~A", "inline.txt")
        assert main(["model", path]) == EXIT_UNSAT
        assert capsys.readouterr().out == "UNSATISFIABLE\n"

    def test_json_models(self, write_instance, capsys):
        """Test JSON model output keyed by variable name"""
        path = write_instance("(A | B) & ~A", "inline.txt")
        assert main(["model", path, "--format", "json", "--limit", "5"]) == EXIT_SAT
        out = capsys.readouterr().out
        assert '"decision": "SATISFIABLE"' in out
        assert '"A": 0' in out
        assert '"B": 1' in out

    def test_limit_must_be_positive(self, write_instance, capsys):
        """Test that a zero limit is rejected"""
        path = write_instance("p cnf 1 0\n")
        assert main(["model", path, "--limit", "0"]) == EXIT_ERROR
        assert "--limit" in capsys.readouterr().err


class TestMasks:
    """The masks subcommand"""

    def test_three_variable_golden(self, capsys):
        """Test the three-variable tables against the golden file"""
        assert main(["masks", "--v", "3"]) == EXIT_OK
        expected = (GOLDEN_DIR / "masks_v3.txt").read_text(encoding="ascii")
        assert capsys.readouterr().out == expected

    def test_single_variable(self, capsys):
        """Test the mask rows for one variable"""
        assert main(["masks", "--v", "1"]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert "A\t0\t1\t1" in out
        assert "~A\t1\t0\t2" in out

    def test_too_many_variables(self, capsys):
        """Test that more than five variables is an error"""
        assert main(["masks", "--v", "6"]) == EXIT_ERROR
        assert "limited" in capsys.readouterr().err

    def test_matches_renderer(self, capsys):
        """Test that the command prints the rendered tables unchanged"""
        main(["masks", "--v", "2"])
        assert capsys.readouterr().out == render_tables(2)


class TestVerify:
    """The verify subcommand"""

    def test_generated_corpus(self, capsys):
        """Test a small generated corpus with no disagreements"""
        assert main(["verify", "--count", "150", "--v", "1..7", "--seed", "4"]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert "instances: 150" in out
        assert "disagreements: 0" in out

    def test_config_directory(self, capsys):
        """Test a verify config found in a directory"""
        assert main(["verify", "--config", "tests/configs/test_configs"]) == EXIT_OK
        assert "instances: 200" in capsys.readouterr().out.splitlines()

    def test_corpus_directory(self, tmp_path, capsys):
        """Test a corpus holding the full three-variable clause set"""
        (tmp_path / "full3.cnf").write_text(serialize_dimacs(full_clause_set(3)))
        assert main(["verify", "--corpus", str(tmp_path)]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert "instances: 1" in out
        assert "satisfiable: 0" in out
        assert "disagreements: 0" in out

    def test_malformed_corpus_file(self, tmp_path, capsys):
        """Test that a malformed file in the corpus is named in the error"""
        (tmp_path / "good.cnf").write_text("p cnf 1 1\n1 0\n")
        (tmp_path / "broken.cnf").write_text("p cnf 1 1\n1\n")
        assert main(["verify", "--corpus", str(tmp_path)]) == EXIT_ERROR
        assert "broken.cnf" in capsys.readouterr().err

    def test_missing_corpus(self, tmp_path, capsys):
        """Test that an unreadable corpus is an error"""
        assert main(["verify", "--corpus", str(tmp_path / "nowhere")]) == EXIT_ERROR
        assert "not found" in capsys.readouterr().err

    def test_json_summary(self, write_instance, capsys):
        """Test the JSON summary for a single instance"""
        path = write_instance("p cnf 2 2\n1 2 0\n-1 0\n")
        assert main(["verify", path, "--format", "json"]) == EXIT_OK
        out = capsys.readouterr().out
        assert '"instances": 1' in out
        assert '"satisfiable": 1' in out


class TestBench:
    """The bench subcommand"""

    def test_csv_rows(self, capsys):
        """Test one CSV row per (v, repetition)"""
        assert main(["bench", "--v", "4..6", "--reps", "2", "--seed", "1"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("mode,v,c,k,seed,decision")
        assert len(lines) == 1 + 3 * 2

    def test_capped_rows_exit_zero(self, capsys):
        """Test that rows beyond the width cap are flagged, not fatal"""
        args = ["bench", "--v", "6..8", "--reps", "1", "--max-width-bits", "64"]
        assert main(args) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert [line.split(",")[5] for line in lines[1:]][1:] == ["CAPPED", "CAPPED"]

    def test_fit_verdict(self, tmp_path, capsys):
        """Test that --fit prints the verdict to stderr and --save-fit writes JSON"""
        fit_path = tmp_path / "fit.json"
        args = ["bench", "--v", "4..9", "--reps", "1", "--fit", "--save-fit", str(fit_path)]
        assert main(args) == EXIT_OK
        err = capsys.readouterr().err
        assert "model fits better" in err
        assert fit_path.exists()

    def test_fit_skipped_when_capped(self, tmp_path, capsys):
        """Test that a fit with too few measured v values warns and still exits 0"""
        fit_path = tmp_path / "fit.json"
        args = [
            "bench", "--v", "4..9", "--reps", "1", "--max-width-bits", "64",
            "--fit", "--save-fit", str(fit_path),
        ]  # fmt: skip
        assert main(args) == EXIT_OK
        captured = capsys.readouterr()
        assert len(captured.out.splitlines()) == 1 + 6
        assert "Skipping the fit" in captured.err
        assert "model fits better" not in captured.err
        assert not fit_path.exists()

    def test_output_and_dump_dir(self, tmp_path, capsys):
        """Test writing the CSV into a directory and dumping instances"""
        out_dir = tmp_path / "results"
        out_dir.mkdir()
        dump_dir = tmp_path / "instances"
        args = [
            "bench", "--v", "3..4", "--reps", "2",
            "--output", str(out_dir), "--dump-dir", str(dump_dir),
        ]  # fmt: skip
        assert main(args) == EXIT_OK
        assert capsys.readouterr().out == ""
        csv_files = list(out_dir.glob("scaling_block_*.csv"))
        assert len(csv_files) == 1
        assert len(csv_files[0].read_text().splitlines()) == 5
        assert len(list(dump_dir.glob("*.cnf"))) == 4

    def test_config_file(self, capsys):
        """Test a bench config found in a directory, with a flag override"""
        args = ["bench", "--config", "tests/configs/test_configs", "--reps", "1"]
        assert main(args) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1 + 4
        assert all(line.split(",")[3] == "3" for line in lines[1:])
