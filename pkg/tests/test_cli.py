"""End-to-end tests for the command-line driver."""

from __future__ import annotations

import io
import json
import logging
import subprocess
import sys
from pathlib import Path

import pytest

from paracontact.cli import UsageError, parse_point, run, split_top_level
from paracontact.exprlang import parse_immersion
from paracontact.families import builtin_text, classification_family, parse_family_params
from paracontact.tensorcalc import CALIBRATION_TEXT

ROOT = Path(__file__).resolve().parent.parent
HELP_FLAGS = (
    "--verbose", "--builtin", "--grid", "--seed", "--tol-alg", "--tol-fd", "--json", "--format",
    "--point", "--out", "--phi", "--z", "--eta-normalize", "--full-parallel", "--panels",
    "--n", "--b", "--v", "--alpha",
)


def run_cli(capsys, *argv: str) -> tuple[int, str, str]:
    """Run the CLI in-process and return (exit_code, stdout, stderr)."""
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_module(*argv: str) -> tuple[int, str]:
    """Run ``python -m paracontact`` and return (exit_code, stdout)."""
    result = subprocess.run(
        [sys.executable, "-m", "paracontact", *argv],
        capture_output=True,
        text=True,
        cwd=ROOT,
    )
    return result.returncode, result.stdout


# ──────────────────────────────────────────────────────────────────
# Argument helpers
# ──────────────────────────────────────────────────────────────────


class TestSplitTopLevel:
    def test_plain(self):
        assert split_top_level("0, x ,y*z") == ["0", "x", "y*z"]

    def test_parentheses_keep_commas(self):
        assert split_top_level("integral(cosh(y), y, 1), 0") == ["integral(cosh(y), y, 1)", "0"]

    def test_empty_parts_dropped(self):
        assert split_top_level("a,,b,") == ["a", "b"]


class TestParsePoint:
    def test_valid(self):
        assert parse_point("-0.5,0,1e-1", 3).tolist() == [-0.5, 0.0, 0.1]

    def test_wrong_length(self):
        with pytest.raises(UsageError, match="needs 3 coordinates"):
            parse_point("1,2", 3)

    def test_not_numbers(self):
        with pytest.raises(UsageError, match="comma-separated numbers"):
            parse_point("a,b,c", 3)


# ──────────────────────────────────────────────────────────────────
# check
# ──────────────────────────────────────────────────────────────────


class TestCheck:
    @pytest.mark.parametrize("name", ["example_4_6", "example_4_6_bar", "example_4_13", "hyperplane"])
    def test_builtin_claims_pass(self, capsys, name):
        code, out, _ = run_cli(capsys, "check", "--builtin", name, "--grid", "8")
        assert code == 0
        assert out.endswith("overall: pass\n")

    def test_example_4_6_on_default_grid(self, capsys):
        code, out, _ = run_cli(capsys, "check", "--builtin", "example_4_6", "--grid", "50")
        assert code == 0
        assert "normal_jtangency" in out
        assert out.endswith("overall: pass\n")

    def test_file_without_claims_fails(self, capsys, tmp_path):
        path = tmp_path / "ex413.txt"
        path.write_text(builtin_text("example_4_13"))
        code, out, _ = run_cli(capsys, "check", str(path), "--grid", "6")
        assert code == 1
        assert out.startswith("spec: ex413")
        assert "overall: fail" in out

    def test_json_file_is_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for target in (a, b):
            code, _, _ = run_cli(
                capsys, "check", "--builtin", "hyperplane", "--grid", "4", "--seed", "2", "--json", str(target)
            )
            assert code == 0
        assert a.read_text() == b.read_text()
        data = json.loads(a.read_text())
        assert data["seed"] == 2 and data["overall"] == "pass"

    def test_json_to_stdout(self, capsys):
        code, out, _ = run_cli(
            capsys, "check", "--builtin", "hyperplane", "--grid", "3", "--format", "json"
        )
        assert code == 0
        data = json.loads(out)
        assert data["spec"] == "hyperplane"
        assert data["grid"]["points"] == 3

    def test_tolerance_flags(self, capsys):
        code, out, _ = run_cli(
            capsys, "check", "--builtin", "hyperplane", "--grid", "3", "--tol-fd", "1e-4", "--format", "json"
        )
        assert code == 0
        tols = {c["name"]: c["tol"] for c in json.loads(out)["checks"]}
        assert tols["nabla_phi"] == 1e-4

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "check", str(tmp_path / "nope.txt"))
        assert code == 2
        assert err.startswith("Error: cannot read")

    def test_no_source(self, capsys):
        code, _, err = run_cli(capsys, "check")
        assert code == 2
        assert "give an immersion file or --builtin NAME" in err

    def test_unknown_builtin(self, capsys):
        code, _, err = run_cli(capsys, "check", "--builtin", "example_9_9")
        assert code == 2
        assert "unknown builtin" in err

    def test_parse_error(self, capsys, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("n 1\nvars x y z\n")
        code, _, err = run_cli(capsys, "check", str(path))
        assert code == 2
        assert "expected 'domain' line" in err

    def test_bad_grid(self, capsys):
        code, _, err = run_cli(capsys, "check", "--builtin", "hyperplane", "--grid", "0")
        assert code == 2
        assert "grid size" in err


# ──────────────────────────────────────────────────────────────────
# induce / gauge / family / examples
# ──────────────────────────────────────────────────────────────────


class TestInduce:
    def test_json(self, capsys):
        code, out, _ = run_cli(
            capsys, "induce", "--builtin", "example_4_6", "--point=0.2,0.1,-0.3", "--format", "json"
        )
        assert code == 0
        data = json.loads(out)
        assert data["point"] == [0.2, 0.1, -0.3]
        assert data["xi"] == pytest.approx([0.2, 0.0, 1.0], abs=1e-9)
        assert data["h"][2][2] == pytest.approx(1.0)

    def test_text(self, capsys):
        code, out, _ = run_cli(capsys, "induce", "--builtin", "hyperplane", "--point", "0,0,0")
        assert code == 0
        assert out.startswith("spec: hyperplane")
        assert "phi =\n" in out

    def test_without_jtangency_omits_structure(self, capsys, tmp_path):
        path = tmp_path / "paraboloid.txt"
        path.write_text(CALIBRATION_TEXT)
        code, out, _ = run_cli(capsys, "induce", str(path), "--point=0.3,0.2,0.1", "--format", "json")
        assert code == 0
        data = json.loads(out)
        assert "h" in data and "xi" not in data

    def test_point_outside_frame(self, capsys):
        code, _, err = run_cli(capsys, "induce", "--builtin", "hyperplane", "--point", "1,2")
        assert code == 2
        assert "needs 3 coordinates" in err

    def test_point_outside_domain(self, capsys):
        code, _, err = run_cli(capsys, "induce", "--builtin", "hyperplane", "--point", "0,2,0")
        assert code == 2
        assert "coordinate y = 2.0 is outside the domain" in err


class TestGauge:
    def test_eta_normalize(self, capsys):
        code, out, _ = run_cli(capsys, "gauge", "--builtin", "example_4_6", "--eta-normalize")
        assert code == 0
        assert out.splitlines()[-4:] == ["C1 = 0", "C2 = sinh(z)", "C3 = 0", "C4 = cosh(z)"]

    def test_eta_normalize_impossible(self, capsys):
        code, out, err = run_cli(capsys, "gauge", "--builtin", "example_4_13", "--eta-normalize")
        assert code == 1
        assert out == ""
        assert err.startswith("Error: ∇η ≠ 0")
        assert "  nabla_eta: " in err

    def test_explicit_gauge(self, capsys):
        code, out, _ = run_cli(capsys, "gauge", "--builtin", "hyperplane", "--phi", "2", "--z", "0,0,0")
        assert code == 0
        assert out.splitlines()[-4:] == ["C1 = 0", "C2 = 0", "C3 = 0", "C4 = 2"]
        assert parse_immersion(out).f_components == parse_immersion(builtin_text("hyperplane")).f_components

    def test_explicit_gauge_needs_z(self, capsys):
        code, _, err = run_cli(capsys, "gauge", "--builtin", "hyperplane", "--phi", "2")
        assert code == 2
        assert "needs --z" in err

    def test_writes_file(self, capsys, tmp_path):
        target = tmp_path / "out.txt"
        code, out, _ = run_cli(
            capsys, "gauge", "--builtin", "example_4_6", "--eta-normalize", "--out", str(target)
        )
        assert code == 0 and out == ""
        assert parse_immersion(target.read_text()).var_names == ("x", "y", "z")


class TestFamily:
    def test_output_reparses(self, capsys):
        code, out, _ = run_cli(
            capsys, "family", "--n", "1", "--b", "1,0,1,0;1,0,-1,0", "--v", "0,1,0,0", "--alpha", "2*y"
        )
        assert code == 0
        expected = classification_family(parse_family_params(1, "1,0,1,0;1,0,-1,0", "0,1,0,0", "2*y"))
        assert parse_immersion(out) == expected

    def test_bad_parameters(self, capsys):
        code, _, err = run_cli(capsys, "family", "--n", "1", "--b", "1,0,1,0;1,0,1,0", "--v", "0,1,0,0")
        assert code == 2
        assert "not a J̃ eigenvector" in err


class TestExamplesAndHelp:
    def test_examples(self, capsys):
        code, out, _ = run_cli(capsys, "examples")
        assert code == 0
        names = [line.split()[0] for line in out.splitlines()]
        assert names == ["example_4_6", "example_4_6_bar", "example_4_13", "hyperplane"]

    def test_help(self, capsys):
        code, out, _ = run_cli(capsys, "--help")
        assert code == 0
        for command in ("check", "induce", "gauge", "family", "examples"):
            assert command in out
        for flag in HELP_FLAGS:
            assert flag in out, flag

    @pytest.mark.parametrize(
        "command, flags",
        [
            ("check", ["--builtin", "--grid", "--seed", "--tol-alg", "--tol-fd", "--json", "--format"]),
            ("induce", ["--builtin", "--point", "--format", "--out"]),
            (
                "gauge",
                ["--builtin", "--phi", "--eta-normalize", "--full-parallel", "--z", "--panels", "--out"],
            ),
            ("family", ["--n", "--b", "--v", "--alpha", "--out"]),
        ],
    )
    def test_command_help_lists_flags(self, capsys, command, flags):
        code, out, _ = run_cli(capsys, command, "--help")
        assert code == 0
        for flag in flags:
            assert flag in out, flag

    def test_repeated_runs_follow_swapped_stderr(self, monkeypatch):
        first = io.StringIO()
        monkeypatch.setattr(sys, "stderr", first)
        assert run(["examples"]) == 0
        first.close()
        second = io.StringIO()
        monkeypatch.setattr(sys, "stderr", second)
        assert run(["-v", "check", "--builtin", "hyperplane", "--grid", "3"]) == 0
        handlers = logging.getLogger("paracontact").handlers
        assert [h.stream for h in handlers] == [second]

    def test_missing_command(self, capsys):
        code, _, _ = run_cli(capsys)
        assert code == 2


class TestModuleEntryPoint:
    def test_examples(self):
        code, out = run_module("examples")
        assert code == 0
        assert "hyperplane" in out

    def test_check(self):
        code, out = run_module("check", "--builtin", "hyperplane", "--grid", "3")
        assert code == 0
        assert out.strip().endswith("overall: pass")
