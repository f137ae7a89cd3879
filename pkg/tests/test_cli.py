"""
Tests for the bt command-line driver
"""
import json

import pytest

from libs.bangtensor.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main([str(arg) for arg in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCheckAndNormalize:
    def test_well_formed(self, capsys, corpus):
        assert run(capsys, "check", corpus / "spider.bt") == (EXIT_OK, "well-formed\n", "")

    def test_violation(self, capsys, corpus):
        code, out, _ = run(capsys, "check", corpus / "c3_violation.bt")
        assert code == EXIT_FAILURE
        assert out.startswith("C3 violation on a")

    def test_normalize_forgets_bound_names(self, capsys, tmp_path):
        first, second = tmp_path / "first.bt", tmp_path / "second.bt"
        first.write_text("f{+a -x} g{-a}\n")
        second.write_text("g{-z} f{+z -x}\n")
        _, out_first, _ = run(capsys, "normalize", first)
        _, out_second, _ = run(capsys, "normalize", second)
        assert out_first == out_second


class TestOp:
    def test_exp(self, capsys, corpus):
        assert run(capsys, "op", "--exp", "A", corpus / "spider.bt") == (
            EXIT_OK,
            "s{+o [-x>A -x.1} [1]A\n",
            "",
        )

    def test_weaken(self, capsys, corpus):
        code, out, _ = run(capsys, "op", "--weaken", "A", "--with", "f{+x}", corpus / "spider.bt")
        assert code == EXIT_OK
        assert out == "s{+o [-x>A} [f{+x}]A\n"

    def test_weaken_needs_an_expression(self, capsys, corpus):
        code, _, err = run(capsys, "op", "--weaken", "A", corpus / "spider.bt")
        assert code == EXIT_USAGE
        assert "--with" in err

    def test_unknown_box(self, capsys, corpus):
        code, _, err = run(capsys, "op", "--kill", "Z", corpus / "spider.bt")
        assert code == EXIT_FAILURE
        assert "unknown box Z" in err

    def test_one_operation_only(self, capsys, corpus):
        code, _, _ = run(capsys, "op", "--exp", "A", "--kill", "A", corpus / "spider.bt")
        assert code == EXIT_USAGE


class TestInstantiate:
    def test_explicit_bound(self, capsys, corpus):
        code, out, _ = run(capsys, "instantiate", "--bound", 2, corpus / "spider.bt")
        assert code == EXIT_OK
        assert len(out.splitlines()) == 3

    def test_bound_from_environment(self, capsys, corpus, monkeypatch):
        monkeypatch.setenv("BT_DEFAULT_BOUND", "1")
        _, out, _ = run(capsys, "instantiate", corpus / "spider.bt")
        assert out.splitlines() == ["s{+o}", "s{+o -x.1}"]

    def test_negative_bound(self, capsys, corpus):
        code, _, _ = run(capsys, "instantiate", "--bound", -1, corpus / "spider.bt")
        assert code == EXIT_USAGE


class TestProve:
    def test_accepted(self, capsys, corpus):
        code, out, _ = run(
            capsys,
            "prove",
            corpus / "monoid.bth",
            corpus / "merge_lemma.btp",
            corpus / "merge_theorem.btp",
        )
        assert code == EXIT_OK
        assert "merge_lemma: accepted" in out.splitlines()
        assert out.splitlines()[-1] == "merge_theorem: accepted"

    def test_rejected_with_local_error(self, capsys, corpus):
        code, out, _ = run(
            capsys,
            "prove",
            corpus / "monoid.bth",
            corpus / "mutations" / "merge_lemma_wrong_base.btp",
        )
        assert code == EXIT_FAILURE
        assert any(line.startswith("merge_lemma/b6: ClaimMismatch") for line in out.splitlines())
        assert out.splitlines()[-1] == "merge_lemma: rejected"

    def test_audit_trail(self, capsys, corpus, tmp_path, monkeypatch):
        audit = tmp_path / "audit" / "verdicts.jsonl"
        monkeypatch.setenv("BT_AUDIT_LOG_PATH", str(audit))
        proofs = [corpus / "spider_lemmas.btp", corpus / "antihom.btp"]
        run(capsys, "prove", corpus / "antihom.bth", *proofs)
        entries = [json.loads(line) for line in audit.read_text().splitlines()]
        assert [e["theorem"] for e in entries] == ["spider_unary", "lemma_q", "antihom"]
        assert all(e["accepted"] for e in entries)

    def test_invalid_theory(self, capsys, tmp_path, corpus):
        theory = tmp_path / "bad.bth"
        theory.write_text("gen m : ^vv\naxiom odd: m{+o -x} = m{+o -x}\n")
        code, out, _ = run(capsys, "prove", theory, corpus / "merge_lemma.btp")
        assert code == EXIT_FAILURE
        assert out.startswith("axiom odd:")


class TestEval:
    def test_axiom_passes(self, capsys, corpus):
        model = corpus / "matrix_algebra.btm"
        code, out, _ = run(capsys, "eval", "--model", model, corpus / "monoid.bth", "assoc")
        assert code == EXIT_OK
        assert out == "assoc: 1 instances, 0 failures (model matrix_algebra(k=2), bound 2): pass\n"

    def test_theorem_from_proof_file(self, capsys, corpus):
        code, out, _ = run(
            capsys,
            "eval",
            "--model",
            corpus / "matrix_algebra.btm",
            "--proof",
            corpus / "merge_lemma.btp",
            "--bound",
            1,
            corpus / "monoid.bth",
            "merge_lemma",
        )
        assert code == EXIT_OK
        assert out.startswith("merge_lemma: 4 instances, 0 failures")

    def test_symmetrized_model_fails(self, capsys, corpus):
        code, out, _ = run(
            capsys,
            "eval",
            "--model",
            corpus / "mutations" / "symmetrized.btm",
            corpus / "monoid.bth",
            "assoc",
        )
        assert code == EXIT_FAILURE
        assert out.splitlines()[1].startswith("FAIL [no ops]")

    def test_unknown_equation(self, capsys, corpus):
        model = corpus / "matrix_algebra.btm"
        code, _, err = run(capsys, "eval", "--model", model, corpus / "monoid.bth", "nope")
        assert code == EXIT_FAILURE
        assert "no axiom or theorem named nope" in err


class TestRenderAndErrors:
    def test_render(self, capsys, corpus):
        code, out, _ = run(capsys, "render", corpus / "worked_example.bt")
        assert code == EXIT_OK
        assert out.startswith("digraph G {\n")

    def test_parse_error(self, capsys, tmp_path):
        broken = tmp_path / "broken.bt"
        broken.write_text("s{+o $}\n")
        code, _, err = run(capsys, "check", broken)
        assert code == EXIT_USAGE
        assert "broken.bt: line 1, column 6" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "check", tmp_path / "absent.bt")[0] == EXIT_USAGE

    @pytest.mark.parametrize("argv", [[], ["frobnicate"]])
    def test_usage(self, capsys, argv):
        assert run(capsys, *argv)[0] == EXIT_USAGE

    def test_help(self, capsys):
        code, out, _ = run(capsys, "--help")
        assert code == EXIT_OK
        assert "usage: bt" in out
