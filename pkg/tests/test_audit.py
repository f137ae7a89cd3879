"""
Tests for the proof verdict audit trail
"""
import json

from libs.common.audit import ProofAuditLogger
from libs.common.config import get_settings


def test_disabled_without_path():
    audit = ProofAuditLogger()
    assert not audit.enabled
    entry = audit.log_verdict("merge_lemma", True)
    assert entry["error_count"] == 0


def test_appends_json_lines(tmp_path):
    path = tmp_path / "nested" / "audit.jsonl"
    audit = ProofAuditLogger(path)
    audit.log_verdict("merge_lemma", True, source="corpus/merge_lemma.btp")
    errors = ["a5: ClaimMismatch: derived", "a14: ClaimMismatch: derived"]
    audit.log_verdict("antihom", False, errors=errors)
    first, second = (json.loads(line) for line in path.read_text().splitlines())
    assert first["theorem"] == "merge_lemma" and first["source"] == "corpus/merge_lemma.btp"
    assert (second["accepted"], second["error_count"], second["source"]) == (False, 2, None)


def test_path_from_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("BT_AUDIT_LOG_PATH", str(tmp_path / "from_env.jsonl"))
    get_settings.cache_clear()
    audit = ProofAuditLogger()
    audit.log_verdict("spider_unary", True)
    assert (tmp_path / "from_env.jsonl").exists()


def test_verdict_goes_to_structlog(mocker):
    logger = mocker.patch("libs.common.audit.logger")
    ProofAuditLogger().log_verdict("antihom", False, errors=["a5: ClaimMismatch: derived"])
    logger.info.assert_called_once()
    event, fields = logger.info.call_args.args[0], logger.info.call_args.kwargs
    assert event == "proof_verdict"
    assert fields["theorem"] == "antihom" and fields["error_count"] == 1
