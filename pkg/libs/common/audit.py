"""
Audit Trail Logger
Append-only record of proof-checking verdicts
"""
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from libs.common.config import get_settings
from libs.common.log_config import get_logger

logger = get_logger(__name__)


class ProofAuditLogger:
    """
    Records every theorem verdict

    Each verdict goes to structlog and, when an audit path is configured, is
    appended to that file as one JSON line.
    """

    def __init__(self, path: Optional[Path] = None):
        self.path = path if path is not None else get_settings().audit_log_path

    @property
    def enabled(self) -> bool:
        return self.path is not None

    def log_verdict(
        self,
        theorem: str,
        accepted: bool,
        errors: Optional[List[str]] = None,
        source: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Log a theorem verdict

        Args:
            theorem: Theorem name
            accepted: Whether the proof was accepted
            errors: Step-local error messages of a rejected proof
            source: Proof file the theorem came from

        Returns:
            The audit entry as written
        """
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "theorem": theorem,
            "accepted": accepted,
            "error_count": len(errors or []),
            "source": source,
        }
        logger.info("proof_verdict", **entry)
        if self.enabled:
            self._log_to_file(entry)
        return entry

    def _log_to_file(self, entry: Dict[str, Any]) -> None:
        assert self.path is not None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")
