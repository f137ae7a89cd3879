"""
Shared pytest fixtures
Corpus paths, parsed theories and settings isolation
"""
from pathlib import Path

import numpy as np
import pytest

from libs.bangtensor.calculus import ProofChecker, Theory
from libs.bangtensor.syntax import load_proof, load_theory
from libs.common.config import get_settings
from libs.common.log_config import configure_logging

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
MUTATIONS = CORPUS / "mutations"


@pytest.fixture(scope="session", autouse=True)
def quiet_logging() -> None:
    configure_logging("WARNING")


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch: pytest.MonkeyPatch):
    """Every test starts from default settings, whatever the shell exports"""
    for name in ("BT_DEFAULT_BOUND", "BT_AUDIT_LOG_PATH", "BT_LOG_LEVEL", "BT_LOG_JSON"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng() -> np.random.Generator:
    seed = get_settings().seed
    return np.random.default_rng(seed if seed is not None else 1729)


@pytest.fixture
def corpus() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def monoid() -> Theory:
    return load_theory(CORPUS / "monoid.bth")


@pytest.fixture(scope="session")
def antihom_theory() -> Theory:
    return load_theory(CORPUS / "antihom.bth")


@pytest.fixture
def lemma_checker(antihom_theory: Theory) -> ProofChecker:
    """A checker that has already accepted the spider lemmas"""
    checker = ProofChecker(antihom_theory)
    report = checker.check(load_proof(CORPUS / "spider_lemmas.btp"))
    assert report.accepted, report.lines()
    return checker
