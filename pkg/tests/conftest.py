from __future__ import annotations

import sys
from pathlib import Path

import pytest

from guiprop.backend import SimulatedBackend, build_notes_app, load_app_model
from guiprop.explorer import ExplorationBudget, run_exploration
from guiprop.oracle import ScriptedOracle, resolve_fixture
from guiprop.synthesis import synthesize

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
sys.path.insert(0, str(TESTS))

SEED = 7


@pytest.fixture
def healthy() -> SimulatedBackend:
    return SimulatedBackend(build_notes_app())


@pytest.fixture
def faulty() -> SimulatedBackend:
    return SimulatedBackend(build_notes_app(audio_blocks_photo=True))


@pytest.fixture
def notes_oracle() -> ScriptedOracle:
    return ScriptedOracle.from_path(resolve_fixture("fixtures/notes"))


@pytest.fixture
def decoy() -> SimulatedBackend:
    return SimulatedBackend(load_app_model(FIXTURES / "decoy" / "app.json"))


@pytest.fixture
def decoy_oracle() -> ScriptedOracle:
    return ScriptedOracle.from_path(FIXTURES / "decoy")


@pytest.fixture(scope="session")
def faulty_pipeline():
    """Exploration and synthesis on the faulty notes app, shared read-only."""
    backend = SimulatedBackend(build_notes_app(audio_blocks_photo=True))
    oracle = ScriptedOracle.from_path(resolve_fixture("fixtures/notes"))
    result = run_exploration(backend, oracle, ExplorationBudget(200), SEED)
    report = synthesize(
        result.evidence, oracle, backend, app_name="notes", screens=list(backend.model.screen_ids)
    )
    return result, report
