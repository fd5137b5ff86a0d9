import numpy as np
import pytest

from modgame import catalog
from modgame.game_model import StationaryProfile, StationaryStrategy


def random_stationary(game, rng) -> StationaryProfile:
    strategies = []
    for i in range(game.n_players):
        probs = tuple(rng.dirichlet(np.ones(game.n_actions(s, i))) for s in range(game.n_states))
        strategies.append(StationaryStrategy(probs))
    return StationaryProfile(tuple(strategies))


@pytest.fixture
def bigmatch():
    return catalog.bigmatch()


@pytest.fixture
def example2():
    return catalog.example2()


@pytest.fixture
def example1():
    return catalog.example1(0.6, 0.5)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.ACCEPTANCE):
        terminalreporter.write_line(mod.ACCEPTANCE[k])
