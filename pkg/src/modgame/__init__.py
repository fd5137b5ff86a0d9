"""Solver library for finite discounted stochastic games and their modified games."""

__version__ = "0.1.0"

from .game_model import (  # noqa: E402
    StochasticGame,
    StationaryProfile,
    StationaryStrategy,
    AutomatonStrategy,
    game_from_json,
    game_to_json,
    load_game,
    save_game,
)
from .modified import ModifiedSpec, Partition, make_spec, spec_from_json  # noqa: E402

__all__ = [
    "__version__",
    "StochasticGame",
    "StationaryProfile",
    "StationaryStrategy",
    "AutomatonStrategy",
    "game_from_json",
    "game_to_json",
    "load_game",
    "save_game",
    "ModifiedSpec",
    "Partition",
    "make_spec",
    "spec_from_json",
]
