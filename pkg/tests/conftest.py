import pathlib

import pytest

from spinphonon.bath import BathConfig
from spinphonon.config import load_config
from spinphonon.runner import PointEngine

ROOT = pathlib.Path(__file__).resolve().parent.parent
DECKS = ROOT / "decks"
GOLDEN = pathlib.Path(__file__).resolve().parent / "golden"

DECK_PATHS = {
    "spin_half": DECKS / "spin_half.yaml",
    "four_level": DECKS / "four_level.yaml",
    "j15_2": DECKS / "j15_2_toy.yaml",
}


def bath_for(cfg, temperature_k):
    """Bath at a given temperature with the deck's modes and kernel."""
    return BathConfig(modes=cfg.modes, temperature_k=temperature_k, broadening=cfg.broadening)


@pytest.fixture(scope="session")
def spin_half_config():
    return load_config(DECK_PATHS["spin_half"])


@pytest.fixture(scope="session")
def four_level_config():
    return load_config(DECK_PATHS["four_level"])


@pytest.fixture(scope="session")
def j15_2_config():
    return load_config(DECK_PATHS["j15_2"])


@pytest.fixture(scope="session")
def spin_half_engine(spin_half_config):
    return PointEngine(spin_half_config)


@pytest.fixture(scope="session")
def four_level_engine(four_level_config):
    return PointEngine(four_level_config)


@pytest.fixture(scope="session")
def j15_2_engine(j15_2_config):
    return PointEngine(j15_2_config)
