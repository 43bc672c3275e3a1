import pytest

from game_service import game_service
from stage_service import stage_service
from symmetry_service import SymmetryService
from wlc_config import SOLVER_CONFIG


@pytest.fixture
def cm():
    """cm(m) -> the choice matching game with m pairs"""
    return game_service.make_choice_matching


@pytest.fixture
def named():
    return game_service.named_game


@pytest.fixture
def play():
    """play(game, [(l, r), ...]) -> stage"""
    return stage_service.play


@pytest.fixture
def symmetry():
    return SymmetryService()


@pytest.fixture
def isolated_config(monkeypatch, tmp_path):
    """Keep log files out of the shared configuration"""
    monkeypatch.setitem(SOLVER_CONFIG, 'log_dir', str(tmp_path / 'logs'))
    return tmp_path
