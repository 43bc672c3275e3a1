import pytest

from stage_service import Stage, stage_service
from wlc_errors import AdvancePastFinal, InvalidChoice


def test_initial_stage(cm):
    stage = stage_service.initial_stage(cm(3))
    assert stage.history == ()
    assert stage.round_count == 0
    assert not stage.is_final
    assert stage.last_pair is None


def test_advance_detects_coordination(cm):
    stage = stage_service.initial_stage(cm(3))
    missed, coordinated = stage_service.advance(stage, (0, 1))
    assert not coordinated
    assert not missed.is_final
    won, coordinated = stage_service.advance(missed, (2, 2))
    assert coordinated
    assert won.is_final
    assert won.history == ((0, 1), (2, 2))


def test_advance_past_final_raises(cm):
    stage = stage_service.play(cm(2), [(1, 1)])
    with pytest.raises(AdvancePastFinal):
        stage_service.advance(stage, (0, 0))


def test_advance_rejects_choices_outside_the_game(cm):
    with pytest.raises(InvalidChoice):
        stage_service.advance(stage_service.initial_stage(cm(2)), (0, 2))


def test_touched_edges(cm):
    stage = stage_service.play(cm(3), [(0, 1)])
    assert stage_service.touched_edges(stage) == {(0, 0), (1, 1)}
    assert stage.played_left() == frozenset({0})
    assert stage.played_right() == frozenset({1})
    assert stage_service.played_choices(stage) == (frozenset({0}), frozenset({1}))


def test_format_trace(cm):
    stage = stage_service.play(cm(3), [(0, 1), (2, 2)])
    assert stage_service.format_trace(stage) == ['round 1: L0 R1 MISS', 'round 2: L2 R2 WIN']


def test_transposed_stage_swaps_roles(named):
    game = named('tri-2')
    stage = Stage(game, ((0, 2),))
    mirror = stage.transposed()
    assert mirror.game == game.transposed()
    assert mirror.history == ((2, 0),)
    assert mirror.transposed() == stage
