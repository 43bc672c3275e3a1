import json
from fractions import Fraction

import pytest

from game_service import Game, Side
from protocol_service import (ChoiceDistribution, ClassWeightProtocol, Protocol, WaitOrMoveProtocol,
                              protocol_service, uniform_distribution)
from stage_service import Stage, stage_service
from wlc_errors import InvalidDistribution, MissingStageEntry, NoCoordinatingChoice

HALF = Fraction(1, 2)


def test_distribution_must_sum_to_one():
    with pytest.raises(InvalidDistribution):
        ChoiceDistribution(Side.LEFT, (Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(InvalidDistribution):
        ChoiceDistribution(Side.LEFT, (Fraction(3, 2), Fraction(-1, 2)))
    with pytest.raises(InvalidDistribution):
        ChoiceDistribution(Side.RIGHT, (0.5, 0.4))
    assert not ChoiceDistribution(Side.RIGHT, (0.25, 0.75)).exact


def test_uniform_protocol(cm):
    distribution = protocol_service.uniform_protocol(stage_service.initial_stage(cm(3)), Side.LEFT)
    assert distribution == uniform_distribution(Side.LEFT, 3)
    assert distribution.weights == (Fraction(1, 3),) * 3
    assert distribution.support() == (0, 1, 2)


def test_wm_after_a_miss(cm, play):
    stage = play(cm(3), [(0, 1)])
    left = protocol_service.wm_protocol(stage, Side.LEFT)
    right = protocol_service.wm_protocol(stage, Side.RIGHT)
    assert left.weights == (HALF, HALF, 0)
    assert right.weights == (HALF, HALF, 0)


def test_wm_marginal_over_several_alternatives(named, play):
    stage = play(named('tri-3'), [(0, 2)])
    right = protocol_service.wm_protocol(stage, Side.RIGHT)
    assert right.weights == (Fraction(1, 4), Fraction(1, 4), HALF)

    committed = protocol_service.wm_protocol(stage, Side.RIGHT, seed=7)
    assert sorted(committed.weights) == [0, HALF, HALF]
    assert committed.probability(2) == HALF
    assert protocol_service.wm_protocol(stage, Side.RIGHT, seed=7) == committed


def test_wm_remembers_a_revealed_alternative(named, play):
    stage = play(named('tri-3'), [(0, 2), (1, 0)])
    assert protocol_service.wm.revealed_alternative(stage, Side.RIGHT) == 0
    assert protocol_service.wm_protocol(stage, Side.RIGHT).weights == (HALF, 0, HALF)
    redraw = protocol_service.wm_protocol(stage, Side.RIGHT, redraw=True)
    assert redraw.weights == (Fraction(1, 4), Fraction(1, 4), HALF)


def test_wm_needs_a_coordinating_alternative():
    stage = Stage(Game(2, 2, ((0, 0),)), ((0, 1),))
    with pytest.raises(NoCoordinatingChoice):
        protocol_service.wm_protocol(stage, Side.LEFT)


def test_wm_memory_marks(cm, play):
    wm = protocol_service.wm
    assert wm.memory_marks(stage_service.initial_stage(cm(3))) is None
    assert wm.memory_marks(play(cm(3), [(0, 1)])) == (1, 2, 0, 2, 1, 0)


def test_la_avoids_recreating_the_partition(cm, play):
    stage = play(cm(3), [(0, 1)])
    assert protocol_service.la.allowed_choices(stage, Side.LEFT) == (2,)
    assert protocol_service.la_protocol(stage, Side.RIGHT).weights == (0, 0, 1)
    initial = stage_service.initial_stage(cm(3))
    assert protocol_service.la_protocol(initial, Side.LEFT).weights == (Fraction(1, 3),) * 3


def test_la_is_uniform_when_everything_recreates(cm, play):
    stage = play(cm(2), [(0, 1)])
    assert protocol_service.la_protocol(stage, Side.LEFT).weights == (HALF, HALF)


def test_hub_opening(named, play):
    game = named('hub5')
    initial = stage_service.initial_stage(game)
    left = protocol_service.hub_opening_protocol(initial, Side.LEFT)
    right = protocol_service.hub_opening_protocol(initial, Side.RIGHT)
    assert left.weights == (HALF,) + (Fraction(1, 8),) * 4
    assert right.weights == (Fraction(1, 8),) * 4 + (HALF,)
    later = play(game, [(0, 4)])
    assert protocol_service.hub.distribution(later, Side.LEFT) == protocol_service.wm.distribution(later, Side.LEFT)


def test_class_weight_protocol(cm, play):
    game = cm(2)
    symmetry = protocol_service.symmetry
    initial = stage_service.initial_stage(game)
    key = symmetry.canonical_state_key(initial)
    protocol = protocol_service.class_weight_protocol({key: ['1']})
    assert protocol.distribution(initial, Side.LEFT).weights == (HALF, HALF)

    with pytest.raises(MissingStageEntry):
        protocol.distribution(play(game, [(0, 1)]), Side.LEFT)
    with pytest.raises(InvalidDistribution):
        protocol_service.class_weight_protocol({key: ['1', '0']}).distribution(initial, Side.LEFT)
    with pytest.raises(InvalidDistribution):
        protocol_service.class_weight_protocol({key: ['abc']})


def test_class_weight_protocol_splits_classes(cm, play):
    stage = play(cm(3), [(0, 1)])
    layout = protocol_service.symmetry.class_layout(stage)
    focal = layout.classes.index((2, 5))
    weights = ['0'] * len(layout.classes)
    weights[focal] = '1'
    protocol = ClassWeightProtocol({layout.key: weights})
    assert protocol.distribution(stage, Side.LEFT).weights == (0, 0, 1)
    assert protocol.distribution(stage, Side.RIGHT).weights == (0, 0, 1)


def test_load_table(tmp_path, cm):
    key = protocol_service.symmetry.canonical_state_key(stage_service.initial_stage(cm(2)))
    path = tmp_path / 'policy.json'
    path.write_text(json.dumps({'policy': {key: [1.0]}}))
    protocol = protocol_service.load_table(str(path))
    assert protocol.name == f'table:{path}'
    assert protocol.distribution(stage_service.initial_stage(cm(2)), Side.RIGHT).weights == (0.5, 0.5)

    path.write_text(json.dumps([1, 2]))
    with pytest.raises(InvalidDistribution):
        protocol_service.load_table(str(path))


def test_protocol_by_name():
    assert protocol_service.protocol_by_name('wm') is protocol_service.wm
    assert protocol_service.protocol_by_name('wm-redraw').name == 'wm-redraw'
    assert isinstance(protocol_service.protocol_by_name('wm-redraw'), WaitOrMoveProtocol)
    assert protocol_service.protocol_by_name('la').name == 'la'
    with pytest.raises(ValueError):
        protocol_service.protocol_by_name('greedy')


@pytest.mark.parametrize('name', ['uniform', 'wm', 'la'])
@pytest.mark.parametrize('m', [
    2, 3,
    pytest.param(4, marks=pytest.mark.slow),
    pytest.param(5, marks=pytest.mark.slow),
])
def test_protocols_are_structural_on_reachable_stages(name, m, cm):
    protocol = protocol_service.protocol_by_name(name)
    for stage in protocol_service.reachable_stages(protocol, cm(m), 4):
        assert protocol_service.structurality_check(protocol, stage)


def test_structurality_check_catches_a_biased_rule(cm):
    class FirstChoice(Protocol):
        name = 'first'

        def distribution(self, stage, side, seed=None):
            weights = [0] * stage.game.side_count(side)
            weights[0] = 1
            return ChoiceDistribution(side, tuple(weights))

    assert not protocol_service.structurality_check(FirstChoice(), stage_service.initial_stage(cm(2)))


def test_reachable_stages(cm):
    stages = protocol_service.reachable_stages(protocol_service.uniform, cm(2), 1)
    assert [stage.history for stage in stages] == [(), ((0, 1),), ((1, 0),)]


def test_la_on_five_pairs(cm, play):
    third = Fraction(1, 3)
    after_one = play(cm(5), [(0, 1)])
    assert protocol_service.la_protocol(after_one, Side.LEFT).weights == (0, 0, third, third, third)
    assert protocol_service.la_protocol(after_one, Side.RIGHT).weights == (0, 0, third, third, third)
    after_two = play(cm(5), [(0, 1), (2, 3)])
    assert protocol_service.la_protocol(after_two, Side.LEFT).weights == (0, 0, 0, 0, 1)
    assert protocol_service.la_protocol(after_two, Side.RIGHT).weights == (0, 0, 0, 0, 1)


@pytest.mark.parametrize('m', [3, 5, pytest.param(7, marks=pytest.mark.slow)])
def test_la_never_plays_a_touched_edge(m, cm):
    game = cm(m)
    for stage in protocol_service.reachable_stages(protocol_service.la, game, (m + 1) // 2):
        touched = stage_service.touched_edges(stage)
        for l in protocol_service.la_protocol(stage, Side.LEFT).support():
            assert not any((l, r) in touched for r in game.right_neighbors[l]), stage.history
        for r in protocol_service.la_protocol(stage, Side.RIGHT).support():
            assert not any((l, r) in touched for l in game.left_neighbors[r]), stage.history


@pytest.mark.parametrize('name', ['cm3', 'cm4', 'tri-3', 'z', 'c6', 'hub5'])
def test_wm_commits_to_at_most_two_choices(name, named):
    for stage in protocol_service.reachable_stages(protocol_service.wm, named(name), 3):
        if not stage.history:
            continue
        for side in (Side.LEFT, Side.RIGHT):
            for seed in range(4):
                assert len(protocol_service.wm_protocol(stage, side, seed=seed).support()) <= 2, stage.history
