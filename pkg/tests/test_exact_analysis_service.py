import math
from fractions import Fraction

import pytest

from exact_analysis_service import WIN, exact_analysis_service, format_value, rationalize
from game_service import Side
from protocol_service import ChoiceDistribution, protocol_service
from stage_service import stage_service
from wlc_errors import StateExplosion

wm = protocol_service.wm
la = protocol_service.la
uniform = protocol_service.uniform


def test_format_value():
    assert format_value(Fraction(7, 3)) == '7/3'
    assert format_value(2) == '2/1'
    assert format_value(math.inf) == 'inf'


def test_rationalize_renormalizes_floats():
    weights = rationalize(ChoiceDistribution(Side.LEFT, (1 / 3, 2 / 3)))
    assert weights == (Fraction(1, 3), Fraction(2, 3))
    assert sum(weights) == 1


@pytest.mark.parametrize('m', range(2, 10))
def test_wm_on_choice_matching(m, cm):
    assert exact_analysis_service.exact_ect(cm(m), wm) == 3 - Fraction(2, m)


@pytest.mark.parametrize('m, expected', [
    (3, Fraction(5, 3)),
    (5, Fraction(7, 3)),
    (7, Fraction(3)),
    pytest.param(9, Fraction(11, 3), marks=pytest.mark.slow),
])
def test_la_on_odd_choice_matching(m, expected, cm):
    assert exact_analysis_service.exact_ect(cm(m), la) == expected


@pytest.mark.parametrize('m', [1, 3, 5, 7])
def test_la_guarantees_half_the_pairs(m, cm):
    assert exact_analysis_service.exact_gct(cm(m), la) == (m + 1) // 2


@pytest.mark.parametrize('m', [2, 4, 6, 8])
def test_even_choice_matching_has_no_guarantee(m, cm):
    assert exact_analysis_service.exact_gct(cm(m), la) == math.inf


@pytest.mark.parametrize('m', [1, 2, 3, 4])
def test_uniform_play(m, cm):
    game = cm(m)
    assert exact_analysis_service.exact_ect(game, uniform) == m
    assert exact_analysis_service.oscp(game, uniform) == Fraction(1, m)


def test_one_choice_game_is_immediate(cm):
    report = exact_analysis_service.analyze(cm(1), uniform)
    assert report.oscp == 1
    assert report.ect == 1
    assert report.gct == 1
    assert report.to_dict()['ect'] == '1/1'


def test_analyze_report(cm):
    report = exact_analysis_service.analyze(cm(3), la)
    assert report.to_dict() == {
        'game': {'left': 3, 'right': 3, 'edges': [[0, 0], [1, 1], [2, 2]]},
        'protocol': 'la',
        'oscp': '1/3',
        'ect': '5/3',
        'gct': 2,
        'states': report.states,
    }


def test_chain_rows_are_stochastic(named):
    for name in ('z', 'c6', 'tri-3', 'cm4'):
        chain = exact_analysis_service.build_chain(named(name), wm)
        for key in chain.states:
            assert sum(chain.successors(key).values()) == 1, name
            assert all(p > 0 for p in chain.successors(key).values())


def test_wm_two_touched_state_needs_two_more_rounds(cm, play):
    game = cm(2)
    chain = exact_analysis_service.build_chain(game, wm)
    stage = play(game, [(0, 1)])
    key = exact_analysis_service.symmetry.canonical_state_key(stage, wm.memory_marks(stage))
    assert exact_analysis_service.conditional_ect(chain, key) == 2
    assert exact_analysis_service.conditional_ect(chain, WIN) == 0
    assert chain.size == 2


def test_renaming_merge_agrees_when_finite(cm):
    assert exact_analysis_service.exact_ect(cm(3), la, merge='renaming') == Fraction(5, 3)


def test_renaming_merge_explodes_on_unbounded_histories(cm):
    with pytest.raises(StateExplosion):
        exact_analysis_service.build_chain(cm(2), wm, max_states=50, merge='renaming')


def test_state_budget(cm):
    with pytest.raises(StateExplosion) as excinfo:
        exact_analysis_service.build_chain(cm(3), wm, max_states=1)
    assert excinfo.value.max_states == 1


def test_unknown_merge_mode(cm):
    with pytest.raises(ValueError):
        exact_analysis_service.build_chain(cm(2), wm, merge='history')


def test_uniform_never_guarantees(cm):
    assert exact_analysis_service.exact_gct(cm(2), uniform) == math.inf
    assert exact_analysis_service.exact_gct(cm(3), uniform) == math.inf


def test_wm_bound_on_three_choice_games(named):
    for index in range(1, 9):
        game = named(f'tri-{index}')
        bound = 3 - 2 * exact_analysis_service.oscp(game, uniform)
        assert exact_analysis_service.exact_ect(game, wm) <= bound


def test_chain_dump(cm):
    chain = exact_analysis_service.build_chain(cm(3), la)
    dump = exact_analysis_service.chain_to_json(chain)
    assert dump['start'] == chain.start
    assert dump['states'][0]['history'] == []
    assert dump['states'][0]['transitions'][WIN] == '1/3'
    assert len(dump['states']) == chain.size


def test_initial_stage_is_the_chain_start(cm):
    chain = exact_analysis_service.build_chain(cm(4), uniform)
    assert chain.representatives[chain.start] == stage_service.initial_stage(cm(4))


def test_hub_opening_takes_two_rounds(named):
    assert exact_analysis_service.exact_ect(named('hub5'), protocol_service.hub) == 2
