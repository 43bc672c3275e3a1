import math
from fractions import Fraction

import numpy as np
import pytest

from exact_analysis_service import exact_analysis_service
from game_service import Game
from optimizer_service import formula_E, optimizer_service, project_rows_to_simplex
from protocol_service import protocol_service

Z_VALUE = (1 + math.sqrt(4 + math.sqrt(17))) / 2

GOLDEN = {1: 1, 2: 2, 3: 5 / 3, 4: 5 / 2, 5: 7 / 3, 6: 8 / 3, 7: 19 / 7, 8: 11 / 4, 9: 25 / 9}

C8 = Game(4, 4, ((0, 0), (0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 3)))


def test_round_probabilities_for_loop_avoidance():
    assert optimizer_service.coordination_round_probabilities(3) == (Fraction(1, 3), Fraction(2, 3))
    assert optimizer_service.coordination_round_probabilities(5) == (Fraction(1, 5), Fraction(4, 15), Fraction(8, 15))
    for m in (1, 3, 5, 7, 9):
        assert sum(optimizer_service.coordination_round_probabilities(m)) == 1
    with pytest.raises(ValueError):
        optimizer_service.coordination_round_probabilities(4)


def test_la_closed_form_matches_the_engine(cm):
    for m, expected in [(3, Fraction(5, 3)), (5, Fraction(7, 3)), (7, Fraction(3)), (9, Fraction(11, 3))]:
        assert optimizer_service.la_ect(m) == expected
    assert optimizer_service.la_ect(5) == exact_analysis_service.exact_ect(cm(5), protocol_service.la)


def test_cm_closed_forms():
    forms = optimizer_service.cm_closed_forms(5)
    assert forms.wm_ect == Fraction(13, 5)
    assert forms.la_ect == Fraction(7, 3)
    assert forms.la_gct == 3
    assert forms.optimal_ect == Fraction(7, 3)
    assert forms.optimal_gct == 3

    even = optimizer_service.cm_closed_forms(8)
    assert even.la_ect is None
    assert even.optimal_ect == Fraction(11, 4)
    assert math.isinf(even.optimal_gct)
    assert even.coordination_round_probabilities == ()
    with pytest.raises(ValueError):
        optimizer_service.cm_closed_forms(0)


def test_closed_form_golden_values():
    for m, value in GOLDEN.items():
        assert float(optimizer_service.optimal_ect_closed_form(m)) == pytest.approx(value, abs=1e-12)


def test_la_wm_table():
    table = optimizer_service.la_wm_table(9)
    assert [row['m'] for row in table] == [1, 3, 5, 7, 9]
    assert table[2] == {'m': 5, 'wm_ect': Fraction(13, 5), 'la_ect': Fraction(7, 3)}
    assert all(row['la_ect'] <= row['wm_ect'] for row in table[:3])
    assert all(row['wm_ect'] < row['la_ect'] for row in table[3:])


def test_two_touched_formula():
    assert formula_E(0, 1, 0, 0) == 1
    assert formula_E(Fraction(1), 3, 0, 0) == 1
    assert formula_E(Fraction(1, 2), 2, 2, 2) == Fraction(1, 4) * 2 + 1 + Fraction(1, 4) * 2
    with pytest.raises(ValueError):
        formula_E(2, 3, 0, 0)
    with pytest.raises(ValueError):
        formula_E(0.5, 0, 0, 0)


def test_simplex_projection():
    points = np.array([[0.2, 0.3, 0.5], [2.0, 0.0, 0.0], [-1.0, 0.5, 0.2], [0.4, 0.4, 0.4]])
    projected = project_rows_to_simplex(points)
    assert np.allclose(projected.sum(axis=1), 1.0)
    assert np.all(projected >= 0)
    assert np.allclose(projected[0], points[0])
    assert np.allclose(projected[1], [1.0, 0.0, 0.0])
    assert np.allclose(projected[3], [1 / 3] * 3)


@pytest.mark.parametrize('m', [
    1, 2, 3, 4, 5, 6,
    pytest.param(7, marks=pytest.mark.slow),
    pytest.param(8, marks=pytest.mark.slow),
    pytest.param(9, marks=pytest.mark.slow),
])
def test_optimal_ect_on_choice_matching(m, cm):
    result = optimizer_service.optimal_ect(cm(m))
    assert result.value == pytest.approx(GOLDEN[m], abs=1e-6)
    assert result.diagnostics['converged']
    assert result.diagnostics['residual'] < 1e-6
    assert result.value <= float(exact_analysis_service.exact_ect(cm(m), protocol_service.wm)) + 1e-9


def test_three_choice_values(named):
    values = {name: optimizer_service.optimal_ect(named(name)).value for name in
              ['tri-1', 'tri-2', 'tri-3', 'tri-4', 'tri-5', 'tri-6', 'c6', 'z']}
    assert values['z'] == pytest.approx(Z_VALUE, abs=1e-6)
    assert values['c6'] == pytest.approx(1.5, abs=1e-6)
    assert values['tri-1'] == pytest.approx(5 / 3, abs=1e-6)
    for name in ('tri-2', 'tri-3', 'tri-4', 'tri-5', 'tri-6'):
        assert values[name] == pytest.approx(1.0, abs=1e-6), name


@pytest.mark.parametrize('m, expected', [(1, 1), (2, math.inf), (3, 2), (4, math.inf), (5, 3)])
def test_optimal_gct_on_choice_matching(m, expected, cm):
    result = optimizer_service.optimal_gct(cm(m))
    assert result.value == expected
    if expected != math.inf:
        assert result.witness


def test_probe_cm4_has_a_flat_interval(cm):
    game = cm(4)
    result = optimizer_service.optimal_ect(game)
    probe = optimizer_service.uniqueness_probe(result)[optimizer_service.state_key_after(game, [(0, 1)])]
    assert probe.kind == 'interval'
    assert probe.optimum == pytest.approx(2.0, abs=1e-6)
    assert probe.touched_mass[0] == pytest.approx(0.0, abs=1e-6)
    assert probe.touched_mass[1] == pytest.approx(1.0, abs=1e-6)
    assert probe.spread < 1e-9


@pytest.mark.parametrize('m, mass', [(5, 0.0), (6, 1.0)])
def test_probe_singletons(m, mass, cm):
    game = cm(m)
    result = optimizer_service.optimal_ect(game)
    probe = optimizer_service.uniqueness_probe(result)[optimizer_service.state_key_after(game, [(0, 1)])]
    assert probe.kind == 'singleton'
    assert probe.touched_mass == pytest.approx((mass, mass), abs=1e-6)


def test_exported_policy_replays_exactly(cm):
    game = cm(3)
    result = optimizer_service.optimal_ect(game)
    exported = optimizer_service.export_policy(result)
    assert set(exported['policy']) == set(result.problem.order)
    protocol = protocol_service.class_weight_protocol(exported['policy'])
    assert float(exact_analysis_service.exact_ect(game, protocol)) == pytest.approx(5 / 3, abs=1e-6)


def test_problem_states_and_groups(cm):
    problem = optimizer_service.build_problem(cm(3))
    start = problem.states[problem.start]
    assert start.symmetric
    assert len(start.groups) == 1
    assert not start.has_focal_point
    after = problem.states[optimizer_service.state_key_after(cm(3), [(0, 1)])]
    assert after.has_focal_point
    for state in problem.states.values():
        assert state.transfer.shape == (len(state.rows), len(state.cols), problem.size)
        assert np.all(state.transfer.sum(axis=2) <= 1.0 + 1e-12)


def test_evaluate_uniform_actions(cm):
    problem = optimizer_service.build_problem(cm(4))
    values = optimizer_service.evaluate_actions(problem, optimizer_service._uniform_actions(problem))
    assert np.allclose(values, 4.0)


def test_eight_cycle_stays_below_wait_and_mirror():
    result = optimizer_service.optimal_ect(C8)
    assert result.diagnostics['converged']
    assert result.value <= float(exact_analysis_service.exact_ect(C8, protocol_service.wm)) + 1e-9
    assert result.value < 2.0 - 1e-6


def test_all_focal_states_coordinate_next_round():
    # every choice is a focal point once both misses have separated the cycle
    result = optimizer_service.optimal_ect(C8)
    key = optimizer_service.state_key_after(C8, [(0, 2), (0, 3)])
    assert result.values[key] == pytest.approx(1.0, abs=1e-6)


def test_eight_cycle_guaranteed_time_is_finite():
    result = optimizer_service.optimal_gct(C8)
    assert math.isfinite(result.value)
    assert result.witness


@pytest.mark.slow
@pytest.mark.parametrize('name', ['paths-2', 'paths-3', 'paths-4', 'hub5',
                                  'deg3-1', 'deg3-2', 'deg3-3', 'deg3-4', 'deg3-5', 'deg3-6'])
def test_five_choice_special_cases_take_two_rounds(name, named):
    result = optimizer_service.optimal_ect(named(name))
    assert result.value <= 2.0 + 1e-6
