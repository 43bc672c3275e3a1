from fractions import Fraction

import pytest

from coordination_simulator import coordination_simulator, episode_key
from exact_analysis_service import exact_analysis_service
from protocol_service import protocol_service


def test_episode_keys_are_stable_and_distinct():
    assert episode_key(1, 0) == episode_key(1, 0)
    assert episode_key(1, 0) != episode_key(1, 1)
    assert episode_key(1, 0) != episode_key(2, 0)
    assert 0 <= episode_key(7, 3) < 2 ** 128


def test_single_choice_game_coordinates_at_once(cm):
    report = coordination_simulator.simulate(cm(1), protocol_service.uniform, 200, seed=3)
    assert report.mean == 1.0
    assert report.stderr == 0.0
    assert report.histogram == {1: 200}
    assert report.truncated == 0
    assert report.within(1)


def test_reports_are_reproducible(cm):
    first = coordination_simulator.simulate(cm(3), protocol_service.wm, 500, seed=11)
    second = coordination_simulator.simulate(cm(3), protocol_service.wm, 500, seed=11)
    assert first.to_dict() == second.to_dict()
    assert sum(first.histogram.values()) == 500


@pytest.mark.parametrize('m, name', [(2, 'wm'), (3, 'la'), (3, 'wm'), (4, 'uniform'), (5, 'la')])
def test_simulation_agrees_with_exact_analysis(m, name, cm):
    protocol = protocol_service.protocol_by_name(name)
    exact = exact_analysis_service.exact_ect(cm(m), protocol)
    report = coordination_simulator.simulate(cm(m), protocol, 4000, seed=2024)
    assert report.truncated == 0
    assert report.within(exact)


def test_la_never_needs_more_than_its_guarantee(cm):
    report = coordination_simulator.simulate(cm(5), protocol_service.la, 1000, seed=5)
    assert max(report.histogram) <= 3


def test_truncation_is_reported_not_raised(cm):
    report = coordination_simulator.simulate(cm(2), protocol_service.uniform, 400, seed=1, max_rounds=1)
    assert report.truncated > 0
    assert report.truncation_exceeded
    assert report.mean == 1.0
    assert report.truncated + report.histogram[1] == 400
    assert report.to_dict()['truncation_exceeded'] is True


def test_episodes_must_be_positive(cm):
    with pytest.raises(ValueError):
        coordination_simulator.simulate(cm(2), protocol_service.uniform, 0, seed=1)


@pytest.mark.slow
@pytest.mark.parametrize('m, name, expected', [
    (5, 'la', Fraction(7, 3)),
    (2, 'wm', Fraction(2)),
    (7, 'wm', Fraction(19, 7)),
])
def test_large_simulations(m, name, expected, cm):
    report = coordination_simulator.simulate(cm(m), protocol_service.protocol_by_name(name), 100000, seed=42,
                                             max_rounds=10000)
    assert report.truncated == 0
    assert report.within(expected)
