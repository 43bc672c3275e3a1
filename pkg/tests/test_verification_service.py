import pytest

from enumeration_service import enumeration_service
from game_service import game_service
from optimizer_service import optimizer_service
from protocol_service import protocol_service
from verification_service import golden_gct, golden_protocol, verification_service


def test_golden_expectations():
    assert [golden_gct(m) for m in (1, 3, 5, 7, 9)] == [1, 2, 3, 4, 5]
    assert golden_gct(4) == float('inf')
    assert [golden_protocol(m) for m in range(1, 8)] == [None, 'wm', 'la', '-', 'la', 'wm', 'wm']


@pytest.mark.parametrize('m', [
    1, 2, 3, 4, 5, 6,
    pytest.param(7, marks=pytest.mark.slow),
    pytest.param(8, marks=pytest.mark.slow),
    pytest.param(9, marks=pytest.mark.slow),
])
def test_golden_rows(m):
    row, failures, notes = verification_service.golden_row(m)
    assert failures == []
    assert row['ect_ok'] and row['gct_ok'] and row['protocol_ok'] and row['gct_protocol_ok']
    if m == 9:
        assert notes


def test_golden_table_frame():
    report = verification_service.golden_table(max_m=3)
    assert report.passed
    assert list(report.frame['m']) == [1, 2, 3]
    assert list(report.frame['protocol']) == ['any', 'WM', 'LA']
    assert report.to_dict()['passed'] is True


def test_optimal_policy_matches_la_support_on_cm3(cm):
    result = optimizer_service.optimal_ect(cm(3))
    assert verification_service.support_mismatches(result, protocol_service.la) == []
    assert len(verification_service.reachable_keys(result)) == 2


def test_wm_support_differs_from_la_on_cm3(cm):
    result = optimizer_service.optimal_ect(cm(3))
    assert verification_service.support_mismatches(result, protocol_service.wm)


def test_random_games_are_valid_and_seeded():
    games = verification_service.random_games(10, 5, 8, seed=3)
    assert games == verification_service.random_games(10, 5, 8, seed=3)
    for game in games:
        assert game_service.validate(game).ok
        assert 5 <= game_service.game_size(game) <= 8


@pytest.mark.parametrize('m', [1, 2, 3, pytest.param(4, marks=pytest.mark.slow)])
def test_wm_bound_on_small_games(m):
    games = [game for _, game in enumeration_service.enumerate_games(m)]
    report = verification_service.wm_bound_check(games)
    assert report.passed
    assert len(report.frame) == len(games)


def test_wm_bound_on_random_games():
    report = verification_service.wm_bound_check(verification_service.random_games(4, 5, 5, seed=0))
    assert report.passed


@pytest.mark.slow
def test_wm_bound_on_two_hundred_random_games():
    report = verification_service.wm_bound_check(verification_service.random_games(200, 5, 8, seed=0))
    assert report.passed


@pytest.mark.parametrize('m', [2, 3, pytest.param(4, marks=pytest.mark.slow)])
def test_wm_safety(m):
    report = verification_service.wm_safety_check(m)
    assert report.passed
    assert len(report.frame) == len(list(enumeration_service.enumerate_games(m))) - 1


def test_wm_safety_is_limited():
    with pytest.raises(ValueError):
        verification_service.wm_safety_check(5)


@pytest.mark.parametrize('m', [2, 3, 4, 5])
def test_lower_bound_without_focal_points(m):
    report = verification_service.lower_bound_check(m)
    assert report.passed
    assert len(report.frame) >= 1
