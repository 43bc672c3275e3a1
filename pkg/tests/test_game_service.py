import json

import pytest

from game_service import NAMED_GAMES, ChoiceId, Game, Side, game_service
from wlc_errors import GameFormatError, GameValidationError


def test_choice_matching_has_disjoint_pairs(cm):
    game = cm(3)
    assert game.edges == ((0, 0), (1, 1), (2, 2))
    assert game_service.game_size(game) == 3
    assert game_service.validate(game).ok


def test_choice_matching_rejects_zero():
    with pytest.raises(ValueError):
        game_service.make_choice_matching(0)


def test_sides_and_choice_ids():
    assert Side.LEFT.other is Side.RIGHT
    assert str(ChoiceId(Side.RIGHT, 4)) == 'R4'
    game = Game(2, 3, ((0, 0), (1, 1), (1, 2)))
    assert game.choice_at(3) == ChoiceId(Side.RIGHT, 1)
    assert game.global_index(ChoiceId(Side.RIGHT, 1)) == 3
    assert game.partners(ChoiceId(Side.LEFT, 1)) == (1, 2)
    assert game.degree(ChoiceId(Side.RIGHT, 0)) == 1


def test_validation_reports_every_violation():
    report = game_service.validate(Game(2, 2, ((0, 0), (0, 0), (0, 3))))
    joined = ' '.join(report.violations)
    assert 'duplicate pair' in joined
    assert 'out of range' in joined
    assert 'surely losing choice Left#1' in joined
    assert 'surely losing choice Right#1' in joined
    assert not report.ok


def test_require_valid_raises_with_violations():
    with pytest.raises(GameValidationError) as excinfo:
        game_service.require_valid(Game(1, 1, ()))
    assert 'empty winning relation' in excinfo.value.violations


def test_parse_edge_list_with_comments():
    text = """
    # a path on three choices
    left 2
    right 2
    edge 0 0   # first pair
    edge 1 0
    edge 1 1
    """
    game = game_service.parse_game(text)
    assert game == Game(2, 2, ((0, 0), (1, 0), (1, 1)))
    assert game_service.parse_game(game_service.serialize_game(game)) == game


@pytest.mark.parametrize('text, line', [
    ('left 1\nright 1\nedge 0 0\nvertex 3\n', 4),
    ('left 1\nright 1\nedge 0 x\n', 3),
    ('left 1\nleft 1\n', 2),
    ('left 1\nright 1\nedge 0 1\n', 3),
    ('left -1\n', 1),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(GameFormatError) as excinfo:
        game_service.parse_game(text)
    assert excinfo.value.line_number == line


def test_parse_requires_headers():
    with pytest.raises(GameFormatError) as excinfo:
        game_service.parse_game('left 1\nedge 0 0\n')
    assert excinfo.value.line_number is None


def test_parse_rejects_surely_losing_choice():
    with pytest.raises(GameValidationError):
        game_service.parse_game('left 2\nright 1\nedge 0 0\n')


def test_json_mirror(cm):
    game = cm(2)
    data = game_service.game_to_json(game)
    assert data == {'left': 2, 'right': 2, 'edges': [[0, 0], [1, 1]]}
    assert game_service.game_from_json(json.dumps(data)) == game


def test_json_errors():
    with pytest.raises(GameFormatError):
        game_service.game_from_json('{not json')
    with pytest.raises(GameFormatError):
        game_service.game_from_json({'left': 1, 'right': 1})
    with pytest.raises(GameFormatError):
        game_service.game_from_json({'left': True, 'right': 1, 'edges': [[0, 0]]})


def test_load_game_from_files_and_catalog(tmp_path, cm):
    text_file = tmp_path / 'cm2.txt'
    text_file.write_text(game_service.serialize_game(cm(2)))
    json_file = tmp_path / 'cm2.json'
    json_file.write_text(json.dumps(game_service.game_to_json(cm(2))))

    assert game_service.load_game(str(text_file)) == cm(2)
    assert game_service.load_game(str(json_file)) == cm(2)
    assert game_service.load_game('CM4') == cm(4)
    assert game_service.load_game('z') == game_service.named_game('tri-8')
    with pytest.raises(GameFormatError):
        game_service.load_game('no-such-game')


def test_catalog_games_are_valid():
    for name in NAMED_GAMES:
        game = game_service.named_game(name)
        assert game_service.validate(game).ok, name
        expected = 3 if name.startswith('tri-') or name in ('z', 'c6') else 5
        assert game_service.game_size(game) == expected, name


def test_relabel_and_transpose():
    game = Game(2, 3, ((0, 0), (1, 1), (1, 2)))
    relabeled = game_service.relabel_game(game, [1, 0], [2, 1, 0])
    assert relabeled.edges == ((0, 0), (0, 1), (1, 2))
    swapped = game_service.relabel_game(game, [0, 1], [0, 1, 2], swap=True)
    assert swapped == game.transposed()
    assert swapped.left_count == 3 and swapped.right_count == 2
