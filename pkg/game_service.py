#!/usr/bin/env python3
"""
Game Model Service
Two-player win-lose coordination games: construction, validation and interchange formats
"""

import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Tuple, Union

from wlc_errors import GameFormatError, GameValidationError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


class Side(Enum):
    LEFT = 'L'
    RIGHT = 'R'

    @property
    def other(self) -> 'Side':
        return Side.RIGHT if self is Side.LEFT else Side.LEFT

    @property
    def label(self) -> str:
        return 'Left' if self is Side.LEFT else 'Right'


class ChoiceId(NamedTuple):
    side: Side
    index: int

    def __str__(self) -> str:
        return f'{self.side.value}{self.index}'


@dataclass(frozen=True)
class Game:
    """A bipartite winning structure; edges are (left index, right index) pairs"""
    left_count: int
    right_count: int
    edges: Tuple[Edge, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'edges', tuple(sorted((int(l), int(r)) for l, r in self.edges)))

    @property
    def choice_count(self) -> int:
        return self.left_count + self.right_count

    @cached_property
    def edge_set(self) -> FrozenSet[Edge]:
        return frozenset(self.edges)

    @property
    def winning(self) -> FrozenSet[Tuple[ChoiceId, ChoiceId]]:
        return frozenset((ChoiceId(Side.LEFT, l), ChoiceId(Side.RIGHT, r)) for l, r in self.edges)

    def is_winning(self, left: int, right: int) -> bool:
        return (left, right) in self.edge_set

    @cached_property
    def right_neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        """For each left choice, the right choices it wins with"""
        table = [[] for _ in range(self.left_count)]
        for l, r in self.edge_set:
            if 0 <= l < self.left_count:
                table[l].append(r)
        return tuple(tuple(sorted(row)) for row in table)

    @cached_property
    def left_neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        """For each right choice, the left choices it wins with"""
        table = [[] for _ in range(self.right_count)]
        for l, r in self.edge_set:
            if 0 <= r < self.right_count:
                table[r].append(l)
        return tuple(tuple(sorted(row)) for row in table)

    def partners(self, choice: ChoiceId) -> Tuple[int, ...]:
        if choice.side is Side.LEFT:
            return self.right_neighbors[choice.index]
        return self.left_neighbors[choice.index]

    def degree(self, choice: ChoiceId) -> int:
        return len(self.partners(choice))

    def side_count(self, side: Side) -> int:
        return self.left_count if side is Side.LEFT else self.right_count

    # Dense global indexing used by the renaming search: left i -> i, right j -> left_count + j
    def global_index(self, choice: ChoiceId) -> int:
        return choice.index if choice.side is Side.LEFT else self.left_count + choice.index

    def choice_at(self, position: int) -> ChoiceId:
        if position < self.left_count:
            return ChoiceId(Side.LEFT, position)
        return ChoiceId(Side.RIGHT, position - self.left_count)

    def transposed(self) -> 'Game':
        """The same game with the two player roles exchanged"""
        return Game(self.right_count, self.left_count, tuple((r, l) for l, r in self.edges))

    def __str__(self) -> str:
        return f'Game({self.left_count}x{self.right_count}, |W|={len(self.edge_set)})'


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


class GameService:
    """Builds, checks and (de)serializes games"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def make_choice_matching(self, m: int) -> Game:
        """CM_m: m disjoint winning pairs (i, i)"""
        if m < 1:
            raise ValueError(f'choice matching games need m >= 1, got {m}')
        return Game(m, m, tuple((i, i) for i in range(m)))

    def validate(self, game: Game) -> ValidationReport:
        report = ValidationReport()
        if game.left_count < 1:
            report.violations.append('left side needs at least one choice')
        if game.right_count < 1:
            report.violations.append('right side needs at least one choice')
        if not game.edges:
            report.violations.append('empty winning relation')

        seen = set()
        for l, r in game.edges:
            if not (0 <= l < game.left_count) or not (0 <= r < game.right_count):
                report.violations.append(f'pair (L{l},R{r}) out of range')
            elif (l, r) in seen:
                report.violations.append(f'duplicate pair (L{l},R{r})')
            seen.add((l, r))

        used_left = {l for l, _ in seen}
        used_right = {r for _, r in seen}
        for i in range(max(game.left_count, 0)):
            if i not in used_left:
                report.violations.append(f'surely losing choice Left#{i}')
        for j in range(max(game.right_count, 0)):
            if j not in used_right:
                report.violations.append(f'surely losing choice Right#{j}')
        return report

    def require_valid(self, game: Game) -> Game:
        report = self.validate(game)
        if not report.ok:
            raise GameValidationError(report.violations)
        return game

    def game_size(self, game: Game) -> int:
        return max(game.left_count, game.right_count)

    def relabel_game(self, game: Game, left_perm: List[int], right_perm: List[int], swap: bool = False) -> Game:
        """Apply a renaming: left i -> left_perm[i], right j -> right_perm[j], then optionally swap roles"""
        edges = tuple((left_perm[l], right_perm[r]) for l, r in game.edges)
        renamed = Game(game.left_count, game.right_count, edges)
        return renamed.transposed() if swap else renamed

    def parse_game(self, text: str) -> Game:
        """Parse the edge-list format: `left n`, `right n`, `edge li ri`, `#` comments"""
        counts: Dict[str, int] = {}
        edges: List[Tuple[int, int, int]] = []

        for line_number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            keyword = tokens[0]
            try:
                values = [int(token) for token in tokens[1:]]
            except ValueError:
                raise GameFormatError(line_number, f'expected integers after "{keyword}"')
            if any(v < 0 for v in values):
                raise GameFormatError(line_number, 'negative numbers are not allowed')

            if keyword in ('left', 'right'):
                if len(values) != 1:
                    raise GameFormatError(line_number, f'"{keyword}" takes exactly one count')
                if keyword in counts:
                    raise GameFormatError(line_number, f'duplicate "{keyword}" header')
                counts[keyword] = values[0]
            elif keyword == 'edge':
                if len(values) != 2:
                    raise GameFormatError(line_number, '"edge" takes a left and a right index')
                edges.append((line_number, values[0], values[1]))
            else:
                raise GameFormatError(line_number, f'unknown directive "{keyword}"')

        for header in ('left', 'right'):
            if header not in counts:
                raise GameFormatError(None, f'missing "{header}" header')

        for line_number, l, r in edges:
            if l >= counts['left'] or r >= counts['right']:
                raise GameFormatError(line_number, f'edge {l} {r} index out of range '
                                                   f'(left {counts["left"]}, right {counts["right"]})')

        game = Game(counts['left'], counts['right'], tuple((l, r) for _, l, r in edges))
        return self.require_valid(game)

    def serialize_game(self, game: Game) -> str:
        lines = [f'left {game.left_count}', f'right {game.right_count}']
        lines.extend(f'edge {l} {r}' for l, r in sorted(game.edges))
        return '\n'.join(lines) + '\n'

    def game_to_json(self, game: Game) -> dict:
        return {
            'left': game.left_count,
            'right': game.right_count,
            'edges': [[l, r] for l, r in sorted(game.edges)],
        }

    def game_from_json(self, data: Union[str, dict]) -> Game:
        if isinstance(data, str):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as e:
                raise GameFormatError(e.lineno, f'invalid JSON: {e.msg}')
        try:
            left, right = data['left'], data['right']
            pairs = data['edges']
        except (KeyError, TypeError):
            raise GameFormatError(None, 'JSON game needs "left", "right" and "edges"')
        for value in [left, right] + [v for pair in pairs for v in pair]:
            if not isinstance(value, int) or isinstance(value, bool):
                raise GameFormatError(None, 'JSON game fields must be integers')
        if any(len(pair) != 2 for pair in pairs):
            raise GameFormatError(None, 'each JSON edge is a [left, right] pair')
        return self.require_valid(Game(left, right, tuple((l, r) for l, r in pairs)))

    def load_game(self, source: str) -> Game:
        """Load a game from an edge-list or JSON file, or resolve a catalog name"""
        if os.path.isfile(source):
            with open(source, 'r', encoding='utf-8') as f:
                text = f.read()
            self.logger.info(f'Loaded game file {source}')
            if source.endswith('.json'):
                return self.game_from_json(text)
            return self.parse_game(text)
        return self.named_game(source)

    def named_game(self, name: str) -> Game:
        name = name.strip().lower()
        if name.startswith('cm'):
            digits = name[2:].lstrip('_:-')
            if digits.isdigit():
                return self.make_choice_matching(int(digits))
        if name in NAMED_GAMES:
            left, right, edges = NAMED_GAMES[name]
            return Game(left, right, edges)
        raise GameFormatError(None, f'"{name}" is neither a file nor a known game '
                                    f'(known: cm<m>, {", ".join(sorted(NAMED_GAMES))})')


# Catalog of games discussed in the 3- and 5-choice classification.
# Indices follow the bottom-to-top order of the pictured graphs.
NAMED_GAMES: Dict[str, Tuple[int, int, Tuple[Edge, ...]]] = {
    'tri-1': (3, 3, ((0, 0), (1, 1), (2, 2))),
    'tri-2': (2, 3, ((0, 0), (1, 1), (1, 2))),
    'tri-3': (2, 3, ((0, 0), (0, 1), (1, 1), (1, 2))),
    'tri-4': (3, 3, ((0, 0), (1, 1), (1, 2), (2, 2))),
    'tri-5': (3, 3, ((0, 0), (0, 1), (1, 1), (1, 2), (2, 2))),
    'tri-6': (3, 3, ((0, 0), (1, 1), (1, 2), (2, 1), (2, 2))),
    'tri-7': (3, 3, ((0, 0), (0, 1), (1, 0), (1, 2), (2, 1), (2, 2))),
    'tri-8': (3, 3, ((0, 0), (1, 0), (2, 1), (2, 2))),
    'deg3-1': (5, 5, ((0, 1), (1, 1), (2, 1), (3, 2), (3, 3), (3, 4), (0, 0), (4, 4))),
    'deg3-2': (5, 4, ((0, 0), (1, 0), (2, 0), (3, 1), (3, 2), (3, 3), (4, 3))),
    'deg3-3': (5, 4, ((0, 0), (1, 0), (2, 0), (3, 1), (3, 2), (3, 3), (2, 1), (4, 3))),
    'deg3-4': (5, 5, ((0, 0), (1, 0), (2, 0), (3, 1), (3, 2), (3, 3), (4, 4))),
    'deg3-5': (5, 5, ((0, 0), (1, 0), (2, 0), (3, 1), (3, 2), (3, 3), (2, 1), (4, 4))),
    'deg3-6': (5, 5, ((0, 0), (1, 0), (2, 0), (3, 1), (3, 2), (3, 3), (4, 3), (4, 4))),
    'paths-1': (5, 5, ((0, 0), (1, 1), (2, 2), (3, 3), (4, 4))),
    'paths-2': (5, 5, ((4, 4), (4, 3), (3, 2), (2, 2), (1, 1), (0, 0))),
    'paths-3': (5, 5, ((4, 4), (4, 3), (3, 4), (3, 2), (2, 3), (2, 2), (1, 1), (0, 0))),
    'paths-4': (5, 5, ((1, 0), (1, 1), (2, 1), (3, 2), (3, 3), (4, 3), (0, 0), (4, 4))),
    'hub5': (5, 5, ((0, 0), (0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4), (4, 4))),
}
NAMED_GAMES['z'] = NAMED_GAMES['tri-8']
NAMED_GAMES['c6'] = NAMED_GAMES['tri-7']

# Global instance
game_service = GameService()
