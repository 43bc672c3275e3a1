#!/usr/bin/env python3
"""
Stage Engine
Histories of repeated plays: transitions, win detection and touched edges
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, List, Set, Tuple

from game_service import Edge, Game
from wlc_errors import AdvancePastFinal, InvalidChoice


@dataclass(frozen=True)
class Stage:
    """A game plus the ordered (left, right) pairs played so far"""
    game: Game
    history: Tuple[Edge, ...] = ()

    @property
    def round_count(self) -> int:
        return len(self.history)

    @property
    def is_final(self) -> bool:
        return bool(self.history) and self.game.is_winning(*self.history[-1])

    @property
    def last_pair(self):
        return self.history[-1] if self.history else None

    def played_left(self) -> FrozenSet[int]:
        return frozenset(l for l, _ in self.history)

    def played_right(self) -> FrozenSet[int]:
        return frozenset(r for _, r in self.history)

    def transposed(self) -> 'Stage':
        """The stage seen with the player roles exchanged"""
        return Stage(self.game.transposed(), tuple((r, l) for l, r in self.history))


class StageService:
    """Creates and advances stages"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def initial_stage(self, game: Game) -> Stage:
        return Stage(game, ())

    def advance(self, stage: Stage, pair: Edge) -> Tuple[Stage, bool]:
        """Append one played pair; returns the new stage and whether it coordinated"""
        if stage.is_final:
            raise AdvancePastFinal(f'stage already coordinated at round {stage.round_count}')
        left, right = pair
        game = stage.game
        if not (0 <= left < game.left_count) or not (0 <= right < game.right_count):
            raise InvalidChoice(f'pair (L{left},R{right}) outside a '
                                f'{game.left_count}x{game.right_count} game')
        coordinated = game.is_winning(left, right)
        return Stage(game, stage.history + ((left, right),)), coordinated

    def play(self, game: Game, pairs: List[Edge]) -> Stage:
        """Advance from the initial stage through a list of pairs"""
        stage = self.initial_stage(game)
        for pair in pairs:
            stage, _ = self.advance(stage, pair)
        return stage

    def played_choices(self, stage: Stage) -> Tuple[FrozenSet[int], FrozenSet[int]]:
        """(left indices played, right indices played)"""
        return stage.played_left(), stage.played_right()

    def touched_edges(self, stage: Stage) -> Set[Edge]:
        left_played = stage.played_left()
        right_played = stage.played_right()
        return {(l, r) for l, r in stage.game.edges if l in left_played or r in right_played}

    def format_trace(self, stage: Stage) -> List[str]:
        lines = []
        for k, (l, r) in enumerate(stage.history, start=1):
            outcome = 'WIN' if stage.game.is_winning(l, r) else 'MISS'
            lines.append(f'round {k}: L{l} R{r} {outcome}')
        return lines


# Global instance
stage_service = StageService()
