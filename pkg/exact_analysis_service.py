#!/usr/bin/env python3
"""
Exact Analysis Service
OSCP, expected and guaranteed coordination times of a fixed protocol in exact rationals
"""

import logging
import math
import sys
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

from game_service import Game, Side, game_service
from protocol_service import ChoiceDistribution, Protocol
from stage_service import Stage, stage_service
from symmetry_service import SymmetryService, symmetry_service
from wlc_config import get_solver_config
from wlc_errors import StateExplosion

WIN = 'WIN'
MERGE_MODES = ('partition', 'renaming')

Value = Union[Fraction, float]


def format_value(value) -> str:
    """Rationals as num/den, infinity as inf"""
    if isinstance(value, float) and math.isinf(value):
        return 'inf'
    if isinstance(value, Fraction):
        return f'{value.numerator}/{value.denominator}'
    if isinstance(value, int):
        return f'{value}/1'
    return repr(value)


def rationalize(distribution: ChoiceDistribution) -> Tuple[Fraction, ...]:
    """Exact weights; float weights are rounded to nearby rationals and renormalized"""
    if distribution.exact:
        return tuple(Fraction(w) for w in distribution.weights)
    rounded = [Fraction(w).limit_denominator(10 ** 9) for w in distribution.weights]
    total = sum(rounded)
    return tuple(w / total for w in rounded)


@dataclass
class StageChain:
    """Merged stages reachable under a protocol; WIN is the absorbing state"""
    game: Game
    protocol_name: str
    merge: str
    start: str
    states: List[str] = field(default_factory=list)
    representatives: Dict[str, Stage] = field(default_factory=dict)
    transitions: Dict[str, Dict[str, Fraction]] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.states)

    def successors(self, key: str) -> Dict[str, Fraction]:
        return self.transitions[key]


@dataclass
class AnalysisReport:
    game: Game
    protocol_name: str
    oscp: Fraction
    ect: Value
    gct: Union[int, float]
    states: int

    def to_dict(self) -> dict:
        return {
            'game': game_service.game_to_json(self.game),
            'protocol': self.protocol_name,
            'oscp': format_value(self.oscp),
            'ect': format_value(self.ect),
            'gct': 'inf' if math.isinf(self.gct) else self.gct,
            'states': self.states,
        }


class ExactAnalysisService:
    """Builds stage chains and solves them exactly"""

    def __init__(self, symmetry: Optional[SymmetryService] = None):
        self.logger = logging.getLogger(__name__)
        self.symmetry = symmetry or symmetry_service

    def _merge_key(self, stage: Stage, protocol: Protocol, merge: str) -> str:
        if merge == 'renaming':
            return self.symmetry.canonical_stage_key(stage)
        return self.symmetry.canonical_state_key(stage, protocol.memory_marks(stage))

    def build_chain(self, game: Game, protocol: Protocol, max_states: Optional[int] = None,
                    merge: str = 'partition') -> StageChain:
        """Markov chain of the protocol's play; under partition merge it is exact only where the stage is determined by its partition"""
        if merge not in MERGE_MODES:
            raise ValueError(f'merge mode must be one of {MERGE_MODES}, got {merge}')
        max_states = max_states or get_solver_config()['max_states']

        initial = stage_service.initial_stage(game)
        start = self._merge_key(initial, protocol, merge)
        chain = StageChain(game, protocol.name, merge, start)
        chain.states.append(start)
        chain.representatives[start] = initial
        queue = deque([start])

        while queue:
            key = queue.popleft()
            stage = chain.representatives[key]
            left = rationalize(protocol.distribution(stage, Side.LEFT))
            right = rationalize(protocol.distribution(stage, Side.RIGHT))
            row: Dict[str, Fraction] = defaultdict(Fraction)
            for l, p in enumerate(left):
                if not p:
                    continue
                for r, q in enumerate(right):
                    if not q:
                        continue
                    if game.is_winning(l, r):
                        row[WIN] += p * q
                        continue
                    successor, _ = stage_service.advance(stage, (l, r))
                    successor_key = self._merge_key(successor, protocol, merge)
                    if successor_key not in chain.representatives:
                        if len(chain.states) >= max_states:
                            raise StateExplosion(len(chain.states) + 1, max_states)
                        chain.states.append(successor_key)
                        chain.representatives[successor_key] = successor
                        queue.append(successor_key)
                    row[successor_key] += p * q
            if sum(row.values()) != 1:
                raise ArithmeticError(f'transition row of {key} sums to {sum(row.values())}')
            chain.transitions[key] = dict(row)

        self.logger.info(f'Chain for {game} under {protocol.name} closed with {chain.size} states ({merge} merge)')
        return chain

    # ------------------------------------------------------------------ solving

    def _doomed(self, chain: StageChain) -> set:
        """States from which some positive-probability path avoids WIN forever"""
        predecessors = defaultdict(set)
        for key, row in chain.transitions.items():
            for successor in row:
                predecessors[successor].add(key)

        reaches_win = set()
        queue = deque([WIN])
        while queue:
            node = queue.popleft()
            for previous in predecessors[node]:
                if previous not in reaches_win:
                    reaches_win.add(previous)
                    queue.append(previous)

        stuck = [key for key in chain.states if key not in reaches_win]
        doomed = set(stuck)
        queue = deque(stuck)
        while queue:
            node = queue.popleft()
            for previous in predecessors[node]:
                if previous not in doomed:
                    doomed.add(previous)
                    queue.append(previous)
        return doomed

    def solve_chain(self, chain: StageChain) -> Dict[str, Value]:
        """E(s) = 1 + sum p(s->s') E(s') with E(WIN) = 0, by exact elimination"""
        doomed = self._doomed(chain)
        finite = [key for key in chain.states if key not in doomed]
        index = {key: i for i, key in enumerate(finite)}
        size = len(finite)

        matrix = [[Fraction(0)] * size + [Fraction(1)] for _ in range(size)]
        for key in finite:
            i = index[key]
            matrix[i][i] += 1
            for successor, p in chain.transitions[key].items():
                if successor != WIN:
                    matrix[i][index[successor]] -= p

        for column in range(size):
            pivot = next(r for r in range(column, size) if matrix[r][column] != 0)
            matrix[column], matrix[pivot] = matrix[pivot], matrix[column]
            lead = matrix[column][column]
            matrix[column] = [v / lead for v in matrix[column]]
            for r in range(size):
                if r != column and matrix[r][column] != 0:
                    factor = matrix[r][column]
                    matrix[r] = [a - factor * b for a, b in zip(matrix[r], matrix[column])]

        values: Dict[str, Value] = {key: matrix[index[key]][size] for key in finite}
        for key in doomed:
            values[key] = math.inf
        return values

    def exact_ect(self, game: Game, protocol: Protocol, max_states: Optional[int] = None,
                  merge: str = 'partition') -> Value:
        chain = self.build_chain(game, protocol, max_states, merge)
        return self.solve_chain(chain)[chain.start]

    def conditional_ect(self, chain: StageChain, key: str) -> Value:
        """Expected remaining rounds from any chain state"""
        if key == WIN:
            return Fraction(0)
        return self.solve_chain(chain)[key]

    def chain_gct(self, chain: StageChain) -> Union[int, float]:
        """Longest WIN-avoiding path in the support, plus one; inf on a WIN-avoiding cycle"""
        longest: Dict[str, int] = {}
        on_stack = set()

        def visit(key: str) -> Union[int, float]:
            if key in longest:
                return longest[key]
            if key in on_stack:
                return math.inf
            on_stack.add(key)
            best = 1
            for successor in chain.transitions[key]:
                if successor == WIN:
                    continue
                best = max(best, 1 + visit(successor))
                if math.isinf(best):
                    break
            on_stack.discard(key)
            longest[key] = best
            return best

        stack_limit = max(1000, 4 * chain.size)
        if sys.getrecursionlimit() < stack_limit:
            sys.setrecursionlimit(stack_limit)
        return visit(chain.start)

    def exact_gct(self, game: Game, protocol: Protocol, max_states: Optional[int] = None,
                  merge: str = 'partition') -> Union[int, float]:
        return self.chain_gct(self.build_chain(game, protocol, max_states, merge))

    def oscp(self, game: Game, protocol: Protocol) -> Fraction:
        initial = stage_service.initial_stage(game)
        left = rationalize(protocol.distribution(initial, Side.LEFT))
        right = rationalize(protocol.distribution(initial, Side.RIGHT))
        return sum((left[l] * right[r] for l, r in game.edges), Fraction(0))

    def analyze(self, game: Game, protocol: Protocol, max_states: Optional[int] = None,
                merge: str = 'partition') -> AnalysisReport:
        chain = self.build_chain(game, protocol, max_states, merge)
        values = self.solve_chain(chain)
        return AnalysisReport(game, protocol.name, self.oscp(game, protocol),
                              values[chain.start], self.chain_gct(chain), chain.size)

    def chain_to_json(self, chain: StageChain) -> dict:
        return {
            'game': game_service.game_to_json(chain.game),
            'protocol': chain.protocol_name,
            'merge': chain.merge,
            'start': chain.start,
            'states': [
                {
                    'key': key,
                    'history': [list(pair) for pair in chain.representatives[key].history],
                    'transitions': {successor: format_value(p)
                                    for successor, p in sorted(chain.transitions[key].items())},
                }
                for key in chain.states
            ],
        }


# Global instance
exact_analysis_service = ExactAnalysisService()
