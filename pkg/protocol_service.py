#!/usr/bin/env python3
"""
Protocol Service
Structural protocols: uniform, wait-or-move, loop avoidance, hub opening and class-weight tables
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from game_service import ChoiceId, Game, Side
from stage_service import Stage, stage_service
from symmetry_service import SymmetryService, symmetry_service
from wlc_errors import InvalidDistribution, MissingStageEntry, NoCoordinatingChoice

Weight = Union[Fraction, float]

FLOAT_SUM_TOLERANCE = 1e-12

# Memory marks carried into chain keys
MARK_FIRST_PICK = 1
MARK_ALTERNATIVE = 2
MARK_CANDIDATE = 3


@dataclass(frozen=True)
class ChoiceDistribution:
    """Probabilities over one player's choices, indexed by choice index"""
    player: Side
    weights: Tuple[Weight, ...]

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise InvalidDistribution(f'negative probability in {self.player.label} distribution')
        total = sum(self.weights)
        if self.exact:
            if total != 1:
                raise InvalidDistribution(f'{self.player.label} probabilities sum to {total}, not 1')
        elif abs(float(total) - 1.0) > FLOAT_SUM_TOLERANCE:
            raise InvalidDistribution(f'{self.player.label} probabilities sum to {float(total)!r}, not 1')

    @property
    def exact(self) -> bool:
        return all(isinstance(w, (Fraction, int)) for w in self.weights)

    def probability(self, index: int) -> Weight:
        return self.weights[index]

    def support(self) -> Tuple[int, ...]:
        return tuple(i for i, w in enumerate(self.weights) if w > 0)

    def as_dict(self) -> Dict[ChoiceId, Weight]:
        return {ChoiceId(self.player, i): w for i, w in enumerate(self.weights)}


def uniform_distribution(player: Side, count: int) -> ChoiceDistribution:
    return ChoiceDistribution(player, tuple(Fraction(1, count) for _ in range(count)))


def _own(pair: Tuple[int, int], side: Side) -> int:
    return pair[0] if side is Side.LEFT else pair[1]


def _pair_for(side: Side, own: int, other: int) -> Tuple[int, int]:
    return (own, other) if side is Side.LEFT else (other, own)


def _commit_index(seed: int, side: Side, count: int) -> int:
    digest = hashlib.sha256(f'{seed}:{side.value}'.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big') % count


class Protocol:
    """A rule (stage, player) -> distribution over that player's choices"""
    name = 'protocol'

    def distribution(self, stage: Stage, side: Side, seed: Optional[int] = None) -> ChoiceDistribution:
        raise NotImplementedError

    def memory_marks(self, stage: Stage) -> Optional[Tuple[int, ...]]:
        """Per-choice tags of whatever history the rule remembers beyond the partition"""
        return None

    def __repr__(self) -> str:
        return f'<{type(self).__name__} {self.name}>'


class UniformProtocol(Protocol):
    name = 'uniform'

    def distribution(self, stage: Stage, side: Side, seed: Optional[int] = None) -> ChoiceDistribution:
        return uniform_distribution(side, stage.game.side_count(side))


class WaitOrMoveProtocol(Protocol):
    """Uniform first pick; then 1/2 on the own first pick and 1/2 on a choice winning
    with the opponent's first pick.

    The alternative is committed once per play. Without a play seed the rule reports the
    marginal over the unrevealed alternatives, which is what exact analysis needs.
    With redraw the alternative is drawn afresh every round.
    """

    def __init__(self, redraw: bool = False):
        self.redraw = redraw
        self.name = 'wm-redraw' if redraw else 'wm'

    def _candidates(self, stage: Stage, side: Side) -> Tuple[int, Tuple[int, ...]]:
        first = stage.history[0]
        own_first = _own(first, side)
        opponent_first = _own(first, side.other)
        candidates = tuple(c for c in stage.game.partners(ChoiceId(side.other, opponent_first))
                           if c != own_first)
        if not candidates:
            raise NoCoordinatingChoice(f'{side.other.label}#{opponent_first} has no partner '
                                       f'besides {side.label}#{own_first}')
        return own_first, candidates

    def revealed_alternative(self, stage: Stage, side: Side) -> Optional[int]:
        if self.redraw or len(stage.history) < 2:
            return None
        own_first, candidates = self._candidates(stage, side)
        for pair in stage.history[1:]:
            played = _own(pair, side)
            if played != own_first and played in candidates:
                return played
        return None

    def distribution(self, stage: Stage, side: Side, seed: Optional[int] = None) -> ChoiceDistribution:
        count = stage.game.side_count(side)
        if not stage.history:
            return uniform_distribution(side, count)

        own_first, candidates = self._candidates(stage, side)
        weights = [Fraction(0)] * count
        weights[own_first] += Fraction(1, 2)

        revealed = self.revealed_alternative(stage, side)
        if revealed is not None:
            weights[revealed] += Fraction(1, 2)
        elif seed is not None and not self.redraw:
            weights[candidates[_commit_index(seed, side, len(candidates))]] += Fraction(1, 2)
        else:
            for c in candidates:
                weights[c] += Fraction(1, 2 * len(candidates))
        return ChoiceDistribution(side, tuple(weights))

    def memory_marks(self, stage: Stage) -> Optional[Tuple[int, ...]]:
        if not stage.history:
            return None
        game = stage.game
        marks = [0] * game.choice_count
        for side in (Side.LEFT, Side.RIGHT):
            own_first, candidates = self._candidates(stage, side)
            marks[game.global_index(ChoiceId(side, own_first))] = MARK_FIRST_PICK
            revealed = self.revealed_alternative(stage, side)
            if revealed is not None:
                marks[game.global_index(ChoiceId(side, revealed))] = MARK_ALTERNATIVE
                continue
            tag = MARK_ALTERNATIVE if len(candidates) == 1 else MARK_CANDIDATE
            for c in candidates:
                marks[game.global_index(ChoiceId(side, c))] = tag
        return tuple(marks)


class HubOpeningProtocol(WaitOrMoveProtocol):
    """Round 1: half the mass on the maximum-degree choices, half on the rest; WM afterwards"""

    def __init__(self):
        super().__init__(redraw=False)
        self.name = 'hub'

    def distribution(self, stage: Stage, side: Side, seed: Optional[int] = None) -> ChoiceDistribution:
        if stage.history:
            return super().distribution(stage, side, seed)
        game = stage.game
        count = game.side_count(side)
        degrees = [game.degree(ChoiceId(side, i)) for i in range(count)]
        top = max(degrees)
        hubs = [i for i in range(count) if degrees[i] == top]
        rest = [i for i in range(count) if degrees[i] != top]
        if not rest:
            return uniform_distribution(side, count)
        weights = [Fraction(1, 2 * len(rest))] * count
        for i in hubs:
            weights[i] = Fraction(1, 2 * len(hubs))
        return ChoiceDistribution(side, tuple(weights))


class LoopAvoidanceProtocol(Protocol):
    """Uniform over choices that no opponent reply can turn into a stage with the same partition"""
    name = 'la'

    def __init__(self, symmetry: Optional[SymmetryService] = None):
        self.symmetry = symmetry or symmetry_service
        self._allowed: Dict[Tuple[Stage, Side], Tuple[int, ...]] = {}

    def allowed_choices(self, stage: Stage, side: Side) -> Tuple[int, ...]:
        cache_key = (stage, side)
        if cache_key in self._allowed:
            return self._allowed[cache_key]
        game = stage.game
        current = self.symmetry.partition(stage)
        allowed = []
        for own in range(game.side_count(side)):
            recreates = False
            for other in range(game.side_count(side.other)):
                pair = _pair_for(side, own, other)
                if game.is_winning(*pair):
                    continue
                successor, _ = stage_service.advance(stage, pair)
                if self.symmetry.partition(successor) == current:
                    recreates = True
                    break
            if not recreates:
                allowed.append(own)
        result = tuple(allowed) if allowed else tuple(range(game.side_count(side)))
        self._allowed[cache_key] = result
        return result

    def distribution(self, stage: Stage, side: Side, seed: Optional[int] = None) -> ChoiceDistribution:
        allowed = self.allowed_choices(stage, side)
        weights = [Fraction(0)] * stage.game.side_count(side)
        for c in allowed:
            weights[c] = Fraction(1, len(allowed))
        return ChoiceDistribution(side, tuple(weights))


def _parse_weight(value) -> Weight:
    if isinstance(value, bool):
        raise InvalidDistribution(f'weight {value!r} is not a number')
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise InvalidDistribution(f'weight "{value}" is not a number')
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    return float(value)


class ClassWeightProtocol(Protocol):
    """Per-class weights keyed by canonical state key, classes in canonical order.

    A class weight is normalized over the classes meeting the player's side and then split
    uniformly over the class members on that side.
    """
    name = 'table'

    def __init__(self, table: Dict[str, Sequence], symmetry: Optional[SymmetryService] = None,
                 name: Optional[str] = None):
        self.symmetry = symmetry or symmetry_service
        self.table = {key: tuple(_parse_weight(w) for w in row) for key, row in table.items()}
        if name:
            self.name = name

    def class_weights(self, stage: Stage) -> Tuple[Weight, ...]:
        layout = self.symmetry.class_layout(stage)
        if layout.key not in self.table:
            raise MissingStageEntry(layout.key)
        row = self.table[layout.key]
        if len(row) != len(layout.classes):
            raise InvalidDistribution(f'table entry {layout.key} has {len(row)} weights '
                                      f'for {len(layout.classes)} classes')
        return row

    def distribution(self, stage: Stage, side: Side, seed: Optional[int] = None) -> ChoiceDistribution:
        game = stage.game
        layout = self.symmetry.class_layout(stage)
        row = self.class_weights(stage)
        exact = all(isinstance(w, Fraction) for w in row)

        members = []
        for cls, weight in zip(layout.classes, row):
            own = [game.choice_at(v).index for v in cls if game.choice_at(v).side is side]
            if own:
                members.append((own, weight))
        total = sum(weight for _, weight in members)
        if total <= 0:
            raise InvalidDistribution(f'table entry {layout.key} puts no weight on {side.label} choices')

        weights: List[Weight] = [Fraction(0) if exact else 0.0] * game.side_count(side)
        for own, weight in members:
            for index in own:
                weights[index] = weight / total / len(own)
        if not exact:
            weights = [float(w) for w in weights]
        return ChoiceDistribution(side, tuple(weights))


class ProtocolService:
    """Builds protocols and checks structurality"""

    def __init__(self, symmetry: Optional[SymmetryService] = None):
        self.logger = logging.getLogger(__name__)
        self.symmetry = symmetry or symmetry_service
        self.uniform = UniformProtocol()
        self.wm = WaitOrMoveProtocol()
        self.la = LoopAvoidanceProtocol(self.symmetry)
        self.hub = HubOpeningProtocol()

    def uniform_protocol(self, stage: Stage, side: Side) -> ChoiceDistribution:
        return self.uniform.distribution(stage, side)

    def wm_protocol(self, stage: Stage, side: Side, seed: Optional[int] = None,
                    redraw: bool = False) -> ChoiceDistribution:
        protocol = WaitOrMoveProtocol(redraw=True) if redraw else self.wm
        return protocol.distribution(stage, side, seed)

    def la_protocol(self, stage: Stage, side: Side) -> ChoiceDistribution:
        return self.la.distribution(stage, side)

    def hub_opening_protocol(self, stage: Stage, side: Side, seed: Optional[int] = None) -> ChoiceDistribution:
        return self.hub.distribution(stage, side, seed)

    def class_weight_protocol(self, table: Dict[str, Sequence]) -> ClassWeightProtocol:
        return ClassWeightProtocol(table, self.symmetry)

    def load_table(self, path: str) -> ClassWeightProtocol:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        table = data.get('policy', data) if isinstance(data, dict) else data
        if not isinstance(table, dict):
            raise InvalidDistribution(f'{path}: expected a JSON object of key -> class weights')
        self.logger.info(f'Loaded class-weight table {path} with {len(table)} entries')
        return ClassWeightProtocol(table, self.symmetry, name=f'table:{path}')

    def protocol_by_name(self, name: str) -> Protocol:
        if name.startswith('table:'):
            return self.load_table(name[len('table:'):])
        protocols = {
            'uniform': self.uniform,
            'wm': self.wm,
            'wm-redraw': WaitOrMoveProtocol(redraw=True),
            'la': self.la,
            'hub': self.hub,
        }
        if name not in protocols:
            raise ValueError(f'unknown protocol "{name}" '
                             f'(known: {", ".join(protocols)}, table:<file>)')
        return protocols[name]

    def structurality_check(self, protocol: Protocol, stage: Stage) -> bool:
        """f_i(c) = f_beta(i)(h(c)) for every self-renaming of the stage"""
        if stage.is_final:
            return True
        game = stage.game
        left = protocol.distribution(stage, Side.LEFT)
        right = protocol.distribution(stage, Side.RIGHT)

        def probability(position: int) -> Weight:
            choice = game.choice_at(position)
            table = left if choice.side is Side.LEFT else right
            return table.probability(choice.index)

        exact = left.exact and right.exact
        for renaming in self.symmetry.stage_renaming_group(stage).generators:
            for position in range(game.choice_count):
                a, b = probability(position), probability(renaming(position))
                if (a != b) if exact else abs(float(a) - float(b)) > FLOAT_SUM_TOLERANCE:
                    self.logger.debug(f'{protocol.name} breaks structurality at '
                                      f'{game.choice_at(position)} vs {game.choice_at(renaming(position))}')
                    return False
        return True

    def reachable_stages(self, protocol: Protocol, game: Game, depth: int) -> List[Stage]:
        """Non-final stages reachable under the protocol's own support within depth rounds"""
        frontier = [stage_service.initial_stage(game)]
        stages = list(frontier)
        for _ in range(depth):
            following = []
            for stage in frontier:
                left = protocol.distribution(stage, Side.LEFT).support()
                right = protocol.distribution(stage, Side.RIGHT).support()
                for l in left:
                    for r in right:
                        if not game.is_winning(l, r):
                            following.append(stage_service.advance(stage, (l, r))[0])
            stages.extend(following)
            frontier = following
        return stages


# Global instance
protocol_service = ProtocolService()
