#!/usr/bin/env python3
"""
Enumeration Service
All m-choice games up to renaming, optimizer census, reductions and atlas reports
"""

import itertools
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Tuple

import pandas as pd

from exact_analysis_service import exact_analysis_service, format_value
from game_service import Game, game_service
from optimizer_service import optimizer_service
from protocol_service import protocol_service
from stage_service import Stage
from symmetry_service import SymmetryService
from wlc_config import get_solver_config

# Dense 5-choice games are settled by the WM bound instead of the optimizer
DENSE_EDGE_LIMIT = 8
DENSE_WM_BOUND = 2 + Fraction(7, 25)
VALUE_TOLERANCE = 1e-6

ATLAS_COLUMNS = ['key', 'left', 'right', 'edges', 'optimal_ect', 'optimal_gct',
                 'wm_ect', 'has_focal_point', 'method']


@dataclass
class CensusEntry:
    key: str
    game: Game
    optimal_ect: Optional[float]
    optimal_gct: Optional[float]
    wm_ect: Fraction
    has_focal_point: bool
    method: str

    def to_row(self) -> dict:
        return {
            'key': self.key,
            'left': self.game.left_count,
            'right': self.game.right_count,
            'edges': len(self.game.edges),
            'optimal_ect': self.optimal_ect,
            'optimal_gct': 'inf' if self.optimal_gct is not None and math.isinf(self.optimal_gct)
            else self.optimal_gct,
            'wm_ect': format_value(self.wm_ect),
            'has_focal_point': self.has_focal_point,
            'method': self.method,
        }

    @classmethod
    def from_row(cls, row: dict) -> 'CensusEntry':
        gct = row['optimal_gct']
        return cls(
            key=row['key'],
            game=game_service.game_from_json(row['game']),
            optimal_ect=row['optimal_ect'],
            optimal_gct=math.inf if gct == 'inf' else gct,
            wm_ect=Fraction(row['wm_ect']),
            has_focal_point=row['has_focal_point'],
            method=row['method'],
        )


@dataclass
class GameCensus:
    m: int
    filter_description: str
    entries: List[CensusEntry] = field(default_factory=list)
    complete: bool = True

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([e.to_row() for e in self.entries], columns=ATLAS_COLUMNS)
        return frame.sort_values('key').reset_index(drop=True)


@dataclass
class GreatestResult:
    m: int
    value: float
    witnesses: List[str]
    method: str
    census: Optional[GameCensus] = None


class EnumerationService:
    """Generates canonical games and runs the optimizer across them"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------ generation

    def _labeled_games(self, m: int, n: int, max_edges: Optional[int],
                       max_degree: Optional[int]) -> Iterator[Game]:
        """n left choices over m right choices, each left choice a nonempty neighbor mask"""
        full = (1 << m) - 1
        masks = [mask for mask in range(1, full + 1)
                 if max_degree is None or bin(mask).count('1') <= max_degree]
        for rows in itertools.combinations_with_replacement(masks, n):
            edge_count = sum(bin(mask).count('1') for mask in rows)
            if max_edges is not None and edge_count > max_edges:
                continue
            covered = 0
            for mask in rows:
                covered |= mask
            if covered != full:
                continue
            if max_degree is not None:
                column_degrees = [sum(1 for mask in rows if mask >> r & 1) for r in range(m)]
                if max(column_degrees) > max_degree:
                    continue
            edges = tuple((l, r) for l, mask in enumerate(rows) for r in range(m) if mask >> r & 1)
            yield Game(n, m, edges)

    @staticmethod
    def is_nontrivial(game: Game) -> bool:
        """No choice wins against m opposing choices"""
        m = game_service.game_size(game)
        degrees = [len(p) for p in game.right_neighbors] + [len(p) for p in game.left_neighbors]
        return max(degrees) < m

    def enumerate_games(self, m: int, max_edges: Optional[int] = None, max_degree: Optional[int] = None,
                        nontrivial: bool = False) -> Iterator[Tuple[str, Game]]:
        """Canonical m-choice games ordered by smaller side, then edge count, then key"""
        if m < 1:
            raise ValueError(f'm must be at least 1, got {m}')
        symmetry = SymmetryService()
        for n in range(1, m + 1):
            found: Dict[str, Game] = {}
            for game in self._labeled_games(m, n, max_edges, max_degree):
                if nontrivial and not self.is_nontrivial(game):
                    continue
                key = symmetry.canonical_game_key(game)
                if key not in found:
                    found[key] = symmetry.canonical_game(game)
            symmetry.clear()
            self.logger.info(f'{len(found)} canonical {n}x{m} games')
            for key, game in sorted(found.items(), key=lambda item: (len(item[1].edges), item[0])):
                yield key, game

    def brute_force_census(self, m: int) -> List[Game]:
        """Representatives of all m-choice games, bucketed by explicit renaming tests"""
        if m > 3:
            raise ValueError('brute-force census is limited to m <= 3')
        labeled = []
        for n in range(1, m + 1):
            for shape in {(n, m), (m, n)}:
                pairs = [(l, r) for l in range(shape[0]) for r in range(shape[1])]
                for bits in range(1, 1 << len(pairs)):
                    edges = tuple(pair for k, pair in enumerate(pairs) if bits >> k & 1)
                    game = Game(shape[0], shape[1], edges)
                    if game_service.validate(game).ok:
                        labeled.append(game)

        buckets: List[Game] = []
        for game in labeled:
            if not any(self._renamable(game, representative) for representative in buckets):
                buckets.append(game)
        return buckets

    @staticmethod
    def _renamable(first: Game, second: Game) -> bool:
        if len(first.edges) != len(second.edges):
            return False
        for target in (second, second.transposed()):
            if (first.left_count, first.right_count) != (target.left_count, target.right_count):
                continue
            for left in itertools.permutations(range(first.left_count)):
                for right in itertools.permutations(range(first.right_count)):
                    if all((left[l], right[r]) in target.edge_set for l, r in first.edges):
                        return True
        return False

    # ------------------------------------------------------------------ census

    def classify_reduction(self, game: Game) -> str:
        """Case split used to settle 5-choice games"""
        if game_service.game_size(game) != 5:
            return 'other'
        if len(game.edges) > DENSE_EDGE_LIMIT:
            return 'dense'
        initial = Stage(game, ())
        if optimizer_service.symmetry.focal_points(initial):
            return 'focal'
        degrees = [len(p) for p in game.right_neighbors] + [len(p) for p in game.left_neighbors]
        top = max(degrees)
        if top >= 4:
            return 'hub'
        if top == 3:
            return 'deg3'
        return 'paths'

    def evaluate_game(self, key: str, game: Game, method: str = 'optimizer',
                      compute_gct: bool = True) -> CensusEntry:
        wm_ect = exact_analysis_service.exact_ect(game, protocol_service.wm)
        focal = bool(optimizer_service.symmetry.focal_points(Stage(game, ())))
        if method == 'dense':
            if wm_ect <= DENSE_WM_BOUND:
                return CensusEntry(key, game, None, None, wm_ect, focal, method)
            self.logger.warning(f'Dense game {key} has WM ECT {wm_ect} above {DENSE_WM_BOUND}, solving it')
            method = 'dense-optimizer'
        result = optimizer_service.optimal_ect(game)
        gct = optimizer_service.optimal_gct(game).value if compute_gct else None
        return CensusEntry(key, game, result.value, gct, wm_ect, focal, method)

    def census(self, m: int, nontrivial: bool = False, max_edges: Optional[int] = None,
               max_degree: Optional[int] = None, compute_gct: bool = True) -> GameCensus:
        description = ', '.join(part for part in [
            'nontrivial' if nontrivial else 'all',
            f'|W| <= {max_edges}' if max_edges is not None else '',
            f'degree <= {max_degree}' if max_degree is not None else '',
        ] if part)
        census = GameCensus(m, description)
        for key, game in self.enumerate_games(m, max_edges, max_degree, nontrivial):
            census.entries.append(self.evaluate_game(key, game, compute_gct=compute_gct))
        self.logger.info(f'Census m={m} ({description}): {len(census.entries)} games')
        return census

    def _deep_census(self, m: int, budget_seconds: float, checkpoint_dir: str) -> GameCensus:
        directory = os.path.join(checkpoint_dir, f'm{m}')
        os.makedirs(directory, exist_ok=True)
        census = GameCensus(m, 'all, reductions')
        started = time.monotonic()
        for key, game in self.enumerate_games(m):
            path = os.path.join(directory, f'{key}.json')
            if os.path.exists(path):
                with open(path, 'r', encoding='utf-8') as f:
                    census.entries.append(CensusEntry.from_row(json.load(f)))
                continue
            if time.monotonic() - started > budget_seconds:
                self.logger.warning(f'Deep census m={m} stopped at the {budget_seconds:.0f}s budget; '
                                    f'rerun to resume from {directory}')
                census.complete = False
                break
            entry = self.evaluate_game(key, game, self.classify_reduction(game), compute_gct=False)
            row = entry.to_row()
            row['game'] = game_service.game_to_json(game)
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(row, f, indent=2)
            census.entries.append(entry)
        return census

    def _wm_shortcut(self, m: int, cm_key: str) -> GreatestResult:
        """Every other m-choice game has WM time below the CM_m optimum, so CM_m is the maximum"""
        value = optimizer_service.optimal_ect(game_service.make_choice_matching(m)).value
        unsafe = [key for key, game in self.enumerate_games(m)
                  if key != cm_key and exact_analysis_service.exact_ect(game, protocol_service.wm) >= value]
        if unsafe:
            self.logger.error(f'WM shortcut fails for m={m} at {unsafe}')
            return GreatestResult(m, value, [cm_key] + unsafe, 'wm-shortcut-failed')
        return GreatestResult(m, value, [cm_key], 'wm-shortcut')

    def greatest_optimal_ect(self, m: int, deep: bool = False, budget_seconds: Optional[float] = None,
                             checkpoint_dir: Optional[str] = None) -> GreatestResult:
        config = get_solver_config(deep_budget_seconds=budget_seconds, checkpoint_dir=checkpoint_dir)
        cm_key = optimizer_service.symmetry.canonical_game_key(game_service.make_choice_matching(m))

        if m <= 3:
            census = self.census(m)
        elif m == 4:
            shortcut = self._wm_shortcut(m, cm_key)
            if not deep:
                return shortcut
            census = self.census(m, compute_gct=False)
        elif m == 5:
            if not deep:
                raise ValueError('the 5-choice census is gated behind deep=True')
            census = self._deep_census(m, config['deep_budget_seconds'], config['checkpoint_dir'])
        else:
            closed = optimizer_service.cm_closed_forms(m)
            return GreatestResult(m, float(closed.optimal_ect), [cm_key], 'closed-form')

        valued = [e for e in census.entries if e.optimal_ect is not None]
        value = max(e.optimal_ect for e in valued)
        witnesses = [e.key for e in valued if e.optimal_ect >= value - VALUE_TOLERANCE]
        return GreatestResult(m, value, witnesses, 'census' if census.complete else 'partial-census', census)

    # ------------------------------------------------------------------ reports

    def atlas_report(self, census: GameCensus, out_dir: str) -> List[str]:
        """CSV of the census plus one edge-list file per game"""
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f'census_m{census.m}.csv')
        census.to_frame().to_csv(csv_path, index=False)
        paths = [csv_path]
        for entry in sorted(census.entries, key=lambda e: e.key):
            path = os.path.join(out_dir, f'{entry.key}.txt')
            with open(path, 'w', encoding='utf-8') as f:
                f.write(game_service.serialize_game(entry.game))
            paths.append(path)
        self.logger.info(f'Wrote atlas for m={census.m} with {len(census.entries)} games to {out_dir}')
        return paths


# Global instance
enumeration_service = EnumerationService()
