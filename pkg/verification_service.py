#!/usr/bin/env python3
"""
Verification Service
Golden choice-matching table and the property checks behind `wlc golden` and `wlc check`
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Set, Tuple

import numpy as np
import pandas as pd

from enumeration_service import enumeration_service
from exact_analysis_service import exact_analysis_service, format_value
from game_service import Game, Side, game_service
from optimizer_service import OptimalResult, optimizer_service
from protocol_service import Protocol, protocol_service
from wlc_config import get_solver_config

GOLDEN_TOLERANCE = 1e-6
SUPPORT_THRESHOLD = 1e-7
LOWER_BOUND = 1.5

# Protocol named optimal for expected time, per m; None means any protocol, '-' means no unique optimum
GOLDEN_PROTOCOLS = {1: None, 2: 'wm', 3: 'la', 4: '-', 5: 'la'}


def golden_gct(m: int):
    return (m + 1) // 2 if m % 2 == 1 else math.inf


def golden_protocol(m: int) -> Optional[str]:
    return GOLDEN_PROTOCOLS.get(m, 'wm')


@dataclass
class CheckReport:
    name: str
    frame: pd.DataFrame
    failures: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            'check': self.name,
            'passed': self.passed,
            'rows': self.frame.astype(object).where(self.frame.notna(), None).to_dict(orient='records'),
            'failures': self.failures,
            'notes': self.notes,
        }


class VerificationService:
    """Cross-checks the optimizer and the exact engine against known values"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------ protocol identities

    def reachable_keys(self, result: OptimalResult) -> List[str]:
        """Partition states visited with positive probability under the optimal policy"""
        problem = result.problem
        order = problem.order
        seen = {problem.start}
        queue = deque([problem.start])
        while queue:
            key = queue.popleft()
            state = problem.states[key]
            row = np.einsum('i,j,ijk->k', *result.actions[key], state.transfer)
            for k in np.flatnonzero(row > SUPPORT_THRESHOLD):
                if order[k] not in seen:
                    seen.add(order[k])
                    queue.append(order[k])
        return [key for key in order if key in seen]

    @staticmethod
    def policy_support(result: OptimalResult, key: str) -> Set[int]:
        state = result.problem.states[key]
        return {v for k, weight in enumerate(result.policy[key]) if weight > SUPPORT_THRESHOLD
                for v in state.layout.classes[k]}

    @staticmethod
    def protocol_support(protocol: Protocol, result: OptimalResult, key: str) -> Set[int]:
        stage = result.problem.states[key].stage
        offset = stage.game.left_count
        left = protocol.distribution(stage, Side.LEFT, seed=0).support()
        right = protocol.distribution(stage, Side.RIGHT, seed=0).support()
        return set(left) | {offset + r for r in right}

    def support_mismatches(self, result: OptimalResult, protocol: Protocol) -> List[str]:
        mismatches = []
        for key in self.reachable_keys(result):
            optimal = self.policy_support(result, key)
            named = self.protocol_support(protocol, result, key)
            if optimal != named:
                game = result.game
                mismatches.append(f'{key}: optimal support {sorted(str(game.choice_at(v)) for v in optimal)} '
                                  f'vs {protocol.name} {sorted(str(game.choice_at(v)) for v in named)}')
        return mismatches

    # ------------------------------------------------------------------ golden table

    def golden_row(self, m: int, tol: float = GOLDEN_TOLERANCE) -> Tuple[dict, List[str], List[str]]:
        game = game_service.make_choice_matching(m)
        failures: List[str] = []
        notes: List[str] = []

        expected_ect = optimizer_service.optimal_ect_closed_form(m)
        result = optimizer_service.optimal_ect(game)
        ect_ok = abs(result.value - float(expected_ect)) <= tol
        if not ect_ok:
            failures.append(f'm={m}: optimal ECT expected {format_value(expected_ect)}, computed {result.value:.9f}')

        expected_gct = golden_gct(m)
        computed_gct = optimizer_service.optimal_gct(game).value
        gct_ok = computed_gct == expected_gct
        if not gct_ok:
            failures.append(f'm={m}: optimal GCT expected {expected_gct}, computed {computed_gct}')
        if m % 2 == 1 and m >= 9 and (m - 1) // 2 != expected_gct:
            notes.append(f'm={m}: the general odd row prints k={(m - 1) // 2}; '
                         f'checked against ceil(m/2)={expected_gct}')

        named = golden_protocol(m)
        if named is None:
            protocol_ok = True
        elif named == '-':
            probe = optimizer_service.uniqueness_probe(result)
            key = optimizer_service.state_key_after(game, [(0, 1)])
            protocol_ok = probe[key].kind != 'singleton'
            if not protocol_ok:
                failures.append(f'm={m}: expected a non-unique optimum at {key}, probe found a singleton')
        else:
            mismatches = self.support_mismatches(result, protocol_service.protocol_by_name(named))
            protocol_ok = not mismatches
            failures.extend(f'm={m}: {mismatch}' for mismatch in mismatches)

        gct_protocol_ok = True
        if m % 2 == 1 and m > 1:
            la_gct = exact_analysis_service.exact_gct(game, protocol_service.la)
            gct_protocol_ok = la_gct == expected_gct
            if not gct_protocol_ok:
                failures.append(f'm={m}: LA guarantees {la_gct} rounds, expected {expected_gct}')

        row = {
            'm': m,
            'expected_ect': format_value(expected_ect),
            'optimal_ect': result.value,
            'ect_ok': ect_ok,
            'expected_gct': 'inf' if math.isinf(expected_gct) else expected_gct,
            'optimal_gct': 'inf' if math.isinf(computed_gct) else computed_gct,
            'gct_ok': gct_ok,
            'protocol': 'any' if named is None else named.upper(),
            'protocol_ok': protocol_ok,
            'gct_protocol': 'LA' if m % 2 == 1 and m > 1 else ('any' if m == 1 else '-'),
            'gct_protocol_ok': gct_protocol_ok,
        }
        return row, failures, notes

    def golden_table(self, max_m: int = 9, tol: float = GOLDEN_TOLERANCE) -> CheckReport:
        rows, failures, notes = [], [], []
        for m in range(1, max_m + 1):
            row, row_failures, row_notes = self.golden_row(m, tol)
            rows.append(row)
            failures.extend(row_failures)
            notes.extend(row_notes)
            self.logger.info(f'Golden row m={m}: {"ok" if not row_failures else "FAILED"}')
        return CheckReport('golden', pd.DataFrame(rows), failures, notes)

    # ------------------------------------------------------------------ WM checks

    def random_games(self, count: int, min_m: int = 5, max_m: int = 8, seed: int = 0,
                     density: float = 0.3) -> List[Game]:
        """Seeded random valid games: every choice gets at least one winning partner"""
        rng = np.random.default_rng(seed)
        games = []
        for _ in range(count):
            m = int(rng.integers(min_m, max_m + 1))
            n = int(rng.integers(1, m + 1))
            grid = rng.random((n, m)) < density
            for l in range(n):
                if not grid[l].any():
                    grid[l, rng.integers(m)] = True
            for r in range(m):
                if not grid[:, r].any():
                    grid[rng.integers(n), r] = True
            edges = tuple((int(l), int(r)) for l, r in zip(*np.nonzero(grid)))
            games.append(Game(n, m, edges))
        return games

    def wm_bound_check(self, games: Iterable[Game], max_states: Optional[int] = None) -> CheckReport:
        """exact_ect(g, wm) <= 3 - 2 * oscp(g, uniform), exactly"""
        rows, failures = [], []
        for game in games:
            wm_ect = exact_analysis_service.exact_ect(game, protocol_service.wm, max_states)
            bound = 3 - 2 * exact_analysis_service.oscp(game, protocol_service.uniform)
            ok = wm_ect <= bound
            rows.append({'game': str(game), 'wm_ect': format_value(wm_ect), 'bound': format_value(bound), 'ok': ok})
            if not ok:
                failures.append(f'{game}: WM ECT {format_value(wm_ect)} exceeds {format_value(bound)}')
        return CheckReport('bound', pd.DataFrame(rows, columns=['game', 'wm_ect', 'bound', 'ok']), failures)

    def wm_safety_check(self, m: int) -> CheckReport:
        """Every m-choice game other than CM_m has WM ECT strictly below 3 - 2/m"""
        if m > 4:
            raise ValueError('the safety check enumerates every game and is limited to m <= 4')
        cm_key = optimizer_service.symmetry.canonical_game_key(game_service.make_choice_matching(m))
        limit = 3 - Fraction(2, m)
        rows, failures = [], []
        for key, game in enumeration_service.enumerate_games(m):
            if key == cm_key:
                continue
            wm_ect = exact_analysis_service.exact_ect(game, protocol_service.wm)
            ok = wm_ect < limit
            rows.append({'key': key, 'game': str(game), 'wm_ect': format_value(wm_ect), 'ok': ok})
            if not ok:
                failures.append(f'{key}: WM ECT {format_value(wm_ect)} is not below {format_value(limit)}')
        return CheckReport('safety', pd.DataFrame(rows, columns=['key', 'game', 'wm_ect', 'ok']), failures)

    def lower_bound_check(self, m: int, tol: Optional[float] = None) -> CheckReport:
        """Optimal values on CM_m states without a focal point stay at or above 3/2"""
        tol = tol if tol is not None else get_solver_config()['tol']
        result = optimizer_service.optimal_ect(game_service.make_choice_matching(m))
        rows, failures = [], []
        for key in result.problem.order:
            state = result.problem.states[key]
            if state.has_focal_point:
                continue
            value = result.values[key]
            ok = value >= LOWER_BOUND - tol
            rows.append({'key': key, 'rounds': len(state.stage.history), 'value': value, 'ok': ok})
            if not ok:
                failures.append(f'{key}: value {value:.12f} is below {LOWER_BOUND}')
        return CheckReport('lower', pd.DataFrame(rows, columns=['key', 'rounds', 'value', 'ok']), failures)


# Global instance
verification_service = VerificationService()
