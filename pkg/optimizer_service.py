#!/usr/bin/env python3
"""
Optimizer Service
Optimal structural protocols by value iteration over partition states, minimax GCT,
uniqueness probes and the closed forms for choice matching games
"""

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from exact_analysis_service import exact_analysis_service
from game_service import Game, game_service
from protocol_service import protocol_service
from stage_service import Stage, stage_service
from symmetry_service import ClassLayout, SymmetryService, symmetry_service
from wlc_config import get_solver_config
from wlc_errors import InnerSolveFailure, StateExplosion, WLCError

# Inner solver settings
FACE_ENUMERATION_LIMIT = 10
PGD_MAX_STEPS = 5000
PGD_STOP = 1e-12
TIE_TOLERANCE = 1e-12
PROBE_TOLERANCE = 1e-8
PROBE_SAMPLES = 65


@dataclass
class GroupState:
    """A partition state: one representative stage and the per-class pair tables"""
    key: str
    stage: Stage
    layout: ClassLayout
    groups: List[Tuple[int, ...]]
    rows: List[int]
    cols: List[int]
    left_members: List[Tuple[int, ...]]
    right_members: List[Tuple[int, ...]]
    losing: Dict[Tuple[int, int], List[str]]
    touched_groups: Tuple[int, ...]
    has_focal_point: bool
    transfer: Optional[np.ndarray] = None

    @property
    def symmetric(self) -> bool:
        return self.layout.symmetric

    def expected_matrix(self, values: np.ndarray) -> np.ndarray:
        """A[i, j]: mean continuation value over pairs from row group i and column group j"""
        return self.transfer @ values

    def class_weights(self, row_weights: np.ndarray, col_weights: np.ndarray) -> List[float]:
        """Expand group masses into per-class weights in canonical class order"""
        weights = [0.0] * len(self.layout.classes)
        game = self.stage.game
        row_of = {g: i for i, g in enumerate(self.rows)}
        col_of = {g: j for j, g in enumerate(self.cols)}
        for g, link in enumerate(self.groups):
            for k in link:
                cls = self.layout.classes[k]
                left = sum(1 for v in cls if v < game.left_count)
                right = len(cls) - left
                if left and g in row_of:
                    weights[k] = float(row_weights[row_of[g]]) * left / len(self.left_members[row_of[g]])
                elif right and g in col_of:
                    weights[k] = float(col_weights[col_of[g]]) * right / len(self.right_members[col_of[g]])
        return weights


@dataclass
class BellmanProblem:
    game: Game
    start: str
    order: List[str]
    states: Dict[str, GroupState]

    @property
    def index(self) -> Dict[str, int]:
        return {key: i for i, key in enumerate(self.order)}

    @property
    def size(self) -> int:
        return len(self.order)


@dataclass
class InnerSolution:
    value: float
    row_weights: np.ndarray
    col_weights: np.ndarray
    restarts: int = 0
    converged_starts: int = 0


@dataclass
class OptimalResult:
    game: Game
    value: float
    values: Dict[str, float]
    policy: Dict[str, List[float]]
    actions: Dict[str, Tuple[np.ndarray, np.ndarray]]
    diagnostics: Dict[str, Union[int, float, bool]]
    problem: BellmanProblem = field(repr=False)


@dataclass
class GCTResult:
    game: Game
    value: Union[int, float]
    values: Dict[str, Union[int, float]]
    witness: Dict[str, Dict[str, List[int]]]


@dataclass
class ProbeReport:
    key: str
    history: Tuple[Tuple[int, int], ...]
    kind: str
    optimum: float
    touched_mass: Tuple[float, float]
    spread: float
    candidates: int


@dataclass(frozen=True)
class CMClosedForms:
    m: int
    wm_ect: Fraction
    la_ect: Optional[Fraction]
    la_gct: Optional[int]
    optimal_ect: Fraction
    optimal_gct: Union[int, float]
    coordination_round_probabilities: Tuple[Fraction, ...] = ()


def project_rows_to_simplex(points: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row onto the probability simplex (sort and cumsum)"""
    points = np.atleast_2d(points)
    count, dim = points.shape
    ordered = -np.sort(-points, axis=1)
    shifted = (np.cumsum(ordered, axis=1) - 1.0) / np.arange(1, dim + 1)
    below = ordered > shifted
    last = dim - 1 - np.argmax(below[:, ::-1], axis=1)
    theta = shifted[np.arange(count), last]
    return np.maximum(points - theta[:, None], 0.0)


def formula_E(p, n: int, e1, e2):
    """Expected rounds from a two-touched state putting mass p on the touched choices"""
    if not 0 <= p <= 1:
        raise ValueError(f'p must lie in [0, 1], got {p}')
    if n < 1:
        raise ValueError(f'n must be at least 1, got {n}')
    half = Fraction(1, 2) if isinstance(p, (Fraction, int)) else 0.5
    return (p * p * (half + half * (1 + e1))
            + 2 * p * (1 - p) * 2
            + (1 - p) * (1 - p) * (Fraction(1, n) + Fraction(n - 1, n) * (1 + e2)))


class OptimizerService:
    """Value iteration over partition states with a multi-start inner minimization"""

    def __init__(self, symmetry: Optional[SymmetryService] = None):
        self.logger = logging.getLogger(__name__)
        self.symmetry = symmetry or symmetry_service
        self._problems: Dict[Game, BellmanProblem] = {}

    # ------------------------------------------------------------------ closed forms

    def coordination_round_probabilities(self, m: int) -> Tuple[Fraction, ...]:
        """Chance that LA on CM_m (odd m) first coordinates in round l, for l = 1..ceil(m/2)"""
        if m < 1 or m % 2 == 0:
            raise ValueError(f'loop avoidance closed forms need odd m, got {m}')
        probabilities = []
        for rounds in range(1, (m + 1) // 2 + 1):
            p = Fraction(1, m - 2 * rounds + 2)
            for k in range(rounds - 1):
                p *= Fraction(m - 2 * k - 1, m - 2 * k)
            probabilities.append(p)
        return tuple(probabilities)

    def la_ect(self, m: int) -> Fraction:
        return sum((rounds * p for rounds, p in enumerate(self.coordination_round_probabilities(m), start=1)),
                   Fraction(0))

    def optimal_ect_closed_form(self, m: int) -> Fraction:
        table = {1: Fraction(1), 2: Fraction(2), 3: Fraction(5, 3), 4: Fraction(5, 2), 5: Fraction(7, 3)}
        if m in table:
            return table[m]
        if m % 2 == 0:
            return 3 - Fraction(1, m // 2)
        return 3 - Fraction(2, m)

    def cm_closed_forms(self, m: int) -> CMClosedForms:
        if m < 1:
            raise ValueError(f'choice matching games need m >= 1, got {m}')
        odd = m % 2 == 1
        return CMClosedForms(
            m=m,
            wm_ect=3 - Fraction(2, m),
            la_ect=self.la_ect(m) if odd else None,
            la_gct=(m + 1) // 2 if odd else None,
            optimal_ect=self.optimal_ect_closed_form(m),
            optimal_gct=(m + 1) // 2 if odd else math.inf,
            coordination_round_probabilities=self.coordination_round_probabilities(m) if odd else (),
        )

    def la_wm_table(self, max_m: int = 9) -> List[Dict[str, Fraction]]:
        """WM against LA expected times on CM_m for odd m"""
        return [{'m': m, 'wm_ect': 3 - Fraction(2, m), 'la_ect': self.la_ect(m)}
                for m in range(1, max_m + 1, 2)]

    # ------------------------------------------------------------------ problem

    def _pair_representatives(self, stage: Stage) -> Dict[Tuple[int, int], Tuple[int, int]]:
        game = stage.game
        pairs = [(l, r) for l in range(game.left_count) for r in range(game.right_count)]
        parent = {pair: pair for pair in pairs}

        def find(pair):
            while parent[pair] != pair:
                parent[pair] = parent[parent[pair]]
                pair = parent[pair]
            return pair

        for renaming in self.symmetry.stage_renaming_group(stage).generators:
            for pair in pairs:
                a, b = find(pair), find(renaming.map_pair(pair, game.left_count))
                if a != b:
                    parent[max(a, b)] = min(a, b)
        return {pair: find(pair) for pair in pairs}

    def _expand(self, key: str, stage: Stage) -> Tuple[GroupState, Dict[str, Stage]]:
        game = stage.game
        offset = game.left_count
        layout = self.symmetry.class_layout(stage)
        # one action variable per structural class of this stage
        groups = [(k,) for k in range(len(layout.classes))]
        members = [sorted(layout.classes[k]) for k in range(len(layout.classes))]
        left_all = [tuple(v for v in group if v < offset) for group in members]
        right_all = [tuple(v - offset for v in group if v >= offset) for group in members]

        if layout.symmetric:
            rows = cols = list(range(len(groups)))
        else:
            rows = [g for g in range(len(groups)) if left_all[g]]
            cols = [g for g in range(len(groups)) if right_all[g]]
        row_of_left = {l: i for i, g in enumerate(rows) for l in left_all[g]}
        col_of_right = {r: j for j, g in enumerate(cols) for r in right_all[g]}

        touched_choices = set()
        for l, r in stage_service.touched_edges(stage):
            touched_choices.update((l, offset + r))
        touched_groups = tuple(g for g, group in enumerate(members) if touched_choices.intersection(group))

        representatives = self._pair_representatives(stage)
        successor_of: Dict[Tuple[int, int], str] = {}
        successors: Dict[str, Stage] = {}
        losing: Dict[Tuple[int, int], List[str]] = {}
        any_win = False
        for (l, r), representative in representatives.items():
            if game.is_winning(l, r):
                any_win = True
                continue
            if representative not in successor_of:
                successor, _ = stage_service.advance(stage, representative)
                successor_key = self.symmetry.canonical_state_key(successor)
                successor_of[representative] = successor_key
                successors.setdefault(successor_key, successor)
            losing.setdefault((row_of_left[l], col_of_right[r]), []).append(successor_of[representative])
        # every choice lies on a winning edge, so the full-support action always has positive success
        assert any_win, f'state {key} has no winning pair'

        state = GroupState(
            key=key, stage=stage, layout=layout, groups=groups, rows=rows, cols=cols,
            left_members=[left_all[g] for g in rows], right_members=[right_all[g] for g in cols],
            losing=losing, touched_groups=touched_groups,
            has_focal_point=bool(self.symmetry.focal_points(stage)),
        )
        return state, successors

    def build_problem(self, game: Game, max_states: Optional[int] = None) -> BellmanProblem:
        if game in self._problems:
            return self._problems[game]
        max_states = max_states or get_solver_config()['max_states']
        initial = stage_service.initial_stage(game)
        start = self.symmetry.canonical_state_key(initial)
        stages = {start: initial}
        order = [start]
        states: Dict[str, GroupState] = {}
        queue = deque([start])
        while queue:
            key = queue.popleft()
            state, successors = self._expand(key, stages[key])
            states[key] = state
            for successor_key, successor in successors.items():
                if successor_key not in stages:
                    if len(order) >= max_states:
                        raise StateExplosion(len(order) + 1, max_states)
                    stages[successor_key] = successor
                    order.append(successor_key)
                    queue.append(successor_key)

        index = {key: i for i, key in enumerate(order)}
        for state in states.values():
            transfer = np.zeros((len(state.rows), len(state.cols), len(order)))
            for (i, j), successor_keys in state.losing.items():
                size = len(state.left_members[i]) * len(state.right_members[j])
                for successor_key in successor_keys:
                    transfer[i, j, index[successor_key]] += 1.0 / size
            state.transfer = transfer

        problem = BellmanProblem(game, start, order, states)
        self._problems[game] = problem
        self.logger.info(f'Partition-state problem for {game}: {problem.size} states')
        return problem

    # ------------------------------------------------------------------ inner minimization

    @staticmethod
    def _quadratic(matrix: np.ndarray, points: np.ndarray) -> np.ndarray:
        return np.einsum('ni,ij,nj->n', points, matrix, points)

    def _structured_candidates(self, matrix: np.ndarray) -> List[np.ndarray]:
        """Vertices, edge critical points and (for small faces) KKT points of every face"""
        dim = matrix.shape[0]
        candidates = [np.eye(dim)[i] for i in range(dim)]
        for i, j in itertools.combinations(range(dim), 2):
            curvature = matrix[i, i] - 2 * matrix[i, j] + matrix[j, j]
            if curvature > 0:
                t = (matrix[j, j] - matrix[i, j]) / curvature
                if 0 < t < 1:
                    point = np.zeros(dim)
                    point[i], point[j] = t, 1 - t
                    candidates.append(point)
        if dim <= FACE_ENUMERATION_LIMIT:
            for size in range(3, dim + 1):
                for face in itertools.combinations(range(dim), size):
                    face = list(face)
                    system = np.zeros((size + 1, size + 1))
                    system[:size, :size] = 2 * matrix[np.ix_(face, face)]
                    system[:size, size] = -1.0
                    system[size, :size] = 1.0
                    rhs = np.zeros(size + 1)
                    rhs[size] = 1.0
                    try:
                        solution = np.linalg.solve(system, rhs)
                    except np.linalg.LinAlgError:
                        continue
                    x = solution[:size]
                    if np.all(x > -1e-12) and np.all(np.isfinite(x)):
                        point = np.zeros(dim)
                        point[face] = np.clip(x, 0.0, None)
                        candidates.append(point / point.sum())
        return candidates

    def _projected_gradient(self, matrix: np.ndarray, starts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Batched projected gradient with per-start step halving; returns end points and convergence flags"""
        points = project_rows_to_simplex(starts)
        spectral = float(np.max(np.abs(np.linalg.eigvalsh(matrix)))) if matrix.size else 0.0
        steps = np.full(len(points), 1.0 / max(2.0 * spectral, 1e-12))
        values = self._quadratic(matrix, points)
        converged = np.zeros(len(points), dtype=bool)
        for _ in range(PGD_MAX_STEPS):
            active = np.flatnonzero(~converged)
            if active.size == 0:
                break
            current = points[active]
            gradient = 2.0 * current @ matrix
            proposal = project_rows_to_simplex(current - steps[active, None] * gradient)
            proposed = self._quadratic(matrix, proposal)
            worse = proposed > values[active] + 1e-15
            steps[active[worse]] *= 0.5
            accept = active[~worse]
            movement = np.linalg.norm(proposal[~worse] - current[~worse], axis=1)
            points[accept] = proposal[~worse]
            values[accept] = proposed[~worse]
            converged[accept[movement < PGD_STOP]] = True
            converged[active[steps[active] < 1e-300]] = True
        return points, converged

    def _minimize_symmetric(self, key: str, matrix: np.ndarray, rng: Optional[np.random.Generator],
                            run_gradient: bool) -> Tuple[InnerSolution, List[Tuple[float, np.ndarray]]]:
        quadratic = (matrix + matrix.T) / 2.0
        dim = quadratic.shape[0]
        candidates = self._structured_candidates(quadratic) if dim > 1 else [np.ones(1)]
        restarts, converged_starts = 0, 0
        if dim > 1 and (run_gradient or dim > FACE_ENUMERATION_LIMIT):
            starts = rng.dirichlet(np.ones(dim), size=get_solver_config()['inner_starts'])
            ends, converged = self._projected_gradient(quadratic, starts)
            restarts, converged_starts = len(starts), int(converged.sum())
            if converged_starts == 0:
                raise InnerSolveFailure(key)
            candidates.extend(ends[converged])
        evaluated = [(float(point @ quadratic @ point), point) for point in candidates]
        best_value = min(value for value, _ in evaluated)
        best_point = next(point for value, point in evaluated if value <= best_value + TIE_TOLERANCE)
        solution = InnerSolution(1.0 + best_value, best_point, best_point, restarts, converged_starts)
        return solution, evaluated

    def _minimize_bilinear(self, matrix: np.ndarray) -> Tuple[InnerSolution, List[Tuple[float, np.ndarray, np.ndarray]]]:
        """A bilinear form over a product of simplices is minimized at a pair of vertices"""
        rows, cols = matrix.shape
        evaluated = []
        for i in range(rows):
            for j in range(cols):
                evaluated.append((float(matrix[i, j]), np.eye(rows)[i], np.eye(cols)[j]))
        best_value = min(value for value, _, _ in evaluated)
        _, row_point, col_point = next(item for item in evaluated if item[0] <= best_value + TIE_TOLERANCE)
        return InnerSolution(1.0 + best_value, row_point, col_point), evaluated

    def _inner(self, state: GroupState, values: np.ndarray, seed: int, state_index: int,
               run_gradient: bool) -> InnerSolution:
        matrix = state.expected_matrix(values)
        if state.symmetric:
            rng = np.random.default_rng([seed, state_index])
            solution, _ = self._minimize_symmetric(state.key, matrix, rng, run_gradient)
            return solution
        solution, _ = self._minimize_bilinear(matrix)
        return solution

    # ------------------------------------------------------------------ policies

    def _transition_row(self, state: GroupState, row_weights: np.ndarray, col_weights: np.ndarray) -> np.ndarray:
        return np.einsum('i,j,ijk->k', row_weights, col_weights, state.transfer)

    def evaluate_actions(self, problem: BellmanProblem,
                         actions: Dict[str, Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        """Expected rounds of a stationary group-weight policy: solve (I - P) V = 1"""
        size = problem.size
        transitions = np.zeros((size, size))
        for i, key in enumerate(problem.order):
            transitions[i] = self._transition_row(problem.states[key], *actions[key])
        return linalg.solve(np.eye(size) - transitions, np.ones(size))

    def _uniform_actions(self, problem: BellmanProblem) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
        actions = {}
        for key, state in problem.states.items():
            rows = np.array([len(m) for m in state.left_members], dtype=float)
            cols = np.array([len(m) for m in state.right_members], dtype=float)
            actions[key] = (rows / rows.sum(), cols / cols.sum())
        return actions

    def _initial_values(self, problem: BellmanProblem, max_states: Optional[int]) -> np.ndarray:
        """Upper bound: the uniform policy's values, lowered where the WM chain is cheaper"""
        values = self.evaluate_actions(problem, self._uniform_actions(problem))
        try:
            chain = exact_analysis_service.build_chain(problem.game, protocol_service.wm, max_states)
            wm_values = exact_analysis_service.solve_chain(chain)
        except WLCError as e:
            self.logger.warning(f'WM initialization skipped for {problem.game}: {e}')
            return values
        index = problem.index
        for chain_key, stage in chain.representatives.items():
            key = self.symmetry.canonical_state_key(stage)
            if key in index and not math.isinf(wm_values[chain_key]):
                values[index[key]] = min(values[index[key]], float(wm_values[chain_key]))
        return values

    def _bellman_sweep(self, problem: BellmanProblem, values: np.ndarray, seed: int,
                       run_gradient: bool) -> Tuple[np.ndarray, Dict[str, InnerSolution]]:
        updated = np.empty_like(values)
        solutions = {}
        for i, key in enumerate(problem.order):
            solution = self._inner(problem.states[key], values, seed, i, run_gradient)
            updated[i] = solution.value
            solutions[key] = solution
        return updated, solutions

    def optimal_ect(self, game: Game, tol: Optional[float] = None, max_iter: Optional[int] = None,
                    max_states: Optional[int] = None, seed: int = 0) -> OptimalResult:
        config = get_solver_config(tol=tol, max_iter=max_iter, max_states=max_states)
        problem = self.build_problem(game, config['max_states'])
        values = self._initial_values(problem, config['max_states'])

        monotone = True
        converged = False
        sweeps = 0
        while sweeps < config['max_iter']:
            sweeps += 1
            updated, _ = self._bellman_sweep(problem, values, seed, run_gradient=False)
            if np.any(updated > values + 1e-12):
                monotone = False
            change = float(np.max(np.abs(updated - values)))
            values = updated
            if change < config['tol']:
                converged = True
                break
        if not converged:
            self.logger.warning(f'Value iteration on {game} stopped after {sweeps} sweeps without reaching tol')
        else:
            self.logger.info(f'Value iteration on {game} converged in {sweeps} sweeps')

        # Polish: evaluate the greedy policy exactly and improve until it is self-consistent
        restarts = 0
        polish_rounds = 0
        _, solutions = self._bellman_sweep(problem, values, seed, run_gradient=True)
        restarts += sum(s.restarts for s in solutions.values())
        while True:
            polish_rounds += 1
            actions = {key: (s.row_weights, s.col_weights) for key, s in solutions.items()}
            try:
                evaluated = self.evaluate_actions(problem, actions)
            except linalg.LinAlgError:
                self.logger.warning(f'Greedy policy on {game} is improper; keeping value-iteration values')
                evaluated = values
            backup, solutions = self._bellman_sweep(problem, evaluated, seed, run_gradient=True)
            restarts += sum(s.restarts for s in solutions.values())
            residual = float(np.max(np.abs(backup - evaluated)))
            if residual < config['tol'] or polish_rounds >= 20:
                values = evaluated
                break
            values = evaluated

        actions = {key: (s.row_weights, s.col_weights) for key, s in solutions.items()}
        index = problem.index
        result = OptimalResult(
            game=game,
            value=float(values[index[problem.start]]),
            values={key: float(values[index[key]]) for key in problem.order},
            policy={key: problem.states[key].class_weights(*actions[key]) for key in problem.order},
            actions=actions,
            diagnostics={
                'states': problem.size,
                'sweeps': sweeps,
                'converged': converged,
                'monotone': monotone,
                'polish_rounds': polish_rounds,
                'residual': residual,
                'inner_restarts': restarts,
            },
            problem=problem,
        )
        return result

    def export_policy(self, result: OptimalResult) -> dict:
        """Class-weight table consumable as a table protocol"""
        return {
            'game': game_service.game_to_json(result.game),
            'value': result.value,
            'policy': {key: [round(w, 12) for w in weights] for key, weights in result.policy.items()},
        }

    # ------------------------------------------------------------------ guaranteed coordination

    def optimal_gct(self, game: Game, horizon_cap: Optional[int] = None,
                    max_states: Optional[int] = None) -> GCTResult:
        """Least fixed point of the minimax recursion over class-support actions"""
        problem = self.build_problem(game, max_states)
        index = problem.index
        horizon = problem.size if horizon_cap is None else min(horizon_cap, problem.size)
        values = np.full(problem.size, np.inf)
        witness: Dict[str, Dict[str, List[int]]] = {}

        def supports(state: GroupState):
            if state.symmetric:
                dim = len(state.rows)
                for mask in range(1, 1 << dim):
                    chosen = [i for i in range(dim) if mask >> i & 1]
                    yield chosen, chosen
            else:
                for left_mask in range(1, 1 << len(state.rows)):
                    left = [i for i in range(len(state.rows)) if left_mask >> i & 1]
                    for right_mask in range(1, 1 << len(state.cols)):
                        yield left, [j for j in range(len(state.cols)) if right_mask >> j & 1]

        for _ in range(horizon + 1):
            updated = values.copy()
            for key in problem.order:
                state = problem.states[key]
                worst = np.full((len(state.rows), len(state.cols)), -np.inf)
                for (i, j), successor_keys in state.losing.items():
                    worst[i, j] = max(values[index[k]] for k in successor_keys)
                best, best_support = np.inf, None
                for left, right in supports(state):
                    block = worst[np.ix_(left, right)].max()
                    value = 1.0 if block == -np.inf else 1.0 + block
                    if value < best:
                        best, best_support = value, (left, right)
                if best > horizon:
                    best = np.inf
                updated[index[key]] = best
                if best_support is not None and np.isfinite(best):
                    left, right = best_support
                    witness[key] = {
                        'left': sorted(k for i in left for k in state.groups[state.rows[i]]),
                        'right': sorted(k for j in right for k in state.groups[state.cols[j]]),
                    }
            if np.array_equal(updated, values):
                break
            values = updated

        def as_value(v):
            return math.inf if np.isinf(v) else int(v)

        return GCTResult(
            game=game,
            value=as_value(values[index[problem.start]]),
            values={key: as_value(values[index[key]]) for key in problem.order},
            witness={key: support for key, support in witness.items() if np.isfinite(values[index[key]])},
        )

    # ------------------------------------------------------------------ uniqueness

    def _touched_mass(self, state: GroupState, point: np.ndarray) -> float:
        return float(sum(point[i] for i, g in enumerate(state.rows) if g in state.touched_groups))

    def probe_state(self, state: GroupState, values: np.ndarray, state_index: int,
                    seed: int = 0, tol: float = PROBE_TOLERANCE) -> ProbeReport:
        matrix = state.expected_matrix(values)
        history = state.stage.history
        if not state.symmetric:
            _, evaluated = self._minimize_bilinear(matrix)
            best = min(v for v, _, _ in evaluated)
            near = [(v, r, c) for v, r, c in evaluated if v <= best + tol]
            masses = [self._touched_mass(state, r) for _, r, _ in near]
            return ProbeReport(state.key, history, 'singleton' if len(near) == 1 else 'set', 1.0 + best,
                               (min(masses), max(masses)), max(v for v, _, _ in near) - best, len(near))

        rng = np.random.default_rng([seed, state_index])
        _, evaluated = self._minimize_symmetric(state.key, matrix, rng, run_gradient=True)
        quadratic = (matrix + matrix.T) / 2.0
        best = min(v for v, _ in evaluated)
        near: List[np.ndarray] = []
        for value, point in evaluated:
            if value <= best + tol and not any(np.allclose(point, other, atol=1e-6) for other in near):
                near.append(point)

        if len(near) == 1:
            mass = self._touched_mass(state, near[0])
            return ProbeReport(state.key, history, 'singleton', 1.0 + best, (mass, mass), 0.0, 1)

        a, b = max(itertools.combinations(near, 2), key=lambda pair: float(np.linalg.norm(pair[0] - pair[1])))
        samples = [t * a + (1 - t) * b for t in np.linspace(0.0, 1.0, PROBE_SAMPLES)]
        sampled = [float(p @ quadratic @ p) for p in samples]
        flat = max(sampled) - best <= tol
        points = near + samples if flat else near
        objective = [float(p @ quadratic @ p) for p in points]
        masses = [self._touched_mass(state, p) for p in points]
        return ProbeReport(state.key, history, 'interval' if flat else 'set', 1.0 + best,
                           (min(masses), max(masses)), max(objective) - min(objective), len(near))

    def uniqueness_probe(self, result: OptimalResult, tol: float = PROBE_TOLERANCE,
                         seed: int = 0) -> Dict[str, ProbeReport]:
        problem = result.problem
        values = np.array([result.values[key] for key in problem.order])
        return {key: self.probe_state(problem.states[key], values, i, seed, tol)
                for i, key in enumerate(problem.order)}

    def state_key_after(self, game: Game, pairs: List[Tuple[int, int]]) -> str:
        """Partition-state key of the stage reached by playing the given pairs"""
        return self.symmetry.canonical_state_key(stage_service.play(game, pairs))


# Global instance
optimizer_service = OptimizerService()
