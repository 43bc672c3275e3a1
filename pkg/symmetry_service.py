#!/usr/bin/env python3
"""
Symmetry Service
Renamings of stages, structural-equivalence classes, focal points and canonical keys
"""

import hashlib
import logging
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from game_service import ChoiceId, Game
from stage_service import Stage
from wlc_config import get_solver_config
from wlc_errors import SearchBudgetExceeded

Partition = Tuple[Tuple[int, ...], ...]


@dataclass(frozen=True)
class Renaming:
    """Optional player swap plus a bijection over dense choice indices"""
    swap: bool
    mapping: Tuple[int, ...]

    def __call__(self, position: int) -> int:
        return self.mapping[position]

    @property
    def is_identity(self) -> bool:
        return not self.swap and all(v == i for i, v in enumerate(self.mapping))

    def compose(self, other: 'Renaming') -> 'Renaming':
        """self after other"""
        return Renaming(self.swap != other.swap, tuple(self.mapping[v] for v in other.mapping))

    def inverse(self) -> 'Renaming':
        inverse = [0] * len(self.mapping)
        for source, target in enumerate(self.mapping):
            inverse[target] = source
        return Renaming(self.swap, tuple(inverse))

    def map_pair(self, pair: Tuple[int, int], left_count: int) -> Tuple[int, int]:
        """Image of a (left, right) profile, reordered when the roles are swapped"""
        left, right = pair
        a = self.mapping[left]
        b = self.mapping[left_count + right]
        if self.swap:
            return b, a - left_count
        return a, b - left_count

    def as_choice_map(self, game: Game) -> Dict[ChoiceId, ChoiceId]:
        return {game.choice_at(i): game.choice_at(v) for i, v in enumerate(self.mapping)}

    def is_renaming_of(self, stage: Stage) -> bool:
        """Check the renaming conditions against a stage (sides, winning relation, every history pair)"""
        return self.maps_between(stage, stage)

    def maps_between(self, source: Stage, target: Stage) -> bool:
        g, h = source.game, target.game
        if len(self.mapping) != g.choice_count or g.choice_count != h.choice_count:
            return False
        expected_left = h.right_count if self.swap else h.left_count
        if g.left_count != expected_left or sorted(self.mapping) != list(range(g.choice_count)):
            return False
        for i in range(g.left_count):
            lands_left = self.mapping[i] < h.left_count
            if lands_left == self.swap:
                return False
        if len(source.history) != len(target.history) or len(g.edge_set) != len(h.edge_set):
            return False
        for pair in g.edges:
            image = self._map_between(pair, g.left_count, h.left_count)
            if image not in h.edge_set:
                return False
        for pair, expected in zip(source.history, target.history):
            if self._map_between(pair, g.left_count, h.left_count) != expected:
                return False
        return True

    def _map_between(self, pair, source_left: int, target_left: int):
        left, right = pair
        a = self.mapping[left]
        b = self.mapping[source_left + right]
        if self.swap:
            return b, a - target_left
        return a, b - target_left


@dataclass
class RenamingGroup:
    """Self-renamings of a stage: generators, optionally every element, and the orbit partition"""
    generators: Tuple[Renaming, ...]
    elements: Optional[Tuple[Renaming, ...]]
    partition: Partition
    choice_count: int

    @property
    def has_swap(self) -> bool:
        return any(g.swap for g in self.generators)

    @property
    def order(self) -> Optional[int]:
        return len(self.elements) if self.elements is not None else None

    def class_of(self, position: int) -> Tuple[int, ...]:
        for cls in self.partition:
            if position in cls:
                return cls
        raise KeyError(position)


@dataclass(frozen=True)
class ClassLayout:
    """Classes of a stage in canonical order; symmetric when the stage admits a player swap"""
    key: str
    classes: Partition
    symmetric: bool


class _NodeCounter:
    def __init__(self, budget: int):
        self.budget = budget
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise SearchBudgetExceeded(self.nodes, self.budget)


class _LabelingSearch:
    """Individualization-refinement search for the minimum certificate of a vertex-colored graph.

    Automorphisms found along the way prune sibling branches that lie in one orbit of the
    pointwise stabilizer of the current path; a leaf matching the first leaf jumps back to
    the level where the two paths split.
    """

    def __init__(self, adjacency: Sequence[Sequence[int]], colors: Sequence[tuple], counter: _NodeCounter):
        self.n = len(colors)
        self.adjacency = [tuple(a) for a in adjacency]
        self.colors = list(colors)
        self.counter = counter
        ranks = {c: i for i, c in enumerate(sorted(set(self.colors)))}
        self.initial = [ranks[c] for c in self.colors]
        self.edge_list = [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]
        self.automorphisms: List[Tuple[int, ...]] = []
        self.first = None
        self.best = None

    def run(self) -> '_LabelingSearch':
        self._search(self._refine(self.initial), [])
        return self

    @property
    def certificate(self):
        return self.best[0]

    @property
    def positions(self) -> List[int]:
        return self.best[1]

    def _refine(self, colors: List[int]) -> List[int]:
        count = len(set(colors))
        while True:
            signatures = [(colors[v], tuple(sorted(colors[u] for u in self.adjacency[v])))
                          for v in range(self.n)]
            ranking = {s: i for i, s in enumerate(sorted(set(signatures)))}
            refined = [ranking[s] for s in signatures]
            if len(ranking) == count:
                return refined
            colors, count = refined, len(ranking)

    @staticmethod
    def _individualize(colors: List[int], vertex: int) -> List[int]:
        split = [2 * c + 1 for c in colors]
        split[vertex] = 2 * colors[vertex]
        return split

    def _target_cell(self, colors: List[int]) -> List[int]:
        cells = defaultdict(list)
        for v, c in enumerate(colors):
            cells[c].append(v)
        color = min(c for c, members in cells.items() if len(members) > 1)
        return cells[color]

    def _search(self, colors: List[int], path: List[int]) -> Optional[int]:
        self.counter.tick()
        if len(set(colors)) == self.n:
            return self._leaf(colors, path)
        explored: List[int] = []
        for vertex in self._target_cell(colors):
            if explored and self._in_explored_orbit(vertex, explored, path):
                continue
            explored.append(vertex)
            back = self._search(self._refine(self._individualize(colors, vertex)), path + [vertex])
            if back is not None and back < len(path):
                return back
        return None

    def _in_explored_orbit(self, vertex: int, explored: List[int], path: List[int]) -> bool:
        stabilizer = [g for g in self.automorphisms if all(g[u] == u for u in path)]
        if not stabilizer:
            return False
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in stabilizer:
            for u in range(self.n):
                a, b = find(u), find(g[u])
                if a != b:
                    parent[a] = b
        root = find(vertex)
        return any(find(w) == root for w in explored)

    def _certificate(self, positions: List[int]):
        inverse = [0] * self.n
        for v, p in enumerate(positions):
            inverse[p] = v
        colors = tuple(self.colors[inverse[p]] for p in range(self.n))
        edges = tuple(sorted((min(positions[u], positions[v]), max(positions[u], positions[v]))
                             for u, v in self.edge_list))
        return colors, edges

    def _record_automorphism(self, earlier: List[int], current: List[int]):
        inverse = [0] * self.n
        for v, p in enumerate(current):
            inverse[p] = v
        automorphism = tuple(inverse[earlier[v]] for v in range(self.n))
        if any(automorphism[v] != v for v in range(self.n)) and automorphism not in self.automorphisms:
            self.automorphisms.append(automorphism)

    def _leaf(self, positions: List[int], path: List[int]) -> Optional[int]:
        certificate = self._certificate(positions)
        if self.first is None:
            self.first = (certificate, positions, list(path))
            self.best = self.first
            return None
        if certificate == self.first[0]:
            self._record_automorphism(self.first[1], positions)
            split = 0
            while split < min(len(path), len(self.first[2])) and path[split] == self.first[2][split]:
                split += 1
            return split
        if certificate == self.best[0]:
            self._record_automorphism(self.best[1], positions)
        elif certificate < self.best[0]:
            self.best = (certificate, positions, list(path))
        return None


def _digest(prefix: str, certificate) -> str:
    return prefix + hashlib.sha256(repr(certificate).encode('utf-8')).hexdigest()[:32]


def _union_orbits(size: int, permutations: Sequence[Sequence[int]]) -> Partition:
    parent = list(range(size))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for perm in permutations:
        for u in range(size):
            a, b = find(u), find(perm[u])
            if a != b:
                parent[max(a, b)] = min(a, b)
    orbits = defaultdict(list)
    for u in range(size):
        orbits[find(u)].append(u)
    return tuple(sorted(tuple(sorted(o)) for o in orbits.values()))


class SymmetryService:
    """Renaming groups and canonical keys, memoized per stage"""

    def __init__(self, search_budget: Optional[int] = None, element_cap: Optional[int] = None):
        config = get_solver_config()
        self.logger = logging.getLogger(__name__)
        self.search_budget = search_budget or config['search_budget']
        self.element_cap = element_cap or config['group_element_cap']
        self.nodes_visited = 0
        self._groups: Dict[Stage, RenamingGroup] = {}
        self._layouts: Dict[Tuple[Stage, Optional[Tuple[int, ...]]], ClassLayout] = {}
        self._stage_keys: Dict[Stage, str] = {}
        self._game_keys: Dict[Game, str] = {}

    # ------------------------------------------------------------------ graphs

    @staticmethod
    def _stage_graph(stage: Stage):
        game = stage.game
        offset = game.left_count
        adjacency = [[] for _ in range(game.choice_count)]
        for l, r in game.edges:
            adjacency[l].append(offset + r)
            adjacency[offset + r].append(l)
        rounds = defaultdict(list)
        for t, (l, r) in enumerate(stage.history):
            rounds[l].append(t)
            rounds[offset + r].append(t)
        colors = [(0 if v < offset else 1, tuple(rounds[v])) for v in range(game.choice_count)]
        return adjacency, colors

    @staticmethod
    def _partition_graph(stage: Stage, partition: Partition, marks: Optional[Sequence[int]] = None):
        game = stage.game
        offset = game.left_count
        size = game.choice_count
        marks = marks or (0,) * size
        adjacency = [[] for _ in range(size + len(partition))]
        for l, r in game.edges:
            adjacency[l].append(offset + r)
            adjacency[offset + r].append(l)
        for k, cls in enumerate(partition):
            for v in cls:
                adjacency[size + k].append(v)
                adjacency[v].append(size + k)
        colors = [(0 if v < offset else 1, marks[v]) for v in range(size)] + [(2, 0)] * len(partition)
        return adjacency, colors

    @staticmethod
    def _transpose_vertex(stage: Stage, vertex: int) -> int:
        """Vertex of the transposed stage -> vertex of the original stage"""
        game = stage.game
        size = game.choice_count
        if vertex >= size:
            return vertex
        right = game.right_count
        return game.left_count + vertex if vertex < right else vertex - right

    @staticmethod
    def _transpose_partition(stage: Stage, partition: Partition) -> Partition:
        game = stage.game
        right = game.right_count

        def to_transposed(v):
            return right + v if v < game.left_count else v - game.left_count

        return tuple(tuple(sorted(to_transposed(v) for v in cls)) for cls in partition)

    def _search(self, adjacency, colors) -> _LabelingSearch:
        counter = _NodeCounter(self.search_budget)
        try:
            return _LabelingSearch(adjacency, colors, counter).run()
        finally:
            self.nodes_visited += counter.nodes

    # ------------------------------------------------------------------ groups

    def stage_renaming_group(self, stage: Stage) -> RenamingGroup:
        if stage in self._groups:
            return self._groups[stage]

        parent_stage = Stage(stage.game, stage.history[:-1]) if stage.history else None
        parent = self._groups.get(parent_stage) if parent_stage is not None else None
        if parent is not None and parent.elements is not None:
            last = stage.history[-1]
            kept = tuple(e for e in parent.elements if e.map_pair(last, stage.game.left_count) == last)
            generators = tuple(e for e in kept if not e.is_identity)
            group = RenamingGroup(generators, kept,
                                  _union_orbits(stage.game.choice_count, [e.mapping for e in kept]),
                                  stage.game.choice_count)
        else:
            group = self._compute_group(stage)
        self._groups[stage] = group
        return group

    def _compute_group(self, stage: Stage) -> RenamingGroup:
        game = stage.game
        adjacency, colors = self._stage_graph(stage)
        search = self._search(adjacency, colors)
        generators = [Renaming(False, g) for g in search.automorphisms]

        if game.left_count == game.right_count:
            mirror = stage.transposed()
            t_adjacency, t_colors = self._stage_graph(mirror)
            t_search = self._search(t_adjacency, t_colors)
            if t_search.certificate == search.certificate:
                inverse = [0] * game.choice_count
                for v, p in enumerate(t_search.positions):
                    inverse[p] = v
                mapping = tuple(self._transpose_vertex(stage, inverse[p]) for p in search.positions)
                generators.append(Renaming(True, mapping))

        partition = _union_orbits(game.choice_count, [g.mapping for g in generators])
        elements = self._close(game.choice_count, generators)
        return RenamingGroup(tuple(generators), elements, partition, game.choice_count)

    def _close(self, size: int, generators: List[Renaming]) -> Optional[Tuple[Renaming, ...]]:
        identity = Renaming(False, tuple(range(size)))
        seen = {identity}
        queue = deque([identity])
        while queue:
            element = queue.popleft()
            for g in generators:
                product = g.compose(element)
                if product not in seen:
                    if len(seen) >= self.element_cap:
                        self.logger.info(f'Renaming group exceeds {self.element_cap} elements; keeping generators only')
                        return None
                    seen.add(product)
                    queue.append(product)
        return tuple(sorted(seen, key=lambda e: (e.swap, e.mapping)))

    # ------------------------------------------------------------------ classes

    def partition(self, stage: Stage) -> Partition:
        """Orbit partition over dense indices"""
        return self.stage_renaming_group(stage).partition

    def structural_classes(self, stage: Stage) -> Tuple[Tuple[ChoiceId, ...], ...]:
        game = stage.game
        return tuple(tuple(game.choice_at(v) for v in cls) for cls in self.partition(stage))

    def focal_points(self, stage: Stage) -> Set[ChoiceId]:
        game = stage.game
        offset = game.left_count
        focal = set()
        for cls in self.partition(stage):
            if len(cls) == 1:
                focal.add(game.choice_at(cls[0]))
            elif len(cls) == 2 and cls[0] < offset <= cls[1] and game.is_winning(cls[0], cls[1] - offset):
                focal.update(game.choice_at(v) for v in cls)
        return focal

    def are_automorphism_equivalent(self, first: Stage, second: Stage) -> bool:
        if first.game != second.game:
            raise ValueError('automorphism-equivalence compares stages of one game')
        return self.partition(first) == self.partition(second)

    def partition_dump(self, game: Game, partition: Partition) -> str:
        classes = sorted(tuple(sorted(cls)) for cls in partition)
        return ' '.join('{' + ','.join(str(game.choice_at(v)) for v in cls) + '}' for cls in classes)

    # ------------------------------------------------------------------ keys

    def canonical_stage_key(self, stage: Stage) -> str:
        """Equal iff the stages are related by a renaming (history order included)"""
        if stage not in self._stage_keys:
            certificates = [self._search(*self._stage_graph(stage)).certificate,
                            self._search(*self._stage_graph(stage.transposed())).certificate]
            self._stage_keys[stage] = _digest('S', min(certificates))
        return self._stage_keys[stage]

    def canonical_game_key(self, game: Game) -> str:
        if game not in self._game_keys:
            self._game_keys[game] = self.canonical_stage_key(Stage(game, ())).replace('S', 'G', 1)
        return self._game_keys[game]

    def canonical_game(self, game: Game) -> Game:
        """The representative relabeling behind canonical_game_key"""
        best = None
        for candidate in (game, game.transposed()):
            search = self._search(*self._stage_graph(Stage(candidate, ())))
            if best is None or search.certificate < best[0]:
                best = (search.certificate, candidate, search.positions)
        _, candidate, positions = best
        offset = candidate.left_count
        edges = tuple((positions[l], positions[offset + r] - offset) for l, r in candidate.edges)
        return Game(candidate.left_count, candidate.right_count, edges)

    def renaming_between(self, source: Stage, target: Stage) -> Optional[Renaming]:
        """An explicit renaming from source onto target, if one exists"""
        if source.game.choice_count != target.game.choice_count or len(source.history) != len(target.history):
            return None
        source_search = self._search(*self._stage_graph(source))
        for swapped in (False, True):
            image = target.transposed() if swapped else target
            image_search = self._search(*self._stage_graph(image))
            if image_search.certificate != source_search.certificate:
                continue
            inverse = [0] * len(image_search.positions)
            for v, p in enumerate(image_search.positions):
                inverse[p] = v
            mapped = [inverse[p] for p in source_search.positions]
            if swapped:
                mapped = [self._transpose_vertex(target, v) for v in mapped]
            return Renaming(swapped, tuple(mapped))
        return None

    def class_layout(self, stage: Stage, marks: Optional[Tuple[int, ...]] = None) -> ClassLayout:
        """Canonical (game, partition) key with the classes in canonical order.

        marks optionally tags choices with small integers (protocol memory); tagged choices
        only match equally tagged choices, so the key then also fixes the tags.
        """
        if marks is not None and not any(marks):
            marks = None
        cache_key = (stage, marks)
        if cache_key in self._layouts:
            return self._layouts[cache_key]
        game = stage.game
        size = game.choice_count
        partition = self.partition(stage)
        search = self._search(*self._partition_graph(stage, partition, marks))
        mirror = stage.transposed()
        mirror_marks = None
        if marks is not None:
            mirror_marks = tuple(marks[self._transpose_vertex(stage, w)] for w in range(size))
        t_search = self._search(*self._partition_graph(
            mirror, self._transpose_partition(stage, partition), mirror_marks))

        if t_search.certificate < search.certificate:
            certificate, positions = t_search.certificate, t_search.positions
        else:
            certificate, positions = search.certificate, search.positions

        order = sorted(range(len(partition)), key=lambda k: positions[size + k])
        classes = tuple(partition[k] for k in order)
        # a swap of the partition graph alone is not a renaming of the stage
        symmetric = self.stage_renaming_group(stage).has_swap
        layout = ClassLayout(_digest('Q', certificate), classes, symmetric)
        self._layouts[cache_key] = layout
        return layout

    def canonical_state_key(self, stage: Stage, marks: Optional[Tuple[int, ...]] = None) -> str:
        return self.class_layout(stage, marks).key

    def canonical_classes(self, stage: Stage) -> Tuple[Tuple[ChoiceId, ...], ...]:
        game = stage.game
        return tuple(tuple(game.choice_at(v) for v in cls) for cls in self.class_layout(stage).classes)

    def clear(self):
        self._groups.clear()
        self._layouts.clear()
        self._stage_keys.clear()
        self._game_keys.clear()


# Global instance
symmetry_service = SymmetryService()
