"""
Error types raised by the analyzer services
"""

from typing import List, Optional


class WLCError(Exception):
    """Base class for all analyzer errors"""


class GameFormatError(WLCError):
    def __init__(self, line_number: Optional[int], message: str):
        self.line_number = line_number
        where = f'line {line_number}: ' if line_number is not None else ''
        super().__init__(f'{where}{message}')


class GameValidationError(WLCError):
    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__('invalid game: ' + '; '.join(self.violations))


class InvalidChoice(WLCError):
    pass


class AdvancePastFinal(WLCError):
    pass


class NoCoordinatingChoice(WLCError):
    pass


class InvalidDistribution(WLCError):
    pass


class MissingStageEntry(WLCError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f'no table entry for stage key {key}')


class InnerSolveFailure(WLCError):
    def __init__(self, state_key: str):
        self.state_key = state_key
        super().__init__(f'no projected-gradient start converged at state {state_key}')


class BudgetError(WLCError):
    """A configured search or state budget was exhausted"""


class SearchBudgetExceeded(BudgetError):
    def __init__(self, nodes: int, budget: int):
        self.nodes = nodes
        self.budget = budget
        super().__init__(f'renaming search exceeded {budget} nodes')


class StateExplosion(BudgetError):
    def __init__(self, states: int, max_states: int):
        self.states = states
        self.max_states = max_states
        super().__init__(f'state space grew past {max_states} merged states')
