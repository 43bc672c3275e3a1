#!/usr/bin/env python3
"""
Coordination Simulator
Monte Carlo plays of a protocol with per-episode counter-based random streams
"""

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.stats import sem

from game_service import Game, Side, game_service
from protocol_service import Protocol
from stage_service import stage_service
from wlc_config import get_solver_config


def episode_key(seed: int, episode: int) -> int:
    """128-bit Philox key for one episode, derived from sha256(seed:episode)"""
    digest = hashlib.sha256(f'{seed}:{episode}'.encode('utf-8')).digest()
    return int.from_bytes(digest[:16], 'big')


@dataclass
class SimReport:
    game: Game
    protocol_name: str
    seed: int
    episodes: int
    mean: float
    stderr: float
    histogram: Dict[int, int] = field(default_factory=dict)
    truncated: int = 0
    truncation_limit: float = 0.0001

    @property
    def truncation_exceeded(self) -> bool:
        return self.truncated > self.truncation_limit * self.episodes

    def within(self, expected: float, k: float = 4.0) -> bool:
        """Is the mean within k standard errors of an exact value"""
        if self.stderr == 0:
            return abs(self.mean - float(expected)) < 1e-12
        return abs(self.mean - float(expected)) <= k * self.stderr

    def to_dict(self) -> dict:
        return {
            'game': game_service.game_to_json(self.game),
            'protocol': self.protocol_name,
            'seed': self.seed,
            'episodes': self.episodes,
            'mean': self.mean,
            'stderr': self.stderr,
            'histogram': {str(k): v for k, v in sorted(self.histogram.items())},
            'truncated': self.truncated,
            'truncation_exceeded': self.truncation_exceeded,
        }


class CoordinationSimulator:
    def __init__(self):
        """Initialize the coordination simulator"""
        self.logger = logging.getLogger(__name__)

    def play_episode(self, game: Game, protocol: Protocol, seed: int, episode: int,
                     max_rounds: int) -> Optional[int]:
        """Rounds until coordination, or None when the episode hits max_rounds"""
        play_seed = episode_key(seed, episode)
        rng = np.random.Generator(np.random.Philox(key=play_seed))
        stage = stage_service.initial_stage(game)
        for round_number in range(1, max_rounds + 1):
            picks = []
            for side in (Side.LEFT, Side.RIGHT):
                weights = np.array([float(w) for w in protocol.distribution(stage, side, play_seed).weights])
                picks.append(int(rng.choice(len(weights), p=weights / weights.sum())))
            stage, coordinated = stage_service.advance(stage, (picks[0], picks[1]))
            if coordinated:
                return round_number
        return None

    def simulate(self, game: Game, protocol: Protocol, episodes: int, seed: int,
                 max_rounds: Optional[int] = None) -> SimReport:
        if episodes < 1:
            raise ValueError(f'episodes must be at least 1, got {episodes}')
        config = get_solver_config(max_rounds=max_rounds)

        rounds: List[int] = []
        truncated = 0
        for episode in range(episodes):
            outcome = self.play_episode(game, protocol, seed, episode, config['max_rounds'])
            if outcome is None:
                truncated += 1
            else:
                rounds.append(outcome)

        mean = float(np.mean(rounds)) if rounds else float('nan')
        stderr = float(sem(rounds)) if len(rounds) > 1 else 0.0
        report = SimReport(game, protocol.name, seed, episodes, mean, stderr, dict(Counter(rounds)),
                           truncated, config['truncation_limit'])
        if report.truncation_exceeded:
            self.logger.warning(f'{truncated} of {episodes} episodes hit {config["max_rounds"]} rounds')
        self.logger.info(f'Simulated {episodes} episodes of {protocol.name} on {game}: '
                         f'mean {mean:.6f} +/- {stderr:.6f}')
        return report


# Global instance
coordination_simulator = CoordinationSimulator()
