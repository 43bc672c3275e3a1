#!/usr/bin/env python3
"""
Solver Configuration
Tolerances, budgets and output locations for the coordination analyzer
"""

import os


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, '') else default


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(float(value)) if value not in (None, '') else default


# Solver settings (override with environment variables)
SOLVER_CONFIG = {
    'tol': _env_float('WLC_TOL', 1e-9),
    'max_iter': _env_int('WLC_MAX_ITER', 10000),
    'max_states': _env_int('WLC_MAX_STATES', 10000),
    'search_budget': _env_int('WLC_SEARCH_BUDGET', 10 ** 7),
    'group_element_cap': _env_int('WLC_GROUP_ELEMENT_CAP', 10 ** 5),
    'inner_starts': _env_int('WLC_INNER_STARTS', 32),
    'max_rounds': _env_int('WLC_MAX_ROUNDS', 10 ** 5),
    'truncation_limit': _env_float('WLC_TRUNCATION_LIMIT', 0.0001),
    'log_dir': os.getenv('WLC_LOG_DIR', 'logs'),
    'output_dir': os.getenv('WLC_OUTPUT_DIR', 'output'),
    'checkpoint_dir': os.getenv('WLC_CHECKPOINT_DIR', os.path.join('output', 'checkpoints')),
    'deep_budget_seconds': _env_float('WLC_DEEP_BUDGET_SECONDS', 7200.0),
}

# What each setting controls
CONFIG_HELP = {
    'tol': 'Sup-norm stopping tolerance for value iteration',
    'max_iter': 'Maximum value-iteration sweeps',
    'max_states': 'Largest merged state space a chain or quotient may reach',
    'search_budget': 'Backtracking nodes allowed per renaming search',
    'group_element_cap': 'Largest renaming group kept as an explicit element list',
    'inner_starts': 'Seeded projected-gradient starts per inner minimization',
    'max_rounds': 'Rounds after which a simulated episode is truncated',
    'truncation_limit': 'Fraction of truncated episodes that fails a simulation',
    'log_dir': 'Directory of the rotating log file',
    'output_dir': 'Default directory for reports',
    'checkpoint_dir': 'One JSON result per canonical game key (deep census)',
    'deep_budget_seconds': 'Wall-clock budget of a deep census run',
}


def get_solver_config(**overrides) -> dict:
    """Get solver configuration, with non-None overrides applied"""
    config = dict(SOLVER_CONFIG)
    for key, value in overrides.items():
        if key not in config:
            raise KeyError(f'Unknown solver setting: {key}')
        if value is not None:
            config[key] = value
    return config


def print_config():
    """Print the effective settings and the variables that control them"""
    print("\n⚙️  Solver configuration:")
    print("=" * 50)

    for name, value in SOLVER_CONFIG.items():
        print(f"\n{name}: {value}")
        print(f"  {CONFIG_HELP[name]}")
        print(f"  Environment Variable: WLC_{name.upper()}")


if __name__ == "__main__":
    print_config()
