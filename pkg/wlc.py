#!/usr/bin/env python3
"""
WLC Coordination Analyzer
Command-line surface for exact analysis, optimization, enumeration, simulation and checks
"""

import argparse
import json
import logging
import math
import os
import sys
from fractions import Fraction
from logging.handlers import RotatingFileHandler
from typing import List, Optional, Tuple

from colorama import Fore, Style, init
from tabulate import tabulate

from coordination_simulator import coordination_simulator
from enumeration_service import enumeration_service
from exact_analysis_service import exact_analysis_service, format_value
from game_service import game_service
from optimizer_service import optimizer_service
from protocol_service import protocol_service
from stage_service import stage_service
from symmetry_service import symmetry_service
from verification_service import verification_service
from wlc_config import get_solver_config
from wlc_errors import BudgetError, WLCError

# Initialize colorama
init(autoreset=True)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BUDGET = 2

logger = logging.getLogger('wlc')


def setup_logging(log_dir: str, verbose: bool = False):
    if not os.path.exists(log_dir):
        os.makedirs(log_dir)

    root = logging.getLogger()
    root.setLevel(logging.INFO)
    for handler in [h for h in root.handlers if h.get_name() in ('wlc-file', 'wlc-console')]:
        root.removeHandler(handler)
        handler.close()

    file_handler = RotatingFileHandler(os.path.join(log_dir, 'wlc.log'), maxBytes=10240000, backupCount=10)
    file_handler.setFormatter(logging.Formatter(
        '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'
    ))
    file_handler.setLevel(logging.INFO)
    file_handler.set_name('wlc-file')
    root.addHandler(file_handler)

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    console.setLevel(logging.INFO if verbose else logging.WARNING)
    console.set_name('wlc-console')
    root.addHandler(console)


def parse_history(text: Optional[str]) -> List[Tuple[int, int]]:
    """'0:1,1:0' -> [(0, 1), (1, 0)]"""
    if not text:
        return []
    pairs = []
    for item in text.split(','):
        left, _, right = item.strip().partition(':')
        if not left.isdigit() or not right.isdigit():
            raise ValueError(f'history pairs are written l:r, got "{item}"')
        pairs.append((int(left), int(right)))
    return pairs


def jsonable(value):
    if isinstance(value, Fraction):
        return format_value(value)
    if isinstance(value, float) and math.isinf(value):
        return 'inf'
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, 'item'):
        return value.item()
    return value


def emit(args, payload: dict, name: str):
    """Print JSON when asked and mirror the payload into --out"""
    document = json.dumps(jsonable(payload), indent=2, default=str)
    if args.json:
        print(document)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f'{name}.json')
        with open(path, 'w', encoding='utf-8') as f:
            f.write(document)
        logger.info(f'Wrote {path}')


def status(ok: bool) -> str:
    return f'{Fore.GREEN}ok{Style.RESET_ALL}' if ok else f'{Fore.RED}FAIL{Style.RESET_ALL}'


def print_check(report):
    print(tabulate(report.frame, headers='keys', tablefmt='grid', showindex=False, floatfmt='.9f'))
    for note in report.notes:
        print(f'{Fore.YELLOW}note: {note}{Style.RESET_ALL}')
    for failure in report.failures:
        print(f'{Fore.RED}{failure}{Style.RESET_ALL}')
    if report.passed:
        print(f'\n{Fore.GREEN}✅ {report.name} check passed{Style.RESET_ALL}')
    else:
        print(f'\n{Fore.RED}❌ {report.name} check failed ({len(report.failures)} failures){Style.RESET_ALL}')


# ---------------------------------------------------------------------- commands

def cmd_analyze(args) -> int:
    game = game_service.load_game(args.game)
    protocol = protocol_service.protocol_by_name(args.protocol)
    chain = exact_analysis_service.build_chain(game, protocol, max_states=args.max_states, merge=args.merge)
    values = exact_analysis_service.solve_chain(chain)
    report = {
        'game': game_service.game_to_json(game),
        'protocol': protocol.name,
        'oscp': exact_analysis_service.oscp(game, protocol),
        'ect': values[chain.start],
        'gct': exact_analysis_service.chain_gct(chain),
        'states': chain.size,
    }
    if args.dump_chain:
        report['chain'] = exact_analysis_service.chain_to_json(chain)
    emit(args, report, 'analyze')
    if not args.json:
        print(f'{Fore.CYAN}{game} under {protocol.name}{Style.RESET_ALL}')
        rows = [['OSCP', format_value(report['oscp'])],
                ['ECT', format_value(report['ect'])],
                ['GCT', 'inf' if math.isinf(report['gct']) else report['gct']],
                ['merged states', chain.size]]
        print(tabulate(rows, tablefmt='simple'))
    return EXIT_OK


def cmd_optimal(args) -> int:
    game = game_service.load_game(args.game)
    result = optimizer_service.optimal_ect(game, tol=args.tol, max_states=args.max_states, seed=args.seed)
    report = {
        'game': game_service.game_to_json(game),
        'optimal_ect': result.value,
        'diagnostics': result.diagnostics,
        'values': result.values,
    }
    if args.gct:
        report['optimal_gct'] = optimizer_service.optimal_gct(game, max_states=args.max_states).value
    probes = {}
    if args.probe_uniqueness:
        probes = optimizer_service.uniqueness_probe(result, seed=args.seed)
        report['probes'] = {
            key: {'history': [list(p) for p in probe.history], 'kind': probe.kind, 'optimum': probe.optimum,
                  'touched_mass': list(probe.touched_mass), 'spread': probe.spread}
            for key, probe in probes.items()
        }
    if args.export_policy:
        with open(args.export_policy, 'w', encoding='utf-8') as f:
            json.dump(optimizer_service.export_policy(result), f, indent=2)
        logger.info(f'Exported policy to {args.export_policy}')
    emit(args, report, 'optimal')

    if not args.json:
        print(f'{Fore.CYAN}Optimal structural protocol for {game}{Style.RESET_ALL}')
        rows = [['optimal ECT', f'{result.value:.9f}']]
        if args.gct:
            gct = report['optimal_gct']
            rows.append(['optimal GCT', 'inf' if math.isinf(gct) else gct])
        rows.extend([[name, value] for name, value in result.diagnostics.items()])
        print(tabulate(rows, tablefmt='simple'))
        if probes:
            print(f'\n{Fore.CYAN}Uniqueness probes{Style.RESET_ALL}')
            print(tabulate([[key, len(p.history), p.kind, f'{p.optimum:.9f}',
                             f'[{p.touched_mass[0]:.4f}, {p.touched_mass[1]:.4f}]', f'{p.spread:.2e}']
                            for key, p in probes.items()],
                           headers=['state', 'rounds', 'kind', 'value', 'touched mass', 'spread'],
                           tablefmt='grid'))
        if not result.diagnostics['converged']:
            print(f'{Fore.YELLOW}⚠️  value iteration stopped before reaching tol{Style.RESET_ALL}')
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.greatest:
        greatest = enumeration_service.greatest_optimal_ect(args.m, deep=args.deep, budget_seconds=args.budget)
        report = {'m': args.m, 'greatest_optimal_ect': greatest.value,
                  'witnesses': greatest.witnesses, 'method': greatest.method}
        emit(args, report, f'greatest_m{args.m}')
        if not args.json:
            print(tabulate([[args.m, f'{greatest.value:.9f}', ', '.join(greatest.witnesses), greatest.method]],
                           headers=['m', 'greatest optimal ECT', 'witnesses', 'method'], tablefmt='grid'))
        if greatest.census is not None and args.out:
            enumeration_service.atlas_report(greatest.census, args.out)
        return EXIT_OK if 'failed' not in greatest.method else EXIT_CHECK_FAILED

    if args.deep and args.m == 5:
        census = enumeration_service.greatest_optimal_ect(5, deep=True, budget_seconds=args.budget).census
    else:
        census = enumeration_service.census(args.m, nontrivial=args.nontrivial, max_edges=args.max_edges,
                                            max_degree=args.max_degree, compute_gct=not args.no_gct)
    frame = census.to_frame()
    emit(args, {'m': args.m, 'filter': census.filter_description, 'complete': census.complete,
                'games': frame.astype(object).where(frame.notna(), None).to_dict(orient='records')},
         f'census_m{args.m}')
    if args.out:
        enumeration_service.atlas_report(census, args.out)
    if not args.json:
        print(f'{Fore.CYAN}{len(frame)} canonical {args.m}-choice games ({census.filter_description}){Style.RESET_ALL}')
        print(tabulate(frame, headers='keys', tablefmt='grid', showindex=False, floatfmt='.9f'))
        if not census.complete:
            print(f'{Fore.YELLOW}⚠️  census stopped at the time budget; rerun to resume{Style.RESET_ALL}')
    return EXIT_OK


def cmd_simulate(args) -> int:
    game = game_service.load_game(args.game)
    protocol = protocol_service.protocol_by_name(args.protocol)
    report = coordination_simulator.simulate(game, protocol, args.episodes, args.seed, args.max_rounds)
    payload = report.to_dict()
    ok = not report.truncation_exceeded
    if args.exact:
        exact = exact_analysis_service.exact_ect(game, protocol, max_states=args.max_states)
        payload['exact_ect'] = format_value(exact)
        payload['within_4_stderr'] = report.within(exact)
        ok = ok and payload['within_4_stderr']
    emit(args, payload, 'simulate')
    if not args.json:
        print(f'{Fore.CYAN}{args.episodes} episodes of {protocol.name} on {game} (seed {args.seed}){Style.RESET_ALL}')
        rows = [['mean rounds', f'{report.mean:.6f}'], ['standard error', f'{report.stderr:.6f}'],
                ['truncated', report.truncated]]
        if args.exact:
            rows.append(['exact ECT', payload['exact_ect']])
            rows.append(['within 4 s.e.', status(payload['within_4_stderr'])])
        print(tabulate(rows, tablefmt='simple'))
        print(tabulate(sorted(report.histogram.items()), headers=['round', 'episodes'], tablefmt='simple'))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_golden(args) -> int:
    report = verification_service.golden_table(args.max_m)
    emit(args, report.to_dict(), 'golden')
    if not args.json:
        print_check(report)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_formulas(args) -> int:
    forms = optimizer_service.cm_closed_forms(args.m)
    report = {
        'm': forms.m,
        'wm_ect': forms.wm_ect,
        'la_ect': forms.la_ect,
        'la_gct': forms.la_gct,
        'optimal_ect': forms.optimal_ect,
        'optimal_gct': forms.optimal_gct,
        'coordination_round_probabilities': list(forms.coordination_round_probabilities),
    }
    emit(args, report, f'formulas_m{args.m}')
    if not args.json:
        rows = [[name, '-' if value is None else jsonable(value)]
                for name, value in report.items() if name != 'coordination_round_probabilities']
        rows.append(['P(first win in round l)',
                     ', '.join(format_value(p) for p in forms.coordination_round_probabilities) or '-'])
        print(tabulate(rows, tablefmt='simple'))
    return EXIT_OK


def cmd_check(args) -> int:
    if args.kind == 'bound':
        if args.random:
            games = verification_service.random_games(args.random, args.m, max(args.m, args.max_m), seed=args.seed)
        else:
            games = [game for _, game in enumeration_service.enumerate_games(args.m)]
        report = verification_service.wm_bound_check(games)
    elif args.kind == 'safety':
        report = verification_service.wm_safety_check(args.m)
    else:
        report = verification_service.lower_bound_check(args.m, args.tol)
    emit(args, report.to_dict(), f'check_{args.kind}_m{args.m}')
    if not args.json:
        print_check(report)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_classes(args) -> int:
    game = game_service.load_game(args.game)
    stage = stage_service.play(game, parse_history(args.history))
    partition = symmetry_service.partition(stage)
    report = {
        'game': game_service.game_to_json(game),
        'history': [list(pair) for pair in stage.history],
        'classes': symmetry_service.partition_dump(game, partition),
        'focal_points': sorted(str(c) for c in symmetry_service.focal_points(stage)),
        'state_key': symmetry_service.canonical_state_key(stage),
        'stage_key': symmetry_service.canonical_stage_key(stage),
    }
    emit(args, report, 'classes')
    if not args.json:
        for line in stage_service.format_trace(stage):
            print(line)
        print(tabulate([[name, value] for name, value in report.items() if name not in ('game', 'history')],
                       tablefmt='simple'))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='wlc', description='Two-player win-lose coordination game analyzer')
    parser.add_argument('--tol', type=float, help='value-iteration tolerance')
    parser.add_argument('--max-states', type=int, help='largest merged state space')
    parser.add_argument('--json', action='store_true', help='print one JSON document')
    parser.add_argument('--out', help='directory for JSON reports and atlas files')
    parser.add_argument('--verbose', action='store_true', help='log INFO to stderr')
    commands = parser.add_subparsers(dest='command', required=True)

    analyze = commands.add_parser('analyze', help='OSCP, ECT and GCT of a protocol, exactly')
    analyze.add_argument('game', help='game file or catalog name (cm5, z, c6, tri-1, ...)')
    analyze.add_argument('--protocol', default='wm', help='uniform, wm, wm-redraw, la, hub or table:<file>')
    analyze.add_argument('--merge', choices=['partition', 'renaming'], default='partition')
    analyze.add_argument('--dump-chain', action='store_true')
    analyze.set_defaults(handler=cmd_analyze)

    optimal = commands.add_parser('optimal', help='optimal structural protocol by value iteration')
    optimal.add_argument('game')
    optimal.add_argument('--gct', action='store_true', help='also compute the optimal guaranteed time')
    optimal.add_argument('--probe-uniqueness', action='store_true')
    optimal.add_argument('--export-policy', help='write the class-weight table to this file')
    optimal.add_argument('--seed', type=int, default=0)
    optimal.set_defaults(handler=cmd_optimal)

    enumerate_cmd = commands.add_parser('enumerate', help='all m-choice games up to renaming')
    enumerate_cmd.add_argument('m', type=int)
    enumerate_cmd.add_argument('--max-edges', type=int)
    enumerate_cmd.add_argument('--max-degree', type=int)
    enumerate_cmd.add_argument('--nontrivial', action='store_true')
    enumerate_cmd.add_argument('--no-gct', action='store_true')
    enumerate_cmd.add_argument('--greatest', action='store_true', help='report the greatest optimal ECT')
    enumerate_cmd.add_argument('--deep', action='store_true', help='allow the checkpointed 5-choice run')
    enumerate_cmd.add_argument('--budget', type=float, help='deep-run wall-clock budget in seconds')
    enumerate_cmd.set_defaults(handler=cmd_enumerate)

    simulate = commands.add_parser('simulate', help='Monte Carlo plays of a protocol')
    simulate.add_argument('game')
    simulate.add_argument('--protocol', default='wm')
    simulate.add_argument('--episodes', type=int, default=10000)
    simulate.add_argument('--seed', type=int, default=0)
    simulate.add_argument('--max-rounds', type=int)
    simulate.add_argument('--exact', action='store_true', help='compare with the exact expected time')
    simulate.set_defaults(handler=cmd_simulate)

    golden = commands.add_parser('golden', help='choice-matching golden table')
    golden.add_argument('--max-m', type=int, default=9)
    golden.set_defaults(handler=cmd_golden)

    formulas = commands.add_parser('formulas', help='closed forms for CM_m')
    formulas.add_argument('m', type=int)
    formulas.set_defaults(handler=cmd_formulas)

    check = commands.add_parser('check', help='property checks')
    check.add_argument('kind', choices=['bound', 'safety', 'lower'])
    check.add_argument('m', type=int)
    check.add_argument('--random', type=int, help='bound check on this many random games instead')
    check.add_argument('--max-m', type=int, default=8, help='largest size of random games')
    check.add_argument('--seed', type=int, default=0)
    check.set_defaults(handler=cmd_check)

    classes = commands.add_parser('classes', help='structural classes of a stage')
    classes.add_argument('game')
    classes.add_argument('--history', help='played pairs, e.g. 0:1,1:0')
    classes.set_defaults(handler=cmd_classes)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    config = get_solver_config(tol=args.tol, max_states=args.max_states)
    setup_logging(config['log_dir'], args.verbose)
    logger.debug(f"solver settings: tol={config['tol']} max_states={config['max_states']}")
    logger.info(f'wlc {args.command} startup')

    try:
        return args.handler(args)
    except BudgetError as e:
        logger.error(f'{args.command}: {e}')
        if args.json:
            print(json.dumps({'error': str(e)}))
        else:
            print(f'{Fore.RED}Budget exhausted: {e}{Style.RESET_ALL}')
        return EXIT_BUDGET
    except (WLCError, ValueError, OSError) as e:
        logger.error(f'{args.command}: {e}')
        if args.json:
            print(json.dumps({'error': str(e)}))
        else:
            print(f'{Fore.RED}Error: {e}{Style.RESET_ALL}')
        return EXIT_CHECK_FAILED
    except KeyboardInterrupt:
        print(f'\n{Fore.YELLOW}Interrupted by user{Style.RESET_ALL}')
        return EXIT_CHECK_FAILED


if __name__ == '__main__':
    sys.exit(main())
