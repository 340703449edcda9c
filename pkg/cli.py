#!/usr/bin/env python3
"""
Command line entry point.

    python cli.py generate --problem maxcut --sizes 7 9 --count 20 --seed 0
    python cli.py run --instances runs/instances/*.json --algorithm fvqe bfs --jobs 4
    python cli.py analyze --out-dir runs
    python cli.py spectrum --instances runs/instances/maxcut_N7_s0.json
    python cli.py grads --problem maxcut --sizes 7 9 11 13 --steps 20
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config import configure_logging, get_settings, load_run_config
from harness import (
    ALGORITHMS,
    AnalysisResult,
    SweepConfig,
    analyze,
    emit_plot_data,
    load_traces,
    run_batch,
)
from instance_generator import generate, spectrum, write_instance
from problem_encodings import load_problem

logger = logging.getLogger(__name__)

ALGORITHM_ALIASES = ALGORITHMS + ('fvqe', 'vqe')


def resolve_algorithms(names: List[str], ansatz: str) -> List[str]:
    resolved = []
    for name in names:
        if name == 'fvqe':
            name = f"fvqe-{ansatz}"
        elif name == 'vqe':
            name = 'vqe-iqp'
        if name not in resolved:
            resolved.append(name)
    return resolved


def generate_instances(problem: str, sizes: List[int], seed: int, count: int, out_dir: str) -> List[Path]:
    settings = get_settings()
    paths = []
    for n_qubits in sizes:
        for s in range(seed, seed + count):
            instance = generate(problem, n_qubits, s)
            path = Path(out_dir) / 'instances' / f"{problem}_N{n_qubits}_s{s}.json"
            write_instance(instance, path, s, brute_force_cap=settings.brute_force_cap)
            paths.append(path)
    return paths


def cmd_generate(args) -> int:
    paths = generate_instances(args.problem, args.sizes, args.seed, args.count, args.out_dir)
    print(f"✅ Generated {len(paths)} {args.problem} instances in {Path(args.out_dir) / 'instances'}")
    return 0


def _sweep_from_args(args, instances: List[str]) -> SweepConfig:
    settings = get_settings()
    values = {
        'instances': instances,
        'algorithms': resolve_algorithms(args.algorithm, args.ansatz),
        'seeds': list(range(args.seed, args.seed + args.seeds)),
        'preset': args.preset,
        'steps': args.steps,
        'budget': args.budget,
        'layers': args.layers,
        'record_exact': args.record_exact,
        'sa_t_final': args.sa_t_final,
        'simulator_cap': settings.simulator_cap,
        'exact_cap': settings.exact_cap,
        'brute_force_cap': settings.brute_force_cap,
    }
    if args.config:
        overrides = load_run_config(args.config)
        if 'instance' in overrides:
            values['instances'] = [overrides.pop('instance')]
        if 'ansatz' in overrides:
            values['algorithms'] = resolve_algorithms(args.algorithm, overrides.pop('ansatz'))
        if 'seed' in overrides:
            values['seeds'] = [overrides.pop('seed')]
        values.update(overrides)
    return SweepConfig(**values)


def instance_files(paths: List[str]) -> List[str]:
    """Drop `.meta.json` sidecars picked up by shell globs."""
    return [str(p) for p in paths if not str(p).endswith('.meta.json')]


def cmd_run(args) -> int:
    sweep = _sweep_from_args(args, instance_files(args.instances))
    summary = run_batch(sweep, args.out_dir, args.jobs or get_settings().jobs)
    print(f"📊 Completed {summary['completed']}, skipped {summary['skipped']}, failed {summary['failed']}")
    if summary['failed']:
        print(f"❌ {summary['failed']} runs failed; see {Path(args.out_dir) / 'manifest.json'}")
        return 1
    return 0


def _print_analysis(analysis: AnalysisResult) -> None:
    for row in analysis.success.rows():
        value = row['min_samples'] if row['min_samples'] is not None else '-'
        print(f"  {row['kind']} N={row['n_bits']} {row['algorithm']} A>={row['threshold']:g} "
              f"on {row['fraction']:.0%}: {value}")
    for stats in analysis.gradients:
        if stats.fits:
            fits = ', '.join(f"{fit.model} R2={fit.r2:.4f}" for fit in stats.fits.values())
            print(f"  gradients {stats.kind}/{stats.algorithm}: {fits} (better: {stats.better})")


def cmd_analyze(args) -> int:
    traces = load_traces(args.out_dir)
    analysis = analyze(traces)
    paths = emit_plot_data(analysis, args.out_dir)
    print(f"📈 Analyzed {len(traces)} traces")
    _print_analysis(analysis)
    print(f"✅ Wrote {len(paths)} CSV files to {Path(args.out_dir) / 'plots'}")
    return 0


def cmd_spectrum(args) -> int:
    settings = get_settings()
    reports = []
    for path in instance_files(args.instances):
        problem = load_problem(path, brute_force_cap=settings.brute_force_cap)
        report = spectrum(problem, cap=settings.brute_force_cap)
        reports.append(report)
        print(f"🔍 {report.instance_id}: optimal strings {report.optimal_count}, "
              f"reference {report.reference:.3g}")
        for a, frac in zip(report.thresholds, report.fractions):
            print(f"    A>={a:g}: {frac:.6g}")
    emit_plot_data(AnalysisResult(spectra=reports), args.out_dir)
    return 0


def cmd_grads(args) -> int:
    paths = generate_instances(args.problem, args.sizes, args.seed, args.count, args.out_dir)
    args.record_exact = True
    sweep = _sweep_from_args(args, [str(p) for p in paths])
    summary = run_batch(sweep, args.out_dir, args.jobs or get_settings().jobs)
    analysis = analyze(load_traces(args.out_dir))
    emit_plot_data(analysis, args.out_dir)
    _print_analysis(analysis)
    return 1 if summary['failed'] else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='F-VQE experiments on MaxCut and ATSP')
    sub = parser.add_subparsers(dest='command', required=True)

    def add_common(p, sizes=False, runs=False):
        p.add_argument('--out-dir', default=get_settings().out_dir)
        p.add_argument('--seed', type=int, default=0)
        if sizes:
            p.add_argument('--problem', choices=['maxcut', 'atsp'], default='maxcut')
            p.add_argument('--sizes', type=int, nargs='+', required=True, help='qubit counts')
            p.add_argument('--count', type=int, default=1, help='instances per size')
        if runs:
            p.add_argument('--algorithm', nargs='+', default=['fvqe'], choices=ALGORITHM_ALIASES)
            p.add_argument('--ansatz', choices=['iqp', 'classical'], default='iqp')
            p.add_argument('--preset', default='hp2', choices=['hp1', 'hp2', 'hp3', 'hp4', 'custom'])
            p.add_argument('--seeds', type=int, default=1, help='seeds per instance')
            p.add_argument('--steps', type=int, default=200)
            p.add_argument('--budget', type=int, default=None)
            p.add_argument('--layers', type=int, default=None)
            p.add_argument('--sa-t-final', type=float, default=0.01)
            p.add_argument('--record-exact', action='store_true')
            p.add_argument('--jobs', type=int, default=None)
            p.add_argument('--config', default=None, help='run config file (JSON or key=value)')

    add_common(sub.add_parser('generate', help='generate random instances'), sizes=True)

    run = sub.add_parser('run', help='run a sweep')
    run.add_argument('--instances', nargs='+', required=True)
    add_common(run, runs=True)

    add_common(sub.add_parser('analyze', help='compute metrics and plot data'))

    spec = sub.add_parser('spectrum', help='exhaustive solution spectrum')
    spec.add_argument('--instances', nargs='+', required=True)
    add_common(spec)

    add_common(sub.add_parser('grads', help='exact gradient statistics'), sizes=True, runs=True)
    return parser


COMMANDS = {
    'generate': cmd_generate,
    'run': cmd_run,
    'analyze': cmd_analyze,
    'spectrum': cmd_spectrum,
    'grads': cmd_grads,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        return COMMANDS[args.command](args)
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"❌ {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
