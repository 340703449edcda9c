#!/usr/bin/env python3
"""
Experiment harness: sweeps over instances x algorithms x seeds, per-run
trace persistence with a manifest, and the analysis tables written as CSV.

Sweep directory layout:
    <out>/traces/<run hash>.json
    <out>/manifest.json
    <out>/plots/*.csv
"""

import hashlib
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from baselines import SaConfig, bfs_run, sa_run
from fvqe_engine import Hyperparameters, default_circuit, run_fvqe
from instance_generator import SpectrumReport
from problem_encodings import Problem, instance_hash, load_instance, load_problem
from traces import RunTrace

logger = logging.getLogger(__name__)

ALGORITHMS = ('fvqe-iqp', 'fvqe-classical', 'vqe-iqp', 'bfs', 'sa')
THRESHOLDS = (0.9, 0.95, 1.0)
FRACTIONS = (0.3, 0.6, 0.9)
CUMULATIVE_TARGET = 0.95

CSV_OPTIONS = {'index': False, 'lineterminator': '\n', 'float_format': '%.12g'}
FRACTION_COLUMNS = ['kind', 'n_bits', 'algorithm', 'threshold', 'samples', 'fraction']
SUCCESS_COLUMNS = ['kind', 'n_bits', 'algorithm', 'threshold', 'fraction', 'min_samples']
CUMULATIVE_COLUMNS = ['kind', 'n_bits', 'algorithm', 'instance_id', 'seed', 'threshold', 'samples']
BOXPLOT_COLUMNS = ['kind', 'n_bits', 'algorithm', 'count', 'min', 'q25', 'median', 'q75', 'max',
                   'whisker_low', 'whisker_high', 'n_outliers']
FIT_COLUMNS = ['kind', 'algorithm', 'model', 'a', 'b', 'r2', 'better']
SPECTRUM_COLUMNS = ['instance_id', 'kind', 'n_bits', 'threshold', 'fraction', 'reference']


# Sweeps

@dataclass
class SweepConfig:
    instances: List[str] = field(default_factory=list)
    algorithms: List[str] = field(default_factory=lambda: ['fvqe-iqp'])
    seeds: List[int] = field(default_factory=lambda: [0])
    preset: str = 'hp2'
    steps: int = 200
    budget: Optional[int] = None
    layers: Optional[int] = None
    record_exact: bool = False
    sa_t_final: float = 0.01
    simulator_cap: int = 29
    exact_cap: int = 20
    brute_force_cap: int = 29
    shots: Optional[int] = None
    tau: Optional[float] = None
    learning_rate: Optional[float] = None

    def __post_init__(self):
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"Unknown algorithms {unknown}; expected one of {', '.join(ALGORITHMS)}")

    def hyperparameters(self, n_qubits: int) -> Hyperparameters:
        if self.preset != 'custom':
            return Hyperparameters.preset(self.preset, n_qubits, self.steps)
        if None in (self.shots, self.tau, self.learning_rate):
            raise ValueError("The custom preset needs shots, tau and learning_rate")
        return Hyperparameters(self.shots, self.learning_rate, self.tau, self.steps, 'custom')

    def run_settings(self) -> Dict:
        """Everything except the instance list that changes a run's outcome."""
        data = asdict(self)
        for key in ('instances', 'algorithms', 'seeds'):
            data.pop(key)
        return data

    def jobs(self) -> List[Tuple[str, str, int]]:
        return [(path, algorithm, seed)
                for path in self.instances for algorithm in self.algorithms for seed in self.seeds]


def run_hash(settings: Dict, algorithm: str, instance_digest: str, seed: int) -> str:
    payload = {'settings': settings, 'algorithm': algorithm, 'instance': instance_digest, 'seed': seed}
    return hashlib.md5(json.dumps(payload, sort_keys=True).encode('utf-8')).hexdigest()


def fvqe_sample_budget(problem: Problem, sweep: SweepConfig) -> int:
    """Samples a full F-VQE run consumes: T * (M + 1) * s."""
    hp = sweep.hyperparameters(problem.n_bits)
    circuit = default_circuit(problem.n_bits, sweep.layers)
    return sweep.steps * (circuit.n_params + 1) * hp.shots


def execute_run(problem: Problem, algorithm: str, seed: int, sweep: SweepConfig) -> RunTrace:
    n = problem.n_bits
    if algorithm in ('fvqe-iqp', 'fvqe-classical'):
        return run_fvqe(
            problem, ansatz=algorithm.split('-')[1],
            hyperparameters=sweep.hyperparameters(n),
            seed=seed, layers=sweep.layers, max_samples=sweep.budget,
            record_exact=sweep.record_exact, simulator_cap=sweep.simulator_cap,
            exact_cap=sweep.exact_cap, algorithm=algorithm,
        )
    if algorithm == 'vqe-iqp':
        return run_fvqe(
            problem, ansatz='iqp', hyperparameters=Hyperparameters.preset('vqe', n, sweep.steps),
            seed=seed, layers=sweep.layers, max_samples=sweep.budget,
            record_exact=sweep.record_exact, simulator_cap=sweep.simulator_cap,
            exact_cap=sweep.exact_cap, algorithm=algorithm,
        )
    budget = sweep.budget or fvqe_sample_budget(problem, sweep)
    if algorithm == 'bfs':
        return bfs_run(problem, budget, seed)
    if algorithm == 'sa':
        return sa_run(problem, SaConfig(sweep.sa_t_final, budget), seed)
    raise ValueError(f"Unknown algorithm {algorithm!r}")


def _run_job(payload: Tuple[str, str, int, Dict]) -> Dict:
    """Worker entry point; never raises so one failure cannot sink the pool."""
    path, algorithm, seed, sweep_data = payload
    try:
        sweep = SweepConfig(**sweep_data)
        problem = load_problem(path, brute_force_cap=sweep.brute_force_cap)
        trace = execute_run(problem, algorithm, seed, sweep)
        return {'status': 'completed', 'trace': trace.to_dict()}
    except Exception as e:
        logger.error(f"Run {algorithm} seed={seed} on {path} failed: {e}")
        return {'status': 'failed', 'error': f"{type(e).__name__}: {e}"}


class BatchRunner:
    """Runs sweeps into one output directory; completed runs are never redone."""

    def __init__(self, out_dir: str = 'runs', jobs: int = 1):
        self.out_dir = Path(out_dir)
        self.jobs = max(1, int(jobs))
        self.traces_dir = self.out_dir / 'traces'
        self.manifest_path = self.out_dir / 'manifest.json'

    def _load_manifest(self) -> Dict:
        try:
            with open(self.manifest_path, 'r') as f:
                return json.load(f)
        except FileNotFoundError:
            return {'runs': {}}

    def _save_manifest(self, manifest: Dict) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.manifest_path, 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)

    def run_batch(self, sweep: SweepConfig) -> Dict[str, int]:
        """Execute every pending run; returns counts of completed, skipped and failed runs."""
        manifest = self._load_manifest()
        runs = manifest.setdefault('runs', {})
        settings = sweep.run_settings()
        summary = {'completed': 0, 'skipped': 0, 'failed': 0}

        pending = []
        digests: Dict[str, str] = {}
        for path, algorithm, seed in sweep.jobs():
            try:
                if path not in digests:
                    digests[path] = instance_hash(load_instance(path))
            except (OSError, ValueError, KeyError) as e:
                logger.error(f"Cannot read instance {path}: {e}")
                summary['failed'] += 1
                continue
            key = run_hash(settings, algorithm, digests[path], seed)
            entry = runs.get(key)
            if entry and entry.get('status') == 'completed' and (self.traces_dir / f"{key}.json").exists():
                logger.info(f"Skipping completed run {key} ({algorithm}, seed={seed}, {path})")
                summary['skipped'] += 1
                continue
            pending.append((key, (path, algorithm, seed, asdict(sweep))))

        if self.jobs > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                results = list(pool.map(_run_job, [payload for _, payload in pending]))
        else:
            results = [_run_job(payload) for _, payload in pending]

        for (key, (path, algorithm, seed, _)), result in zip(pending, results):
            entry = {'instance': path, 'algorithm': algorithm, 'seed': seed, 'status': result['status']}
            if result['status'] == 'completed':
                RunTrace.from_dict(result['trace']).save(self.traces_dir / f"{key}.json")
                entry['trace'] = f"traces/{key}.json"
                summary['completed'] += 1
            else:
                entry['error'] = result['error']
                summary['failed'] += 1
            runs[key] = entry

        self._save_manifest(manifest)
        logger.info(f"Batch finished: {summary}")
        return summary


def run_batch(sweep: SweepConfig, out_dir: str = 'runs', jobs: int = 1) -> Dict[str, int]:
    return BatchRunner(out_dir, jobs).run_batch(sweep)


def load_traces(out_dir: str) -> List[RunTrace]:
    traces_dir = Path(out_dir) / 'traces'
    if not traces_dir.exists():
        return []
    return [RunTrace.load(p) for p in sorted(traces_dir.glob('*.json'))]


# Metrics

@dataclass
class FractionCurve:
    """Right-continuous step function: fraction of runs with best A >= threshold."""
    kind: str
    n_bits: int
    algorithm: str
    threshold: float
    n_runs: int
    samples: List[int] = field(default_factory=list)
    fractions: List[float] = field(default_factory=list)

    def value_at(self, samples: int) -> float:
        value = 0.0
        for s, frac in zip(self.samples, self.fractions):
            if s > samples:
                break
            value = frac
        return value

    def first_reaching(self, fraction: float) -> Optional[int]:
        for s, frac in zip(self.samples, self.fractions):
            if frac >= fraction:
                return s
        return None


def _group_key(trace: RunTrace) -> Tuple[str, int, str]:
    return trace.config.get('problem', ''), trace.n_bits, trace.algorithm


def fraction_solved_curve(traces: Sequence[RunTrace], threshold: float) -> FractionCurve:
    if not traces:
        return FractionCurve('', 0, '', threshold, 0)
    kind, n_bits, algorithm = _group_key(traces[0])
    hits = sorted(h for h in (t.first_reaching(threshold) for t in traces) if h is not None)
    curve = FractionCurve(kind, n_bits, algorithm, threshold, len(traces))
    for i, s in enumerate(hits, start=1):
        if curve.samples and curve.samples[-1] == s:
            curve.fractions[-1] = i / len(traces)
        else:
            curve.samples.append(s)
            curve.fractions.append(i / len(traces))
    return curve


@dataclass
class SuccessTable:
    entries: Dict[Tuple[str, int, str, float, float], Optional[int]] = field(default_factory=dict)

    def get(self, kind: str, n_bits: int, algorithm: str, threshold: float, fraction: float) -> Optional[int]:
        return self.entries.get((kind, n_bits, algorithm, threshold, fraction))

    def rows(self) -> List[Dict]:
        return [
            {'kind': k, 'n_bits': n, 'algorithm': alg, 'threshold': a, 'fraction': frac, 'min_samples': v}
            for (k, n, alg, a, frac), v in sorted(self.entries.items())
        ]


def success_table(curves: Iterable[FractionCurve], fractions: Sequence[float] = FRACTIONS) -> SuccessTable:
    table = SuccessTable()
    for curve in curves:
        for fraction in fractions:
            key = (curve.kind, curve.n_bits, curve.algorithm, curve.threshold, fraction)
            table.entries[key] = curve.first_reaching(fraction)
    return table


def cumulative_success_samples(probabilities: Sequence[float], shots: Sequence[int],
                               samples_axis: Optional[Sequence[int]] = None,
                               target: float = CUMULATIVE_TARGET) -> Optional[int]:
    """
    First point on the samples axis where 1 - prod_t (1 - p_t)**s_t > target.
    The axis defaults to the cumulative shots.
    """
    if samples_axis is None:
        samples_axis = np.cumsum(shots).tolist()
    log_failure = 0.0
    for p, s, axis in zip(probabilities, shots, samples_axis):
        if p >= 1.0:
            return int(axis)
        log_failure += s * math.log1p(-p)
        if 1.0 - math.exp(log_failure) > target:
            return int(axis)
    return None


def trace_cumulative_success(trace: RunTrace, threshold: float,
                             target: float = CUMULATIVE_TARGET) -> Optional[int]:
    key = f"{threshold:g}"
    records = [r for r in trace.steps if r.success_probabilities]
    if not records:
        return None
    return cumulative_success_samples(
        [r.success_probabilities[key] for r in records],
        [r.shots for r in records],
        [r.samples_consumed for r in records],
        target,
    )


@dataclass
class BoxStats:
    count: int
    min: float
    q25: float
    median: float
    q75: float
    max: float
    whisker_low: float
    whisker_high: float
    n_outliers: int


def box_statistics(values: Sequence[float]) -> BoxStats:
    """Quartiles with 1.5 IQR whiskers."""
    data = np.asarray(values, dtype=np.float64)
    q25, median, q75 = np.percentile(data, [25, 50, 75])
    iqr = q75 - q25
    low, high = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = data[(data >= low) & (data <= high)]
    return BoxStats(
        count=int(data.size),
        min=float(data.min()),
        q25=float(q25),
        median=float(median),
        q75=float(q75),
        max=float(data.max()),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        n_outliers=int(data.size - inside.size),
    )


@dataclass
class DecayFit:
    model: str
    a: float
    b: float
    r2: float


def fit_decays(sizes: Sequence[int], medians: Sequence[float]) -> Optional[Dict[str, DecayFit]]:
    """Least squares on log medians: a*b**N and a*N**b. Needs three sizes with a positive median."""
    n = np.asarray(sizes, dtype=np.float64)
    m = np.asarray(medians, dtype=np.float64)
    positive = m > 0
    if np.count_nonzero(positive) < len(m):
        logger.warning(f"Dropping {len(m) - np.count_nonzero(positive)} zero medians from decay fits")
    n, m = n[positive], m[positive]
    if len(n) < 3:
        return None
    log_m = np.log(m)
    exp_fit = stats.linregress(n, log_m)
    poly_fit = stats.linregress(np.log(n), log_m)
    return {
        'exponential': DecayFit('exponential', math.exp(exp_fit.intercept), math.exp(exp_fit.slope),
                                exp_fit.rvalue ** 2),
        'polynomial': DecayFit('polynomial', math.exp(poly_fit.intercept), poly_fit.slope,
                               poly_fit.rvalue ** 2),
    }


@dataclass
class GradientStats:
    kind: str
    algorithm: str
    boxes: Dict[int, BoxStats] = field(default_factory=dict)
    fits: Optional[Dict[str, DecayFit]] = None

    @property
    def medians(self) -> Dict[int, float]:
        return {n: box.median for n, box in sorted(self.boxes.items())}

    @property
    def better(self) -> Optional[str]:
        if not self.fits:
            return None
        return max(self.fits.values(), key=lambda fit: fit.r2).model


def gradient_statistics(traces: Sequence[RunTrace]) -> List[GradientStats]:
    """Pooled |dL/dtheta_k| per size, per (problem kind, algorithm)."""
    pooled: Dict[Tuple[str, str], Dict[int, List[float]]] = defaultdict(lambda: defaultdict(list))
    for trace in traces:
        values = [g for r in trace.steps if r.exact_gradients for g in r.exact_gradients]
        if values:
            pooled[(trace.config.get('problem', ''), trace.algorithm)][trace.n_bits].extend(values)

    results = []
    for (kind, algorithm), by_size in sorted(pooled.items()):
        result = GradientStats(kind, algorithm, {n: box_statistics(v) for n, v in sorted(by_size.items())})
        medians = result.medians
        if len(medians) < 3:
            logger.info(f"Gradient fits skipped for {kind}/{algorithm}: only {len(medians)} sizes")
        else:
            result.fits = fit_decays(list(medians), list(medians.values()))
        results.append(result)
    return results


@dataclass
class AnalysisResult:
    curves: List[FractionCurve] = field(default_factory=list)
    success: SuccessTable = field(default_factory=SuccessTable)
    cumulative: List[Dict] = field(default_factory=list)
    gradients: List[GradientStats] = field(default_factory=list)
    spectra: List[SpectrumReport] = field(default_factory=list)


def analyze(traces: Sequence[RunTrace], thresholds: Sequence[float] = THRESHOLDS,
            spectra: Sequence[SpectrumReport] = ()) -> AnalysisResult:
    groups: Dict[Tuple[str, int, str], List[RunTrace]] = defaultdict(list)
    for trace in traces:
        groups[_group_key(trace)].append(trace)

    result = AnalysisResult(spectra=list(spectra))
    for key in sorted(groups):
        for threshold in thresholds:
            result.curves.append(fraction_solved_curve(groups[key], threshold))
        for trace in groups[key]:
            for threshold in thresholds:
                samples = trace_cumulative_success(trace, threshold)
                if samples is None and not any(r.success_probabilities for r in trace.steps):
                    continue
                result.cumulative.append({
                    'kind': key[0], 'n_bits': key[1], 'algorithm': key[2],
                    'instance_id': trace.instance_id, 'seed': trace.seed,
                    'threshold': threshold, 'samples': samples,
                })
    result.success = success_table(result.curves)
    result.gradients = gradient_statistics(traces)
    return result


def _write_csv(rows: List[Dict], columns: List[str], path: Path) -> Path:
    pd.DataFrame(rows, columns=columns).to_csv(path, **CSV_OPTIONS)
    return path


def emit_plot_data(analysis: AnalysisResult, out_dir: str) -> List[Path]:
    plots = Path(out_dir) / 'plots'
    plots.mkdir(parents=True, exist_ok=True)

    fraction_rows = [
        {'kind': c.kind, 'n_bits': c.n_bits, 'algorithm': c.algorithm, 'threshold': c.threshold,
         'samples': s, 'fraction': f}
        for c in analysis.curves for s, f in zip(c.samples, c.fractions)
    ]
    box_rows, fit_rows = [], []
    for g in analysis.gradients:
        for n, box in sorted(g.boxes.items()):
            box_rows.append({'kind': g.kind, 'n_bits': n, 'algorithm': g.algorithm, **asdict(box)})
        for fit in (g.fits or {}).values():
            fit_rows.append({'kind': g.kind, 'algorithm': g.algorithm, 'model': fit.model,
                             'a': fit.a, 'b': fit.b, 'r2': fit.r2, 'better': g.better})
    spectrum_rows = [row for report in analysis.spectra for row in report.rows()]

    return [
        _write_csv(fraction_rows, FRACTION_COLUMNS, plots / 'fraction_solved.csv'),
        _write_csv(analysis.success.rows(), SUCCESS_COLUMNS, plots / 'success_table.csv'),
        _write_csv(analysis.cumulative, CUMULATIVE_COLUMNS, plots / 'cumulative_success.csv'),
        _write_csv(box_rows, BOXPLOT_COLUMNS, plots / 'gradient_boxplots.csv'),
        _write_csv(fit_rows, FIT_COLUMNS, plots / 'gradient_fits.csv'),
        _write_csv(spectrum_rows, SPECTRUM_COLUMNS, plots / 'spectrum.csv'),
    ]
