"""
Ablation sweeps: every variant (optionally crossed with a grid of config
values) is trained over a list of seeds and summarized by mean and
standard deviation of the best-epoch metrics.
"""
import itertools
import logging

import pandas as pd

from interactions.services.types import DOMAINS
from training.config import Ablation, TrainingConfig
from training.serializers import TrainingConfigSerializer
from .runs import RunRecorder
from .trainer import fit

logger = logging.getLogger(__name__)

VARIANT_ORDER = (Ablation.INTER_ONLY, Ablation.INTRA_INTER, Ablation.WO_TAFC, Ablation.FULL)


def parse_grid(specs) -> dict:
    """['learning_rate=0.00175,0.002'] -> {'learning_rate': ['0.00175', '0.002']}; values are validated later."""
    grid = {}
    for spec in specs or ():
        name, sep, values = spec.partition('=')
        if not sep or not name or not values:
            raise ValueError(f"grid entries look like FIELD=v1,v2; got '{spec}'")
        grid[name.strip()] = [value.strip() for value in values.split(',') if value.strip()]
    return grid


def expand_configs(base: TrainingConfig, variants, seeds, grid: dict = None):
    """
    Yields (variant, grid point, config) for every variant x grid point x seed.
    Each config goes through the serializer, so grid values are validated.
    """
    grid = grid or {}
    names = list(grid)
    for variant in variants:
        for values in itertools.product(*(grid[name] for name in names)):
            point = dict(zip(names, values))
            for seed in seeds:
                data = {**base.to_dict(), **point, 'ablation': Ablation(variant).value, 'seed': seed}
                serializer = TrainingConfigSerializer(data=data)
                serializer.is_valid(raise_exception=True)
                yield Ablation(variant).value, point, serializer.to_config()


def run_sweep(dataset, candidates, base: TrainingConfig, *, variants=VARIANT_ORDER, seeds=(1, 2, 3, 4, 5),
              grid: dict = None, runs_dir=None, dataset_manifest: dict = None) -> pd.DataFrame:
    """
    One row per trained config: variant, grid values, seed, run key and the
    best-epoch HR / NDCG of both domains. Runs are recorded under `runs_dir`
    when it is given.
    """
    rows = []
    for variant, point, config in expand_configs(base, variants, seeds, grid):
        recorder = None
        if runs_dir is not None:
            recorder = RunRecorder.open(runs_dir, config, command='ablate', dataset_manifest=dataset_manifest)
        try:
            result = fit(dataset, candidates, config, recorder=recorder)
        except Exception as exc:
            if recorder is not None:
                recorder.fail(exc)
            raise
        if recorder is not None:
            recorder.finish(result)
        row = {'variant': variant, **point, 'seed': config.seed, 'run_key': config.run_key}
        for domain in DOMAINS:
            metrics = result.best_report.metrics(domain)
            row[f'hr_{domain.value}'] = metrics.hr
            row[f'ndcg_{domain.value}'] = metrics.ndcg
        logger.info('%s seed %d: %s', variant, config.seed,
                    ', '.join(f'{key} {value:.2f}' for key, value in row.items() if key.startswith(('hr_', 'ndcg_'))))
        rows.append(row)
    return pd.DataFrame(rows)


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Mean and sample standard deviation (0 for a single seed) per variant and grid point, in variant order."""
    metrics = [column for column in results.columns if column.startswith(('hr_', 'ndcg_'))]
    keys = [column for column in results.columns if column not in metrics and column not in ('seed', 'run_key')]
    summary = results.groupby(keys, sort=False)[metrics].agg(['mean', 'std'])
    summary = summary.fillna(0.0)
    summary.columns = [f'{metric}_{stat}' for metric, stat in summary.columns]
    summary = summary.reset_index()
    summary.insert(len(keys), 'seeds', results.groupby(keys, sort=False).size().to_numpy())
    return summary
