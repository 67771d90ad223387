"""
Fixed-width console tables for evaluation reports, sparsity breakdowns
and ablation summaries.
"""
import pandas as pd

from interactions.services.types import DOMAINS


def _render(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False, float_format=lambda value: f'{value:.2f}')


def report_table(report) -> str:
    """One row per domain: HR@K, NDCG@K and the number of evaluated users."""
    k = report.k
    frame = pd.DataFrame([
        {'domain': m.domain.value, f'HR@{k}': m.hr, f'NDCG@{k}': m.ndcg, 'users': m.user_count}
        for m in report.domains.values()
    ])
    return _render(frame)


def sparsity_table(cells) -> str:
    if not cells:
        return '(no evaluated users)'
    return _render(pd.DataFrame([cell.to_dict() for cell in cells]))


def ablation_table(summary: pd.DataFrame, k: int = 10) -> str:
    """
    `summary` has one row per variant (and grid point) with columns
    hr_<D>_mean, hr_<D>_std, ndcg_<D>_mean, ndcg_<D>_std. Cells are
    rendered as "mean ± std".
    """
    rows = []
    for _, row in summary.iterrows():
        rendered = {column: row[column] for column in summary.columns if not column.startswith(('hr_', 'ndcg_'))}
        for domain in DOMAINS:
            for metric, label in (('hr', f'HR@{k}'), ('ndcg', f'NDCG@{k}')):
                mean, std = row[f'{metric}_{domain.value}_mean'], row[f'{metric}_{domain.value}_std']
                rendered[f'{domain.value} {label}'] = f'{mean:.2f} ± {std:.2f}'
        rows.append(rendered)
    return pd.DataFrame(rows).to_string(index=False)
