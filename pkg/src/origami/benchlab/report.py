"""Long-format benchmark rows, per-group summaries and paired tests."""

from __future__ import annotations

from typing import Dict, Iterable, List, Sequence

import numpy as np
from scipy.stats import ttest_rel

DEFAULT_SEEDS = tuple(range(20))
LONG_COLUMNS = ("seed", "strategy", "metric", "value")


def long_rows(records: Iterable, metrics: Sequence[str], label: str = "strategy") -> List[dict]:
    """One row per record and metric; ``None`` metric values are skipped."""
    rows = []
    for rec in records:
        for metric in metrics:
            value = getattr(rec, metric)
            if value is not None:
                rows.append({"seed": int(rec.seed), "strategy": getattr(rec, label), "metric": metric,
                             "value": float(value)})
    return rows


def _values(rows: List[dict], strategy: str, metric: str) -> Dict[int, float]:
    return {r["seed"]: r["value"] for r in rows if r["strategy"] == strategy and r["metric"] == metric}


def paired_test(better: Dict[int, float], worse: Dict[int, float], alternative: str = "less") -> dict:
    """One-sided paired t-test over the seeds both groups share.

    ``alternative="less"`` tests whether ``better`` is smaller on average.
    Identical samples give p = 1 rather than an undefined statistic.
    """
    seeds = sorted(set(better) & set(worse))
    a = np.array([better[s] for s in seeds])
    b = np.array([worse[s] for s in seeds])
    diff = a - b
    out = {"seeds": len(seeds), "mean_difference": float(diff.mean()) if seeds else None,
           "alternative": alternative}
    if len(seeds) < 2 or np.all(diff == diff[0]):
        if len(seeds) and diff[0] != 0 and np.all(diff == diff[0]):
            wins = diff[0] < 0 if alternative == "less" else diff[0] > 0
            out.update(statistic=None, p_value=0.0 if wins else 1.0)
        else:
            out.update(statistic=None, p_value=1.0)
        return out
    res = ttest_rel(a, b, alternative=alternative)
    out.update(statistic=float(res.statistic), p_value=float(res.pvalue))
    return out


def summarize(rows: List[dict]) -> Dict[str, Dict[str, dict]]:
    """Mean, standard error and count per strategy and metric."""
    out: Dict[str, Dict[str, dict]] = {}
    for strategy in sorted({r["strategy"] for r in rows}):
        out[strategy] = {}
        for metric in sorted({r["metric"] for r in rows if r["strategy"] == strategy}):
            v = np.array(list(_values(rows, strategy, metric).values()))
            se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else None
            out[strategy][metric] = {"mean": float(v.mean()), "standard_error": se, "count": int(v.size)}
    return out


def comparisons(rows: List[dict], pairs: Sequence[tuple]) -> List[dict]:
    """Paired tests for ``(better, worse, metric, alternative)`` tuples."""
    out = []
    for better, worse, metric, alternative in pairs:
        test = paired_test(_values(rows, better, metric), _values(rows, worse, metric), alternative)
        out.append({"better": better, "worse": worse, "metric": metric, **test})
    return out
