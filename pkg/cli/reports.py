"""
Human and machine readable output of metric reports
"""
import csv
import io
import json
import logging
from pathlib import Path
from typing import Iterable, List, Mapping, Sequence, Tuple, Union

from metrics.batch import BatchResult, RankEntry
from metrics.core import ErrorReport

logger = logging.getLogger(__name__)

CSV_HEADER = ('k', 'loc', 'miss', 'false', 'switch')
CSV_COMMENT = ('# weighted per-time costs to the p-th power (after window normalization); '
               'switch(k) is the cost of the transition k -> k+1')


def report_summary(report: ErrorReport) -> dict:
    """Full-precision summary of a report (total plus summed components)"""
    summary = {
        'metric': report.metric,
        'total': report.total,
        'p': report.p,
        'normalized': report.normalized,
        'is_metric': report.is_metric,
        'decomposed': report.decomposed,
    }
    if report.decomposed:
        summary.update(report.components)
    if 'lp_residuals' in report.details:
        summary['lp_residuals'] = dict(report.details['lp_residuals'])
    return summary


def dumps_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + '\n'


def write_json(payload, path: Union[str, Path]):
    Path(path).write_text(dumps_json(payload), encoding='utf-8')
    logger.info(f"Wrote {path}")


def decomposition_csv(report: ErrorReport) -> str:
    """Per-time decomposition as CSV text"""
    buffer = io.StringIO()
    buffer.write(CSV_COMMENT + '\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for k in range(report.T):
        writer.writerow([k + 1] + [repr(float(a[k])) for a in (report.loc, report.miss, report.false, report.switch)])
    return buffer.getvalue()


def write_decomposition_csv(report: ErrorReport, path: Union[str, Path]):
    if not report.decomposed:
        logger.warning(f"Metric {report.metric} has no per-time decomposition; writing zeros to {path}")
    Path(path).write_text(decomposition_csv(report), encoding='utf-8')
    logger.info(f"Wrote per-time decomposition to {path}")


def read_decomposition_csv(path: Union[str, Path]) -> List[dict]:
    """Rows of a decomposition CSV as dicts of floats (k as int)"""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    rows = []
    for row in csv.DictReader(lines):
        rows.append({key: (int(value) if key == 'k' else float(value)) for key, value in row.items()})
    return rows


def format_table(rows: Sequence[Tuple[str, ErrorReport]], decimals: int = 2, title: str = '') -> str:
    """Table of totals and decomposition, one row per estimate"""
    header = f"{'':<6}{'Total':>10}{'Loc.':>10}{'Mis.':>10}{'Fal.':>10}{'Swi.':>10}"
    lines = [title] if title else []
    lines.append(header)
    for name, report in rows:
        cells = [report.total]
        if report.decomposed:
            comp = report.components
            cells += [comp['loc'], comp['miss'], comp['false'], comp['switch']]
            text = ''.join(f'{v:>10.{decimals}f}' for v in cells)
        else:
            text = f'{report.total:>10.{decimals}f}' + f"{'-':>10}" * 4
        lines.append(f'{name:<6}{text}')
    return '\n'.join(lines)


def format_ranking(ranking: Iterable[RankEntry], decimals: int = 2, title: str = '') -> str:
    lines = [title] if title else []
    for entry in ranking:
        lines.append(f'{entry.rank:>3}. {entry.name:<12}{entry.value:>12.{decimals}f}')
    return '\n'.join(lines)


def ranking_order(ranking: Sequence[RankEntry]) -> str:
    """Compact order such as 'E1-{E2,E3}-E4' (tied names in braces)"""
    groups: List[List[str]] = []
    last_rank = None
    for entry in ranking:
        if entry.rank == last_rank:
            groups[-1].append(entry.name)
        else:
            groups.append([entry.name])
            last_rank = entry.rank
    return '-'.join(g[0] if len(g) == 1 else '{' + ','.join(g) + '}' for g in groups)


def batch_summary(results: Mapping[str, BatchResult], ranking: Sequence[RankEntry]) -> dict:
    return {
        'metric': next(iter(results.values())).metric if results else None,
        'algorithms': {
            name: {'values': list(r.values), 'aggregate': r.aggregate, 'p_prime': r.p_prime}
            for name, r in results.items()
        },
        'ranking': [{'rank': e.rank, 'name': e.name, 'aggregate': e.value} for e in ranking],
        'order': ranking_order(ranking),
    }
