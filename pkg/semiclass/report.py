"""
Convergence reports: per-hbar rows, verdicts, and CSV/JSON emission.

Reports are byte-stable: floats are written with ``repr``, JSON keys are sorted,
and nothing time-dependent is recorded unless timing is switched on.
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import CSV_HEADER
from .utils import atomic_write

logger = logging.getLogger(__name__)

THRESHOLD_NOTE = ("Thresholds are engineering choices: the limit theorems being exercised "
                  "state limits, not rates.")


@dataclass
class ReportRow:
    experiment: str
    hbar: Optional[float]
    value: float
    reference: Optional[float] = None
    defect: Optional[float] = None
    wall_ms: Optional[float] = None
    status: str = "ok"
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.reference is not None and self.defect is None:
            self.defect = abs(self.value - self.reference)

    @property
    def ok(self) -> bool:
        return self.status == "ok" and math.isfinite(self.value)

    @classmethod
    def degraded(cls, experiment: str, hbar: Optional[float], message: str) -> "ReportRow":
        return cls(experiment, hbar, math.nan, status=message)


@dataclass
class Verdict:
    name: str
    passed: bool
    value: Optional[float]
    threshold: Optional[float]
    detail: str = ""


@dataclass
class ConvergenceReport:
    experiment: str
    rows: List[ReportRow] = field(default_factory=list)
    verdicts: List[Verdict] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def degraded_rows(self) -> List[ReportRow]:
        return [r for r in self.rows if not r.ok]

    def add(self, verdict: Verdict) -> Verdict:
        self.verdicts.append(verdict)
        return verdict

    def sorted_rows(self) -> List[ReportRow]:
        """Rows by decreasing hbar; rows without hbar keep their order."""
        if any(r.hbar is None for r in self.rows):
            return list(self.rows)
        return sorted(self.rows, key=lambda r: -r.hbar)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [v.name for v in self.verdicts if not v.passed]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"{self.experiment}: {status}, {len(self.rows)} rows, {len(self.degraded_rows)} degraded{tail}"


# ---------------------------------------------------------------------------
# Verdict helpers
# ---------------------------------------------------------------------------

def trend_window(count: int, halvings: int) -> int:
    """Trend verdicts look at the last max(3, halvings - 2) rows."""
    return min(count, max(3, halvings - 2))


def is_nonincreasing(values: Sequence[float], slack: float = 0.0) -> bool:
    """Each value at most the previous one, up to ``slack`` relative to the largest."""
    scale = max((abs(v) for v in values), default=0.0)
    return all(b <= a + slack * scale for a, b in zip(values, values[1:]))


def final_relative_error(report: ConvergenceReport, threshold: float,
                         name: str = "final_relative_error") -> Verdict:
    rows = [r for r in report.sorted_rows() if r.ok and r.reference is not None]
    if not rows:
        return report.add(Verdict(name, False, None, threshold, "no valid rows"))
    last = rows[-1]
    if last.reference == 0:
        error = last.defect
    else:
        error = last.defect / abs(last.reference)
    return report.add(Verdict(name, error <= threshold, error, threshold, f"hbar={last.hbar!r}"))


def monotone_trend(report: ConvergenceReport, values: Sequence[Tuple[float, float]], halvings: int,
                   slack: float, name: str = "nonincreasing") -> Verdict:
    """``values`` are (hbar, value) pairs in schedule order."""
    finite = [(h, v) for h, v in values if math.isfinite(v)]
    if not finite:
        return report.add(Verdict(name, False, None, slack, "no valid rows"))
    window = finite[-trend_window(len(finite), halvings):]
    passed = is_nonincreasing([v for _, v in window], slack)
    return report.add(Verdict(name, passed, float(len(window)), slack,
                              f"last {len(window)} rows from hbar={window[0][0]!r}"))


def ratio_verdict(report: ConvergenceReport, name: str, numerator: float, denominator: float,
                  threshold: float, at_most: bool = True) -> Verdict:
    if not (math.isfinite(numerator) and math.isfinite(denominator)):
        return report.add(Verdict(name, False, None, threshold, "missing data"))
    if denominator == 0:
        ratio = 0.0 if numerator == 0 else math.inf
    else:
        ratio = numerator / denominator
    passed = ratio <= threshold if at_most else ratio >= threshold
    return report.add(Verdict(name, passed, ratio, threshold))


def bound_verdict(report: ConvergenceReport, name: str, value: float, threshold: float,
                  at_most: bool = True, detail: str = "") -> Verdict:
    if not math.isfinite(value):
        return report.add(Verdict(name, False, None, threshold, detail or "missing data"))
    passed = value <= threshold if at_most else value >= threshold
    return report.add(Verdict(name, passed, value, threshold, detail))


def empirical_rate(pairs: Sequence[Tuple[float, float]]) -> Optional[float]:
    """Least-squares slope of log(value) against log(hbar); reported, never asserted."""
    points = [(math.log(h), math.log(v)) for h, v in pairs if h and h > 0 and v > 0 and math.isfinite(v)]
    if len(points) < 2:
        return None
    x, y = np.array(points).T
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _cell(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [_jsonable(value.real), _jsonable(value.imag)]
    if isinstance(value, Path):
        return str(value)
    return value


def render_csv(report: ConvergenceReport, include_timing: bool = False) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for row in report.sorted_rows():
        writer.writerow([
            row.experiment,
            _cell(row.hbar),
            _cell(row.value),
            _cell(row.reference),
            _cell(row.defect),
            _cell(row.wall_ms) if include_timing else "",
        ])
    return buffer.getvalue()


def render_json(report: ConvergenceReport, include_timing: bool = False) -> str:
    rows = []
    for row in report.sorted_rows():
        record = {
            "experiment": row.experiment,
            "hbar": row.hbar,
            "value": row.value,
            "reference": row.reference,
            "defect": row.defect,
            "status": row.status,
            "extra": row.extra,
        }
        if include_timing:
            record["wall_ms"] = row.wall_ms
        rows.append(record)
    payload = {
        "experiment": report.experiment,
        "passed": report.passed,
        "threshold_note": THRESHOLD_NOTE,
        "config": report.config,
        "verdicts": [v.__dict__ for v in report.verdicts],
        "details": report.details,
        "rows": rows,
    }
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def emit_report(report: ConvergenceReport, out_dir: Union[str, Path], fmt: str = "csv+json",
                include_timing: bool = False) -> List[Path]:
    """
    Write ``<experiment>.csv`` and/or ``<experiment>.json`` under ``out_dir``.

    ``fmt`` is ``csv``, ``json`` or ``csv+json``. I/O failures raise ReportError
    naming the path.
    """
    out_dir = Path(out_dir)
    written = []
    parts = fmt.split('+')
    if "csv" in parts:
        written.append(atomic_write(out_dir / f"{report.experiment}.csv",
                                    render_csv(report, include_timing)))
    if "json" in parts:
        written.append(atomic_write(out_dir / f"{report.experiment}.json",
                                    render_json(report, include_timing)))
    for path in written:
        logger.info(f"Wrote {path}")
    return written
