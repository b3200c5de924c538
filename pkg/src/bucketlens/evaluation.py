"""Scoring, metrics, report rendering and stateful alert diffing.

An alert counts as a true positive iff ground truth marks its bucket as
carrying business risk (exploitable, or publicly exposed sensitive data), so
sensitive-exposure alerts score as intended. Precision and the reduction rate
are kept as exact rationals on the report object and rendered to four decimal
places.

Alert state persists as a single JSON document with a schema-version field;
a sidecar ``.lock`` file enforces the single-writer contract for scans that
update state.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .defaults import evaluate_default
from .errors import StateCorruptionError, StateLockError, UnknownBucketError
from .fleetgen import GroundTruth
from .model import BucketConfig
from .policy import derive
from .unified import Alert, evaluate_unified

STATE_SCHEMA_VERSION = 1


@dataclass(frozen=True, slots=True)
class RulesetMetrics:
    total_alerts: int
    alerted_buckets: int
    tp: int
    fp: int
    precision: Fraction | None  # None when tp + fp == 0
    modeled_triage_minutes: float


@dataclass(frozen=True, slots=True)
class EvaluationReport:
    default: RulesetMetrics
    unified: RulesetMetrics
    reduction_rate: Fraction | None  # None when the default ruleset is silent


# ---------------------------------------------------------------------------
# Scanning
# ---------------------------------------------------------------------------

def scan_fleet(
    buckets: Sequence[BucketConfig],
    rules: str = "both",
    restrictive_keys: frozenset[str] | None = None,
    jobs: int = 1,
) -> list[Alert]:
    """Evaluate the chosen ruleset(s) over a fleet.

    Per-bucket evaluation is pure, so it may run on several threads; results
    are gathered and sorted, keeping output independent of parallelism.
    """
    if rules not in ("default", "unified", "both"):
        raise ValueError(f"rules must be default, unified or both, got {rules!r}")

    def scan_one(config: BucketConfig) -> list[Alert]:
        derived = derive(config, restrictive_keys)
        alerts: list[Alert] = []
        if rules in ("default", "both"):
            alerts.extend(evaluate_default(config, derived))
        if rules in ("unified", "both"):
            alert = evaluate_unified(config, derived, restrictive_keys)
            if alert is not None:
                alerts.append(alert)
        return alerts

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_bucket = list(pool.map(scan_one, buckets))
    else:
        per_bucket = [scan_one(config) for config in buckets]
    alerts = [alert for bucket_alerts in per_bucket for alert in bucket_alerts]
    alerts.sort(key=lambda a: (a.bucket_name, a.rule_id))
    return alerts


# ---------------------------------------------------------------------------
# Classification and metrics
# ---------------------------------------------------------------------------

def classify_alerts(
    alerts: Iterable[Alert], truth: Mapping[str, GroundTruth]
) -> tuple[int, int]:
    """Split alerts into (tp, fp) against business-risk ground truth."""
    tp = fp = 0
    for alert in alerts:
        if alert.bucket_name not in truth:
            raise UnknownBucketError(f"alert references unknown bucket {alert.bucket_name!r}")
        if truth[alert.bucket_name].business_risk:
            tp += 1
        else:
            fp += 1
    return tp, fp


def _ruleset_metrics(
    alerts: Sequence[Alert], truth: Mapping[str, GroundTruth], minutes_per_alert: float
) -> RulesetMetrics:
    tp, fp = classify_alerts(alerts, truth)
    total = len(alerts)
    return RulesetMetrics(
        total_alerts=total,
        alerted_buckets=len({a.bucket_name for a in alerts}),
        tp=tp,
        fp=fp,
        precision=Fraction(tp, tp + fp) if tp + fp else None,
        modeled_triage_minutes=total * minutes_per_alert,
    )


def compute_metrics(
    default_alerts: Sequence[Alert],
    unified_alerts: Sequence[Alert],
    truth: Mapping[str, GroundTruth],
    minutes_per_alert_default: float = 8.0,
    minutes_per_alert_unified: float = 1.0,
) -> EvaluationReport:
    """Score both rulesets against one truth set and fill every report field."""
    default = _ruleset_metrics(default_alerts, truth, minutes_per_alert_default)
    unified = _ruleset_metrics(unified_alerts, truth, minutes_per_alert_unified)
    reduction = (
        1 - Fraction(unified.total_alerts, default.total_alerts)
        if default.total_alerts
        else None
    )
    return EvaluationReport(default=default, unified=unified, reduction_rate=reduction)


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def _round4(value: Fraction | None) -> float | None:
    return None if value is None else round(float(value), 4)


def _fp_rate(metrics: RulesetMetrics) -> Fraction | None:
    return Fraction(metrics.fp, metrics.total_alerts) if metrics.total_alerts else None


def _metrics_dict(metrics: RulesetMetrics) -> dict:
    return {
        "total_alerts": metrics.total_alerts,
        "alerted_buckets": metrics.alerted_buckets,
        "true_positives": metrics.tp,
        "false_positives": metrics.fp,
        "false_positive_rate": _round4(_fp_rate(metrics)),
        "precision": _round4(metrics.precision),
        "modeled_triage_minutes": metrics.modeled_triage_minutes,
    }


def report_to_dict(report: EvaluationReport) -> dict:
    """Schema-stable JSON form of a report."""
    return {
        "schema_version": 1,
        "rulesets": {
            "default": _metrics_dict(report.default),
            "unified": _metrics_dict(report.unified),
        },
        "reduction_rate": _round4(report.reduction_rate),
    }


CSV_HEADER = (
    "ruleset,total_alerts,alerted_buckets,true_positives,false_positives,"
    "false_positive_rate,precision,modeled_triage_minutes"
)


def _fmt_rate(value: Fraction | None) -> str:
    return "" if value is None else f"{float(value):.4f}"


def _render_csv(report: EvaluationReport) -> str:
    lines = [CSV_HEADER]
    for name, m in (("default", report.default), ("unified", report.unified)):
        lines.append(
            f"{name},{m.total_alerts},{m.alerted_buckets},{m.tp},{m.fp},"
            f"{_fmt_rate(_fp_rate(m))},{_fmt_rate(m.precision)},{m.modeled_triage_minutes:g}"
        )
    return "\n".join(lines) + "\n"


def _fmt_pct(value: Fraction | None) -> str:
    return "n/a" if value is None else f"{float(value) * 100:.2f}%"


def _render_table(report: EvaluationReport) -> str:
    rows = [
        ("Metric", "Default Ruleset", "Unified Custom Rule"),
        ("Total Alerts", str(report.default.total_alerts), str(report.unified.total_alerts)),
        ("True Positives", str(report.default.tp), str(report.unified.tp)),
        ("False Positive Rate", _fmt_pct(_fp_rate(report.default)), _fmt_pct(_fp_rate(report.unified))),
        (
            "Precision",
            "n/a" if report.default.precision is None else f"{float(report.default.precision):.4f}",
            "n/a" if report.unified.precision is None else f"{float(report.unified.precision):.4f}",
        ),
        (
            "Investigation Time (modeled)",
            f"{report.default.modeled_triage_minutes:g} min",
            f"{report.unified.modeled_triage_minutes:g} min",
        ),
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * widths[i] for i in range(3)))
    if report.reduction_rate is None:
        lines.append("\nAlert reduction vs default: n/a")
    else:
        exact = report.reduction_rate
        lines.append(
            f"\nAlert reduction vs default: {float(exact):.4f} ({float(exact) * 100:.2f}% fewer alerts)"
        )
    return "\n".join(lines) + "\n"


def render_report(report: EvaluationReport, format: str = "table") -> str:
    """Render a report as ``table``, ``json`` or ``csv`` text."""
    if format == "table":
        return _render_table(report)
    if format == "json":
        return json.dumps(report_to_dict(report), indent=2) + "\n"
    if format == "csv":
        return _render_csv(report)
    raise ValueError(f"unknown report format {format!r}")


# ---------------------------------------------------------------------------
# Stateful alerting
# ---------------------------------------------------------------------------

def alert_fingerprint(alert: Alert) -> str:
    """Stable identity of a finding across scans of unchanged configurations."""
    conditions = ",".join(str(n) for n in sorted(alert.fired_conditions))
    payload = f"{alert.bucket_name}\n{alert.rule_id}\n{conditions}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def alert_to_dict(alert: Alert) -> dict:
    return {
        "bucket_name": alert.bucket_name,
        "rule_id": alert.rule_id,
        "severity": alert.severity.value,
        "fired_conditions": sorted(alert.fired_conditions),
        "explanation": alert.explanation,
        "fingerprint": alert_fingerprint(alert),
    }


@dataclass(frozen=True, slots=True)
class AlertState:
    """Fingerprint -> scan id of the scan that first produced it."""

    first_seen: Mapping[str, str]


@dataclass(frozen=True, slots=True)
class AlertDiff:
    new: tuple[str, ...]
    unchanged: tuple[str, ...]
    resolved: tuple[str, ...]
    state: AlertState


def empty_state() -> AlertState:
    return AlertState(first_seen={})


def diff_alerts(previous: AlertState, current: Sequence[Alert], scan_id: str) -> AlertDiff:
    """Partition current alerts against the previous state.

    Conservation: new + unchanged covers every current fingerprint and
    unchanged + resolved covers every previous one. The returned state holds
    exactly the current fingerprints, preserving first_seen for unchanged.
    """
    current_fps = {alert_fingerprint(alert) for alert in current}
    previous_fps = set(previous.first_seen)
    new = sorted(current_fps - previous_fps)
    unchanged = sorted(current_fps & previous_fps)
    resolved = sorted(previous_fps - current_fps)
    first_seen = {fp: scan_id for fp in new}
    first_seen.update({fp: previous.first_seen[fp] for fp in unchanged})
    return AlertDiff(
        new=tuple(new),
        unchanged=tuple(unchanged),
        resolved=tuple(resolved),
        state=AlertState(first_seen=first_seen),
    )


def load_state(path: str | Path) -> AlertState:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise StateCorruptionError(f"cannot read alert state {path}: {exc}") from None
    if not isinstance(raw, dict) or raw.get("schema_version") != STATE_SCHEMA_VERSION:
        raise StateCorruptionError(
            f"alert state {path} has missing or unsupported schema_version"
        )
    first_seen = raw.get("first_seen")
    if not isinstance(first_seen, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in first_seen.items()
    ):
        raise StateCorruptionError(f"alert state {path} has a malformed first_seen map")
    return AlertState(first_seen=first_seen)


def save_state(state: AlertState, path: str | Path) -> None:
    payload = {
        "schema_version": STATE_SCHEMA_VERSION,
        "first_seen": {fp: state.first_seen[fp] for fp in sorted(state.first_seen)},
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


@contextmanager
def state_lock(path: str | Path) -> Iterator[None]:
    """Advisory single-writer lock: a sidecar file created with O_EXCL."""
    lock_path = Path(str(path) + ".lock")
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StateLockError(
            f"alert state {path} is locked by another scan (remove {lock_path} if stale)"
        ) from None
    try:
        yield
    finally:
        os.close(fd)
        lock_path.unlink(missing_ok=True)
