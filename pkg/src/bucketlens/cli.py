"""Command-line entry point.

Subcommands: generate, import, scan, evaluate, explain, rules. Machine output
goes to stdout, diagnostics to stderr. Exit codes: 0 success, 1 findings
present (``scan --fail-on-findings``), 2 usage error, 3 input/schema/state
error. All bucket-keyed output is sorted by bucket name, so bytes do not
depend on ``--jobs``.

The environment variable ``BUCKETLENS_RESTRICTIVE_KEYS`` may point at a JSON
file (array of strings) overriding the built-in restrictive condition-key
set.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import evaluation, fleetgen
from .defaults import default_catalog
from .dsl import bind_record, eval_rule, parse_rule
from .errors import BucketlensError, LexError, ParseError, SchemaError, UnknownBucketError
from .evaluation import (
    alert_to_dict,
    compute_metrics,
    diff_alerts,
    render_report,
    report_to_dict,
    scan_fleet,
)
from .fleetgen import ADVERSARIAL_MIX, PAPER_MIX, MixSpec, generate_fleet, load_mix_file
from .model import import_aws_artifacts, load_fleet, serialize_snapshot_line
from .policy import derive, load_restrictive_keys
from .unified import (
    UNIFIED_RULE_ID,
    UNIFIED_RULE_TITLE,
    Alert,
    condition_verdicts,
    evaluate_unified,
)

RESTRICTIVE_KEYS_ENV = "BUCKETLENS_RESTRICTIVE_KEYS"

_CONDITION_SUMMARIES = {
    1: "public ACL grants (AuthenticatedUsers any permission; AllUsers READ)",
    2: "public policy status on a public-facing bucket",
    3: "public-facing + RestrictPublicBuckets off + unrestricted wildcard allow of a risky action",
    4: "any unrestricted wildcard allow statement while RestrictPublicBuckets is off",
    5: "public-facing bucket tagged as holding sensitive data",
}


def _restrictive_keys() -> frozenset[str] | None:
    override = os.environ.get(RESTRICTIVE_KEYS_ENV)
    if not override:
        return None
    return load_restrictive_keys(override)


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_generate(args: argparse.Namespace) -> int:
    if args.mix == "paper":
        proportions = dict(PAPER_MIX)
    elif args.mix == "adversarial":
        proportions = dict(ADVERSARIAL_MIX)
    else:
        proportions = load_mix_file(args.mix)
    mix = MixSpec(proportions=proportions, total=args.total, seed=args.seed)
    pairs = sorted(generate_fleet(mix), key=lambda pair: pair[0].name)

    out = Path(args.out)
    truth_path = (
        out.with_name(out.name[: -len(".jsonl")] + ".truth.jsonl")
        if out.name.endswith(".jsonl")
        else Path(str(out) + ".truth.jsonl")
    )
    with open(out, "w", encoding="utf-8") as handle:
        for config, _ in pairs:
            handle.write(serialize_snapshot_line(config) + "\n")
    fleetgen.write_truth(pairs, truth_path)
    risky = sum(1 for _, truth in pairs if truth.business_risk)
    print(
        f"wrote {len(pairs)} buckets to {out} ({risky} with business risk); truth in {truth_path}",
        file=sys.stderr,
    )
    return 0


def cmd_import(args: argparse.Namespace) -> int:
    configs = [import_aws_artifacts(directory) for directory in args.directories]
    names = [c.name for c in configs]
    duplicates = {n for n in names if names.count(n) > 1}
    if duplicates:
        raise SchemaError(f"duplicate bucket directories: {', '.join(sorted(duplicates))}")
    lines = [serialize_snapshot_line(c) for c in sorted(configs, key=lambda c: c.name)]
    if args.out:
        Path(args.out).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        print(f"imported {len(lines)} bucket(s) to {args.out}", file=sys.stderr)
    else:
        for line in lines:
            _emit(line)
    return 0


def _default_scan_id(path: str | Path) -> str:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"scan-{digest[:12]}"


def cmd_scan(args: argparse.Namespace) -> int:
    keys = _restrictive_keys()
    buckets = load_fleet(args.input)
    alerts = scan_fleet(buckets, rules=args.rules, restrictive_keys=keys, jobs=args.jobs)
    scan_id = args.scan_id or _default_scan_id(args.input)

    diff_doc = None
    if args.state:
        state_path = Path(args.state)
        with evaluation.state_lock(state_path):
            previous = (
                evaluation.load_state(state_path)
                if state_path.exists()
                else evaluation.empty_state()
            )
            diff = diff_alerts(previous, alerts, scan_id)
            evaluation.save_state(diff.state, state_path)
        diff_doc = {
            "new": list(diff.new),
            "unchanged": list(diff.unchanged),
            "resolved": list(diff.resolved),
        }

    document = {
        "schema_version": 1,
        "rules": args.rules,
        "scan_id": scan_id,
        "total_alerts": len(alerts),
        "alerts": [alert_to_dict(a) for a in alerts],
        "diff": diff_doc,
    }
    _emit(json.dumps(document, indent=2))
    if args.fail_on_findings and alerts:
        return 1
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    keys = _restrictive_keys()
    buckets = load_fleet(args.input)
    truth = fleetgen.load_truth(args.truth)
    default_alerts = scan_fleet(buckets, rules="default", restrictive_keys=keys)
    unified_alerts = scan_fleet(buckets, rules="unified", restrictive_keys=keys)
    report = compute_metrics(
        default_alerts,
        unified_alerts,
        truth,
        minutes_per_alert_default=args.minutes_default,
        minutes_per_alert_unified=args.minutes_unified,
    )
    if args.report:
        Path(args.report).write_text(
            json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8"
        )
    _emit(render_report(report, args.format))
    return 0


def cmd_explain(args: argparse.Namespace) -> int:
    keys = _restrictive_keys()
    buckets = load_fleet(args.input)
    by_name = {config.name: config for config in buckets}
    if args.bucket not in by_name:
        raise UnknownBucketError(f"bucket {args.bucket!r} not found in {args.input}")
    config = by_name[args.bucket]
    derived = derive(config, keys)
    verdicts = condition_verdicts(config, derived, keys)
    unified_alert = evaluate_unified(config, derived, keys)
    default_alerts = scan_fleet([config], rules="default", restrictive_keys=keys)

    bpa = config.public_access_block
    lines = [
        f"bucket: {config.name} (region {config.region})",
        "derived properties:",
        f"  policy_status_public: {str(derived.policy_status_public).lower()}",
        f"  exposure: {derived.exposure.value}",
        f"  sensitive_data: {str(derived.sensitive_data).lower()}",
        "block public access: "
        f"block_public_acls={str(bpa.block_public_acls).lower()} "
        f"ignore_public_acls={str(bpa.ignore_public_acls).lower()} "
        f"block_public_policy={str(bpa.block_public_policy).lower()} "
        f"restrict_public_buckets={str(bpa.restrict_public_buckets).lower()}",
    ]
    fired = sorted(v.number for v in verdicts if v.fired)
    if fired:
        lines.append("unified conditions fired: " + ", ".join(str(n) for n in fired))
    else:
        lines.append("unified conditions: no conditions fired")
    for verdict in verdicts:
        marker = "YES" if verdict.fired else "no"
        lines.append(f"  C{verdict.number} [{marker}] {verdict.detail}")
    if unified_alert is None:
        lines.append("unified alert: none")
    else:
        lines.append(
            f"unified alert: {unified_alert.rule_id} [{unified_alert.severity.value}] "
            f"conditions {sorted(unified_alert.fired_conditions)}"
        )
    lines.append(f"default alerts ({len(default_alerts)}):")
    for alert in default_alerts:
        lines.append(f"  {alert.rule_id} [{alert.severity.value}] {alert.explanation}")
    _emit("\n".join(lines))
    return 0


def cmd_rules_list(args: argparse.Namespace) -> int:
    if args.set == "default":
        lines = [f"{'ID':35} {'SEVERITY':8} TITLE", f"{'-' * 35} {'-' * 8} {'-' * 40}"]
        for rule in default_catalog():
            lines.append(f"{rule.id:35} {rule.severity.value:8} {rule.title}")
        _emit("\n".join(lines))
    else:
        lines = [
            f"{UNIFIED_RULE_ID} [High] {UNIFIED_RULE_TITLE}",
            "fires when any condition holds; one alert per bucket:",
        ]
        for number in sorted(_CONDITION_SUMMARIES):
            lines.append(f"  C{number}: {_CONDITION_SUMMARIES[number]}")
        _emit("\n".join(lines))
    return 0


def cmd_rules_run(args: argparse.Namespace) -> int:
    keys = _restrictive_keys()
    source = Path(args.file).read_text(encoding="utf-8")
    try:
        ast = parse_rule(source)
    except (LexError, ParseError, SchemaError) as exc:
        offset = getattr(exc, "offset", None)
        location = f"{args.file}:{offset if offset is not None else '?'}"
        print(f"{location}: {exc}", file=sys.stderr)
        return 3
    buckets = load_fleet(args.input)
    alerts: list[Alert] = []
    for config in sorted(buckets, key=lambda c: c.name):
        derived = derive(config, keys)
        if eval_rule(ast, bind_record(config, derived, keys)):
            alerts.append(
                Alert(
                    bucket_name=config.name,
                    rule_id=ast.name,
                    severity=ast.severity,
                    fired_conditions=frozenset(),
                    explanation=f"rule {ast.name!r} matched",
                )
            )
    document = {
        "schema_version": 1,
        "rule": ast.name,
        "severity": ast.severity.value,
        "total_alerts": len(alerts),
        "alerts": [alert_to_dict(a) for a in alerts],
    }
    _emit(json.dumps(document, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bucketlens",
        description="Evaluate S3 bucket configurations against the default "
        "rule catalog and the unified public-access rule.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a labeled synthetic fleet")
    p.add_argument("--total", type=int, required=True, help="number of buckets to generate")
    p.add_argument(
        "--mix",
        default="paper",
        help="scenario mix: 'paper', 'adversarial', or a path to a JSON mix file",
    )
    p.add_argument("--seed", type=int, default=42, help="RNG seed (64-bit integer)")
    p.add_argument("--out", required=True, help="output fleet snapshot (JSONL)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("import", help="import AWS-CLI-shaped per-bucket artifact directories")
    p.add_argument(
        "directories",
        nargs="+",
        help="bucket directories (the directory name is the bucket name)",
    )
    p.add_argument("--out", help="output fleet snapshot; stdout when omitted")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("scan", help="scan a fleet and emit alerts as JSON")
    p.add_argument("--input", required=True, help="fleet snapshot (JSONL)")
    p.add_argument(
        "--rules",
        choices=("unified", "default", "both"),
        default="both",
        help="which ruleset(s) to evaluate",
    )
    p.add_argument("--state", help="alert-state file for stateful new/unchanged/resolved diffing")
    p.add_argument("--scan-id", help="scan identifier recorded as first_seen for new alerts")
    p.add_argument(
        "--fail-on-findings",
        action="store_true",
        help="exit with code 1 when any alert fires",
    )
    p.add_argument("--jobs", type=int, default=1, help="concurrent per-bucket evaluation threads")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("evaluate", help="score both rulesets against ground truth")
    p.add_argument("--input", required=True, help="fleet snapshot (JSONL)")
    p.add_argument("--truth", required=True, help="ground-truth JSONL")
    p.add_argument("--report", help="write the JSON report to this path")
    p.add_argument(
        "--format",
        choices=("table", "json", "csv"),
        default="table",
        help="stdout rendering",
    )
    p.add_argument(
        "--minutes-default",
        type=float,
        default=8.0,
        dest="minutes_default",
        help="modeled triage minutes per default-ruleset alert",
    )
    p.add_argument(
        "--minutes-unified",
        type=float,
        default=1.0,
        dest="minutes_unified",
        help="modeled triage minutes per unified-rule alert",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="explain every unified condition for one bucket")
    p.add_argument("bucket", help="bucket name")
    p.add_argument("--input", required=True, help="fleet snapshot (JSONL)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("rules", help="inspect rulesets or run a custom DSL rule")
    rules_sub = p.add_subparsers(dest="rules_command", required=True)
    lp = rules_sub.add_parser("list", help="print a ruleset catalog")
    lp.add_argument("--set", choices=("default", "unified"), required=True)
    lp.set_defaults(func=cmd_rules_list)
    rp = rules_sub.add_parser("run", help="evaluate a .rule file over a fleet")
    rp.add_argument("--file", required=True, help="rule source file")
    rp.add_argument("--input", required=True, help="fleet snapshot (JSONL)")
    rp.set_defaults(func=cmd_rules_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BucketlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
