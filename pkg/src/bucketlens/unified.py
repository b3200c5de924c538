"""The unified rule: S3 Public Access Validation and Data Exposure.

One context-aware rule replaces the whole default catalog. Five numbered
conditions are evaluated per bucket and at most one High-severity alert is
emitted, recording which conditions fired:

1. public ACL grants (AuthenticatedUsers with any permission, AllUsers with
   READ);
2. public policy on a public-facing bucket;
3. public-facing bucket, RestrictPublicBuckets disabled, and a wildcard
   Allow statement over a risky action without a restrictive condition;
4. any wildcard Allow statement without a restrictive condition while
   RestrictPublicBuckets is disabled;
5. public-facing bucket tagged as holding sensitive data.

The same logic ships as a DSL rule (``unified_dsl_source``); the built-in
evaluation and the parsed rule must agree on every bucket.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import BucketConfig, Effect, Permission, Severity
from .policy import DerivedProperties, Exposure, has_restrictive_condition, has_wildcard_principal

UNIFIED_RULE_ID = "UNIFIED-S3-PUBLIC-ACCESS"
UNIFIED_RULE_TITLE = "S3 Public Access Validation and Data Exposure"

#: Substring markers for risky actions (matched LIKE-style: contained in the
#: action string). Version/ACL variants already contain their base action.
RISKY_ACTION_MARKERS: tuple[str, ...] = (
    "s3:GetObject",
    "s3:GetObjectVersion",
    "s3:ListBucket",
    "s3:ListBucketVersions",
    "s3:PutObject",
    "s3:PutObjectAcl",
    "s3:DeleteObject",
    "s3:DeleteObjectVersion",
    "s3:GetBucketAcl",
    "s3:GetObjectAcl",
    "s3:PutBucketAcl",
)


@dataclass(frozen=True, slots=True)
class Alert:
    """One finding emitted by a ruleset for one bucket."""

    bucket_name: str
    rule_id: str
    severity: Severity
    fired_conditions: frozenset[int]
    explanation: str


@dataclass(frozen=True, slots=True)
class ConditionVerdict:
    number: int
    fired: bool
    detail: str


def _grant_matches_c1(uri: str, permission: Permission) -> bool:
    # Three disjuncts, kept exactly as the rule text has them: the first
    # matches AuthenticatedUsers with any permission, which makes the third
    # redundant; it stays for built-in/DSL equivalence.
    if "global/AuthenticatedUsers" in uri:
        return True
    if "global/AllUsers" in uri and permission is Permission.READ:
        return True
    if "groups/global/AuthenticatedUsers" in uri and permission is Permission.READ:
        return True
    return False


def condition_verdicts(
    config: BucketConfig,
    derived: DerivedProperties,
    restrictive_keys: frozenset[str] | None = None,
) -> list[ConditionVerdict]:
    """Evaluate all five conditions with human-readable evidence."""
    verdicts: list[ConditionVerdict] = []
    bpa = config.public_access_block
    public_facing = derived.exposure is Exposure.PUBLIC_FACING

    c1_grants = [g for g in config.acl_grants if _grant_matches_c1(g.grantee_uri, g.permission)]
    if c1_grants:
        c1_detail = "public ACL grant(s): " + "; ".join(
            f"{g.grantee_uri} ({g.permission.value})" for g in c1_grants
        )
    else:
        c1_detail = "no qualifying ACL grant"
    verdicts.append(ConditionVerdict(1, bool(c1_grants), c1_detail))

    verdicts.append(
        ConditionVerdict(
            2,
            derived.policy_status_public and public_facing,
            f"policy_status_public={str(derived.policy_status_public).lower()}, "
            f"exposure={derived.exposure.value}",
        )
    )

    def _sid(stmt) -> str:
        return stmt.sid or "<no sid>"

    risky_stmts = []
    for stmt in config.policy or ():
        if stmt.effect is not Effect.ALLOW or not has_wildcard_principal(stmt):
            continue
        if has_restrictive_condition(stmt, restrictive_keys):
            continue
        matched = sorted(
            {m for m in RISKY_ACTION_MARKERS for action in stmt.actions if m in action}
        )
        if matched:
            risky_stmts.append((stmt, matched))
    c3 = public_facing and not bpa.restrict_public_buckets and bool(risky_stmts)
    if c3:
        detail = "risky wildcard statement(s): " + "; ".join(
            f"{_sid(stmt)} matches {', '.join(matched)}" for stmt, matched in risky_stmts
        )
    elif not public_facing:
        detail = "bucket is not public-facing"
    elif bpa.restrict_public_buckets:
        detail = "RestrictPublicBuckets is enabled"
    else:
        detail = "no unrestricted wildcard Allow statement over a risky action"
    verdicts.append(ConditionVerdict(3, c3, detail))

    open_stmts = [
        stmt
        for stmt in config.policy or ()
        if stmt.effect is Effect.ALLOW
        and has_wildcard_principal(stmt)
        and not has_restrictive_condition(stmt, restrictive_keys)
    ]
    c4 = bool(open_stmts) and not bpa.restrict_public_buckets
    if c4:
        detail = (
            "unrestricted wildcard Allow statement(s) "
            + ", ".join(_sid(s) for s in open_stmts)
            + " while RestrictPublicBuckets is disabled"
        )
    elif not open_stmts:
        detail = "no unrestricted wildcard Allow statement"
    else:
        detail = "RestrictPublicBuckets is enabled"
    verdicts.append(ConditionVerdict(4, c4, detail))

    c5 = public_facing and derived.sensitive_data
    verdicts.append(
        ConditionVerdict(
            5,
            c5,
            f"exposure={derived.exposure.value}, "
            f"sensitive_data={str(derived.sensitive_data).lower()}",
        )
    )
    return verdicts


def evaluate_unified(
    config: BucketConfig,
    derived: DerivedProperties,
    restrictive_keys: frozenset[str] | None = None,
) -> Alert | None:
    """Emit at most one High alert per bucket, listing every fired condition."""
    verdicts = condition_verdicts(config, derived, restrictive_keys)
    fired = [v for v in verdicts if v.fired]
    if not fired:
        return None
    explanation = "; ".join(f"C{v.number}: {v.detail}" for v in fired)
    return Alert(
        bucket_name=config.name,
        rule_id=UNIFIED_RULE_ID,
        severity=Severity.HIGH,
        fired_conditions=frozenset(v.number for v in fired),
        explanation=explanation,
    )


_UNIFIED_DSL = """\
-- S3 Public Access Validation and Data Exposure
-- Consolidates the ACL, policy, BPA and sensitivity signals of the default
-- catalog into a single context-aware alert.
RULE 'S3 Public Access Validation and Data Exposure' SEVERITY High WHEN
    -- Condition 1: public ACL grants
    EXISTS(AclGrants WHERE
        GranteeURI LIKE '%global/AuthenticatedUsers%'
        OR (GranteeURI LIKE '%global/AllUsers%' AND Permission = 'READ')
        OR (GranteeURI LIKE '%groups/global/AuthenticatedUsers%' AND Permission LIKE 'READ'))

    -- Condition 2: public policy on a public-facing bucket
    OR (PolicyStatusPublic = TRUE AND Exposure = 'public_facing')

    -- Condition 3: public-facing, RestrictPublicBuckets disabled, risky
    -- actions allowed to a wildcard principal without restrictions
    OR (Exposure = 'public_facing'
        AND RestrictPublicBuckets = FALSE
        AND EXISTS(PolicyStatements WHERE
            Effect = 'Allow'
            AND (Action LIKE '%s3:GetObject%'
                 OR Action LIKE '%s3:GetObjectVersion%'
                 OR Action LIKE '%s3:ListBucket%'
                 OR Action LIKE '%s3:ListBucketVersions%'
                 OR Action LIKE '%s3:PutObject%'
                 OR Action LIKE '%s3:PutObjectAcl%'
                 OR Action LIKE '%s3:DeleteObject%'
                 OR Action LIKE '%s3:DeleteObjectVersion%'
                 OR Action LIKE '%s3:GetBucketAcl%'
                 OR Action LIKE '%s3:GetObjectAcl%'
                 OR Action LIKE '%s3:PutBucketAcl%')
            AND Principal_AWS LIKE '%*%'
            AND RestrictedAccessCondition IS NULL))

    -- Condition 4: any unrestricted public allow policy while
    -- RestrictPublicBuckets is disabled
    OR (EXISTS(PolicyStatements WHERE
            Principal_AWS LIKE '%*%'
            AND Effect = 'Allow'
            AND RestrictedAccessCondition IS NULL)
        AND RestrictPublicBuckets = FALSE)

    -- Condition 5: public-facing bucket with sensitive data
    OR (Exposure = 'public_facing' AND SensitiveData = TRUE)
"""


def unified_dsl_source() -> str:
    """The unified rule as DSL text; identical to ``rules/unified.rule``."""
    return _UNIFIED_DSL
