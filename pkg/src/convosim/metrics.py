"""Dialogue and recommendation metrics computed from transcripts.

DT counts every utterance; RT counts recommendation lists shown. A success
is a shown item the look-ahead rates at or above the user's average.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .errors import ValidationError
from .simulator import State, Transcript, validate_transcript

AP_DENOMINATORS = ("shown_hits", "lookahead_positives")

AGGREGATE_FIELDS = ("DT", "RT", "successes", "DSR", "RSR", "AP_k_DT", "AP_k_RT")


def compute_ap_at_k(hits: Sequence[bool], k: int, n_relevant: int | None = None) -> float:
    """Average precision over the top ``k`` ranks of a hit vector.

    By default the denominator is the number of hits among the shown items.
    Pass ``n_relevant`` to divide by ``min(k, n_relevant)`` instead.
    """
    if k <= 0:
        raise ValidationError(f"k must be positive, got {k}")
    hits = list(hits)[:k]
    found = 0
    total = 0.0
    for rank, hit in enumerate(hits, start=1):
        if hit:
            found += 1
            total += found / rank
    denom = found if n_relevant is None else min(k, n_relevant)
    if found == 0 or denom == 0:
        return 0.0
    return total / denom


@dataclass
class UserMetrics:
    DT: int
    RT: int
    successes: int
    DSR: float
    RSR: float
    AP_k_values: list[float] = field(default_factory=list)
    AP_k_DT: float = 0.0
    AP_k_RT: float = 0.0

    @property
    def zero_rt(self) -> bool:
        return self.RT == 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricsReport:
    per_user: dict[str, UserMetrics]
    aggregate: dict[str, float]
    zero_rt_users: list[str]

    def to_dict(self) -> dict:
        return {
            "per_user": {u: self.per_user[u].to_dict() for u in sorted(self.per_user)},
            "aggregate": dict(self.aggregate),
            "zero_rt_users": list(self.zero_rt_users),
        }


def score_transcript(t: Transcript, k: int, ap_denominator: str = "shown_hits") -> UserMetrics:
    if ap_denominator not in AP_DENOMINATORS:
        raise ValidationError(f"ap_denominator must be one of {AP_DENOMINATORS}")
    validate_transcript(t)
    dt = len(t.utterances)
    ap_values: list[float] = []
    successes = 0
    for ev in t.recommendation_events():
        hits = [bool(h) for h in ev.payload["hits"]]
        successes += sum(hits)
        n_rel = ev.payload.get("lookahead_positives") if ap_denominator == "lookahead_positives" else None
        if ap_denominator == "lookahead_positives" and n_rel is None:
            raise ValidationError(f"transcript {t.user_id}: rec event lacks lookahead_positives")
        ap_values.append(compute_ap_at_k(hits, k, n_rel))
    rt = len(ap_values)
    ap_sum = sum(ap_values)
    return UserMetrics(
        DT=dt,
        RT=rt,
        successes=successes,
        DSR=successes / dt,
        RSR=successes / rt if rt else 0.0,
        AP_k_values=ap_values,
        AP_k_DT=ap_sum / dt,
        AP_k_RT=ap_sum / rt if rt else 0.0,
    )


def aggregate(
    per_user: dict[str, UserMetrics] | Iterable[tuple[str, UserMetrics]] | Sequence[UserMetrics],
) -> MetricsReport:
    """Unweighted mean of every scalar metric over users.

    A bare list of ``UserMetrics`` is keyed by position.
    """
    if not isinstance(per_user, dict):
        per_user = list(per_user)
        if per_user and isinstance(per_user[0], UserMetrics):
            per_user = {str(n): m for n, m in enumerate(per_user)}
    per_user = dict(per_user)
    if not per_user:
        raise ValidationError("cannot aggregate an empty set of users")
    users = sorted(per_user)
    n = len(users)
    agg = {f: sum(getattr(per_user[u], f) for u in users) / n for f in AGGREGATE_FIELDS}
    return MetricsReport(per_user, agg, [u for u in users if per_user[u].zero_rt])


def score_transcripts(
    transcripts: Iterable[Transcript], k: int, ap_denominator: str = "shown_hits"
) -> MetricsReport:
    return aggregate((t.user_id, score_transcript(t, k, ap_denominator)) for t in transcripts)
