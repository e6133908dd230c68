"""Conversation state machine driving one simulated user against a recommender.

The simulated user's reactions come from its held-out look-ahead ratings.
Every utterance from either side is one :class:`DialogueEvent`. A dialogue
ends when the user breaks off, the recommender runs dry, the look-ahead is
used up, or the turn cap is reached.
"""

from __future__ import annotations

import enum
import json
import zlib
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .dataset import ItemCatalog, SimulatedUser, normalize
from .errors import PoolExhausted, ValidationError
from .profile import (
    UserProfile,
    build_user_profile,
    classify_features,
    update_profile_features,
    update_profile_items,
)
from .recommender import (
    DEFAULT_E,
    DEFAULT_ELICITATION_POOL,
    DEFAULT_K,
    RecList,
    Recommender,
    explain,
)


class State(str, enum.Enum):
    INIT = "init"  # 0, implicit: never emitted
    RECS = "recs"  # 1
    ELICIT = "elicit"  # 2
    PROVIDE_PREF = "provide_pref"  # 3, implicit: resolves to 6/7/8
    BREAK = "break"  # 4
    COMPLEX_PREF = "complex_pref"  # 6
    POS_PREF = "pos_pref"  # 7
    NEG_PREF = "neg_pref"  # 8
    REJECTED = "reject"  # 9
    NO_REACTION = "no_reaction"  # 10
    ACCEPTED = "accept"  # 11
    EXPLORE = "explore"
    EXPLAIN = "explain"
    CORRECT_POS = "correct_pos"  # 16
    CORRECT_POS_NEG = "correct_pos_neg"  # 17
    ANSWER = "answer"
    TRUNCATED = "truncated"

    @property
    def code(self) -> int | None:
        return _STATE_CODES.get(self)


_STATE_CODES = {
    State.INIT: 0, State.RECS: 1, State.ELICIT: 2, State.PROVIDE_PREF: 3, State.BREAK: 4,
    State.COMPLEX_PREF: 6, State.POS_PREF: 7, State.NEG_PREF: 8, State.REJECTED: 9,
    State.NO_REACTION: 10, State.ACCEPTED: 11, State.CORRECT_POS: 16, State.CORRECT_POS_NEG: 17,
}

# Top-level actions chosen at state 0, in weight order.
ACTIONS = ("break", "generate_recs", "provide_pref", "pref_elicitation")

# What may directly follow each emitted state.  "Opening" states are the
# first utterance of each state-0 action; a leaf returns to state 0.
OPENING = frozenset({State.RECS, State.ELICIT, State.POS_PREF, State.NEG_PREF,
                     State.COMPLEX_PREF, State.BREAK})
_RETURN = OPENING | {State.TRUNCATED}
LEGAL_NEXT: dict[State, frozenset[State]] = {
    State.INIT: OPENING,
    State.RECS: frozenset({State.ACCEPTED, State.REJECTED, State.NO_REACTION}),
    State.REJECTED: frozenset({State.EXPLORE, State.EXPLAIN}) | _RETURN,
    State.EXPLORE: frozenset({State.CORRECT_POS, State.CORRECT_POS_NEG}) | _RETURN,
    State.EXPLAIN: frozenset({State.CORRECT_POS, State.CORRECT_POS_NEG}) | _RETURN,
    State.ELICIT: frozenset({State.ANSWER}),
    State.ACCEPTED: _RETURN,
    State.NO_REACTION: _RETURN,
    State.ANSWER: _RETURN,
    State.POS_PREF: _RETURN,
    State.NEG_PREF: _RETURN,
    State.COMPLEX_PREF: _RETURN,
    State.CORRECT_POS: _RETURN,
    State.CORRECT_POS_NEG: _RETURN,
    State.BREAK: frozenset(),
    State.TRUNCATED: frozenset(),
}
TERMINAL = frozenset({State.BREAK, State.TRUNCATED})


@dataclass(frozen=True)
class StateWeights:
    """Probabilities of the four state-0 actions; must sum to 1."""

    w_break: float = 0.1
    w_recs: float = 0.5
    w_pref: float = 0.2
    w_elic: float = 0.2

    def __post_init__(self) -> None:
        ws = self.as_tuple()
        if any(w < 0 or not np.isfinite(w) for w in ws):
            raise ValidationError(f"state weights must be finite and >= 0, got {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ValidationError(f"state weights must sum to 1, got {sum(ws)}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w_break, self.w_recs, self.w_pref, self.w_elic)

    def to_dict(self) -> dict[str, float]:
        return {"break": self.w_break, "recs": self.w_recs, "pref": self.w_pref, "elicit": self.w_elic}

    @classmethod
    def from_dict(cls, d: dict[str, float]) -> "StateWeights":
        unknown = set(d) - {"break", "recs", "pref", "elicit"}
        if unknown:
            raise ValidationError(f"unknown state weight keys {sorted(unknown)}")
        return cls(d.get("break", 0.0), d.get("recs", 0.0), d.get("pref", 0.0), d.get("elicit", 0.0))


@dataclass(frozen=True)
class DialogueConfig:
    scale: tuple[float, float] = (1.0, 5.0)
    k: int = DEFAULT_K
    e: int = DEFAULT_E
    elicitation_pool: int = DEFAULT_ELICITATION_POOL
    state_weights: StateWeights = field(default_factory=StateWeights)
    max_turns: int = 100

    def __post_init__(self) -> None:
        for name in ("k", "e", "elicitation_pool", "max_turns"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")


@dataclass(frozen=True)
class DialogueEvent:
    turn_index: int
    speaker: str  # "system" | "user"
    state: State
    payload: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"turn": self.turn_index, "speaker": self.speaker, "state": self.state.value,
                "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DialogueEvent":
        return cls(int(d["turn"]), d["speaker"], State(d["state"]), dict(d.get("payload", {})))


@dataclass
class Transcript:
    user_id: str
    events: list[DialogueEvent] = field(default_factory=list)

    @property
    def truncated(self) -> bool:
        return bool(self.events) and self.events[-1].state is State.TRUNCATED

    @property
    def utterances(self) -> list[DialogueEvent]:
        """Events that count as dialogue turns (everything but the cap marker)."""
        return [ev for ev in self.events if ev.state is not State.TRUNCATED]

    def recommendation_events(self) -> list[DialogueEvent]:
        return [ev for ev in self.events if ev.state is State.RECS]

    def to_dict(self) -> dict[str, Any]:
        return {"user_id": self.user_id, "truncated": self.truncated,
                "events": [ev.to_dict() for ev in self.events]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Transcript":
        return cls(str(d["user_id"]), [DialogueEvent.from_dict(e) for e in d["events"]])

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))


def validate_transcript(t: Transcript) -> None:
    """Raise ``ValidationError`` unless ``t`` is well formed and follows ``LEGAL_NEXT``."""
    if not t.events:
        raise ValidationError(f"transcript {t.user_id}: no events")
    prev = State.INIT
    for n, ev in enumerate(t.events, start=1):
        if ev.turn_index != n:
            raise ValidationError(f"transcript {t.user_id}: turn {ev.turn_index} at position {n}")
        if ev.speaker not in ("system", "user"):
            raise ValidationError(f"transcript {t.user_id}: bad speaker {ev.speaker!r}")
        if ev.state not in LEGAL_NEXT[prev]:
            raise ValidationError(
                f"transcript {t.user_id}: illegal transition {prev.value} -> {ev.state.value} at turn {n}"
            )
        if ev.state is State.RECS:
            items, hits = ev.payload.get("items"), ev.payload.get("hits")
            if not isinstance(items, list) or not isinstance(hits, list) or len(items) != len(hits):
                raise ValidationError(f"transcript {t.user_id}: malformed recommendation at turn {n}")
        elif "hits" in ev.payload:
            raise ValidationError(f"transcript {t.user_id}: hit annotation outside recs at turn {n}")
        prev = ev.state
    if prev not in TERMINAL:
        raise ValidationError(f"transcript {t.user_id}: ends in {prev.value}, not break/truncated")


# --------------------------------------------------------------------------
# randomness
# --------------------------------------------------------------------------

def dialogue_rng(seed: int, user_id: str) -> np.random.Generator:
    """Per-dialogue stream keyed by (seed, user_id), independent of scheduling."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(str(user_id).encode("utf-8"))])


def choose_next_state(weights: StateWeights, rng: np.random.Generator) -> str:
    """Weighted draw among ``ACTIONS``; zero-weight actions are never returned."""
    ws = weights.as_tuple()
    u = rng.random() * sum(ws)
    acc = 0.0
    last = None
    for action, w in zip(ACTIONS, ws):
        if w <= 0.0:
            continue
        acc += w
        last = action
        if u < acc:
            return action
    return last  # u landed on the float edge of the cumulative sum


def uniform_choice(rng: np.random.Generator, options: Sequence):
    return options[int(rng.integers(len(options)))]


# --------------------------------------------------------------------------
# simulated-user decisions
# --------------------------------------------------------------------------

class Reaction(NamedTuple):
    kind: State  # ACCEPTED | REJECTED | NO_REACTION
    items: tuple[str, ...]


def react_to_recommendations(user: SimulatedUser, rec_list: RecList | Sequence[str]) -> Reaction:
    """Accept the liked look-ahead items shown, else reject if any shown item is in the look-ahead."""
    shown = list(rec_list)
    if not shown:
        raise ValidationError("cannot react to an empty recommendation list")
    known = [i for i in shown if i in user.lookahead]
    if not known:
        return Reaction(State.NO_REACTION, ())
    accepted = tuple(i for i in known if user.lookahead[i] >= user.avg_rtg)
    if accepted:
        return Reaction(State.ACCEPTED, accepted)
    return Reaction(State.REJECTED, tuple(known))


class Correction(NamedTuple):
    fp: str | None
    fn: str | None
    item: str | None  # the recommended item both features were found on


def correct_assumption(
    lookahead_profile: UserProfile, rec_list: RecList | Sequence[str], catalog: ItemCatalog
) -> Correction:
    """Find a disliked feature on a shown item, plus a liked feature of that same item."""
    part = classify_features(lookahead_profile)
    shown = list(rec_list)
    for nf, _ in part.neg_feat:
        for m in shown:
            feats = catalog.features_of(m)
            if nf in feats:
                fp = next((pf for pf, _ in part.pos_feat if pf in feats), None)
                return Correction(fp, nf, m)
    return Correction(None, None, None)


class Preference(NamedTuple):
    fp: str | None
    fn: str | None
    kind: str  # requested kind: "pos" | "neg" | "complex"

    @property
    def state(self) -> State:
        if self.fp is not None and self.fn is not None:
            return State.COMPLEX_PREF
        return State.POS_PREF if self.fp is not None else State.NEG_PREF


PREFERENCE_KINDS = ("pos", "neg", "complex")


def _positive_lookahead_features(user: SimulatedUser, catalog: ItemCatalog) -> set[str]:
    out: set[str] = set()
    for iid in user.positive_lookahead():
        out |= catalog.features_of(iid)
    return out


def changed_mind_feature(
    user: SimulatedUser, learnt_profile: UserProfile, catalog: ItemCatalog, exclude: Iterable[str] = ()
) -> str | None:
    """A liked feature of the learnt profile that no liked look-ahead item carries.

    Highest weight wins, ties by feature id.
    """
    liked_now = _positive_lookahead_features(user, catalog)
    skip = set(exclude)
    for f, _ in classify_features(learnt_profile).pos_feat:
        if f not in liked_now and f not in skip:
            return f
    return None


def provide_preference(
    kind: str | None,
    user: SimulatedUser,
    learnt_profile: UserProfile,
    catalog: ItemCatalog,
    scale: tuple[float, float],
    rng: np.random.Generator | None = None,
) -> Preference:
    """Pick the strongest liked and/or disliked look-ahead feature to volunteer.

    ``kind=None`` draws uniformly among pos/neg/complex. When the look-ahead
    has no below-average feature, a neg/complex request falls back to
    :func:`changed_mind_feature`, and failing that degrades to a positive
    preference.
    """
    if kind is None:
        if rng is None:
            raise ValueError("rng required when kind is drawn at random")
        kind = uniform_choice(rng, PREFERENCE_KINDS)
    if kind not in PREFERENCE_KINDS:
        raise ValueError(f"unknown preference kind {kind!r}")
    if not user.lookahead:
        raise ValidationError("provide_preference needs a non-empty look-ahead")
    part = classify_features(build_user_profile(user.lookahead, catalog, scale))
    fp = part.pos_feat[0][0] if part.pos_feat else None
    fn = part.neg_feat[0][0] if part.neg_feat else None
    effective = kind
    if kind in ("neg", "complex") and fn is None:
        fn = changed_mind_feature(user, learnt_profile, catalog, exclude=[fp] if fp else [])
        if fn is None:
            effective = "pos"
    if effective == "pos":
        return Preference(fp, None, kind)
    if effective == "neg":
        return Preference(None, fn, kind)
    return Preference(fp, fn, kind)


def answer_elicitation(user: SimulatedUser, feature: str, catalog: ItemCatalog) -> bool:
    """Yes iff some liked look-ahead item carries ``feature``."""
    if feature not in catalog.feature_universe:
        raise ValidationError(f"feature {feature!r} is not in the catalog")
    return feature in _positive_lookahead_features(user, catalog)


def post_reject_branch(
    rng: np.random.Generator,
    user: SimulatedUser,
    rec_list: RecList | Sequence[str],
    profile: UserProfile,
    catalog: ItemCatalog,
    scale: tuple[float, float],
    recommender: Recommender | None = None,
    e: int = DEFAULT_E,
) -> list[tuple[str, State, dict[str, Any]]]:
    """What happens after a rejection: maybe explore/explain, maybe correct an assumption.

    Returns ``(speaker, state, payload)`` triples and anchors any corrected
    features in ``profile``.
    """
    out: list[tuple[str, State, dict[str, Any]]] = []
    first = uniform_choice(rng, ("explore", "explain", "no_react"))
    if first == "no_react":
        return out
    shown = list(rec_list)
    item = catalog[uniform_choice(rng, shown)]
    if first == "explore":
        out.append(("system", State.EXPLORE, {
            "item": item.item_id, "title": item.title, "features": sorted(item.features)}))
    else:
        expl = (recommender.explain if recommender is not None else explain)(profile, item, e)
        out.append(("system", State.EXPLAIN, {
            "item": expl.item_id,
            "features": [[f, w] for f, w in expl.supporting_features]}))
    if uniform_choice(rng, ("no_react", "corr_assmp")) == "no_react":
        return out
    if not user.lookahead:
        return out
    lookahead_profile = build_user_profile(user.lookahead, catalog, scale)
    corr = correct_assumption(lookahead_profile, shown, catalog)
    if corr.fn is None:
        return out
    update_profile_features(profile, corr.fp, corr.fn)
    state = State.CORRECT_POS_NEG if corr.fp is not None else State.CORRECT_POS
    out.append(("user", state, {"fp": corr.fp, "fn": corr.fn, "item": corr.item}))
    return out


# --------------------------------------------------------------------------
# main loop
# --------------------------------------------------------------------------

class _Dialogue:
    def __init__(self, user, recommender, catalog, config, seed):
        if not user.lookahead:
            raise ValidationError(f"user {user.user_id}: empty look-ahead")
        if not user.profile_ratings:
            raise ValidationError(f"user {user.user_id}: empty profile")
        self.user = replace(user, lookahead=dict(user.lookahead),
                            trainset_pos=set(user.trainset_pos), trainset_neg=set(user.trainset_neg))
        self.rec = recommender
        self.catalog = catalog
        self.cfg = config
        self.rng = dialogue_rng(seed, user.user_id)
        self.profile = build_user_profile(user.profile_ratings, catalog, config.scale)
        self.ignored: list[str] = []
        self._ignored_set: set[str] = set()
        self.asked: set[str] = set()
        self.t = Transcript(user.user_id)

    def emit(self, speaker: str, state: State, payload: dict[str, Any] | None = None) -> None:
        self.t.events.append(DialogueEvent(len(self.t.events) + 1, speaker, state, payload or {}))

    def ignore(self, items: Iterable[str]) -> None:
        for i in items:
            if i not in self._ignored_set:
                self._ignored_set.add(i)
                self.ignored.append(i)

    def run(self) -> Transcript:
        action = "generate_recs"  # the first move is always a recommendation
        n_actions = 0
        while True:
            if action == "break":
                self.emit("user", State.BREAK, {"reason": "user"})
                break
            if len(self.t.events) >= self.cfg.max_turns or n_actions >= self.cfg.max_turns:
                self.emit("system", State.TRUNCATED, {"max_turns": self.cfg.max_turns})
                break
            if not self.user.lookahead:
                self.emit("user", State.BREAK, {"reason": "lookahead_exhausted"})
                break
            n_actions += 1
            if action == "generate_recs":
                if not self.recommend():
                    break
            elif action == "provide_pref":
                self.provide_pref()
            elif action == "pref_elicitation":
                self.elicit()
            action = choose_next_state(self.cfg.state_weights, self.rng)
        return self.t

    def recommend(self) -> bool:
        try:
            rl = self.rec.recommend(self.profile, self.catalog, self.ignored, self.cfg.k)
        except PoolExhausted:
            self.emit("user", State.BREAK, {"reason": "pool_exhausted"})
            return False
        shown = list(rl)
        bad = [i for i in shown if i in self.profile.rated_items or i in self._ignored_set]
        if bad or len(set(shown)) != len(shown) or not shown or len(shown) > self.cfg.k:
            raise RuntimeError(f"recommender {self.rec!r} broke the contract: {shown}")
        la, avg = self.user.lookahead, self.user.avg_rtg
        hits = [i in la and la[i] >= avg for i in shown]
        self.emit("system", State.RECS, {
            "items": shown, "hits": hits,
            "lookahead_size": len(la),
            "lookahead_positives": sum(1 for v in la.values() if v >= avg)})

        reaction = react_to_recommendations(self.user, shown)
        if reaction.kind is State.NO_REACTION:
            self.ignore(shown)
            self.emit("user", State.NO_REACTION, {})
        elif reaction.kind is State.ACCEPTED:
            rel = {i: normalize(la[i], self.cfg.scale) for i in reaction.items}
            update_profile_items(self.profile, reaction.items, rel, self.catalog)
            for i in reaction.items:
                del la[i]
            self.ignore(i for i in shown if i not in rel)
            self.emit("user", State.ACCEPTED, {"items": list(reaction.items)})
        else:
            update_profile_items(self.profile, shown, dict.fromkeys(shown, 0.0), self.catalog)
            for i in reaction.items:
                del la[i]
            self.emit("user", State.REJECTED, {"items": list(reaction.items)})
            for speaker, state, payload in post_reject_branch(
                self.rng, self.user, shown, self.profile, self.catalog, self.cfg.scale,
                self.rec, self.cfg.e,
            ):
                if state in (State.CORRECT_POS, State.CORRECT_POS_NEG):
                    self.asked.update(f for f in (payload["fp"], payload["fn"]) if f)
                self.emit(speaker, state, payload)
        return True

    def provide_pref(self) -> None:
        pref = provide_preference(None, self.user, self.profile, self.catalog, self.cfg.scale, self.rng)
        update_profile_features(self.profile, pref.fp, pref.fn)
        self.asked.update(f for f in (pref.fp, pref.fn) if f)
        self.emit("user", pref.state, {"kind": pref.kind, "fp": pref.fp, "fn": pref.fn})

    def elicit(self) -> None:
        f = self.rec.elicit(self.profile, self.catalog, self.ignored, self.asked,
                            self.cfg.elicitation_pool)
        if f is None:
            return
        self.emit("system", State.ELICIT, {"feature": f})
        yes = answer_elicitation(self.user, f, self.catalog)
        if yes:
            update_profile_features(self.profile, fp=f)
        else:
            update_profile_features(self.profile, fn=f)
        self.asked.add(f)
        self.emit("user", State.ANSWER, {"feature": f, "answer": "yes" if yes else "no"})


def run_dialogue(
    user: SimulatedUser,
    recommender: Recommender,
    catalog: ItemCatalog,
    config: DialogueConfig | None = None,
    seed: int = 0,
) -> Transcript:
    """Simulate one full conversation and return its transcript.

    ``user`` is not modified; the dialogue works on a private copy of its
    look-ahead and profile.
    """
    return _Dialogue(user, recommender, catalog, config or DialogueConfig(), seed).run()
