from collections import Counter

import numpy as np
import pytest

from convosim.dataset import SimulatedUser
from convosim.errors import ValidationError
from convosim.profile import UserProfile, build_user_profile
from convosim.recommender import ContentBasedRecommender, RandomRecommender, RecList, Recommender
from convosim.simulator import (
    ACTIONS,
    DialogueConfig,
    State,
    StateWeights,
    Transcript,
    answer_elicitation,
    choose_next_state,
    correct_assumption,
    post_reject_branch,
    provide_preference,
    react_to_recommendations,
    run_dialogue,
    validate_transcript,
)

from conftest import make_catalog

SCALE = (1.0, 5.0)


class ScriptedRng:
    """Stands in for a Generator; ``integers(n)`` returns scripted picks."""

    def __init__(self, picks):
        self.picks = list(picks)

    def integers(self, n):
        v = self.picks.pop(0)
        assert 0 <= v < n
        return v


def user(lookahead, avg=3.0, profile=None, uid="u"):
    profile = profile or {}
    return SimulatedUser(
        user_id=uid,
        trainset_pos={i for i, v in profile.items() if v >= avg},
        trainset_neg={i for i, v in profile.items() if v < avg},
        avg_rtg=avg,
        lookahead=dict(lookahead),
        profile_ratings=dict(profile),
    )


# --- choose_next_state ------------------------------------------------------

def test_choose_always_recs():
    rng = np.random.default_rng(0)
    w = StateWeights(0, 1, 0, 0)
    assert {choose_next_state(w, rng) for _ in range(2000)} == {"generate_recs"}


def test_choose_always_break():
    rng = np.random.default_rng(0)
    w = StateWeights(1, 0, 0, 0)
    assert {choose_next_state(w, rng) for _ in range(2000)} == {"break"}


def test_choose_uniform_frequencies():
    rng = np.random.default_rng(123)
    counts = Counter(choose_next_state(StateWeights(0.25, 0.25, 0.25, 0.25), rng) for _ in range(10_000))
    for a in ACTIONS:
        assert 0.23 <= counts[a] / 10_000 <= 0.27


def test_weights_validation():
    with pytest.raises(ValidationError):
        StateWeights(0.5, 0.5, 0.5, 0)
    with pytest.raises(ValidationError):
        StateWeights(-0.1, 1.1, 0, 0)


# --- reactions --------------------------------------------------------------

def test_react_accept():
    r = react_to_recommendations(user({"I3": 5, "I9": 1}), ["I3", "I7"])
    assert r.kind is State.ACCEPTED and r.items == ("I3",)


def test_react_reject():
    r = react_to_recommendations(user({"I9": 1}), ["I9"])
    assert r.kind is State.REJECTED and r.items == ("I9",)


def test_react_no_reaction():
    r = react_to_recommendations(user({"I9": 1}), ["I1", "I2"])
    assert r.kind is State.NO_REACTION


# --- correct_assumption -----------------------------------------------------

def test_correct_assumption_trace():
    cat = make_catalog({"M1": "Comedy", "M2": "Romance|Action"})
    la = UserProfile.from_weights({"Romance": 0.1, "Action": 0.9, "Comedy": 0.5})
    c = correct_assumption(la, ["M1", "M2"], cat)
    assert (c.fn, c.fp, c.item) == ("Romance", "Action", "M2")


def test_correct_assumption_no_negative_on_recs():
    cat = make_catalog({"M1": "Comedy", "M2": "Action"})
    la = UserProfile.from_weights({"Romance": 0.1, "Action": 0.9, "Comedy": 0.5})
    assert correct_assumption(la, ["M1", "M2"], cat) == (None, None, None)


def test_correct_assumption_negative_only():
    cat = make_catalog({"M": "Romance"})
    la = UserProfile.from_weights({"Romance": 0.1, "Action": 0.9, "Comedy": 0.5})
    c = correct_assumption(la, ["M"], cat)
    assert (c.fp, c.fn) == (None, "Romance")


# --- provide_preference -----------------------------------------------------

@pytest.fixture
def pref_catalog():
    # look-ahead profile: A 0.9... built from ratings below
    return make_catalog({"L1": "A", "L2": "B", "L3": "C", "P1": "X", "P2": "A"})


def test_provide_preference_trace(pref_catalog):
    # ratings 4.6 -> 0.9, 3.0 -> 0.5, 1.4 -> 0.1 ; avg 0.5
    u = user({"L1": 4.6, "L2": 3.0, "L3": 1.4}, avg=3.0, profile={"P1": 5})
    learnt = build_user_profile(u.profile_ratings, pref_catalog, SCALE)
    assert provide_preference("complex", u, learnt, pref_catalog, SCALE)[:2] == ("A", "C")
    assert provide_preference("pos", u, learnt, pref_catalog, SCALE)[:2] == ("A", None)
    assert provide_preference("neg", u, learnt, pref_catalog, SCALE)[:2] == (None, "C")


def test_provide_preference_fallback_changed_mind(pref_catalog):
    # all look-ahead weights equal -> no negative feature; learnt profile likes X,
    # which no liked look-ahead item carries
    u = user({"L1": 5, "L2": 5}, avg=3.0, profile={"P1": 5, "P2": 1})
    learnt = build_user_profile(u.profile_ratings, pref_catalog, SCALE)
    pref = provide_preference("complex", u, learnt, pref_catalog, SCALE)
    assert (pref.fp, pref.fn) == ("A", "X")
    assert pref.state is State.COMPLEX_PREF
    neg = provide_preference("neg", u, learnt, pref_catalog, SCALE)
    assert (neg.fp, neg.fn) == (None, "X")


def test_provide_preference_degrades_to_pos(pref_catalog):
    # learnt profile's liked feature A is also on a liked look-ahead item
    u = user({"L1": 5, "P1": 5}, avg=3.0, profile={"P2": 5})
    learnt = build_user_profile(u.profile_ratings, pref_catalog, SCALE)
    pref = provide_preference("neg", u, learnt, pref_catalog, SCALE)
    assert pref.fn is None and pref.fp == "A"
    assert pref.state is State.POS_PREF


# --- elicitation answers ----------------------------------------------------

def test_answer_elicitation():
    cat = make_catalog({"L1": "Comedy|Drama", "L2": "Thriller", "X": "Horror"})
    u = user({"L1": 5, "L2": 1}, avg=3.0)
    assert answer_elicitation(u, "Comedy", cat) is True
    assert answer_elicitation(u, "Horror", cat) is False
    assert answer_elicitation(u, "Thriller", cat) is False


# --- post_reject_branch -----------------------------------------------------

@pytest.fixture
def reject_setup():
    cat = make_catalog({
        "M1": "Comedy", "M2": "Romance|Action",
        "L1": "Action|Comedy", "L2": "Romance|Comedy", "P": "Comedy|Drama",
    })
    u = user({"L1": 5, "L2": 1}, avg=3.0, profile={"P": 4})
    learnt = build_user_profile(u.profile_ratings, cat, SCALE)
    return cat, u, learnt


def test_post_reject_explain_corr(reject_setup):
    cat, u, learnt = reject_setup
    # explain, item index 1 (M2), corr_assmp
    evs = post_reject_branch(ScriptedRng([1, 1, 1]), u, ["M1", "M2"], learnt, cat, SCALE)
    assert [s for _, s, _ in evs] == [State.EXPLAIN, State.CORRECT_POS_NEG]
    assert evs[0][2]["item"] == "M2"
    assert evs[1][2] == {"fp": "Action", "fn": "Romance", "item": "M2"}
    assert learnt.weights["Romance"] == learnt.min_w
    assert learnt.weights["Action"] == learnt.max_w


def test_post_reject_no_react(reject_setup):
    cat, u, learnt = reject_setup
    assert post_reject_branch(ScriptedRng([2]), u, ["M1", "M2"], learnt, cat, SCALE) == []


def test_post_reject_corr_finds_nothing(reject_setup):
    cat, u, learnt = reject_setup
    before = learnt.copy()
    evs = post_reject_branch(ScriptedRng([0, 0, 1]), u, ["M1"], learnt, cat, SCALE)
    assert [s for _, s, _ in evs] == [State.EXPLORE]
    assert learnt == before


# --- run_dialogue -----------------------------------------------------------

@pytest.fixture
def accept_world():
    cat = make_catalog({"P1": "A", "P2": "B", "G": "A", "H": "B", "J": "C"})
    u = user({"G": 5, "H": 1}, avg=3.0, profile={"P1": 5, "P2": 1})
    return cat, u


def test_dialogue_forced_break(accept_world):
    cat, u = accept_world
    cfg = DialogueConfig(k=1, state_weights=StateWeights(1, 0, 0, 0))
    t = run_dialogue(u, ContentBasedRecommender(), cat, cfg, seed=0)
    assert [e.state for e in t.events] == [State.RECS, State.ACCEPTED, State.BREAK]
    assert [e.speaker for e in t.events] == ["system", "user", "user"]
    assert t.events[0].payload["items"] == ["G"] and t.events[0].payload["hits"] == [True]
    validate_transcript(t)


def test_dialogue_does_not_mutate_user(accept_world):
    cat, u = accept_world
    before = (dict(u.lookahead), set(u.trainset_pos))
    run_dialogue(u, ContentBasedRecommender(), cat, DialogueConfig(), seed=1)
    assert (u.lookahead, u.trainset_pos) == before


def test_dialogue_replay_identical(synth_users, synth_catalog):
    for u in synth_users[:5]:
        a = run_dialogue(u, ContentBasedRecommender(), synth_catalog, DialogueConfig(), seed=9)
        b = run_dialogue(u, ContentBasedRecommender(), synth_catalog, DialogueConfig(), seed=9)
        assert a.to_json() == b.to_json()


def test_dialogue_no_reaction_grows_ignored():
    cat = make_catalog({"P": "A|D", "Q": "D", "X": "A", "Y": "A", "L": "D"})
    u = user({"L": 2}, avg=3.0, profile={"P": 5, "Q": 3})
    cfg = DialogueConfig(k=1, state_weights=StateWeights(0, 1, 0, 0), max_turns=4)
    t = run_dialogue(u, ContentBasedRecommender(), cat, cfg, seed=0)
    states = [e.state for e in t.events]
    assert states == [State.RECS, State.NO_REACTION, State.RECS, State.NO_REACTION, State.TRUNCATED]
    shown = [e.payload["items"] for e in t.events if e.state is State.RECS]
    assert shown == [["X"], ["Y"]]


def test_dialogue_pool_exhausted_breaks():
    cat = make_catalog({"P": "A", "L": "A"})
    u = user({"L": 5}, avg=3.0, profile={"P": 1})
    cfg = DialogueConfig(k=1, state_weights=StateWeights(0, 1, 0, 0))
    t = run_dialogue(u, ContentBasedRecommender(), cat, cfg, seed=0)
    # L accepted, look-ahead empty -> break
    assert t.events[-1].state is State.BREAK


def test_dialogue_max_turns_cap(synth_users, synth_catalog):
    cfg = DialogueConfig(state_weights=StateWeights(0, 0.5, 0.25, 0.25), max_turns=7)
    for u in synth_users[:10]:
        t = run_dialogue(u, ContentBasedRecommender(), synth_catalog, cfg, seed=2)
        validate_transcript(t)
        assert t.events[-1].state in (State.BREAK, State.TRUNCATED)
        assert len(t.utterances) < 7 + 6


def test_transcript_json_roundtrip(synth_users, synth_catalog):
    t = run_dialogue(synth_users[0], ContentBasedRecommender(), synth_catalog, DialogueConfig(), seed=3)
    back = Transcript.from_json(t.to_json())
    assert back.to_json() == t.to_json()


class FirstEligible(Recommender):
    """Minimal third-party recommender: alphabetical eligible items."""

    def recommend(self, profile, catalog, ignored, k):
        from convosim.errors import PoolExhausted

        skip = set(ignored) | profile.rated_items
        pool = [i for i in catalog.item_ids if i not in skip]
        if not pool:
            raise PoolExhausted()
        return RecList(tuple(pool[:k]), k)


@pytest.mark.parametrize("rec", [RandomRecommender(seed=1), FirstEligible()], ids=["random", "custom"])
def test_simulator_runs_any_recommender(rec, synth_users, synth_catalog):
    for n, u in enumerate(synth_users[:10]):
        t = run_dialogue(u, rec, synth_catalog, DialogueConfig(), seed=n)
        validate_transcript(t)


def test_broken_recommender_detected(synth_users, synth_catalog):
    class Repeats(Recommender):
        def recommend(self, profile, catalog, ignored, k):
            return RecList((sorted(profile.rated_items)[0],), k)

    with pytest.raises(RuntimeError):
        run_dialogue(synth_users[0], Repeats(), synth_catalog, DialogueConfig(), seed=0)


def test_validate_rejects_illegal():
    from convosim.simulator import DialogueEvent

    t = Transcript("u", [DialogueEvent(1, "user", State.ACCEPTED, {}), DialogueEvent(2, "user", State.BREAK, {})])
    with pytest.raises(ValidationError, match="illegal transition"):
        validate_transcript(t)
    t = Transcript("u", [DialogueEvent(1, "system", State.ELICIT, {"feature": "A"})])
    with pytest.raises(ValidationError):
        validate_transcript(t)
