from __future__ import annotations

import pytest

from convosim.dataset import Item, ItemCatalog, load_items, load_ratings
from convosim.synth import generate_synthetic, items_csv, ratings_csv


def make_catalog(item_features: dict[str, str]) -> ItemCatalog:
    """``{"I1": "A|B", ...}`` -> catalog."""
    return ItemCatalog(Item(iid, iid, frozenset(f.split("|"))) for iid, f in item_features.items())


@pytest.fixture
def small_catalog() -> ItemCatalog:
    return make_catalog({
        "I1": "A|B", "I2": "B", "I3": "A|C", "I4": "C|D", "I5": "D", "I6": "A|D",
        "I7": "B|C", "I8": "E", "I9": "A|E",
    })


@pytest.fixture(scope="session")
def synth_data():
    ratings, items = generate_synthetic(n_users=50, n_items=200, n_features=20, seed=3)
    return load_ratings(ratings_csv(ratings), (1, 5)), load_items(items_csv(items))


@pytest.fixture(scope="session")
def synth_catalog(synth_data):
    return synth_data[1]


@pytest.fixture(scope="session")
def synth_users(synth_data):
    from convosim.dataset import build_test_users

    ratings, _ = synth_data
    return build_test_users(ratings, ratings.user_ids(), 0.8)


def random_transcript(rng, user_id="u", k=5, max_events=60):
    """A random legal transcript: random walk over LEGAL_NEXT with random hit vectors."""
    from convosim.simulator import LEGAL_NEXT, DialogueEvent, State, Transcript

    speakers = {State.RECS: "system", State.ELICIT: "system", State.EXPLORE: "system",
                State.EXPLAIN: "system", State.TRUNCATED: "system"}
    events = []
    prev = State.INIT
    while prev not in (State.BREAK, State.TRUNCATED):
        options = sorted(LEGAL_NEXT[prev], key=lambda s: s.value)
        if len(events) >= max_events:
            options = [s for s in options if s in (State.BREAK, State.TRUNCATED)] or options
        elif len(events) == 0:
            options = [State.RECS]
        nxt = options[int(rng.integers(len(options)))]
        payload = {}
        if nxt is State.RECS:
            n = int(rng.integers(1, k + 1))
            hits = [bool(h) for h in rng.random(n) < 0.3]
            payload = {"items": [f"i{j}" for j in range(n)], "hits": hits,
                       "lookahead_positives": sum(hits) + int(rng.integers(0, 4))}
        elif nxt is State.ELICIT:
            payload = {"feature": "A"}
        elif nxt is State.ANSWER:
            payload = {"feature": "A", "answer": "yes"}
        events.append(DialogueEvent(len(events) + 1, speakers.get(nxt, "user"), nxt, payload))
        prev = nxt
    return Transcript(user_id, events)


ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
