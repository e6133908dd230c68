"""Plain-text rendering of transcripts, one line per utterance."""

from __future__ import annotations

from .simulator import DialogueEvent, State, Transcript

_BREAK_REASONS = {
    "pool_exhausted": "no items left to recommend",
    "lookahead_exhausted": "look-ahead exhausted",
}


def _prefs(fp, fn) -> str:
    parts = []
    if fp:
        parts.append(f"likes {fp}")
    if fn:
        parts.append(f"not {fn}")
    return ", ".join(parts)


def _summary(ev: DialogueEvent) -> str | None:
    p = ev.payload
    s = ev.state
    if s is State.RECS:
        return ", ".join(f"{i}*" if h else i for i, h in zip(p["items"], p["hits"]))
    if s in (State.ACCEPTED, State.REJECTED):
        return ", ".join(p.get("items", []))
    if s is State.EXPLORE:
        return f'{p["item"]} "{p.get("title", "")}" [{", ".join(p.get("features", []))}]'
    if s is State.EXPLAIN:
        feats = p.get("features") or []
        if not feats:
            return "(no shared features)"
        return f'{p["item"]} because you like ' + ", ".join(f"{f} ({w:.2f})" for f, w in feats)
    if s is State.ELICIT:
        return f'"Do you prefer {p["feature"]}?"'
    if s is State.ANSWER:
        return p["answer"]
    if s in (State.POS_PREF, State.NEG_PREF, State.COMPLEX_PREF, State.CORRECT_POS, State.CORRECT_POS_NEG):
        return _prefs(p.get("fp"), p.get("fn"))
    if s is State.TRUNCATED:
        return f'max_turns={p.get("max_turns")}'
    return None


def render_event(ev: DialogueEvent) -> str:
    head = f"[{ev.turn_index}] {ev.speaker.upper()} {ev.state.value}"
    if ev.state is State.BREAK:
        reason = _BREAK_REASONS.get(ev.payload.get("reason", "user"))
        return f"{head} ({reason})" if reason else head
    summary = _summary(ev)
    return f"{head}: {summary}" if summary else head


def render_transcript(t: Transcript) -> str:
    lines = [f"# user {t.user_id}"]
    lines.extend(render_event(ev) for ev in t.events)
    return "\n".join(lines) + "\n"
