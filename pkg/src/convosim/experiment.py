"""End-to-end experiment: load data, split, simulate every test user, score, write."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dataset import (
    ItemCatalog,
    RatingTable,
    SimulatedUser,
    build_test_users,
    load_items,
    load_ratings,
    restrict_to_catalog,
    split_users,
)
from .errors import ValidationError
from .metrics import AP_DENOMINATORS, AGGREGATE_FIELDS, MetricsReport, score_transcripts
from .recommender import RECOMMENDERS, Recommender, make_recommender
from .render import render_transcript
from .simulator import DialogueConfig, StateWeights, Transcript, run_dialogue

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    ratings_path: str = "ratings.csv"
    items_path: str = "items.csv"
    out_dir: str = "out"
    rating_scale: tuple[float, float] = (1.0, 5.0)
    user_split: float = 0.8
    history_split: float = 0.8
    k: int = 5
    e: int = 4
    elicitation_pool: int = 50
    state_weights: StateWeights = field(default_factory=StateWeights)
    max_turns: int = 100
    seed: int = 0
    ap_denominator: str = "shown_hits"
    recommender: str = "content"
    jobs: int = 1

    def __post_init__(self) -> None:
        self.rating_scale = tuple(float(x) for x in self.rating_scale)
        if len(self.rating_scale) != 2 or not self.rating_scale[0] < self.rating_scale[1]:
            raise ValidationError(f"rating_scale must be [min, max] with min < max, got {self.rating_scale}")
        for name in ("user_split", "history_split"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValidationError(f"{name} must be in (0, 1)")
        for name in ("k", "e", "elicitation_pool", "max_turns", "jobs"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.ap_denominator not in AP_DENOMINATORS:
            raise ValidationError(f"ap_denominator must be one of {AP_DENOMINATORS}")
        if self.recommender not in RECOMMENDERS:
            raise ValidationError(f"recommender must be one of {sorted(RECOMMENDERS)}")
        if isinstance(self.state_weights, dict):
            self.state_weights = StateWeights.from_dict(self.state_weights)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        """Read a JSON config; non-None ``overrides`` win over the file."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def dialogue_config(self) -> DialogueConfig:
        return DialogueConfig(
            scale=self.rating_scale,
            k=self.k,
            e=self.e,
            elicitation_pool=self.elicitation_pool,
            state_weights=self.state_weights,
            max_turns=self.max_turns,
        )

    def echo(self) -> dict[str, Any]:
        """Config fields that determine results (output location and workers excluded)."""
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        d.pop("jobs")
        d["rating_scale"] = list(self.rating_scale)
        d["state_weights"] = self.state_weights.to_dict()
        return d


@dataclass
class ExperimentResult:
    report: MetricsReport
    transcripts: list[Transcript]
    train_users: list[str]
    test_users: list[str]
    skipped_users: list[str]

    def report_dict(self, config: ExperimentConfig) -> dict[str, Any]:
        d = self.report.to_dict()
        d["config_echo"] = config.echo()
        d["seed"] = config.seed
        d["skipped_users"] = list(self.skipped_users)
        return d


def load_data(config: ExperimentConfig) -> tuple[RatingTable, ItemCatalog]:
    with open(config.items_path, "rb") as fh:
        catalog = load_items(fh)
    with open(config.ratings_path, "rb") as fh:
        ratings = load_ratings(fh, config.rating_scale)
    return restrict_to_catalog(ratings, catalog), catalog


# Worker-process globals, set once per process by the pool initializer.
_W: dict[str, Any] = {}


def _init_worker(recommender, catalog, dcfg, seed) -> None:
    _W.update(recommender=recommender, catalog=catalog, dcfg=dcfg, seed=seed)


def _run_one(user: SimulatedUser) -> Transcript:
    return run_dialogue(user, _W["recommender"], _W["catalog"], _W["dcfg"], _W["seed"])


def simulate(
    users: list[SimulatedUser],
    recommender: Recommender,
    catalog: ItemCatalog,
    dcfg: DialogueConfig,
    seed: int,
    jobs: int = 1,
) -> list[Transcript]:
    """Run every dialogue; results come back in ``users`` order regardless of ``jobs``."""
    if jobs <= 1 or len(users) <= 1:
        return [run_dialogue(u, recommender, catalog, dcfg, seed) for u in users]
    chunk = max(1, len(users) // (4 * jobs))
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(recommender, catalog, dcfg, seed)
    ) as pool:
        return list(pool.map(_run_one, users, chunksize=chunk))


def run_simulation(
    config: ExperimentConfig,
    recommender: Recommender | None = None,
    data: tuple[RatingTable, ItemCatalog] | None = None,
) -> ExperimentResult:
    """Everything except writing outputs."""
    ratings, catalog = data if data is not None else load_data(config)
    train_ids, test_ids = split_users(ratings, config.user_split, config.seed)
    if recommender is None:
        recommender = make_recommender(config.recommender, config.seed)
    train_set = set(train_ids)
    recommender.fit(RatingTable([r for r in ratings.ratings if r.user_id in train_set], ratings.scale), catalog)

    users = build_test_users(ratings, test_ids, config.history_split)
    kept = {u.user_id for u in users}
    skipped = [u for u in test_ids if u not in kept]
    if not users:
        raise ValidationError("no test user has enough ratings to simulate")
    transcripts = simulate(users, recommender, catalog, config.dialogue_config(), config.seed, config.jobs)
    report = score_transcripts(transcripts, config.k, config.ap_denominator)
    return ExperimentResult(report, transcripts, train_ids, test_ids, skipped)


def _safe_name(user_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in user_id)


def write_outputs(result: ExperimentResult, config: ExperimentConfig) -> Path:
    """Write transcripts, logs and report.json atomically into ``config.out_dir``.

    Everything is staged in a sibling temp directory; on failure nothing
    partial is left behind.
    """
    out = Path(config.out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        (stage / "transcripts").mkdir()
        (stage / "logs").mkdir()
        for t in result.transcripts:
            name = _safe_name(t.user_id)
            (stage / "transcripts" / f"{name}.json").write_text(t.to_json(), encoding="utf-8")
            (stage / "logs" / f"{name}.txt").write_text(render_transcript(t), encoding="utf-8")
        (stage / "report.json").write_text(
            json.dumps(result.report_dict(config), indent=2) + "\n", encoding="utf-8"
        )
        out.mkdir(parents=True, exist_ok=True)
        for entry in ("transcripts", "logs", "report.json"):
            target = out / entry
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
            os.replace(stage / entry, target)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return out


def format_aggregate(report: MetricsReport) -> str:
    width = max(len(f) for f in AGGREGATE_FIELDS)
    lines = [f"{'metric':<{width}}  value", f"{'-' * width}  --------"]
    lines += [f"{f:<{width}}  {report.aggregate[f]:.4f}" for f in AGGREGATE_FIELDS]
    lines.append(f"{'users':<{width}}  {len(report.per_user)}")
    return "\n".join(lines)


def run_experiment(config: ExperimentConfig, recommender: Recommender | None = None) -> ExperimentResult:
    result = run_simulation(config, recommender)
    write_outputs(result, config)
    return result
