"""Command line entry point: ``convosim run | gen-synth | render | convert-ml100k``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConvosimError
from .experiment import ExperimentConfig, format_aggregate, run_experiment
from .recommender import RECOMMENDERS
from .render import render_transcript
from .simulator import Transcript
from .synth import convert_movielens_100k, generate_synthetic, write_dataset

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2

log = logging.getLogger("convosim")


def _cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "seed": args.seed,
        "k": args.k,
        "out_dir": args.out_dir,
        "ratings_path": args.ratings,
        "items_path": args.items,
        "jobs": args.jobs,
        "recommender": args.recommender,
    }
    if args.config:
        config = ExperimentConfig.load(args.config, **overrides)
    else:
        config = ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    result = run_experiment(config)
    print(format_aggregate(result.report))
    print(f"wrote {len(result.transcripts)} transcripts to {config.out_dir}")
    return EXIT_OK


def _cmd_gen_synth(args: argparse.Namespace) -> int:
    ratings, items = generate_synthetic(args.users, args.items, args.features, args.seed)
    rp, ip = write_dataset(args.out_dir, ratings, items)
    print(f"wrote {len(ratings)} ratings to {rp} and {len(items)} items to {ip}")
    return EXIT_OK


def _cmd_render(args: argparse.Namespace) -> int:
    t = Transcript.from_json(Path(args.transcript).read_text(encoding="utf-8"))
    sys.stdout.write(render_transcript(t))
    return EXIT_OK


def _cmd_convert(args: argparse.Namespace) -> int:
    rp, ip = convert_movielens_100k(args.ml_dir, args.out_dir)
    print(f"wrote {rp} and {ip}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convosim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate all test users and write a report")
    run.add_argument("--config", help="JSON experiment config")
    run.add_argument("--seed", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--out-dir")
    run.add_argument("--ratings")
    run.add_argument("--items")
    run.add_argument("--jobs", type=int)
    run.add_argument("--recommender", choices=sorted(RECOMMENDERS))
    run.set_defaults(func=_cmd_run)

    gen = sub.add_parser("gen-synth", help="write a synthetic dataset with planted preferences")
    gen.add_argument("--users", type=int, default=50)
    gen.add_argument("--items", type=int, default=200)
    gen.add_argument("--features", type=int, default=20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out-dir", default="data")
    gen.set_defaults(func=_cmd_gen_synth)

    ren = sub.add_parser("render", help="print a transcript JSON as a conversation log")
    ren.add_argument("transcript")
    ren.set_defaults(func=_cmd_render)

    conv = sub.add_parser("convert-ml100k", help="convert MovieLens-100k u.data/u.item to CSV")
    conv.add_argument("ml_dir")
    conv.add_argument("--out-dir", default="data")
    conv.set_defaults(func=_cmd_convert)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConvosimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
