"""Command-line entry point: ``nilm-transfer {synth,run,score,report}``.

Exit status: 0 on success, 1 on usage or validation errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import DataError, DomainError, NilmTransferError, ValidationError
from .runner import ExperimentConfig, emit_report, load_run, read_results_csv, run_experiment, score
from .synth import DEFAULT_INTERVAL, DEFAULT_WINDOW, HouseSpec, default_house_spec, generate, unseen_specs
from .timeseries import save_household

EXIT_OK, EXIT_VALIDATION, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None


def _synth_plan(doc: dict | None, seed: int | None):
    """Expand a synth document into (specs, start, duration, interval)."""
    if doc is None:
        doc = {
            "houses": [default_house_spec().to_dict()],
            "unseen": {"from": "synth_1", "count": 8, "scale": 0.3, "seed": 1},
        }
    try:
        items = doc["houses"] if "houses" in doc else [doc]
        specs = [HouseSpec.from_dict(d) for d in items]
        unseen = doc.get("unseen")
        if unseen:
            by_id = {s.house_id: s for s in specs}
            base = by_id[unseen.get("from", specs[0].house_id)]
            pseed = seed if seed is not None else int(unseen.get("seed", 1))
            specs += unseen_specs(base, int(unseen["count"]), float(unseen.get("scale", 0.3)), pseed)
        start = int(doc.get("start", 0))
        duration = int(doc.get("duration", 2 * DEFAULT_WINDOW))
        interval = int(doc.get("interval", DEFAULT_INTERVAL))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise ValidationError(f"invalid synth config: {exc!r}") from None
    return specs, start, duration, interval


def cmd_synth(args) -> int:
    doc = _read_json(args.config) if args.config else None
    specs, start, duration, interval = _synth_plan(doc, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        record = generate(spec, start, duration, interval)
        save_household(record, out / spec.house_id)
        print(f"wrote {out / spec.house_id}")
    specs_doc = {"houses": [s.to_dict() for s in specs], "start": start, "duration": duration, "interval": interval}
    (out / "specs.json").write_text(json.dumps(specs_doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _write(run, args, stem: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.json").write_text(emit_report(run, "json"), encoding="utf-8")
        (out / f"{stem}.txt").write_text(emit_report(run, "table"), encoding="utf-8")
        print(f"wrote {out / (stem + '.json')} and {out / (stem + '.txt')}")
    else:
        sys.stdout.write(emit_report(run, args.format))


def cmd_run(args) -> int:
    if not args.config:
        raise ValidationError("run needs --config")
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "seed": args.seed})
    data = Path(args.data) if args.data else Path(args.config).parent
    run = run_experiment(config, data)
    _write(run, args, config.experiment_id)
    return EXIT_OK


def cmd_score(args) -> int:
    path = args.results or args.data
    if not path:
        raise ValidationError("score needs a results CSV (positional or --data)")
    _write(score(read_results_csv(path)), args, "scores")
    return EXIT_OK


def cmd_report(args) -> int:
    path = args.run or args.data
    if not path:
        raise ValidationError("report needs a stored run JSON (positional or --data)")
    run = load_run(path)
    if args.out:
        _write(run, args, Path(path).stem)
    else:
        sys.stdout.write(emit_report(run, args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nilm-transfer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--data", help="data directory or input file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("json", "table"), default="table")
        p.add_argument("--seed", type=int)
        return p

    common(sub.add_parser("synth", help="generate synthetic household bundles")).set_defaults(func=cmd_synth)
    common(sub.add_parser("run", help="run an experiment config")).set_defaults(func=cmd_run)
    p = common(sub.add_parser("score", help="transfer metrics from a per-house results CSV"))
    p.add_argument("results", nargs="?")
    p.set_defaults(func=cmd_score)
    p = common(sub.add_parser("report", help="render a stored run"))
    p.add_argument("run", nargs="?")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "synth" and not args.out:
        parser.error("synth needs --out")
    try:
        return args.func(args)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataError, NilmTransferError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
