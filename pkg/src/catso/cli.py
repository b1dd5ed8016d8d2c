"""Command line entry point.

    catso run --dataset data/warfarin.csv --policy catso,tsrc --budget 20%,40%,60% --out results/
    catso run --config warfarin.cfg --v sweep --best-v
    catso synth --events 20000 --out data/skills.csv

Every ``run`` flag accepts a comma list; the cartesian product is swept.
Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .environments import synth_skills, write_csv
from .errors import ConfigError, DataError, NumericalError
from .harness import SUMMARY_COLUMNS, best_by_v, expand_configs, parse_config_text, sweep

V_SWEEP = "0.1,0.25,0.5,1.0"
SKILL_GROUP_SIZES = "181,9,4,7,6,27,110,297,30"

# flag -> config key, for flags that map one-to-one onto ExperimentConfig
RUN_FLAGS = {
    "dataset": "dataset",
    "policy": "policy",
    "budget": "budget",
    "stages": "stages",
    "v": "v",
    "runs": "runs",
    "seed": "seed",
    "window": "window",
    "max_events": "max_events",
    "label_column": "label_column",
    "groups": "groups",
    "known_fraction": "known_fraction",
    "epoch": "epoch",
    "min_decay": "min_decay",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes are config errors; exit code 2 is reserved for bad data
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: config error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    p = _Parser(prog="catso", description=__doc__.split("\n")[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", parents=[common], help="run a policy x dataset x budget sweep")
    run.add_argument("--config", help="key = value settings file; flags override it")
    for flag in RUN_FLAGS:
        run.add_argument("--" + flag.replace("_", "-"), dest=flag)
    run.add_argument("--nonstationary", nargs="?", const="true", help="drift the unknown context (true/false)")
    run.add_argument("--out", help="directory for summary.csv, runs.jsonl and trajectories/")
    run.add_argument("--jobs", type=int, default=1, help="worker processes across runs")
    run.add_argument("--best-v", action="store_true", help="print only the best v of each cell")

    syn = sub.add_parser("synth", parents=[common], help="write a synthetic skill-orchestration dataset")
    syn.add_argument("--events", type=int, default=20_000)
    syn.add_argument("--group-sizes", default=SKILL_GROUP_SIZES, help="comma list, one size per skill")
    syn.add_argument("--query-dim", type=int, default=50)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True, help="CSV path; the schema goes next to it as .groups")
    return p


def _settings(args) -> dict[str, list[str]]:
    settings: dict[str, list[str]] = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        settings.update(parse_config_text(path.read_text()))
    for flag, key in RUN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            settings[key] = [s.strip() for s in value.split(",")]
    if args.nonstationary is not None:
        settings["nonstationary"] = [args.nonstationary]
    if settings.get("v") == ["sweep"]:
        settings["v"] = V_SWEEP.split(",")
    settings.pop("out", None)
    if not settings.get("dataset") or settings["dataset"] == [""]:
        raise ConfigError("no dataset given (--dataset or 'dataset = ...' in --config)")
    return settings


def _out_dir(args) -> str | None:
    if args.out:
        return args.out
    if args.config:
        for line in Path(args.config).read_text().splitlines():
            key, _, value = line.split("#", 1)[0].partition("=")
            if key.strip() == "out" and value.strip():
                return value.strip()
    return None


def _cmd_run(args) -> None:
    configs = expand_configs(_settings(args))
    summaries = sweep(configs, out=_out_dir(args), jobs=args.jobs)
    if args.best_v:
        summaries = best_by_v(summaries)
    print("\t".join(SUMMARY_COLUMNS))
    for s in summaries:
        row = s.row()
        print("\t".join(str(row[c]) for c in SUMMARY_COLUMNS))


def _cmd_synth(args) -> None:
    try:
        sizes = [int(s) for s in args.group_sizes.split(",")]
    except ValueError:
        raise ConfigError(f"bad --group-sizes {args.group_sizes!r}") from None
    try:
        ds = synth_skills(args.events, len(sizes), sizes, args.query_dim, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    path = write_csv(ds, args.out)
    print(f"wrote {ds.n_events} events, {ds.n_features} features to {path}")


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.command == "run":
            _cmd_run(args)
        else:
            _cmd_synth(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
