"""Command-line interface: reproducible, config-driven runs with file outputs.

Exit codes: 0 success, 2 configuration error (the message names the offending
field), 1 runtime failure.  The CHUNKSEG_SEED environment variable overrides
the config file's base seed; the --seed flag overrides both.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys
import time

from . import __version__
from .agent import AgentConfig
from .experiment import (ExperimentConfig, extract_grammar, fit_logistic,
                         run_parse_frequency_experiment, run_population)
from .grammar import BUILTIN_GRAMMARS, GrammarError, builtin_grammar, load_grammar_file
from . import reporting

SEED_ENV_VAR = "CHUNKSEG_SEED"

_ALGORITHM_NAMES = {"q": "q_learning", "q_learning": "q_learning",
                    "rw": "rw_q_learning", "rw_q_learning": "rw_q_learning"}
_BORDER_NAMES = {"continuous": "continuous", "next": "next_sentence",
                 "next_sentence": "next_sentence"}


class ConfigError(ValueError):
    pass


def _parse_sizes(text: str) -> dict[str, int]:
    sizes = {}
    for item in text.replace(",", " ").split():
        name, _, value = item.partition("=")
        if not value:
            raise ConfigError(f"class size '{item}' must look like NAME=SIZE")
        sizes[name.strip()] = int(value)
    return sizes


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def load_config(path: str) -> ExperimentConfig:
    """Read an INI-style run configuration (sections: grammar, agent, run)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        grammar_section = parser["grammar"] if parser.has_section("grammar") else {}
        agent_section = parser["agent"] if parser.has_section("agent") else {}
        run_section = parser["run"] if parser.has_section("run") else {}

        agent = AgentConfig(
            alpha=float(agent_section.get("alpha", 0.1)),
            beta=float(agent_section.get("beta", 1.9)),
            r_plus=float(agent_section.get("r_plus", 25.0)),
            r_minus=float(agent_section.get("r_minus", -10.0)),
            q_b=float(agent_section.get("q_b", 1.0)),
            q_c=float(agent_section.get("q_c", -1.0)),
            algorithm=_ALGORITHM_NAMES[agent_section.get("algorithm", "q")],
            border_condition=_BORDER_NAMES[agent_section.get("border", "continuous")],
            update_order=agent_section.get("update_order", "in_order"),
        )
        parse_window = None
        if "parse_window" in run_section:
            window = _parse_int_list(run_section["parse_window"])
            if len(window) != 2:
                raise ConfigError("parse_window must be 'start, end'")
            parse_window = (window[0], window[1])
        config = ExperimentConfig(
            grammar=grammar_section.get("name", "nvn"),
            class_sizes=_parse_sizes(grammar_section.get("sizes", "")),
            agent=agent,
            population_size=int(run_section.get("agents", 100)),
            total_trials=int(run_section.get("trials", 4000)),
            base_seed=int(run_section.get("seed", 0)),
            snapshot_trials=_parse_int_list(run_section.get("snapshots", "")),
            extraction_threshold=float(run_section.get("t_g", 5.0)),
            parse_window=parse_window,
            smoothing_window=int(run_section.get("smoothing_window", 51)),
            guard_limit=int(run_section.get("guard_limit", 64)),
            snapshot_agents=run_section.get("snapshot_agents", "focal"),
            keep_tables=run_section.get("keep_tables", "all"),
            episode_log=run_section.getboolean("episode_log", False)
            if hasattr(run_section, "getboolean") else False,
            workers=int(run_section.get("workers", 1)),
        )
    except KeyError as exc:
        raise ConfigError(f"unknown value for field {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def _config_echo(config: ExperimentConfig) -> dict:
    echo = dataclasses.asdict(config)
    if not isinstance(echo["grammar"], str):
        echo["grammar"] = config.grammar.name or "<inline>"
    return echo


def _resolve_grammar_arg(name: str, sizes: dict[str, int]):
    if os.path.exists(name):
        return load_grammar_file(name)
    return builtin_grammar(name, sizes)


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.grammar is not None:
        config.grammar = args.grammar
    if args.trials is not None:
        config.total_trials = int(args.trials)
    if args.agents is not None:
        config.population_size = int(args.agents)
    if args.algorithm is not None:
        config.agent.algorithm = _ALGORITHM_NAMES[args.algorithm]
    if args.border is not None:
        config.agent.border_condition = _BORDER_NAMES[args.border]
    if args.tg is not None:
        config.extraction_threshold = float(args.tg)
    if args.snapshots is not None:
        config.snapshot_trials = _parse_int_list(args.snapshots)
    if SEED_ENV_VAR in os.environ:
        config.base_seed = int(os.environ[SEED_ENV_VAR])
    if args.seed is not None:
        config.base_seed = int(args.seed)
    if args.workers is not None:
        config.workers = int(args.workers)
    try:
        config.validate()
        pcfg = config.resolve_grammar()
    except (ValueError, GrammarError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    started = time.monotonic()
    result = run_population(config)
    outputs = []

    def out_path(name: str) -> str:
        outputs.append(name)
        return os.path.join(args.out, name)

    reporting.write_curve_csv(out_path("curve.csv"), result.curve)
    for trial in sorted(result.snapshots):
        rules = extract_grammar(result.focal_snapshot(trial),
                                config.extraction_threshold, pcfg)
        reporting.write_rules_csv(out_path(f"rules_{trial}.csv"), rules)
    fit = fit_logistic(result.curve.fraction_correct)
    reporting.write_fit_json(out_path("fit.json"), fit)
    reporting.write_curve_svg(out_path("curve.svg"), result.curve, config.smoothing_window)
    if result.final_tables[0] is not None:
        reporting.save_qtable_csv(out_path("qtable_final.csv"), result.final_tables[0])
    if result.focal_episodes is not None:
        reporting.write_episode_log_csv(out_path("episodes.csv"), result.focal_episodes)
    if config.parse_window is not None:
        report = run_parse_frequency_experiment(config)
        reporting.write_parses_csv(out_path("parses.csv"), report)
    reporting.write_manifest_json(
        os.path.join(args.out, "run_manifest.json"),
        config_echo=_config_echo(config),
        base_seed=config.base_seed,
        agent_seeds=result.agent_seeds,
        version=__version__,
        duration_seconds=time.monotonic() - started,
        guard_events=result.guard_events,
        outputs=outputs,
    )
    print(f"wrote {len(outputs) + 1} files to {args.out}")
    return 0


def cmd_extract(args) -> int:
    if not 0.0 < args.tg < args.rplus:
        print(f"error: t_g must lie in (0, r_plus={args.rplus:g}), got {args.tg:g}",
              file=sys.stderr)
        return 2
    pcfg = _resolve_grammar_arg(args.grammar, _parse_sizes(args.sizes or ""))
    table = reporting.load_qtable_csv(args.qtable)
    rules = extract_grammar(table, args.tg, pcfg)
    reporting.write_rules_csv(args.out, rules)
    print(f"extracted {len(rules)} rules to {args.out}")
    return 0


def cmd_fit(args) -> int:
    columns = reporting.read_curve_csv(args.curve)
    if "fraction" not in columns:
        print("error: curve file has no 'fraction' column", file=sys.stderr)
        return 2
    fit = fit_logistic(columns["fraction"])
    if args.out:
        reporting.write_fit_json(args.out, fit)
    print(json.dumps({"k": fit.k, "x0": fit.x0, "learning_time": fit.learning_time,
                      "residual": fit.residual, "ok": fit.ok}))
    return 0


def cmd_plot(args) -> int:
    columns = reporting.read_curve_csv(args.curve)
    if "fraction" not in columns:
        print("error: curve file has no 'fraction' column", file=sys.stderr)
        return 2
    series = [("overall", columns["fraction"])]
    for name in columns:
        if name.startswith("len") and name.endswith("_fraction"):
            length = name[len("len"):-len("_fraction")]
            label = "unaligned (length 0)" if length == "0" else f"length {length}"
            series.append((label, columns[name]))
    reporting.write_curve_svg(args.out, series, args.smoothing)
    print(f"wrote {args.out}")
    return 0


def cmd_grammars(args) -> int:
    for name in sorted(BUILTIN_GRAMMARS):
        factory, class_order = BUILTIN_GRAMMARS[name]
        defaults = factory()
        sizes = ", ".join(f"{c}={defaults.classes[c].size}" for c in class_order)
        structures = " | ".join(
            f"{rule.lhs} -> {' '.join(rule.rhs)} ({rule.probability:g})"
            for rule in defaults.rules)
        print(f"{name}: classes {sizes}")
        print(f"    {structures}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chunkseg",
        description="Learn sentence boundaries in masked word streams by chunking.")
    parser.add_argument("--version", action="version", version=f"chunkseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a population experiment from a config file")
    p_run.add_argument("--config", required=True, help="INI config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override base seed")
    p_run.add_argument("--workers", type=int, default=None, help="parallel agent workers")
    p_run.add_argument("--grammar", default=None, help="override grammar name or file")
    p_run.add_argument("--trials", type=int, default=None)
    p_run.add_argument("--agents", type=int, default=None)
    p_run.add_argument("--algorithm", choices=sorted(_ALGORITHM_NAMES), default=None)
    p_run.add_argument("--border", choices=sorted(_BORDER_NAMES), default=None)
    p_run.add_argument("--tg", type=float, default=None, help="extraction threshold")
    p_run.add_argument("--snapshots", default=None, help="comma list of snapshot trials")
    p_run.set_defaults(handler=cmd_run)

    p_extract = sub.add_parser("extract", help="extract rules from a stored Q-table")
    p_extract.add_argument("qtable", help="qtable CSV written by a run")
    p_extract.add_argument("--tg", type=float, required=True)
    p_extract.add_argument("--grammar", required=True, help="builtin name or grammar file")
    p_extract.add_argument("--sizes", default=None, help="class sizes, e.g. N=5,V=5")
    p_extract.add_argument("--rplus", type=float, default=25.0)
    p_extract.add_argument("--out", default="rules.csv")
    p_extract.set_defaults(handler=cmd_extract)

    p_fit = sub.add_parser("fit", help="fit a logistic learning-time model to a curve.csv")
    p_fit.add_argument("curve")
    p_fit.add_argument("--out", default=None, help="also write fit.json here")
    p_fit.set_defaults(handler=cmd_fit)

    p_plot = sub.add_parser("plot", help="render curve.csv to a standalone SVG")
    p_plot.add_argument("curve")
    p_plot.add_argument("out")
    p_plot.add_argument("--smoothing", type=int, default=51)
    p_plot.set_defaults(handler=cmd_plot)

    p_grammars = sub.add_parser("grammars", help="list built-in grammars")
    p_grammars.set_defaults(handler=cmd_grammars)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, GrammarError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
