"""Command-line entry point.

Commands: train (single runs and studies), eval, replay-dump, plot,
selftest. Exit codes: 0 success, 1 usage error, 2 runtime failure,
3 selftest failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, help_text, parse_bool, parse_config_file, resolve
from .plotting import plot_to_file
from .selftest import run_selftest
from .studies import STUDIES, run_study
from .trainer import load_run_trainer, run_campaign

USAGE = """\
usage: igasil <command> [options]

commands:
  train        run one training campaign, or a named study with --study
  eval         greedy evaluation of a finished run's checkpoints
  replay-dump  write one agent's trajectories as CSV
  plot         render metrics CSVs as an SVG learning curve
  selftest     fast invariant suite (gradients, heap oracle, payoffs, determinism)

run `igasil <command> --help` for command options.
"""

TRAIN_HELP = """\
usage: igasil train [--config FILE] [--study NAME] [--<key> <value> ...]

  --config FILE     flat `key = value` config file (flags override it)
  --study NAME      run a study instead of a single campaign:
                    equilibrium | sample_efficiency | scer_ablation
  --seeds CSV       study seeds (default 1,2,3,4,5)
  --study-envs CSV  envs for the equilibrium study (default climbing)
  --workers N       parallel run processes for studies (default: cpu count)

any config key doubles as a flag, e.g. --env climbing --variant igasil --seed 1

""" + help_text()

EVAL_HELP = """\
usage: igasil eval --run DIR [--episodes N] [--seed S] [--checkpoint NAME]

loads the run's config and checkpoints, rolls greedy episodes (no learning,
no buffer writes) and prints the mean return and outcome histogram.
"""

DUMP_HELP = """\
usage: igasil replay-dump --run DIR --out FILE [--episodes N] [--agent I]
                          [--explore true] [--seed S]

writes `episode,step,obs...,action...,reward,done` lines for one agent's
trajectories generated from the run's final checkpoint.
"""

PLOT_HELP = """\
usage: igasil plot --out FILE [--column NAME] METRICS_CSV [METRICS_CSV ...]

renders one mean-return curve per input CSV (legend = parent directory
names). --column selects any other metrics column, e.g. scer_max.
"""


def _int_opt(opts, key, default):
    try:
        return int(opts.get(key, default))
    except ValueError:
        raise ConfigError(f"--{key} expects an integer, got {opts[key]!r}") from None


def _parse_kv(argv, specials):
    """Split argv into (special options, config overrides, positionals)."""
    opts, overrides, positional = {}, {}, []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--help" or tok == "-h":
            opts["help"] = True
            i += 1
            continue
        if tok.startswith("--"):
            key = tok[2:]
            if i + 1 >= len(argv):
                raise ConfigError(f"flag --{key} needs a value")
            value = argv[i + 1]
            if key in specials:
                opts[key] = value
            else:
                overrides[key] = value  # validated against the schema at resolve()
            i += 2
        else:
            positional.append(tok)
            i += 1
    return opts, overrides, positional


def cmd_train(argv):
    specials = ("config", "study", "seeds", "study-envs", "workers")
    opts, overrides, positional = _parse_kv(argv, specials)
    if opts.get("help"):
        print(TRAIN_HELP)
        return 0
    if positional:
        raise ConfigError(f"unexpected arguments: {positional}")
    file_values = parse_config_file(opts["config"]) if "config" in opts else None

    if "study" in opts:
        name = opts["study"]
        if name not in STUDIES:
            raise ConfigError(f"unknown study {name!r}; valid: {', '.join(STUDIES)}")
        try:
            seeds = tuple(int(s) for s in opts.get("seeds", "1,2,3,4,5").split(","))
        except ValueError:
            raise ConfigError(f"--seeds expects comma-separated integers, got {opts['seeds']!r}") from None
        envs = tuple(opts.get("study-envs", "climbing").split(","))
        workers = _int_opt(opts, "workers", 0) or None
        merged = dict(file_values or {})
        merged.update(overrides)
        root = merged.pop("out", None) or resolve()["out"]
        result = run_study(name, root, seeds=seeds, overrides=merged,
                           workers=workers, envs=envs)
        print(f"study written to {result['dir']}")
        return 0

    cfg = resolve(file_values, overrides)
    run_dir = run_campaign(cfg)
    print(f"run written to {run_dir}")
    return 0


def cmd_eval(argv):
    opts, overrides, positional = _parse_kv(argv, ("run", "episodes", "seed", "checkpoint"))
    if opts.get("help") or "run" not in opts:
        print(EVAL_HELP)
        return 0 if opts.get("help") else 1
    if overrides or positional:
        raise ConfigError(f"unexpected arguments: {list(overrides) + positional}")
    episodes = _int_opt(opts, "episodes", 100)
    trainer = load_run_trainer(opts["run"], checkpoint=opts.get("checkpoint", "final"))
    rng = np.random.default_rng(_int_opt(opts, "seed", 0))
    mean, hist = trainer.evaluate(episodes, rng=rng)
    if mean is None:
        print("no data (0 evaluation episodes)")
        return 0
    print(f"mean return over {episodes} episodes: {mean:.6g}")
    for code, count in hist.items():
        print(f"  outcome {code}: {count} ({count / episodes:.1%})")
    return 0


def cmd_replay_dump(argv):
    opts, overrides, positional = _parse_kv(
        argv, ("run", "out", "episodes", "agent", "explore", "seed")
    )
    if opts.get("help") or "run" not in opts or "out" not in opts:
        print(DUMP_HELP)
        return 0 if opts.get("help") else 1
    if overrides or positional:
        raise ConfigError(f"unexpected arguments: {list(overrides) + positional}")
    episodes = _int_opt(opts, "episodes", 10)
    agent_idx = _int_opt(opts, "agent", 0)
    try:
        explore = parse_bool(opts.get("explore", "false"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    trainer = load_run_trainer(opts["run"])
    if not 0 <= agent_idx < len(trainer.lanes):
        raise ConfigError(f"agent index {agent_idx} out of range")
    rng = np.random.default_rng(_int_opt(opts, "seed", 0))

    obs_dim = trainer.env.obs_dim
    act_cols = ["action"] if trainer.env.discrete else [
        f"action_{i}" for i in range(trainer.env.act_dim)
    ]
    header = (["episode", "step"] + [f"obs_{i}" for i in range(obs_dim)]
              + act_cols + ["reward", "done"])
    lines = [",".join(header)]
    for ep in range(episodes):
        trajs, _, _ = trainer.run_episode(explore=explore, collect=False, rng=rng)
        for step, tr in enumerate(trajs[agent_idx].transitions):
            action = [str(int(tr.action))] if trainer.env.discrete else [
                format(v, ".17g") for v in tr.action
            ]
            fields = ([str(ep + 1), str(step)]
                      + [format(v, ".17g") for v in tr.obs]
                      + action
                      + [format(tr.reward, ".17g"), "1" if tr.done else "0"])
            lines.append(",".join(fields))
    Path(opts["out"]).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} transitions to {opts['out']}")
    return 0


def cmd_plot(argv):
    opts, overrides, positional = _parse_kv(argv, ("out", "column"))
    if opts.get("help") or "out" not in opts or not positional:
        print(PLOT_HELP)
        return 0 if opts.get("help") else 1
    if overrides:
        raise ConfigError(f"unexpected arguments: {list(overrides)}")
    plot_to_file(positional, opts["out"], column=opts.get("column", "mean_return"))
    print(f"wrote {opts['out']}")
    return 0


def cmd_selftest(argv):
    opts, overrides, positional = _parse_kv(argv, ())
    if opts.get("help"):
        print("usage: igasil selftest\n\nruns the fast invariant suite; exit 3 on failure.")
        return 0
    if overrides or positional:
        raise ConfigError(f"unexpected arguments: {list(overrides) + positional}")
    return 0 if run_selftest() else 3


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "replay-dump": cmd_replay_dump,
    "plot": cmd_plot,
    "selftest": cmd_selftest,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("--help", "-h", "help"):
        print(USAGE)
        return 0
    command, rest = argv[0], argv[1:]
    if command not in COMMANDS:
        print(f"unknown command {command!r}\n\n{USAGE}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[command](rest)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, FloatingPointError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
