"""Flat key=value configuration with documented defaults.

Every tunable in the package lives here under a dotted key. Resolution
order: schema defaults, then config file entries, then command-line
overrides. Unknown keys and malformed values are startup errors, and the
fully resolved config is echoed verbatim into each run directory.
"""

from __future__ import annotations

import os

ENVS = ("climbing", "rescue")
VARIANTS = ("igasil", "iac", "iac_per", "iddpg", "igasil_onpolicy")
REWARD_FORMS = ("unbiased", "pos_biased", "neg_biased")

# variants that carry a discriminator and positive buffer
DISC_VARIANTS = ("igasil", "iac_per", "igasil_onpolicy")
# variants legal per environment (discrete learners on climbing, ddpg on rescue)
ENV_VARIANTS = {
    "climbing": ("igasil", "iac", "iac_per", "igasil_onpolicy"),
    "rescue": ("igasil", "iddpg"),
}


class ConfigError(Exception):
    """Invalid key, value or combination; reported before any training."""


def parse_bool(text):
    t = str(text).strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (default, type, one-line doc)
SCHEMA = {
    "env": ("climbing", str, "environment: climbing | rescue"),
    "variant": ("igasil", str, "algorithm: igasil | iac | iac_per | iddpg | igasil_onpolicy"),
    "episodes": (20000, int, "training episodes"),
    "seed": (1, int, "master seed; fully determines a run"),
    "out": ("", str, "output root (default: $IGASIL_OUT or ./runs)"),
    "train.window": (1000, int, "metrics aggregation window in episodes"),
    "train.warmup": (500, int, "exploration-only episodes before updates start"),
    "train.updates_per_episode": (0, int, "agent updates per episode; 0 = auto (1 climbing, 4 rescue)"),
    "train.eval_interval": (0, int, "greedy evaluation every N episodes; 0 = off"),
    "train.eval_episodes": (100, int, "episodes per evaluation"),
    "train.checkpoint_interval": (0, int, "checkpoint every N episodes; 0 = final only"),
    "net.hidden": (64, int, "hidden width of every two-hidden-layer net"),
    "net.clip_norm": (10.0, float, "global gradient-norm clip before Adam"),
    "buffers.ring_capacity": (0, int, "ring buffer transitions; 0 = auto (10000 climbing, 100000 rescue)"),
    "buffers.scer_capacity": (64, int, "positive buffer capacity k (trajectories)"),
    "buffers.n_subs": (4, int, "sub-trajectories offered per episode"),
    "agent.gamma": (0.95, float, "discount factor"),
    "agent.tau": (0.01, float, "target network soft-update rate"),
    "agent.batch": (64, int, "minibatch size for every update"),
    "agent.actor_lr": (1e-4, float, "actor Adam step size"),
    "agent.critic_lr": (1e-3, float, "critic Adam step size"),
    "agent.entropy_coef": (0.01, float, "policy entropy bonus weight (discrete learners)"),
    "agent.sigma": (0.1, float, "initial Gaussian exploration noise (ddpg)"),
    "agent.sigma_final": (0.02, float, "final exploration noise after linear anneal (ddpg)"),
    "agent.importance_weighting": (False, bool, "truncated importance ratios for replayed policy updates"),
    "agent.is_clip": (2.0, float, "importance ratio truncation c"),
    "gasil.lambda0": (0.1, float, "initial imitation reward weight"),
    "gasil.growth": (0.0, float, "lambda growth factor per episode; 0 = auto (saturate at 30% of budget)"),
    "gasil.lambda_max": (1.0, float, "imitation weight cap"),
    "gasil.disc_steps": (2, int, "discriminator ascent steps per episode"),
    "gasil.lr": (1e-3, float, "discriminator Adam step size"),
    "gasil.reward_form": ("unbiased", str, "imitation reward: unbiased | pos_biased | neg_biased"),
    "gasil.normalize_obs": (True, bool, "whiten discriminator observations by running mean/std"),
    "env.rescue.dt": (0.1, float, "integration step"),
    "env.rescue.damping": (0.25, float, "velocity damping per step"),
    "env.rescue.rescuer_accel": (3.0, float, "rescuer acceleration gain"),
    "env.rescue.rescuer_max_speed": (1.0, float, "rescuer speed limit"),
    "env.rescue.animal_accel": (4.0, float, "animal acceleration gain"),
    "env.rescue.animal_max_speed": (1.3, float, "animal speed limit (faster than rescuers)"),
    "env.rescue.touch_radius": (0.1, float, "contact distance"),
    "env.rescue.horizon": (50, int, "episode step limit"),
    "env.rescue.t_hold": (8, int, "steps a hold lasts before the partner must arrive"),
    "env.rescue.min_separation": (0.2, float, "minimum pairwise spawn distance"),
    "env.rescue.boundary_margin": (0.1, float, "wall band where animal flight eases off"),
    "env.rescue.animal_weights": ("", str, "directory of animal0..2.mlp policy nets; empty = scripted flee"),
}

_PARSERS = {int: int, float: float, str: str, bool: parse_bool}


def defaults():
    return {k: v[0] for k, v in SCHEMA.items()}


def parse_value(key, text):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r} (see --help for the full list)")
    _, typ, _ = SCHEMA[key]
    if isinstance(text, typ) and not isinstance(text, str):
        return text
    try:
        return _PARSERS[typ](str(text))
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r} (expected {typ.__name__})") from None


def parse_config_file(path):
    """Flat `key = value` lines; # starts a comment."""
    values = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        values[key] = parse_value(key, value.strip())
    return values


def resolve(file_values=None, overrides=None):
    """Merge defaults < file < overrides, validate, and fill auto values."""
    cfg = defaults()
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            cfg[key] = parse_value(key, value)

    if cfg["env"] not in ENVS:
        raise ConfigError(f"unknown env {cfg['env']!r}; valid: {', '.join(ENVS)}")
    if cfg["variant"] not in VARIANTS:
        raise ConfigError(f"unknown variant {cfg['variant']!r}; valid: {', '.join(VARIANTS)}")
    if cfg["variant"] not in ENV_VARIANTS[cfg["env"]]:
        raise ConfigError(
            f"variant {cfg['variant']!r} is not defined on env {cfg['env']!r}; "
            f"valid there: {', '.join(ENV_VARIANTS[cfg['env']])}"
        )
    if cfg["gasil.reward_form"] not in REWARD_FORMS:
        raise ConfigError(
            f"unknown reward form {cfg['gasil.reward_form']!r}; valid: {', '.join(REWARD_FORMS)}"
        )
    for key in ("episodes", "train.window", "agent.batch", "buffers.scer_capacity"):
        if cfg[key] < (0 if key == "episodes" else 1):
            raise ConfigError(f"{key} must be positive (got {cfg[key]})")

    rescue = cfg["env"] == "rescue"
    if cfg["train.updates_per_episode"] == 0:
        cfg["train.updates_per_episode"] = 4 if rescue else 1
    if cfg["buffers.ring_capacity"] == 0:
        cfg["buffers.ring_capacity"] = 100_000 if rescue else 10_000
    if cfg["gasil.growth"] == 0.0:
        from .gasil import ImitationSchedule

        cfg["gasil.growth"] = ImitationSchedule.auto(
            cfg["gasil.lambda0"], cfg["gasil.lambda_max"], max(cfg["episodes"], 1)
        ).growth
    elif cfg["gasil.growth"] < 1.0:
        raise ConfigError("gasil.growth must be >= 1 (or 0 for auto)")
    if not cfg["out"]:
        cfg["out"] = os.environ.get("IGASIL_OUT", "runs")
    return cfg


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def serialize(cfg):
    """Deterministic text form written into every run directory."""
    return "\n".join(f"{k} = {format_value(cfg[k])}" for k in sorted(cfg)) + "\n"


def help_text():
    lines = ["config keys (flag form: --<key> <value>):"]
    for key in sorted(SCHEMA):
        default, typ, doc = SCHEMA[key]
        lines.append(f"  --{key:<34} {doc} [default: {format_value(default)}]")
    return "\n".join(lines)
