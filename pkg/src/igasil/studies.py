"""Comparative experiment protocols.

Each study fans out a list of fully specified runs (variant, env, seed),
joins on their output directories, and reduces the metrics into a summary
CSV, a report, and an SVG. Completed runs are content-addressed by their
resolved config plus a source fingerprint, so shared baselines are computed
once.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import resolve
from .plotting import read_metrics_csv, render_series
from .trainer import run_campaign, run_name

STUDIES = ("equilibrium", "sample_efficiency", "scer_ablation")

DEFAULT_SEEDS = (1, 2, 3, 4, 5)

# calibrated settings for the one-shot matrix game: a small positive buffer
# fills with pure best-return episodes during warmup, and the imitation
# weight must be allowed to outgrow the -30 miss-coordination penalty.
# warmup length is load-bearing: 1000 uniform episodes keep enough minority
# actions in the replay for the late escape from the shadowed equilibrium
CLIMBING_STUDY_OVERRIDES = {
    "env": "climbing",
    "episodes": 20000,
    "train.warmup": 1000,
    "buffers.scer_capacity": 16,
    "gasil.lambda_max": 2.0,
}

# the crossing-time comparison uses a shorter shared warmup so the constant
# warmup offset does not dominate the measured ratio
SAMPLE_EFFICIENCY_OVERRIDES = {**CLIMBING_STUDY_OVERRIDES, "train.warmup": 500}

# pursuit-task calibration: the stock physics make random-exploration
# captures a ~0% event, which would turn the igasil-vs-iddpg comparison
# into a coin flip; a wider touch radius and slower (still faster-than-
# rescuer) animals give exploration a ~1-2% capture rate to amplify
RESCUE_STUDY_OVERRIDES = {
    "env": "rescue",
    "episodes": 50000,
    "train.warmup": 2000,
    "env.rescue.touch_radius": 0.2,
    "env.rescue.animal_accel": 2.0,
    "env.rescue.animal_max_speed": 1.05,
}

SAMPLE_EFFICIENCY_THRESHOLD = 4.5
SAMPLE_EFFICIENCY_WINDOW = 100


# modules whose bytes determine a run's outputs; protocol/report code
# (studies, cli, plotting, selftest) can change without invalidating runs
_RUN_DEFINING = ("__init__.py", "net.py", "buffers.py", "envs.py", "gasil.py",
                 "agents.py", "trainer.py", "config.py")


def _source_fingerprint():
    """Hash of the run-defining sources; stale cached runs never survive a code change."""
    pkg = Path(__file__).parent
    h = hashlib.sha256()
    for name in _RUN_DEFINING:
        h.update(name.encode())
        h.update((pkg / name).read_bytes())
    return h.hexdigest()[:12]


def ensure_run(overrides, root):
    """Run a campaign unless an identical completed run already exists."""
    cfg = resolve(overrides={**overrides, "out": str(root)})
    run_dir = Path(root) / _source_fingerprint() / run_name(cfg)
    if (run_dir / "DONE").exists():
        return run_dir
    return run_campaign(cfg, run_dir=run_dir)


def _worker(args):
    overrides, root = args
    return str(ensure_run(overrides, root))


def fan_out(run_specs, root, workers=None):
    """Execute (deduplicated) run specs in parallel processes; order-preserving."""
    keyed = {tuple(sorted(spec.items())): spec for spec in run_specs}
    unique = list(keyed.values())
    workers = workers or min(os.cpu_count() or 1, len(unique)) or 1
    results = {}
    if workers <= 1 or len(unique) == 1:
        for spec in unique:
            results[tuple(sorted(spec.items()))] = _worker((spec, root))
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for key, path in zip(
                keyed.keys(), ex.map(_worker, [(spec, root) for spec in unique])
            ):
                results[key] = path
    return [Path(results[tuple(sorted(spec.items()))]) for spec in run_specs]


# ---------------------------------------------------------------- helpers


def final_window(run_dir):
    """Fields of the last metrics row as a dict of floats."""
    lines = (Path(run_dir) / "metrics.csv").read_text().strip().split("\n")
    header = lines[0].split(",")
    if len(lines) < 2:
        return None
    values = [float(v) for v in lines[-1].split(",")]
    return dict(zip(header, values))


def episode_returns(run_dir):
    rows = (Path(run_dir) / "episodes.csv").read_text().strip().split("\n")[1:]
    return np.array([float(r.split(",")[1]) for r in rows])


def crossing_episode(returns, threshold, window=SAMPLE_EFFICIENCY_WINDOW):
    """First episode whose trailing `window`-episode mean reaches threshold."""
    if returns.size < window:
        return None
    csum = np.concatenate([[0.0], np.cumsum(returns)])
    means = (csum[window:] - csum[:-window]) / window
    hits = np.flatnonzero(means >= threshold)
    return None if hits.size == 0 else int(hits[0]) + window


def classify_equilibrium(row):
    """optimal: settled on the (a,a) payoff; shadowed: a safe suboptimal
    equilibrium; none: never consolidated anything worth 5."""
    if row is None:
        return "none"
    if row["outcome_aa"] >= 0.9 and row["mean_return"] >= 10.0:
        return "optimal"
    if row["mean_return"] >= 5.0:
        return "shadowed"
    return "none"


def _write_report(study_dir, name, summary_header, summary_rows, notes, svg):
    study_dir = Path(study_dir)
    study_dir.mkdir(parents=True, exist_ok=True)
    (study_dir / "summary.csv").write_text(
        summary_header + "\n" + "\n".join(summary_rows) + "\n"
    )
    (study_dir / "report.txt").write_text("\n".join(notes) + "\n")
    (study_dir / "curves.svg").write_text(svg)
    return study_dir


def _curves_for(run_dirs, labels, column="mean_return", title=None):
    series = [read_metrics_csv(Path(d) / "metrics.csv", column) for d in run_dirs]
    return render_series(series, labels, y_label=column, title=title)


# ---------------------------------------------------------------- studies


def study_equilibrium(root, seeds=DEFAULT_SEEDS, envs=("climbing",), overrides=None,
                      workers=None):
    """Which equilibrium each algorithm settles on, per env and seed.

    On the climbing game the baseline is plain independent AC; on the rescue
    task it is independent DDPG. The interesting comparison is whether the
    self-imitating variant reaches the high-payoff high-risk joint action.
    """
    overrides = overrides or {}
    specs, tags = [], []
    for env in envs:
        study_base = CLIMBING_STUDY_OVERRIDES if env == "climbing" else RESCUE_STUDY_OVERRIDES
        baseline = "iac" if env == "climbing" else "iddpg"
        for variant in ("igasil", baseline):
            for seed in seeds:
                specs.append({**study_base, **overrides, "env": env,
                              "variant": variant, "seed": seed})
                tags.append((env, variant, seed))
    dirs = fan_out(specs, root, workers)

    rows = ["env,variant,seed,final_mean_return,outcome_aa,outcome_cc,equilibrium,run_dir"]
    report = {}
    notes = [f"equilibrium selection study: seeds {list(seeds)}"]
    for (env, variant, seed), d in zip(tags, dirs):
        fw = final_window(d)
        label = classify_equilibrium(fw) if env == "climbing" else ""
        report[(env, variant, seed)] = {"final_mean": fw["mean_return"] if fw else None,
                                        "outcome_aa": fw["outcome_aa"] if fw else None,
                                        "class": label, "dir": str(d)}
        rows.append(
            f"{env},{variant},{seed},{fw['mean_return']:.6g},{fw['outcome_aa']:.6g},"
            f"{fw['outcome_cc']:.6g},{label},{d}"
        )
    for env in envs:
        for variant in ("igasil", "iac" if env == "climbing" else "iddpg"):
            finals = [report[(env, variant, s)]["final_mean"] for s in seeds]
            notes.append(f"{env}/{variant} final-window means: "
                         + ", ".join(f"{v:.2f}" for v in finals))
    svg = _curves_for(dirs, [f"{e}-{v}-s{s}" for e, v, s in tags],
                      title="final-window return, self-imitation vs baseline")
    study_dir = _write_report(
        Path(root) / ("study_equilibrium_" + "_".join(envs)), "equilibrium",
        rows[0], rows[1:], notes, svg,
    )
    return {"report": report, "dir": study_dir, "seeds": list(seeds), "envs": list(envs)}


def study_sample_efficiency(root, seeds=DEFAULT_SEEDS, overrides=None, workers=None):
    """Episodes until the 100-episode mean return reaches the threshold,
    replay-driven versus current-episode-only updates."""
    overrides = overrides or {}
    specs, tags = [], []
    for variant in ("igasil", "igasil_onpolicy"):
        for seed in seeds:
            specs.append({**SAMPLE_EFFICIENCY_OVERRIDES, **overrides,
                          "variant": variant, "seed": seed})
            tags.append((variant, seed))
    dirs = fan_out(specs, root, workers)
    by_tag = dict(zip(tags, dirs))

    rows = ["seed,offpolicy_episodes,onpolicy_episodes,ratio"]
    ratios, infinite, per_seed = [], [], {}
    for seed in seeds:
        off = crossing_episode(episode_returns(by_tag[("igasil", seed)]),
                               SAMPLE_EFFICIENCY_THRESHOLD)
        on = crossing_episode(episode_returns(by_tag[("igasil_onpolicy", seed)]),
                              SAMPLE_EFFICIENCY_THRESHOLD)
        if off is None:
            ratio_text, ratio = "inconclusive", None
        elif on is None:
            ratio_text, ratio = "inf", None
            infinite.append(seed)
        else:
            ratio = on / off
            ratio_text = f"{ratio:.4g}"
            ratios.append(ratio)
        per_seed[seed] = {"off": off, "on": on, "ratio": ratio}
        rows.append(f"{seed},{off},{on},{ratio_text}")
    median = float(np.median(ratios)) if ratios else None
    notes = [
        f"threshold: trailing {SAMPLE_EFFICIENCY_WINDOW}-episode mean >= "
        f"{SAMPLE_EFFICIENCY_THRESHOLD}",
        f"median on/off ratio over finite seeds: {median}",
        "reference magnitude with demonstration-seeded positive buffers on the "
        "pursuit task: about 10x; not asserted here.",
        "positive buffers here are self-seeded from warmup exploration.",
    ]
    if infinite:
        notes.append(f"seeds with no on-policy crossing (excluded from median): {infinite}")
    svg = _curves_for(list(dirs), [f"{v}-s{s}" for v, s in tags],
                      title="return, replay updates vs current-episode updates")
    study_dir = _write_report(Path(root) / "study_sample_efficiency", "sample_efficiency",
                              rows[0], rows[1:], notes, svg)
    return {"per_seed": per_seed, "median_ratio": median, "infinite": infinite,
            "dir": study_dir}


def study_scer_ablation(root, seeds=DEFAULT_SEEDS, overrides=None, workers=None):
    """Plain AC vs whole-trajectory positive buffer vs sub-curriculum replay."""
    overrides = overrides or {}
    variants = ("iac", "iac_per", "igasil")
    specs, tags = [], []
    for variant in variants:
        for seed in seeds:
            specs.append({**CLIMBING_STUDY_OVERRIDES, **overrides,
                          "variant": variant, "seed": seed})
            tags.append((variant, seed))
    dirs = fan_out(specs, root, workers)
    by_tag = dict(zip(tags, dirs))

    rows = ["seed,iac,iac_per,igasil,ordering_holds"]
    per_seed = {}
    for seed in seeds:
        finals = {v: final_window(by_tag[(v, seed)])["mean_return"] for v in variants}
        holds = finals["igasil"] >= finals["iac_per"] >= finals["iac"]
        per_seed[seed] = {"finals": finals, "ordering_holds": bool(holds)}
        rows.append(f"{seed},{finals['iac']:.6g},{finals['iac_per']:.6g},"
                    f"{finals['igasil']:.6g},{holds}")
    notes = [
        "final-window mean return per variant; ordering claim: igasil >= iac_per >= iac",
        "on one-step episodes iac_per and igasil coincide exactly "
        "(no proper sub-trajectories exist), so the ordering reduces to "
        "positive-buffer vs none; multi-step tasks separate them.",
    ]
    stored_svg = _curves_for(
        [by_tag[(v, seeds[0])] for v in ("iac_per", "igasil")],
        [f"{v}-s{seeds[0]}" for v in ("iac_per", "igasil")],
        column="scer_max",
        title="max stored positive-buffer return (first seed)",
    )
    svg = _curves_for(list(dirs), [f"{v}-s{s}" for v, s in tags],
                      title="return by replay ablation")
    study_dir = _write_report(Path(root) / "study_scer_ablation", "scer_ablation",
                              rows[0], rows[1:], notes, svg)
    (study_dir / "stored_returns.svg").write_text(stored_svg)
    return {"per_seed": per_seed, "dir": study_dir}


def run_study(name, root, seeds=DEFAULT_SEEDS, overrides=None, workers=None,
              envs=("climbing",)):
    if name == "equilibrium":
        return study_equilibrium(root, seeds, envs=envs, overrides=overrides,
                                 workers=workers)
    if name == "sample_efficiency":
        return study_sample_efficiency(root, seeds, overrides=overrides, workers=workers)
    if name == "scer_ablation":
        return study_scer_ablation(root, seeds, overrides=overrides, workers=workers)
    raise ValueError(f"unknown study {name!r}; valid: {', '.join(STUDIES)}")
