"""The training loop shared by every algorithm variant.

One iteration per environment episode: sample a trajectory under the
current policies, store it in both per-agent buffers, fit each agent's
discriminator on positive-vs-replay batches, reshape replayed rewards with
the imitation term, and apply the off-policy actor-critic update. Baseline
variants switch individual stages off; everything an agent touches lives in
its own lane so no update can read a teammate's state.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from . import __version__
from .agents import A2cAgent, Batch, DdpgAgent, stack_batch
from .buffers import RingReplay, SubCurriculumReplay, Trajectory, Transition
from .config import (
    DISC_VARIANTS,
    ConfigError,
    format_value,
    parse_config_file,
    resolve,
    serialize,
)
from .envs import RescueConfig, make_env
from .gasil import Discriminator, ImitationSchedule
from .net import Mlp

METRICS_COLUMNS = (
    "window_end_episode,mean_return,max_return,scer_mean,scer_max,"
    "touch_a,touch_b,touch_c,outcome_aa,outcome_bb,outcome_cc,outcome_other,"
    "lambda_imit,disc_loss"
)
EPISODES_COLUMNS = "episode,return,outcome"

_SHORT = {"catch_a": "a", "catch_b": "b", "catch_c": "c", "on_the_road": "r"}


def outcome_code(outcome):
    return "".join(_SHORT[o] for o in outcome) if outcome else "-"


def config_fingerprint(cfg):
    """Hash of the run-defining config (output root excluded)."""
    text = "\n".join(
        f"{k}={format_value(v)}" for k, v in sorted(cfg.items()) if k != "out"
    )
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def run_name(cfg):
    return f"{cfg['env']}-{cfg['variant']}-s{cfg['seed']}-{config_fingerprint(cfg)}"


class AgentLane:
    """Everything one independent learner owns: nets, buffers, rng streams."""

    def __init__(self, agent, ring, scer, disc, rng_scer, rng_disc, rng_update):
        self.agent = agent
        self.ring = ring
        self.scer = scer
        self.disc = disc
        self.rng_scer = rng_scer
        self.rng_disc = rng_disc
        self.rng_update = rng_update


class Trainer:
    def __init__(self, cfg):
        self.cfg = cfg
        self.variant = cfg["variant"]
        self.uses_disc = self.variant in DISC_VARIANTS
        self.onpolicy = self.variant == "igasil_onpolicy"
        self.gamma = cfg["agent.gamma"]
        self.batch = cfg["agent.batch"]

        self.env = self._build_env(cfg)

        ss = np.random.SeedSequence(cfg["seed"])
        rollout_ss, eval_ss, agents_ss = ss.spawn(3)
        self.rollout_rng = np.random.default_rng(rollout_ss)
        self.eval_rng = np.random.default_rng(eval_ss)
        lane_seeds = agents_ss.spawn(self.env.n_agents * 5)

        self.lanes = []
        for i in range(self.env.n_agents):
            net_ss, disc_ss, scer_ss, dbatch_ss, update_ss = lane_seeds[i * 5:(i + 1) * 5]
            agent = self._build_agent(cfg, np.random.default_rng(net_ss))
            disc = None
            if self.uses_disc:
                act_input = self.env.n_actions if self.env.discrete else self.env.act_dim
                disc = Discriminator(
                    self.env.obs_dim, act_input, discrete=self.env.discrete,
                    hidden=cfg["net.hidden"], lr=cfg["gasil.lr"],
                    clip_norm=cfg["net.clip_norm"],
                    normalize_obs=cfg["gasil.normalize_obs"],
                    init_rng=np.random.default_rng(disc_ss),
                )
            self.lanes.append(AgentLane(
                agent,
                RingReplay(cfg["buffers.ring_capacity"]),
                SubCurriculumReplay(cfg["buffers.scer_capacity"]) if self.uses_disc else None,
                disc,
                np.random.default_rng(scer_ss),
                np.random.default_rng(dbatch_ss),
                np.random.default_rng(update_ss),
            ))

        self.schedule = ImitationSchedule(
            cfg["gasil.lambda0"], cfg["gasil.growth"], cfg["gasil.lambda_max"]
        )
        self.n_subs = 0 if self.variant == "iac_per" else cfg["buffers.n_subs"]
        self._disc_losses = []

    @staticmethod
    def _build_env(cfg):
        rescue_cfg = RescueConfig(
            dt=cfg["env.rescue.dt"],
            damping=cfg["env.rescue.damping"],
            rescuer_accel=cfg["env.rescue.rescuer_accel"],
            rescuer_max_speed=cfg["env.rescue.rescuer_max_speed"],
            animal_accel=cfg["env.rescue.animal_accel"],
            animal_max_speed=cfg["env.rescue.animal_max_speed"],
            touch_radius=cfg["env.rescue.touch_radius"],
            horizon=cfg["env.rescue.horizon"],
            t_hold=cfg["env.rescue.t_hold"],
            min_separation=cfg["env.rescue.min_separation"],
            boundary_margin=cfg["env.rescue.boundary_margin"],
        )
        animal_nets = None
        weight_dir = cfg["env.rescue.animal_weights"]
        if cfg["env"] == "rescue" and weight_dir:
            paths = [Path(weight_dir) / f"animal{i}.mlp" for i in range(3)]
            missing = [str(p) for p in paths if not p.exists()]
            if missing:
                raise ConfigError(f"animal weight files not found: {', '.join(missing)}")
            animal_nets = [Mlp.load(p) for p in paths]
        return make_env(cfg["env"], rescue_cfg, animal_nets)

    def _build_agent(self, cfg, init_rng):
        common = dict(
            hidden=cfg["net.hidden"], gamma=cfg["agent.gamma"],
            actor_lr=cfg["agent.actor_lr"], critic_lr=cfg["agent.critic_lr"],
            clip_norm=cfg["net.clip_norm"], init_rng=init_rng,
        )
        if self.env.discrete:
            return A2cAgent(
                self.env.obs_dim, self.env.n_actions,
                entropy_coef=cfg["agent.entropy_coef"],
                importance_weighting=cfg["agent.importance_weighting"],
                is_clip=cfg["agent.is_clip"], **common,
            )
        return DdpgAgent(self.env.obs_dim, self.env.act_dim, tau=cfg["agent.tau"], **common)

    # ---- episode rollout ------------------------------------------------

    def run_episode(self, explore, collect, rng, uniform_actions=False):
        """Roll one episode; optionally store each agent's own trajectory.

        Every agent acts from its own observation only; the shared reward is
        recorded identically in both trajectories.
        """
        obs = self.env.reset(rng)
        transitions = [[] for _ in self.lanes]
        shared_return = 0.0
        info = {}
        done = False
        step = 0
        held_actions = [None] * len(self.lanes)
        while not done:
            actions, logps = [], []
            for i, lane in enumerate(self.lanes):
                if uniform_actions and not self.env.discrete:
                    # piecewise-constant random accelerations: white per-step
                    # noise barely moves a damped integrator anywhere
                    if step % 10 == 0:
                        held_actions[i] = rng.uniform(-1.0, 1.0, self.env.act_dim)
                    a, lp = held_actions[i], None
                else:
                    a, lp = lane.agent.act(obs[i], explore, rng)
                actions.append(a)
                logps.append(lp)
            step += 1
            res = self.env.step(actions)
            for i in range(len(self.lanes)):
                transitions[i].append(Transition(
                    obs[i], actions[i], res.reward, res.observations[i], res.done, logps[i]
                ))
            shared_return += res.reward
            obs = res.observations
            done = res.done
            info = res.info
        trajectories = [Trajectory(ts, self.gamma) for ts in transitions]
        if collect:
            for lane, traj in zip(self.lanes, trajectories):
                for t in traj.transitions:
                    lane.ring.push(t)
                if lane.scer is not None:
                    lane.scer.insert(traj, self.gamma, self.n_subs, lane.rng_scer)
        return trajectories, shared_return, info

    # ---- one algorithm iteration -----------------------------------------

    def _anneal_noise(self, episode):
        if self.env.discrete:
            return
        total = max(self.cfg["episodes"] - 1, 1)
        frac = min(episode / total, 1.0)
        sigma = self.cfg["agent.sigma"] + (self.cfg["agent.sigma_final"] - self.cfg["agent.sigma"]) * frac
        for lane in self.lanes:
            lane.agent.noise_scale = sigma

    def train_iteration(self, episode):
        """Run one episode and, past warmup, one full update pass per agent."""
        self._anneal_noise(episode)
        warmup = episode < self.cfg["train.warmup"]
        trajs, shared_return, info = self.run_episode(
            explore=True, collect=True, rng=self.rollout_rng,
            uniform_actions=warmup,
        )
        self._disc_losses = []
        lam = 0.0
        if not warmup:
            lam = self.schedule.value(episode) if self.uses_disc else 0.0
            for lane, traj in zip(self.lanes, trajs):
                self._update_lane(lane, traj, lam)
        return {
            "return": shared_return,
            "outcome": info.get("outcome"),
            "touches": info.get("touch_counts"),
            "lambda": lam,
            "disc_losses": list(self._disc_losses),
        }

    def _sample_update_batch(self, lane, own_traj, rng):
        """A stacked Batch from the replay buffer (or the current episode)."""
        if self.onpolicy:
            idx = rng.integers(0, len(own_traj), size=self.batch)
            return stack_batch([own_traj.transitions[i] for i in idx],
                               self.env.discrete)
        if len(lane.ring) < self.batch:
            return None
        obs, actions, rewards, next_obs, dones, logps = lane.ring.sample_arrays(
            self.batch, rng
        )
        return Batch(obs, actions, rewards, next_obs, dones,
                     logps if self.env.discrete else None)

    def _update_lane(self, lane, own_traj, lam):
        if lane.disc is not None and lane.scer is not None and len(lane.scer) > 0:
            for _ in range(self.cfg["gasil.disc_steps"]):
                policy = self._sample_update_batch(lane, own_traj, lane.rng_disc)
                if policy is None:
                    break
                eo, ea = lane.scer.sample_pair_arrays(
                    self.batch, lane.rng_disc, lane.disc.encode_actions
                )
                pa = lane.disc.encode_actions(policy.actions)
                result = lane.disc.update_arrays(eo, ea, policy.obs, pa, steps=1,
                                                 compute_after=False)
                if result is not None:
                    self._disc_losses.append(-result[0] / 2.0)  # BCE form

        for _ in range(self.cfg["train.updates_per_episode"]):
            batch = self._sample_update_batch(lane, own_traj, lane.rng_update)
            if batch is None:
                return
            if lane.disc is not None:
                # r' = r + lambda * r_imit(s, a) on the sampled copy only
                acts = lane.disc.encode_actions(batch.actions)
                r_imit = lane.disc.imitation_reward(
                    batch.obs, acts, self.cfg["gasil.reward_form"]
                )
                batch.rewards = batch.rewards + lam * r_imit
            lane.agent.update(batch)

    # ---- evaluation -------------------------------------------------------

    def evaluate(self, episodes, rng=None):
        """Greedy rollouts with no buffer writes and no learning.

        Returns (mean return or None, outcome histogram).
        """
        rng = rng or self.eval_rng
        if episodes <= 0:
            return None, {}
        returns = []
        hist = {}
        for _ in range(episodes):
            _, ret, info = self.run_episode(explore=False, collect=False, rng=rng)
            returns.append(ret)
            code = outcome_code(info.get("outcome"))
            hist[code] = hist.get(code, 0) + 1
        return float(np.mean(returns)), dict(sorted(hist.items()))

    # ---- persistence ------------------------------------------------------

    def save_checkpoint(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = []
        for i, lane in enumerate(self.lanes):
            for role, net in lane.agent.networks().items():
                fname = f"agent{i}.{role}.mlp"
                net.save(directory / fname)
                manifest.append(f"agent{i}.{role} {fname}")
            if lane.disc is not None:
                fname = f"agent{i}.disc.mlp"
                lane.disc.save(directory / fname)
                manifest.append(f"agent{i}.disc {fname}")
        (directory / "manifest.txt").write_text("\n".join(manifest) + "\n")

    def load_checkpoint(self, directory):
        directory = Path(directory)
        entries = {}
        for line in (directory / "manifest.txt").read_text().splitlines():
            role, fname = line.split()
            entries[role] = directory / fname
        for i, lane in enumerate(self.lanes):
            nets = {}
            for role in lane.agent.networks():
                key = f"agent{i}.{role}"
                if key not in entries:
                    raise ValueError(f"checkpoint {directory} is missing {key}")
                nets[role] = Mlp.load(entries[key])
            lane.agent.load_networks(nets)
            if lane.disc is not None and f"agent{i}.disc" in entries:
                lane.disc.load_weights(entries[f"agent{i}.disc"])


class WindowMetrics:
    """Aggregates per-episode stats into fixed-window CSV rows."""

    def __init__(self, window):
        self.window = window
        self.reset()

    def reset(self):
        self.returns = []
        self.touches = []
        self.outcomes = {"aa": 0, "bb": 0, "cc": 0, "other": 0}
        self.disc_losses = []
        self.last_lambda = 0.0

    def record(self, stats):
        self.returns.append(stats["return"])
        if stats["touches"] is not None:
            self.touches.append(stats["touches"])
        code = outcome_code(stats["outcome"])
        self.outcomes[code if code in self.outcomes else "other"] += 1
        self.disc_losses.extend(stats["disc_losses"])
        self.last_lambda = stats["lambda"]

    def row(self, end_episode, lanes):
        n = len(self.returns)
        scers = [lane.scer for lane in lanes if lane.scer is not None]
        scer_mean = float(np.mean([s.mean_return() for s in scers])) if scers else 0.0
        scer_max = float(np.mean([s.max_return() for s in scers])) if scers else 0.0
        touch = np.mean(self.touches, axis=0) if self.touches else np.zeros(3)
        fields = [
            str(end_episode),
            format(float(np.mean(self.returns)), ".17g"),
            format(float(np.max(self.returns)), ".17g"),
            format(scer_mean, ".17g"),
            format(scer_max, ".17g"),
            format(float(touch[0]), ".17g"),
            format(float(touch[1]), ".17g"),
            format(float(touch[2]), ".17g"),
            format(self.outcomes["aa"] / n, ".17g"),
            format(self.outcomes["bb"] / n, ".17g"),
            format(self.outcomes["cc"] / n, ".17g"),
            format(self.outcomes["other"] / n, ".17g"),
            format(self.last_lambda, ".17g"),
            format(float(np.mean(self.disc_losses)) if self.disc_losses else 0.0, ".17g"),
        ]
        self.reset()
        return ",".join(fields)


def run_campaign(cfg, run_dir=None):
    """Execute a full configured run; returns the populated run directory."""
    out_root = Path(cfg["out"])
    run_dir = Path(run_dir) if run_dir else out_root / run_name(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(serialize(cfg))
    (run_dir / "manifest.txt").write_text(
        f"version = {__version__}\n"
        f"seed = {cfg['seed']}\n"
        f"env = {cfg['env']}\n"
        f"variant = {cfg['variant']}\n"
        f"fingerprint = {config_fingerprint(cfg)}\n"
    )

    trainer = Trainer(cfg)
    window = cfg["train.window"]
    metrics = WindowMetrics(window)
    ckpt_interval = cfg["train.checkpoint_interval"]
    eval_interval = cfg["train.eval_interval"]
    eval_lines = []

    with open(run_dir / "metrics.csv", "w") as mfh, open(run_dir / "episodes.csv", "w") as efh:
        mfh.write(METRICS_COLUMNS + "\n")
        efh.write(EPISODES_COLUMNS + "\n")
        for episode in range(cfg["episodes"]):
            stats = trainer.train_iteration(episode)
            metrics.record(stats)
            efh.write(
                f"{episode + 1},{format(stats['return'], '.17g')},{outcome_code(stats['outcome'])}\n"
            )
            if (episode + 1) % window == 0:
                mfh.write(metrics.row(episode + 1, trainer.lanes) + "\n")
                mfh.flush()  # windows are rare; keep progress visible on disk
            if ckpt_interval and (episode + 1) % ckpt_interval == 0:
                trainer.save_checkpoint(run_dir / "checkpoints" / f"ep{episode + 1:08d}")
            if eval_interval and (episode + 1) % eval_interval == 0:
                mean, hist = trainer.evaluate(cfg["train.eval_episodes"])
                mean_text = "no-data" if mean is None else format(mean, ".17g")
                eval_lines.append(f"{episode + 1},{mean_text},"
                                  + ";".join(f"{k}:{v}" for k, v in hist.items()))
        if cfg["episodes"] % window != 0 and cfg["episodes"] > 0:
            mfh.write(metrics.row(cfg["episodes"], trainer.lanes) + "\n")

    if eval_lines:
        (run_dir / "eval.csv").write_text(
            "episode,mean_return,outcome_histogram\n" + "\n".join(eval_lines) + "\n"
        )
    trainer.save_checkpoint(run_dir / "checkpoints" / "final")
    (run_dir / "DONE").write_text("ok\n")
    return run_dir


def load_run_trainer(run_dir, checkpoint="final"):
    """Rebuild a Trainer from a run directory's config and checkpoint."""
    run_dir = Path(run_dir)
    cfg_path = run_dir / "config.txt"
    if not cfg_path.exists():
        raise FileNotFoundError(f"{run_dir} has no config.txt")
    cfg = resolve(parse_config_file(cfg_path))
    trainer = Trainer(cfg)
    ckpt = run_dir / "checkpoints" / checkpoint
    if ckpt.exists():
        trainer.load_checkpoint(ckpt)
    return trainer
