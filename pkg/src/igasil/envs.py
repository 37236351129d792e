"""Fully cooperative benchmark environments with one shared reward.

Two tasks: a one-shot climbing matrix game whose best joint action carries
the harshest miss-coordination penalty, and a continuous pursuit task where
two slower rescuers must pin the same fleeing animal within a hold window.
Both pay a single deterministic reward to every agent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .net import Mlp

OUTCOMES = ("catch_a", "catch_b", "catch_c", "on_the_road")

# terminal payoff by (outcome row, outcome col); symmetric, diagonal 11/7/5/0
PAYOFF = np.array(
    [
        [11.0, -30.0, 0.0, -30.0],
        [-30.0, 7.0, 6.0, -10.0],
        [0.0, 6.0, 5.0, 0.0],
        [-30.0, -10.0, 0.0, 0.0],
    ]
)

ROAD = 3  # index of the "on_the_road" outcome


def outcome_index(label):
    if isinstance(label, str):
        try:
            return OUTCOMES.index(label)
        except ValueError:
            raise ValueError(f"unknown outcome {label!r}, expected one of {OUTCOMES}") from None
    idx = int(label)
    if not 0 <= idx < len(OUTCOMES):
        raise ValueError(f"outcome index {idx} out of range")
    return idx


def payoff(i, j):
    """Shared terminal reward when agent 1 ends in outcome i and agent 2 in j."""
    return float(PAYOFF[outcome_index(i), outcome_index(j)])


@dataclass
class JointStepResult:
    observations: list
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class ClimbingGame:
    """Stateless repeated matrix game: one joint action ends the episode.

    Observations are the constant vector [1] so function approximators are
    exercised while the game itself stays a bandit.
    """

    n_agents = 2
    n_actions = 4
    obs_dim = 1
    discrete = True
    horizon = 1

    def __init__(self):
        self._done = True

    def reset(self, rng=None):
        self._done = False
        return [np.ones(1), np.ones(1)]

    def step(self, actions):
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        if len(actions) != 2:
            raise ValueError("climbing game needs exactly 2 actions")
        i, j = (outcome_index(a) for a in actions)
        self._done = True
        reward = payoff(i, j)
        obs = [np.ones(1), np.ones(1)]
        return JointStepResult(obs, reward, True, {"outcome": (OUTCOMES[i], OUTCOMES[j])})


@dataclass
class RescueConfig:
    dt: float = 0.1
    damping: float = 0.25
    rescuer_accel: float = 3.0
    rescuer_max_speed: float = 1.0
    animal_accel: float = 4.0
    animal_max_speed: float = 1.3
    touch_radius: float = 0.1
    horizon: int = 50
    t_hold: int = 8
    min_separation: float = 0.2
    boundary_margin: float = 0.1


class RescueEnv:
    """Two rescuers chase three faster animals; both must pin the same one.

    Double-integrator physics in the [-1, 1]^2 arena. The first touch
    freezes the animal and starts a hold timer; the partner's touch inside
    the window ends the episode with the matched diagonal payoff, any other
    resolution pays the corresponding off-diagonal entry. Rewards are zero
    at every non-terminal step.
    """

    n_agents = 2
    n_animals = 3
    act_dim = 2
    discrete = False

    # own pos/vel, partner rel pos, animal rel pos+vel, held flags, timer
    obs_dim = 2 + 2 + 2 + 3 * 2 + 3 * 2 + 3 + 1

    def __init__(self, config=None, animal_nets=None):
        self.cfg = config or RescueConfig()
        if animal_nets is not None and len(animal_nets) != self.n_animals:
            raise ValueError(f"need {self.n_animals} animal policy nets")
        self.animal_nets = animal_nets
        self._done = True

    # ---- lifecycle ----------------------------------------------------

    def reset(self, rng):
        n = self.n_agents + self.n_animals
        points = []
        while len(points) < n:
            p = rng.uniform(-1.0, 1.0, size=2)
            if all(np.linalg.norm(p - q) >= self.cfg.min_separation for q in points):
                points.append(p)
        pts = np.array(points)
        self.rescuer_pos = pts[: self.n_agents].copy()
        self.animal_pos = pts[self.n_agents:].copy()
        self.rescuer_vel = np.zeros((self.n_agents, 2))
        self.animal_vel = np.zeros((self.n_animals, 2))
        self.hold_owner = None  # (animal index, rescuer index)
        self.hold_timer = 0
        self.step_count = 0
        self.touch_counts = np.zeros(self.n_animals, dtype=int)
        self._touched_pairs = set()
        self._done = False
        self.outcome = None
        return [self.observe(i) for i in range(self.n_agents)]

    @property
    def held_animal(self):
        return None if self.hold_owner is None else self.hold_owner[0]

    # ---- observation --------------------------------------------------

    def observe(self, agent):
        me = self.rescuer_pos[agent]
        other = 1 - agent
        held = np.zeros(self.n_animals)
        if self.hold_owner is not None:
            held[self.hold_owner[0]] = 1.0
        obs = np.empty(self.obs_dim)
        obs[0:2] = me
        obs[2:4] = self.rescuer_vel[agent]
        obs[4:6] = self.rescuer_pos[other] - me
        obs[6:12] = (self.animal_pos - me).ravel()
        obs[12:18] = (self.animal_vel - self.rescuer_vel[agent]).ravel()
        obs[18:21] = held
        obs[21] = self.hold_timer / self.cfg.t_hold
        return obs

    # ---- scripted prey ------------------------------------------------

    def _flee_actions(self):
        """Flee actions for all animals at once (one numpy pass)."""
        deltas = self.animal_pos[:, None, :] - self.rescuer_pos[None, :, :]  # (A, R, 2)
        dists = np.sqrt((deltas * deltas).sum(axis=2))
        nearest = dists.argmin(axis=1)
        away = deltas[np.arange(self.n_animals), nearest]
        norms = np.sqrt((away * away).sum(axis=1, keepdims=True))
        actions = np.where(norms > 1e-12, away / np.maximum(norms, 1e-12),
                           np.array([1.0, 0.0]))
        margin = self.cfg.boundary_margin
        inner = 1.0 - margin
        # linear inward push across the wall band
        actions -= np.maximum(self.animal_pos - inner, 0.0) / margin
        actions += np.maximum(-inner - self.animal_pos, 0.0) / margin
        return np.clip(actions, -1.0, 1.0)

    def animal_policy(self, idx):
        """Flee the nearest rescuer at full force, eased off near the walls."""
        return self._flee_actions()[idx]

    def _animal_actions(self):
        if self.animal_nets is None:
            return self._flee_actions()
        actions = np.empty((self.n_animals, 2))
        for idx in range(self.n_animals):
            obs = np.empty(12)
            obs[0:2] = self.animal_pos[idx]
            obs[2:4] = self.animal_vel[idx]
            obs[4:8] = (self.rescuer_pos - self.animal_pos[idx]).ravel()
            others = [a for a in range(self.n_animals) if a != idx]
            obs[8:12] = (self.animal_pos[others] - self.animal_pos[idx]).ravel()
            actions[idx] = np.clip(self.animal_nets[idx].predict(obs), -1.0, 1.0)
        return actions

    # ---- physics ------------------------------------------------------

    @staticmethod
    def _integrate(pos, vel, action, accel, max_speed, dt, damping):
        """Damped double integrator for a block of entities (rows)."""
        vel *= 1.0 - damping
        vel += action * (accel * dt)
        speed = np.sqrt((vel * vel).sum(axis=-1, keepdims=True))
        np.multiply(vel, np.minimum(max_speed / np.maximum(speed, 1e-12), 1.0), out=vel)
        pos += vel * dt
        np.clip(pos, -1.0, 1.0, out=pos)

    def step(self, actions):
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        cfg = self.cfg
        acts = np.clip(np.asarray(actions, dtype=float), -1.0, 1.0)
        if acts.shape != (self.n_agents, 2):
            raise ValueError("rescue env expects two 2-d acceleration actions")

        held = self.held_animal
        self._integrate(self.rescuer_pos, self.rescuer_vel, acts,
                        cfg.rescuer_accel, cfg.rescuer_max_speed, cfg.dt, cfg.damping)
        animal_acts = self._animal_actions()
        if held is not None:
            # pinned animals cannot move: zero drive and zero carried velocity
            animal_acts[held] = 0.0
            self.animal_vel[held] = 0.0
        self._integrate(self.animal_pos, self.animal_vel, animal_acts,
                        cfg.animal_accel, cfg.animal_max_speed, cfg.dt, cfg.damping)
        self.step_count += 1

        deltas = self.rescuer_pos[:, None, :] - self.animal_pos[None, :, :]
        dists = np.sqrt((deltas * deltas).sum(axis=2))
        touching = dists < cfg.touch_radius
        if touching.any():
            for r, a in zip(*np.nonzero(touching)):
                pair = (int(r), int(a))
                if pair not in self._touched_pairs:
                    self._touched_pairs.add(pair)
                    self.touch_counts[a] += 1

        outcome = self._resolve(touching, dists)
        if outcome is None and self.step_count >= cfg.horizon:
            # horizon cut-off: an unresolved hold counts as a timeout
            held = self.held_animal
            outcome = (ROAD, ROAD) if held is None else (held, ROAD)

        if outcome is not None:
            self._done = True
            self.outcome = (OUTCOMES[outcome[0]], OUTCOMES[outcome[1]])
            reward = payoff(*outcome)
        else:
            reward = 0.0

        obs = [self.observe(i) for i in range(self.n_agents)]
        info = {
            "outcome": self.outcome,
            "touch_counts": self.touch_counts.copy(),
        }
        return JointStepResult(obs, reward, self._done, info)

    def _resolve(self, touching, dists):
        """Apply the hold/capture rules; returns an outcome index pair or None."""
        if self.hold_owner is None:
            touched_animal = [None, None]
            for r in range(self.n_agents):
                if touching[r].any():
                    candidates = np.flatnonzero(touching[r])
                    touched_animal[r] = int(candidates[np.argmin(dists[r, candidates])])
            ta, tb = touched_animal
            if ta is not None and tb is not None:
                return (ta, ta) if ta == tb else (ta, tb)
            if ta is not None or tb is not None:
                rescuer = 0 if ta is not None else 1
                animal = ta if ta is not None else tb
                self.hold_owner = (animal, rescuer)
                self.hold_timer = self.cfg.t_hold
                self.animal_vel[animal] = 0.0
            return None

        animal, holder = self.hold_owner
        partner = 1 - holder
        if touching[partner, animal]:
            return (animal, animal)
        if touching[partner].any():
            candidates = np.flatnonzero(touching[partner])
            other = int(candidates[np.argmin(dists[partner, candidates])])
            return (animal, other)
        self.hold_timer -= 1
        if self.hold_timer <= 0:
            return (animal, ROAD)
        return None


def make_env(env_id, rescue_config=None, animal_nets=None):
    if env_id == "climbing":
        return ClimbingGame()
    if env_id == "rescue":
        return RescueEnv(rescue_config, animal_nets)
    raise ValueError(f"unknown env {env_id!r}, expected one of ('climbing', 'rescue')")
