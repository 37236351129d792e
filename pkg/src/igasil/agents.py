"""Independent learners consuming reshaped rewards.

DdpgAgent handles the continuous rescue task, A2cAgent the discrete matrix
game. Both learn purely from their own observations, actions and the shared
reward; neither sees its teammate.
"""

from __future__ import annotations

import numpy as np

from .net import AdamState, Mlp, adam_step, clip_global_norm


def soft_update(target: Mlp, online: Mlp, tau: float):
    """target <- tau * online + (1 - tau) * target, elementwise."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if target.layer_dims != online.layer_dims:
        raise ValueError("target/online shape mismatch")
    target.flat *= 1.0 - tau
    target.flat += tau * online.flat


class Batch:
    """Stacked transition arrays for one update step."""

    __slots__ = ("obs", "actions", "rewards", "next_obs", "dones", "behavior_logp")

    def __init__(self, obs, actions, rewards, next_obs, dones, behavior_logp=None):
        self.obs = obs
        self.actions = actions
        self.rewards = rewards
        self.next_obs = next_obs
        self.dones = dones
        self.behavior_logp = behavior_logp


def stack_batch(transitions, discrete):
    obs = np.stack([t.obs for t in transitions])
    next_obs = np.stack([t.next_obs for t in transitions])
    rewards = np.array([t.reward for t in transitions])
    dones = np.array([1.0 if t.done else 0.0 for t in transitions])
    if discrete:
        actions = np.array([int(t.action) for t in transitions])
        logp = np.array([0.0 if t.behavior_logp is None else t.behavior_logp
                         for t in transitions])
        return Batch(obs, actions, rewards, next_obs, dones, logp)
    actions = np.stack([np.asarray(t.action, dtype=float) for t in transitions])
    return Batch(obs, actions, rewards, next_obs, dones)


def _log_softmax(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class DdpgAgent:
    """Deterministic-policy learner with target networks and Gaussian exploration."""

    discrete = False

    def __init__(self, obs_dim, act_dim, hidden=64, gamma=0.95, tau=0.01,
                 actor_lr=1e-4, critic_lr=1e-3, clip_norm=10.0, init_rng=None):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.gamma = gamma
        self.tau = tau
        self.clip_norm = clip_norm
        self.noise_scale = 0.1
        self.actor = Mlp([obs_dim, hidden, hidden, act_dim], "tanh", init_rng=init_rng)
        self.critic = Mlp([obs_dim + act_dim, hidden, hidden, 1], "linear", init_rng=init_rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_adam = AdamState([self.actor.flat], alpha=actor_lr)
        self.critic_adam = AdamState([self.critic.flat], alpha=critic_lr)

    def act(self, obs, explore, rng):
        action = self.actor.predict(obs)
        if explore:
            action = np.clip(action + self.noise_scale * rng.standard_normal(self.act_dim),
                             -1.0, 1.0)
        return action, None

    def _targets(self, batch):
        next_a = self.target_actor.predict(batch.next_obs)
        q_next = self.target_critic.predict(np.concatenate([batch.next_obs, next_a], axis=1))[:, 0]
        return batch.rewards + self.gamma * (1.0 - batch.dones) * q_next

    def critic_loss(self, batch):
        """Squared TD error against the frozen targets (finite-difference hook)."""
        y = self._targets(batch)
        q = self.critic.predict(np.concatenate([batch.obs, batch.actions], axis=1))[:, 0]
        return float(np.mean((q - y) ** 2))

    def actor_objective(self, batch):
        a = self.actor.predict(batch.obs)
        q = self.critic.predict(np.concatenate([batch.obs, a], axis=1))[:, 0]
        return float(np.mean(q))

    def update(self, batch):
        n = batch.rewards.size
        y = self._targets(batch)

        q, tape = self.critic.forward(np.concatenate([batch.obs, batch.actions], axis=1))
        diff = q[:, 0] - y
        critic_loss = float(np.mean(diff * diff))
        if not np.isfinite(critic_loss):
            raise FloatingPointError(
                f"non-finite critic loss (reward range {batch.rewards.min()}..{batch.rewards.max()})"
            )
        grads = self.critic.backward(tape, (2.0 * diff / n)[:, None]).flat
        clip_global_norm([grads], self.clip_norm)
        adam_step([self.critic.flat], [grads], self.critic_adam)

        a, tape_a = self.actor.forward(batch.obs)
        q2, tape_c = self.critic.forward(np.concatenate([batch.obs, a], axis=1))
        actor_objective = float(np.mean(q2))
        dq = np.full((n, 1), 1.0 / n)
        da = self.critic.backward(tape_c, dq).inputs[:, self.obs_dim:]
        agrads = -self.actor.backward(tape_a, da).flat  # ascend E[Q]
        clip_global_norm([agrads], self.clip_norm)
        adam_step([self.actor.flat], [agrads], self.actor_adam)

        soft_update(self.target_actor, self.actor, self.tau)
        soft_update(self.target_critic, self.critic, self.tau)
        return {"critic_loss": critic_loss, "actor_objective": actor_objective}

    # ---- persistence ----------------------------------------------------

    def networks(self):
        return {"actor": self.actor, "critic": self.critic}

    def load_networks(self, nets):
        self.actor = nets["actor"]
        self.critic = nets["critic"]
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_adam = AdamState([self.actor.flat], alpha=self.actor_adam.alpha)
        self.critic_adam = AdamState([self.critic.flat], alpha=self.critic_adam.alpha)


class A2cAgent:
    """Off-policy advantage actor-critic over a discrete action set.

    Replayed transitions are consumed without importance weighting by
    default; optional truncated ratios min(pi/mu, c) can be enabled for
    ablation studies.
    """

    discrete = True

    def __init__(self, obs_dim, n_actions, hidden=64, gamma=0.95,
                 actor_lr=1e-4, critic_lr=1e-3, entropy_coef=0.01,
                 clip_norm=10.0, importance_weighting=False, is_clip=2.0,
                 init_rng=None):
        self.obs_dim = int(obs_dim)
        self.n_actions = int(n_actions)
        self.gamma = gamma
        self.entropy_coef = entropy_coef
        self.clip_norm = clip_norm
        self.importance_weighting = importance_weighting
        self.is_clip = is_clip
        self.actor = Mlp([obs_dim, hidden, hidden, n_actions], "softmax", init_rng=init_rng)
        self.critic = Mlp([obs_dim, hidden, hidden, 1], "linear", init_rng=init_rng)
        self.actor_adam = AdamState([self.actor.flat], alpha=actor_lr)
        self.critic_adam = AdamState([self.critic.flat], alpha=critic_lr)

    def log_probs(self, obs):
        return _log_softmax(self.actor.predict_logits(obs))

    def act(self, obs, explore, rng):
        logp = self.log_probs(obs)
        if not explore:
            action = int(np.argmax(logp))
            return action, float(logp[action])
        probs = np.exp(logp)
        u = rng.random()
        action = int(min(np.searchsorted(np.cumsum(probs), u, side="right"),
                         self.n_actions - 1))
        return action, float(logp[action])

    def policy_objective(self, batch, advantages, weights=None):
        """mean(w * A * log pi(a|s)) + entropy bonus (finite-difference hook)."""
        lsm = self.log_probs(batch.obs)
        taken = lsm[np.arange(batch.actions.size), batch.actions]
        w = np.ones_like(advantages) if weights is None else weights
        probs = np.exp(lsm)
        entropy = -(probs * lsm).sum(axis=1)
        return float(np.mean(w * advantages * taken) + self.entropy_coef * np.mean(entropy))

    def update(self, batch):
        n = batch.rewards.size
        v_next = self.critic.predict(batch.next_obs)[:, 0]
        y = batch.rewards + self.gamma * (1.0 - batch.dones) * v_next

        v, tape_v = self.critic.forward(batch.obs)
        v = v[:, 0]
        adv = y - v  # bootstrap and baseline both treated as constants
        diff = v - y
        critic_loss = float(np.mean(diff * diff))
        if not np.isfinite(critic_loss):
            raise FloatingPointError(
                f"non-finite critic loss (reward range {batch.rewards.min()}..{batch.rewards.max()})"
            )
        cgrads = self.critic.backward(tape_v, (2.0 * diff / n)[:, None]).flat
        clip_global_norm([cgrads], self.clip_norm)
        adam_step([self.critic.flat], [cgrads], self.critic_adam)

        probs, tape_p = self.actor.forward(batch.obs)
        z = tape_p.pre[-1]
        lsm = _log_softmax(z)
        taken = lsm[np.arange(n), batch.actions]
        if self.importance_weighting:
            weights = np.minimum(np.exp(taken - batch.behavior_logp), self.is_clip)
        else:
            weights = np.ones(n)
        entropy = -(probs * lsm).sum(axis=1)
        objective = float(np.mean(weights * adv * taken)
                          + self.entropy_coef * np.mean(entropy))

        onehot = np.zeros((n, self.n_actions))
        onehot[np.arange(n), batch.actions] = 1.0
        dz = (onehot - probs) * (weights * adv / n)[:, None]
        dz += self.entropy_coef * (-(probs * (lsm + entropy[:, None]))) / n
        pgrads = -self.actor.backward_logits(tape_p, dz).flat  # ascend
        clip_global_norm([pgrads], self.clip_norm)
        adam_step([self.actor.flat], [pgrads], self.actor_adam)

        return {
            "critic_loss": critic_loss,
            "policy_objective": objective,
            "entropy": float(np.mean(entropy)),
        }

    # ---- persistence ----------------------------------------------------

    def networks(self):
        return {"actor": self.actor, "critic": self.critic}

    def load_networks(self, nets):
        self.actor = nets["actor"]
        self.critic = nets["critic"]
        self.actor_adam = AdamState([self.actor.flat], alpha=self.actor_adam.alpha)
        self.critic_adam = AdamState([self.critic.flat], alpha=self.critic_adam.alpha)
