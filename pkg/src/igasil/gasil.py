"""Adversarial self-imitation machinery.

Each agent trains a binary classifier to separate its best past behavior
(the positive buffer) from its ordinary replayed behavior, then adds the
classifier's logit to the environment reward. The logit form
log(D) - log(1-D) is zero when the classifier is uncertain, which avoids
the survival-bonus / per-step-penalty biases of the one-sided variants.
"""

from __future__ import annotations

import os

import numpy as np

from .buffers import Transition
from .net import AdamState, Mlp, adam_step, clip_global_norm

REWARD_FORMS = ("unbiased", "pos_biased", "neg_biased")

LOGIT_CLAMP = 20.0  # keeps exp()/rewards finite while spanning D in (2e-9, 1-2e-9)


def _softplus(z):
    return np.logaddexp(0.0, z)


def reward_from_logit(z, form="unbiased"):
    """Imitation reward for a (clamped) classifier logit z = log(D/(1-D))."""
    z = np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)
    if form == "unbiased":
        return z
    if form == "pos_biased":        # -log(1-D): always positive
        return _softplus(z)
    if form == "neg_biased":        # log(D): always negative
        return -_softplus(-z)
    raise ValueError(f"unknown reward form {form!r}, expected one of {REWARD_FORMS}")


def reward_from_d(d, form="unbiased"):
    """Imitation reward expressed directly in terms of D in (0, 1)."""
    d = np.asarray(d, dtype=float)
    if form == "unbiased":
        return np.log(d) - np.log1p(-d)
    if form == "pos_biased":
        return -np.log1p(-d)
    if form == "neg_biased":
        return np.log(d)
    raise ValueError(f"unknown reward form {form!r}, expected one of {REWARD_FORMS}")


class RunningNorm:
    """Streaming per-feature mean/std for observation whitening."""

    def __init__(self, dim, eps=1e-6):
        self.dim = int(dim)
        self.eps = eps
        self.count = 0.0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, batch):
        # batched Chan/Welford merge: one numpy pass per update
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        n = float(len(batch))
        if n == 0:
            return
        bmean = batch.mean(axis=0)
        bm2 = ((batch - bmean) ** 2).sum(axis=0)
        if self.count == 0:
            self.count = n
            self.mean = bmean
            self.m2 = bm2
            return
        total = self.count + n
        delta = bmean - self.mean
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + bm2 + delta * delta * (self.count * n / total)
        self.count = total

    def std(self):
        if self.count < 2:
            return np.ones(self.dim)
        return np.sqrt(np.maximum(self.m2 / self.count, self.eps ** 2))

    def normalize(self, x):
        if self.count < 2:
            return np.asarray(x, dtype=float)
        return (np.asarray(x, dtype=float) - self.mean) / self.std()

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(f"RNORM1 {self.dim} {format(self.count, '.17g')}\n")
            fh.write(" ".join(format(v, ".17g") for v in self.mean) + "\n")
            fh.write(" ".join(format(v, ".17g") for v in self.m2) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            lines = [ln for ln in fh.read().split("\n") if ln.strip()]
        head = lines[0].split()
        if head[0] != "RNORM1" or len(lines) != 3:
            raise ValueError(f"{path}: not a normalizer state file")
        norm = cls(int(head[1]))
        norm.count = float(head[2])
        norm.mean = np.array([float(t) for t in lines[1].split()])
        norm.m2 = np.array([float(t) for t in lines[2].split()])
        if norm.mean.size != norm.dim or norm.m2.size != norm.dim:
            raise ValueError(f"{path}: normalizer dimension mismatch")
        return norm


class Discriminator:
    """Sigmoid-head classifier over concatenated (obs, action) pairs.

    Trained by gradient ascent on
        mean(log D(expert)) + mean(log(1 - D(behavior)))
    which is binary cross-entropy descent with expert label 1. All math runs
    on logits so nothing saturates.
    """

    def __init__(self, obs_dim, act_dim, discrete=False, hidden=64, lr=1e-3,
                 clip_norm=10.0, normalize_obs=True, init_rng=None):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.discrete = discrete
        self.net = Mlp([obs_dim + act_dim, hidden, hidden, 1], output_head="sigmoid",
                       init_rng=init_rng)
        self.adam = AdamState([self.net.flat], alpha=lr)
        self.clip_norm = clip_norm
        self.norm = RunningNorm(obs_dim) if normalize_obs else None

    def _stack(self, obs, act):
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        act = np.atleast_2d(np.asarray(act, dtype=float))
        if self.norm is not None:
            obs = self.norm.normalize(obs)
        return np.concatenate([obs, act], axis=1)

    def _raw_logits_tape(self, x):
        _, tape = self.net.forward(x)
        return tape.pre[-1][:, 0], tape

    def logits(self, obs, act):
        """Classifier logits clamped to +-LOGIT_CLAMP."""
        z = self.net.predict_logits(self._stack(obs, act))[:, 0]
        return np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)

    def predict_d(self, obs, act):
        """D(s, a) strictly inside (0, 1)."""
        z = self.logits(obs, act)
        return np.exp(-_softplus(-z))

    def imitation_reward(self, obs, act, form="unbiased"):
        z = self.net.predict_logits(self._stack(obs, act))[:, 0]
        return reward_from_logit(z, form)

    # ---- training -----------------------------------------------------

    def objective(self, expert_obs, expert_act, policy_obs, policy_act):
        """mean log D(expert) + mean log(1-D(policy)), with frozen normalizer stats."""
        ze = self.net.predict_logits(self._stack(expert_obs, expert_act))[:, 0]
        zp = self.net.predict_logits(self._stack(policy_obs, policy_act))[:, 0]
        return float(-np.mean(_softplus(-ze)) - np.mean(_softplus(zp)))

    def _ascent_grads(self, expert_x, policy_x):
        ze, tape_e = self._raw_logits_tape(expert_x)
        zp, tape_p = self._raw_logits_tape(policy_x)
        de = np.exp(-_softplus(-ze))  # sigmoid
        dp = np.exp(-_softplus(-zp))
        obj = float(-np.mean(_softplus(-ze)) - np.mean(_softplus(zp)))
        # d(objective)/dz: (1 - D)/n on expert pairs, -D/n on policy pairs
        ge = self.net.backward_logits(tape_e, ((1.0 - de) / ze.size)[:, None])
        gp = self.net.backward_logits(tape_p, (-dp / zp.size)[:, None])
        ge.flat += gp.flat  # the views inside ge alias its flat vector
        return obj, ge

    def update(self, expert_pairs, policy_pairs, steps=1):
        """`steps` ascent steps on fixed batches; returns (objective before, after)."""
        if not expert_pairs or not policy_pairs:
            return None
        if len(expert_pairs) != len(policy_pairs):
            raise ValueError("expert and policy batches must have the same size")
        eo = np.stack([p[0] for p in expert_pairs])
        ea = np.stack([self.encode_action(p[1]) for p in expert_pairs])
        po = np.stack([p[0] for p in policy_pairs])
        pa = np.stack([self.encode_action(p[1]) for p in policy_pairs])
        return self.update_arrays(eo, ea, po, pa, steps)

    def update_arrays(self, eo, ea, po, pa, steps=1, compute_after=True):
        """Array fast path: actions must already be encoded.

        compute_after=False skips the post-update objective evaluation and
        returns (before, None); the hot loop logs the pre-update value.
        """
        if self.norm is not None:
            self.norm.update(np.concatenate([eo, po], axis=0))
        ex = self._stack(eo, ea)
        px = self._stack(po, pa)
        before = None
        for _ in range(int(steps)):
            obj, grads = self._ascent_grads(ex, px)
            if before is None:
                before = obj
            flat = -grads.flat  # ascend
            clip_global_norm([flat], self.clip_norm)
            adam_step([self.net.flat], [flat], self.adam)
        if not compute_after:
            return before, None
        after = self.objective(eo, ea, po, pa)
        return before, after

    def encode_action(self, action):
        """Continuous actions pass through; discrete indices become one-hot."""
        if np.isscalar(action) or (isinstance(action, np.ndarray) and action.ndim == 0):
            onehot = np.zeros(self.act_dim)
            onehot[int(action)] = 1.0
            return onehot
        return np.asarray(action, dtype=float)

    def encode_actions(self, actions):
        """Batch version: (B,) index array -> one-hot, (B, d) floats pass through."""
        actions = np.asarray(actions)
        if self.discrete or actions.ndim == 1:
            onehot = np.zeros((actions.shape[0], self.act_dim))
            onehot[np.arange(actions.shape[0]), actions.astype(int)] = 1.0
            return onehot
        return actions.astype(float, copy=False)

    # ---- persistence ----------------------------------------------------

    def save(self, path):
        self.net.save(path)
        if self.norm is not None:
            self.norm.save(str(path) + ".norm")

    def load_weights(self, path):
        self.net = Mlp.load(path)
        self.adam = AdamState([self.net.flat], alpha=self.adam.alpha)
        if self.norm is not None and os.path.exists(str(path) + ".norm"):
            self.norm = RunningNorm.load(str(path) + ".norm")


def shape_rewards(transitions, disc, lambda_imit, form="unbiased"):
    """Replace each sampled transition's reward with r + lambda * r_imit(s, a).

    Returns fresh Transition copies (obs/action/next_obs/done are the same
    objects); the buffers keep the raw environment rewards untouched.
    """
    if lambda_imit < 0:
        raise ValueError("lambda_imit must be >= 0")
    obs = np.stack([t.obs for t in transitions])
    acts = np.stack([disc.encode_action(t.action) for t in transitions])
    r_imit = disc.imitation_reward(obs, acts, form)
    return [
        Transition(t.obs, t.action, t.reward + lambda_imit * ri, t.next_obs,
                   t.done, t.behavior_logp)
        for t, ri in zip(transitions, r_imit)
    ]


class ImitationSchedule:
    """Exponentially growing imitation weight, capped at lambda_max."""

    def __init__(self, lambda0, growth, lambda_max):
        if lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if growth < 1.0:
            raise ValueError("growth must be >= 1")
        self.lambda0 = float(lambda0)
        self.growth = float(growth)
        self.lambda_max = float(lambda_max)

    def value(self, episode):
        if episode < 0:
            raise ValueError("episode index must be >= 0")
        with np.errstate(over="ignore"):
            raw = self.lambda0 * float(np.float64(self.growth) ** episode)  # inf-safe
        return min(raw, self.lambda_max)

    @classmethod
    def auto(cls, lambda0, lambda_max, episodes, saturation_frac=0.3):
        """Growth factor that reaches lambda_max at saturation_frac of the budget."""
        horizon = max(1, int(episodes * saturation_frac))
        if lambda_max <= lambda0:
            return cls(lambda0, 1.0, lambda_max)
        growth = (lambda_max / lambda0) ** (1.0 / horizon)
        return cls(lambda0, growth, lambda_max)
