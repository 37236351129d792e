"""Fast invariant suite behind the `selftest` command.

Runs the cheap versions of the correctness oracles (finite differences,
heap sort oracle, payoff table, determinism) in well under a minute and
prints one line per check group.
"""

from __future__ import annotations

import shutil
import tempfile
import time
from pathlib import Path

import numpy as np

from .agents import A2cAgent, Batch, DdpgAgent
from .buffers import SubCurriculumReplay, Trajectory, Transition
from .config import resolve
from .envs import PAYOFF, RescueEnv, payoff
from .gasil import Discriminator, reward_from_d
from .net import Mlp
from .trainer import run_campaign

EXPECTED_PAYOFF = (
    (11, -30, 0, -30),
    (-30, 7, 6, -10),
    (0, 6, 5, 0),
    (-30, -10, 0, 0),
)


def _fd_check(loss_fn, params, grads, h=1e-5, rel=1e-4, samples=40, rng=None):
    """Spot-check analytic grads against central differences on random entries."""
    rng = rng or np.random.default_rng(0)
    flat_pairs = [(p.ravel(), g.ravel()) for p, g in zip(params, grads)]
    sizes = np.array([fp[0].size for fp in flat_pairs])
    for _ in range(samples):
        k = int(rng.integers(0, len(flat_pairs)))
        i = int(rng.integers(0, sizes[k]))
        pf, gf = flat_pairs[k]
        orig = pf[i]
        pf[i] = orig + h
        up = loss_fn()
        pf[i] = orig - h
        down = loss_fn()
        pf[i] = orig
        num = (up - down) / (2 * h)
        if abs(gf[i] - num) / max(abs(num), abs(gf[i]), 1e-6) > rel:
            return False
    return True


def check_payoff_table(payoff_override=None):
    table = PAYOFF if payoff_override is None else np.asarray(payoff_override)
    for i in range(4):
        for j in range(4):
            if table[i, j] != EXPECTED_PAYOFF[i][j]:
                return False
            if table[i, j] != table[j, i]:
                return False
    return payoff("catch_a", "catch_a") == 11


def check_mlp_gradients():
    rng = np.random.default_rng(1)
    for head in ("linear", "tanh", "sigmoid", "softmax"):
        net = Mlp([4, 8, 8, 2], head, init_rng=np.random.default_rng(2))
        x = rng.normal(size=4)
        gout = rng.normal(size=2)
        _, tape = net.forward(x)
        grads = net.backward(tape, gout)

        def loss():
            y, _ = net.forward(x)
            return float(y @ gout)

        if not _fd_check(loss, net.params(), grads.arrays(), samples=20, rng=rng):
            return False
    return True


def check_adversarial_gradients():
    rng = np.random.default_rng(3)
    d = Discriminator(3, 2, hidden=8, normalize_obs=False,
                      init_rng=np.random.default_rng(4))
    eo, ea = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))
    po, pa = rng.normal(size=(4, 3)) + 0.5, rng.normal(size=(4, 2))
    _, grads = d._ascent_grads(d._stack(eo, ea), d._stack(po, pa))
    return _fd_check(lambda: d.objective(eo, ea, po, pa), d.net.params(),
                     grads.arrays(), samples=30, rng=rng)


def check_agent_gradients():
    rng = np.random.default_rng(5)
    ddpg = DdpgAgent(4, 2, hidden=8, init_rng=np.random.default_rng(6))
    batch = Batch(rng.normal(size=(3, 4)), rng.uniform(-1, 1, (3, 2)),
                  rng.normal(size=3), rng.normal(size=(3, 4)),
                  np.zeros(3))
    y = ddpg._targets(batch)
    q, tape = ddpg.critic.forward(np.concatenate([batch.obs, batch.actions], axis=1))
    grads = ddpg.critic.backward(tape, (2.0 * (q[:, 0] - y) / 3)[:, None])
    if not _fd_check(lambda: ddpg.critic_loss(batch), ddpg.critic.params(),
                     grads.arrays(), samples=25, rng=rng):
        return False

    a2c = A2cAgent(3, 4, hidden=8, entropy_coef=0.02, init_rng=np.random.default_rng(7))
    dbatch = Batch(rng.normal(size=(4, 3)), rng.integers(0, 4, 4),
                   rng.normal(size=4), rng.normal(size=(4, 3)),
                   np.ones(4), np.log(np.full(4, 0.25)))
    adv = rng.normal(size=4)
    probs, tape_p = a2c.actor.forward(dbatch.obs)
    z = tape_p.pre[-1]
    lsm = z - z.max(axis=1, keepdims=True)
    lsm = lsm - np.log(np.exp(lsm).sum(axis=1, keepdims=True))
    entropy = -(probs * lsm).sum(axis=1)
    onehot = np.zeros((4, 4))
    onehot[np.arange(4), dbatch.actions] = 1.0
    dz = (onehot - probs) * (adv / 4)[:, None]
    dz += a2c.entropy_coef * (-(probs * (lsm + entropy[:, None]))) / 4
    grads = a2c.actor.backward_logits(tape_p, dz)
    return _fd_check(lambda: a2c.policy_objective(dbatch, adv), a2c.actor.params(),
                     grads.arrays(), samples=25, rng=rng)


def check_heap_oracle():
    rng = np.random.default_rng(8)
    for _ in range(5):
        k = int(rng.integers(1, 32))
        offers = [float(x) for x in rng.integers(-5, 6, size=400)]
        buf = SubCurriculumReplay(k)
        for j, r in enumerate(offers):
            t = Transition(np.zeros(1), 0, r, np.zeros(1), True)
            buf.offer(Trajectory([t], 1.0))
            if not buf.check_heap_property():
                return False
        ranked = sorted(enumerate(offers), key=lambda p: (p[1], p[0]), reverse=True)
        oracle = sorted(r for _, r in ranked[:k])
        if sorted(buf.stored_returns()) != oracle:
            return False
    return True


def check_imitation_reward():
    if abs(reward_from_d(0.5)) > 1e-12:
        return False
    p = np.random.default_rng(9).uniform(1e-6, 1 - 1e-6, 500)
    if np.max(np.abs(reward_from_d(p) + reward_from_d(1 - p))) > 1e-12:
        return False
    grid = np.linspace(1e-9, 1 - 1e-9, 2001)
    return bool(np.all(np.diff(reward_from_d(grid)) > 0))


def check_determinism():
    tmp = Path(tempfile.mkdtemp(prefix="igasil-selftest-"))
    try:
        overrides = {"episodes": 150, "train.warmup": 40, "train.window": 50,
                     "agent.batch": 16, "net.hidden": 16, "variant": "igasil",
                     "buffers.scer_capacity": 8}
        a = run_campaign(resolve(overrides=overrides), run_dir=tmp / "a")
        b = run_campaign(resolve(overrides=overrides), run_dir=tmp / "b")
        return (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def check_env_physics():
    env_a, env_b = RescueEnv(), RescueEnv()
    env_a.reset(np.random.default_rng(11))
    env_b.reset(np.random.default_rng(11))
    rng = np.random.default_rng(12)
    for _ in range(30):
        acts = [rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)]
        ra = env_a.step([a.copy() for a in acts])
        rb = env_b.step([a.copy() for a in acts])
        if not np.array_equal(env_a.rescuer_pos, env_b.rescuer_pos):
            return False
        if ra.reward != rb.reward:
            return False
        if not ra.done and ra.reward != 0.0:
            return False
        pts = np.vstack([env_a.rescuer_pos, env_a.animal_pos])
        if np.any(pts < -1) or np.any(pts > 1):
            return False
        if ra.done:
            break
    return True


CHECKS = (
    ("payoff-table", check_payoff_table),
    ("mlp-gradients", check_mlp_gradients),
    ("adversarial-gradients", check_adversarial_gradients),
    ("agent-gradients", check_agent_gradients),
    ("heap-oracle", check_heap_oracle),
    ("imitation-reward", check_imitation_reward),
    ("env-physics", check_env_physics),
    ("determinism", check_determinism),
)


def run_selftest(payoff_override=None, out=print):
    """Run every check group; returns True iff all passed."""
    ok = True
    out(f"{'check':<24} {'result':<6} seconds")
    for name, fn in CHECKS:
        t0 = time.time()
        try:
            passed = (fn(payoff_override) if name == "payoff-table" and payoff_override is not None
                      else fn())
        except Exception as exc:  # a crash is a failure, not an abort
            passed = False
            out(f"  error in {name}: {exc}")
        ok &= bool(passed)
        out(f"{name:<24} {'PASS' if passed else 'FAIL':<6} {time.time() - t0:.2f}")
    out("selftest: " + ("all checks passed" if ok else "FAILURES detected"))
    return ok
