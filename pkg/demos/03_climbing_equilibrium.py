"""The climbing game's trap, and how self-imitation escapes it.

The matrix below pays 11 only when both players pick `catch_a`, but a solo
`catch_a` costs -30. Independent learners therefore drift to the safe
`catch_c` corner worth 5. A discriminator trained on each agent's own best
episodes re-weights the actions until the risky optimum becomes the
rational choice.

This demo trains at a small budget (a couple of minutes); the full study
behind the acceptance suite uses 20000 episodes and five seeds.
"""

import tempfile
from pathlib import Path

import numpy as np

from igasil.config import resolve
from igasil.envs import OUTCOMES, PAYOFF
from igasil.trainer import Trainer, run_campaign

print("== payoff structure ==")
header = "          " + "".join(f"{o[-4:]:>8}" for o in OUTCOMES)
print(header)
for i, row in enumerate(PAYOFF):
    print(f"{OUTCOMES[i]:>10}" + "".join(f"{v:8.0f}" for v in row))
print("optimal joint action: (catch_a, catch_a) -> 11; shadowed: (catch_c, catch_c) -> 5")

BUDGET = dict(
    episodes=6000,
    **{
        "train.warmup": 500,
        "buffers.scer_capacity": 16,
        "gasil.lambda_max": 2.0,
        "agent.actor_lr": 3e-3,
        "agent.entropy_coef": 0.05,
    },
)

with tempfile.TemporaryDirectory() as tmp:
    for variant in ("iac", "igasil"):
        cfg = resolve(overrides={**BUDGET, "variant": variant, "seed": 1, "out": tmp})
        run_dir = run_campaign(cfg)
        rows = (run_dir / "metrics.csv").read_text().strip().split("\n")[1:]
        print(f"\n== {variant} ==")
        for row in rows[::2]:
            f = row.split(",")
            print(f"  episodes {f[0]:>5}: mean return {float(f[1]):7.2f}   "
                  f"(a,a) {float(f[8]):5.1%}   (c,c) {float(f[10]):5.1%}")
        final = rows[-1].split(",")
        verdict = "optimal (a,a)" if float(final[8]) > 0.9 else (
            "shadowed equilibrium" if float(final[1]) >= 5 else "unconverged")
        print(f"  -> settled on: {verdict}")

    print("\n== a converged pair evaluated greedily ==")
    cfg = resolve(overrides={**BUDGET, "variant": "igasil", "seed": 1, "out": tmp})
    tr = Trainer(cfg)
    ckpt = sorted(Path(tmp).glob("climbing-igasil-*/checkpoints/final"))[0]
    tr.load_checkpoint(ckpt)
    mean, hist = tr.evaluate(100, rng=np.random.default_rng(0))
    print(f"greedy mean return over 100 episodes: {mean:.2f}; outcomes {hist}")
