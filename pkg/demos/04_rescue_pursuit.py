"""Inside the continuous rescue task: physics, holds, and the payoff logic.

Two slower rescuers chase three faster fleeing animals in a closed arena.
A touch pins an animal for eight steps; the partner must arrive before the
timer runs out, and which animal they pin jointly decides the shared
payoff. Here a hand-coded chase controller plays both rescuers so the
episode mechanics are easy to watch without any learning.
"""

import numpy as np

from igasil.envs import RescueConfig, RescueEnv

env = RescueEnv(RescueConfig())
rng = np.random.default_rng(4)
obs = env.reset(rng)
print(f"arena [-1,1]^2, observation size {len(obs[0])}, "
      f"animals at\n{np.round(env.animal_pos, 2)}")


def chase(agent_idx, target):
    """Accelerate straight at the target animal (no anticipation)."""
    delta = env.animal_pos[target] - env.rescuer_pos[agent_idx]
    norm = np.linalg.norm(delta)
    return delta / norm if norm > 1e-9 else np.zeros(2)


# both rescuers commit to animal 0: the cooperative convention the learners
# have to discover for themselves
target = 0
total = 0.0
for step in range(env.cfg.horizon):
    res = env.step([chase(0, target), chase(1, target)])
    total += res.reward
    if env.hold_owner is not None and env.hold_timer == env.cfg.t_hold:
        animal, holder = env.hold_owner
        print(f"step {step + 1:2d}: rescuer {holder} pinned animal {animal}, "
              f"partner has {env.cfg.t_hold} steps")
    if res.done:
        print(f"step {step + 1:2d}: episode over, outcome {res.info['outcome']}, "
              f"shared reward {res.reward}")
        break

print(f"touch counters per animal: {env.touch_counts.tolist()}")
print(f"episode return: {total}")

print("\n== the flee policy steers away from the nearest rescuer ==")
env.reset(np.random.default_rng(5))
env.animal_pos[0] = [0.0, 0.0]
env.rescuer_pos[0] = [-0.4, 0.0]
env.rescuer_pos[1] = [-0.9, -0.9]
print(f"rescuer west of animal      -> flee action {np.round(env.animal_policy(0), 2)}")
env.animal_pos[0] = [0.98, 0.0]
print(f"same chase at the east wall -> flee action {np.round(env.animal_policy(0), 2)} "
      "(wall repulsion cancels most of the push)")

print("\n== uncoordinated play is punished ==")
env2 = RescueEnv(RescueConfig())
env2.reset(np.random.default_rng(6))
env2.rescuer_pos[:] = [[0.0, 0.0], [-0.9, -0.9]]
env2.animal_pos[:] = [[0.05, 0.0], [0.9, 0.9], [0.9, -0.9]]
res = env2.step([np.array([1.0, 0.0]), np.zeros(2)])
while not res.done:
    res = env2.step([np.zeros(2), np.zeros(2)])  # partner never helps
print(f"lone hold on the highest-value animal times out: outcome {res.info['outcome']}, "
      f"shared reward {res.reward}")
