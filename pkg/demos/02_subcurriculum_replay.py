"""Why sub-trajectories matter: the positive buffer keeps useful fragments
of otherwise bad episodes.

Two episodes both total -15, but one of them contains a +5 stretch of
genuinely good behavior. Ranking whole episodes would discard it; ranking
contiguous segments by their own discounted return keeps it around as
self-generated demonstration data.
"""

import numpy as np

from igasil.buffers import SubCurriculumReplay, Trajectory, Transition, discounted_return

rng = np.random.default_rng(7)


def as_trajectory(rewards):
    obs = np.zeros(1)
    ts = [Transition(obs, 0, r, obs, done=(i == len(rewards) - 1))
          for i, r in enumerate(rewards)]
    return Trajectory(ts, gamma=1.0)


messy = [0, +1, +3, +1, 0, 0, -20]
flat = [0, 0, 0, 0, 0, 0, -15]
print(f"episode A rewards {messy}  -> return {discounted_return(messy, 1.0)}")
print(f"episode B rewards {flat}  -> return {discounted_return(flat, 1.0)}")
print("equal totals, but A hides the fragment [0, +1, +3, +1] worth "
      f"{discounted_return(messy[:4], 1.0)}")

print("\n== feeding both episodes into a capacity-6 positive buffer ==")
buf = SubCurriculumReplay(6)
buf.insert(as_trajectory(messy), gamma=1.0, n_subs=8, rng=rng)
buf.insert(as_trajectory(flat), gamma=1.0, n_subs=8, rng=rng)
print(f"stored returns: {sorted(buf.stored_returns(), reverse=True)}")
print("the buffer kept the high-return fragments and dropped the -15 episodes")

print("\n== the heap is an exact top-k filter ==")
buf2 = SubCurriculumReplay(4)
offers = [float(r) for r in rng.integers(-10, 11, size=30)]
for r in offers:
    buf2.offer(as_trajectory([r]))
print(f"offered 30 returns, kept {sorted(buf2.stored_returns(), reverse=True)}")
print(f"brute-force top-4:   {sorted(sorted(offers, reverse=True)[:4], reverse=True)}")

print("\n== suffixes near a sparse terminal reward rank highest ==")
sparse = [0.0] * 9 + [1.0]
buf3 = SubCurriculumReplay(5)
buf3.insert(as_trajectory(sparse), gamma=0.9, n_subs=30, rng=rng)
for ret, _, traj in sorted(buf3._heap, reverse=True):
    print(f"  stored segment of length {len(traj):2d} with return {ret:.3f}")
print("short terminal suffixes score ~1.0 while the whole episode scores 0.9^9;")
print("imitating them first is the reverse-curriculum effect.")
