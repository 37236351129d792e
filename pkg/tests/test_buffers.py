import numpy as np
import pytest

from igasil.buffers import (
    BufferNotReady,
    RingReplay,
    SubCurriculumReplay,
    Trajectory,
    Transition,
    discounted_return,
    subtrajectory_candidates,
)


def tr(reward=0.0, obs=None, action=0, done=False):
    o = np.zeros(1) if obs is None else np.asarray(obs, dtype=float)
    return Transition(obs=o, action=action, reward=reward, next_obs=o, done=done)


def traj(rewards, gamma=1.0):
    ts = [tr(r) for r in rewards]
    ts[-1].done = True
    return Trajectory(ts, gamma)


def top_k_oracle(offers, k):
    """Brute force: sort all (return, seq) offers descending, take k."""
    ranked = sorted(enumerate(offers), key=lambda p: (p[1], p[0]), reverse=True)
    return sorted(r for _, r in ranked[:k])


# ------------------------------------------------------- discounted return


def test_discounted_return_worked_trajectories():
    # the two reference reward sequences with equal undiscounted totals
    assert discounted_return([0, 1, 3, 1, 0, 0, -20], 1.0) == pytest.approx(-15.0)
    assert discounted_return([0, 0, 0, 0, 0, 0, -15], 1.0) == pytest.approx(-15.0)
    assert discounted_return([0, 1, 3, 1], 1.0) == pytest.approx(5.0)


def test_discounted_return_single_and_empty():
    assert discounted_return([7.25], 0.37) == pytest.approx(7.25)
    assert discounted_return([], 0.9) == 0.0


def test_discounted_return_prefix_property():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 12))
        rewards = list(rng.normal(size=n))
        gamma = float(rng.uniform(0.1, 1.0))
        r = float(rng.normal())
        lhs = discounted_return(rewards + [r], gamma)
        rhs = discounted_return(rewards, gamma) + gamma ** len(rewards) * r
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_trajectory_caches_return_and_validates_done():
    t = traj([0, 1, 3, 1, 0, 0, -20])
    assert t.discounted_return == pytest.approx(-15.0)
    bad = [tr(0.0, done=True), tr(1.0)]
    with pytest.raises(ValueError):
        Trajectory(bad, 1.0)
    with pytest.raises(ValueError):
        Trajectory([], 1.0)


# ------------------------------------------------------- ring buffer


def test_ring_fifo_eviction():
    buf = RingReplay(2)
    a, b, c = tr(1), tr(2), tr(3)
    buf.push(a)
    assert len(buf) == 1
    buf.push(b)
    buf.push(c)
    assert len(buf) == 2
    assert buf.items() == [b, c]


def test_ring_sample_all_items_present():
    buf = RingReplay(4)
    for i in range(4):
        buf.push(tr(i))
    got = buf.sample_uniform(4000, np.random.default_rng(0))
    assert {t.reward for t in got} == {0.0, 1.0, 2.0, 3.0}


def test_ring_sample_empty_is_error():
    with pytest.raises(ValueError):
        RingReplay(3).sample_uniform(1, np.random.default_rng(0))


def test_ring_sample_single_item_repeats():
    buf = RingReplay(3)
    t = tr(5)
    buf.push(t)
    got = buf.sample_uniform(5, np.random.default_rng(0))
    assert all(g.reward == 5 and np.array_equal(g.obs, t.obs) for g in got)


def test_ring_sample_deterministic_given_rng_state():
    buf = RingReplay(8)
    for i in range(8):
        buf.push(tr(i))
    a = buf.sample_uniform(32, np.random.default_rng(123))
    b = buf.sample_uniform(32, np.random.default_rng(123))
    assert [x.reward for x in a] == [x.reward for x in b]


def test_ring_sample_uniform_frequencies():
    buf = RingReplay(4)
    for i in range(4):
        buf.push(tr(i))
    got = buf.sample_uniform(10_000, np.random.default_rng(7))
    counts = np.bincount([int(t.reward) for t in got], minlength=4)
    # binomial 5-sigma bound around 2500
    sigma = np.sqrt(10_000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - 2500) <= 5 * sigma)


def test_ring_never_exceeds_capacity():
    buf = RingReplay(5)
    for i in range(57):
        buf.push(tr(i))
        assert len(buf) <= 5
    assert [t.reward for t in buf.items()] == [52, 53, 54, 55, 56]


# ------------------------------------------------------- segment counting


@pytest.mark.parametrize("n,expected", [(1, 1), (3, 6), (7, 28)])
def test_subtrajectory_candidates(n, expected):
    # oracle: enumerate contiguous (start, end) pairs
    brute = sum(1 for s in range(n) for e in range(s, n))
    assert brute == expected
    assert subtrajectory_candidates(n) == expected


# ------------------------------------------------------- positive buffer


def test_offer_keeps_top_k():
    buf = SubCurriculumReplay(2)
    for r in (1.0, 3.0, 2.0):
        buf.offer(traj([r]))
    assert sorted(buf.stored_returns()) == [2.0, 3.0]


def test_offer_tie_newer_wins():
    buf = SubCurriculumReplay(1)
    first = traj([5.0])
    second = traj([5.0])
    buf.offer(first)
    buf.offer(second)
    assert buf._heap[0][2] is second


def test_offer_matches_sort_oracle_with_ties():
    rng = np.random.default_rng(42)
    for trial in range(20):
        k = int(rng.integers(1, 12))
        offers = [float(x) for x in rng.integers(-3, 4, size=200)]  # many ties
        buf = SubCurriculumReplay(k)
        for r in offers:
            buf.offer(traj([r]))
            assert buf.check_heap_property()
        assert sorted(buf.stored_returns()) == top_k_oracle(offers, k)


def test_offer_oracle_random_returns():
    rng = np.random.default_rng(3)
    offers = list(rng.normal(size=1000))
    buf = SubCurriculumReplay(64)
    for r in offers:
        buf.offer(traj([r]))
    assert sorted(buf.stored_returns()) == top_k_oracle(offers, 64)


def test_insert_offers_full_and_distinct_subsegments():
    # len-3 trajectory: 6 segments, full one excluded from sub-draws
    rng = np.random.default_rng(0)
    buf = SubCurriculumReplay(16)
    t = traj([0.0, 0.0, 1.0])
    buf.insert(t, 1.0, n_subs=2, rng=rng)
    assert len(buf) == 3  # full + exactly two subs
    stored = sorted(buf.stored_returns())
    assert stored[-1] == pytest.approx(1.0)  # full trajectory return present
    # every stored return must be the return of some contiguous segment
    segments = {}
    rewards = [0.0, 0.0, 1.0]
    for s in range(3):
        for e in range(s, 3):
            segments[(s, e)] = discounted_return(rewards[s:e + 1], 1.0)
    assert all(any(abs(v - r) < 1e-12 for v in segments.values()) for r in stored)


def test_insert_all_segments_when_n_subs_large():
    rng = np.random.default_rng(1)
    buf = SubCurriculumReplay(64)
    t = traj([1.0, 2.0, 4.0, 8.0])
    buf.insert(t, 1.0, n_subs=100, rng=rng)
    # 4*(4+1)/2 = 10 distinct segments total
    assert len(buf) == 10
    oracle = sorted(
        discounted_return([1.0, 2.0, 4.0, 8.0][s:e + 1], 1.0)
        for s in range(4)
        for e in range(s, 4)
    )
    assert sorted(buf.stored_returns()) == pytest.approx(oracle)


def test_insert_single_step_trajectory_has_no_subs():
    buf = SubCurriculumReplay(8)
    buf.insert(traj([2.0]), 1.0, n_subs=4, rng=np.random.default_rng(0))
    assert len(buf) == 1


def test_insert_sub_returns_discounted_from_segment_start():
    rng = np.random.default_rng(9)
    buf = SubCurriculumReplay(64)
    t = traj([0.0, 0.0, 5.0], gamma=0.5)
    buf.insert(t, 0.5, n_subs=100, rng=rng)
    # suffix [5] scores 5.0 (own-start discounting), full scores 1.25
    stored = sorted(buf.stored_returns())
    assert stored[-1] == pytest.approx(5.0)
    assert any(abs(v - 1.25) < 1e-12 for v in stored)


def test_sample_pairs_single_transition_repeats():
    buf = SubCurriculumReplay(4)
    t = traj([3.0])
    buf.offer(t)
    pairs = buf.sample_pairs(6, np.random.default_rng(0))
    assert len(pairs) == 6
    assert all(p[0] is t.transitions[0].obs for p in pairs)


def test_sample_pairs_deterministic():
    buf = SubCurriculumReplay(4)
    buf.offer(traj([1.0, 2.0]))
    buf.offer(traj([3.0]))
    a = buf.sample_pairs(20, np.random.default_rng(5))
    b = buf.sample_pairs(20, np.random.default_rng(5))
    assert all(x[0] is y[0] and x[1] == y[1] for x, y in zip(a, b))


def test_sample_pairs_weighted_by_trajectory_length():
    buf = SubCurriculumReplay(4)
    long_t = Trajectory([tr(0, action=1), tr(0, action=1), tr(1, action=1, done=True)], 1.0)
    short_t = Trajectory([tr(1, action=0, done=True)], 1.0)
    buf.offer(long_t)
    buf.offer(short_t)
    pairs = buf.sample_pairs(10_000, np.random.default_rng(11))
    n_long = sum(1 for p in pairs if p[1] == 1)
    sigma = np.sqrt(10_000 * 0.75 * 0.25)
    assert abs(n_long - 7500) <= 5 * sigma


def test_sample_pairs_empty_signals_not_ready():
    with pytest.raises(BufferNotReady):
        SubCurriculumReplay(4).sample_pairs(1, np.random.default_rng(0))


def test_transition_count_tracks_evictions():
    buf = SubCurriculumReplay(2)
    buf.offer(traj([1.0, 1.0]))        # 2 transitions, return 2
    buf.offer(traj([3.0]))             # 1 transition
    assert buf.transition_count == 3
    buf.offer(traj([4.0, 4.0, 4.0]))   # evicts the return-2 pair
    assert buf.transition_count == 4
    assert sorted(buf.stored_returns()) == [3.0, 12.0]
