import numpy as np

from fqlems.rng import SplitMix64, _uniform_jit, _uniform_py, new_state, uniform


def test_same_seed_same_stream():
    a = SplitMix64(1234)
    b = SplitMix64(1234)
    assert [a.uniform() for _ in range(100)] == [b.uniform() for _ in range(100)]


def test_different_seeds_differ():
    a = SplitMix64(1)
    b = SplitMix64(2)
    assert [a.uniform() for _ in range(10)] != [b.uniform() for _ in range(10)]


def test_range_and_rough_uniformity():
    r = SplitMix64(7)
    xs = np.array([r.uniform() for _ in range(20000)])
    assert np.all(xs >= 0.0) and np.all(xs < 1.0)
    assert abs(xs.mean() - 0.5) < 0.01
    # each decile should hold about 10%
    hist, _ = np.histogram(xs, bins=10, range=(0.0, 1.0))
    assert np.all(np.abs(hist / len(xs) - 0.1) < 0.01)


def test_draw_counter_tracks_position():
    r = SplitMix64(99)
    assert r.position == 0
    for k in range(5):
        r.uniform()
    assert r.position == 5


def test_jit_and_python_paths_identical():
    s1 = new_state(20260822)
    s2 = new_state(20260822)
    xs = [_uniform_jit(s1) for _ in range(200)]
    ys = [_uniform_py(s2) for _ in range(200)]
    assert xs == ys
    assert s1[0] == s2[0] and s1[1] == s2[1]


def test_known_first_draws_pinned():
    # golden values freeze the recurrence; any algorithm change must show here
    r = SplitMix64(1)
    got = [r.uniform() for _ in range(3)]
    want = [0.5665615751722809, 0.7457817572627011, 0.9710027535867962]
    assert got == want


def test_active_uniform_matches_class():
    s = new_state(31415)
    r = SplitMix64(31415)
    assert [uniform(s) for _ in range(50)] == [r.uniform() for _ in range(50)]
