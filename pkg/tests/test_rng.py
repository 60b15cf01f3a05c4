"""Counter-based stream: determinism, derivation, and kernel parity."""

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from noisyselect.rng import MASK64, CounterRng, derive_key, mix64


def test_mix64_is_deterministic_and_avalanching():
    assert mix64(0) == mix64(0)
    outs = {mix64(i) for i in range(1000)}
    assert len(outs) == 1000
    assert all(0 <= o <= MASK64 for o in outs)


def test_same_seed_same_sequence():
    a = CounterRng(12345)
    b = CounterRng(12345)
    assert [a.uniform() for _ in range(50)] == [b.uniform() for _ in range(50)]


def test_scalar_and_bulk_draws_agree():
    a = CounterRng(99)
    b = CounterRng(99)
    scalar = np.array([a.uniform() for _ in range(64)])
    bulk = b.uniforms(64)
    np.testing.assert_array_equal(scalar, bulk)


def test_derived_streams_differ_from_parent_and_each_other():
    root = CounterRng(7)
    children = [root.derive(i) for i in range(8)]
    seqs = [tuple(c.uniforms(16).tolist()) for c in children]
    assert len(set(seqs)) == 8
    assert tuple(CounterRng(7).uniforms(16).tolist()) not in seqs


def test_child_key_consumes_counter_and_differs():
    rng = CounterRng(5)
    before = rng.counter
    k1 = rng.child_key()
    k2 = rng.child_key()
    assert rng.counter == before + 2
    assert k1 != k2
    assert k1 != CounterRng(5).uniform()


@given(st.integers(min_value=0, max_value=MASK64))
def test_mix64_stays_in_range(z):
    assert 0 <= mix64(z) <= MASK64


def test_integers_in_range_and_deterministic():
    rng = CounterRng(3)
    draws = rng.integers(17, 10_000)
    assert draws.min() >= 0 and draws.max() < 17
    counts = np.bincount(draws, minlength=17)
    assert counts.min() > 10_000 / 17 * 0.7  # roughly uniform


def test_permutation_is_a_permutation():
    rng = CounterRng(11)
    perm = rng.permutation(1000)
    assert sorted(perm.tolist()) == list(range(1000))
    rng2 = CounterRng(11)
    np.testing.assert_array_equal(perm, rng2.permutation(1000))


def test_uniform_mean_and_bernoulli():
    rng = CounterRng(2024)
    u = rng.uniforms(200_000)
    assert abs(u.mean() - 0.5) < 0.005
    flips = CounterRng(2025).bernoulli(0.3, 200_000)
    assert abs(flips.mean() - 0.3) < 0.005


def test_kernel_stream_matches_python_stream():
    from noisyselect._kernels import stream_uniforms

    key = derive_key(42, 3)
    py = CounterRng(key).uniforms(256)
    nb = stream_uniforms(np.uint64(key), 256)
    np.testing.assert_array_equal(py, nb)
