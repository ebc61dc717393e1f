import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from recoilslit import rng

words = st.integers(0, 2**64 - 1)


def _numpy_block(counter, key):
    # numpy bumps the counter once before producing its first block
    c = np.array(counter, dtype=np.uint64) - np.array([1, 0, 0, 0], dtype=np.uint64)
    bg = np.random.Philox(key=np.array(key, dtype=np.uint64), counter=c)
    return bg.random_raw(4)


@given(c0=st.integers(1, 2**64 - 1), c1=words, c2=words, c3=words, k0=words, k1=words)
def test_philox_matches_numpy(c0, c1, c2, c3, k0, k1):
    ours = rng.philox4x64(tuple(np.uint64(c) for c in (c0, c1, c2, c3)), (k0, k1))
    np.testing.assert_array_equal(np.array(ours, dtype=np.uint64), _numpy_block((c0, c1, c2, c3), (k0, k1)))


def test_philox_vectorised_equals_scalar():
    idx = np.arange(1, 50, dtype=np.uint64)
    blocks = rng.philox4x64((idx, np.uint64(3), np.uint64(0), np.uint64(0)), (11, 2))
    for j, i in enumerate(idx):
        single = rng.philox4x64((i, np.uint64(3), np.uint64(0), np.uint64(0)), (11, 2))
        assert all(blocks[w][j] == single[w] for w in range(4))


def test_to_unit_range():
    bits = np.array([0, 2**64 - 1, 2**63], dtype=np.uint64)
    u = rng.to_unit(bits)
    assert u[0] == 0.0
    assert u[1] < 1.0
    assert u[2] == 0.5


def test_uniforms_deterministic_and_keyed():
    idx = np.arange(1000)
    a = rng.uniforms(5, rng.TAG_EVOLVE, idx, 0)
    b = rng.uniforms(5, rng.TAG_EVOLVE, idx, 0)
    c = rng.uniforms(5, rng.TAG_SAMPLE, idx, 0)
    d = rng.uniforms(6, rng.TAG_EVOLVE, idx, 0)
    e = rng.uniforms(5, rng.TAG_EVOLVE, idx, 1)
    np.testing.assert_array_equal(a[0], b[0])
    for other in (c, d, e):
        assert not np.any(a[0] == other[0])


def test_uniforms_depend_only_on_own_index():
    full = rng.uniforms(9, 1, np.arange(100), 4)[2]
    part = rng.uniforms(9, 1, np.arange(40, 60), 4)[2]
    np.testing.assert_array_equal(full[40:60], part)


def test_uniform_distribution():
    u = np.concatenate(rng.uniforms(1, 1, np.arange(20000), 0))
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_normals_distribution():
    g0, g1 = rng.normals(3, 1, np.arange(50000), 0)
    assert stats.kstest(g0, "norm").pvalue > 1e-3
    assert stats.kstest(g1, "norm").pvalue > 1e-3
    assert abs(np.corrcoef(g0, g1)[0, 1]) < 0.02


def test_derive_seed():
    assert rng.derive_seed(1, 2) == rng.derive_seed(1, 2)
    assert len({rng.derive_seed(1, b) for b in range(100)}) == 100
    assert rng.derive_seed(1, 2) != rng.derive_seed(2, 1)
