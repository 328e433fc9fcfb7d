import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from otfsmu import _accel, kernels

from conftest import crandn


def _case(seed, M, N, T):
    rng = np.random.default_rng(seed)
    g = crandn(rng, T)
    l = rng.integers(0, M, T)
    k = rng.integers(0, N, T)
    return rng, g, l, k


@pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")
class TestBackendsAgree:
    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 5), st.integers(0, 2**32 - 1))
    def test_twisted_conv(self, M, N, T, seed):
        rng, g, l, k = _case(seed, M, N, T)
        X = crandn(rng, M, N)
        np.testing.assert_allclose(kernels.twisted_conv_numba(X, g, l, k), kernels.twisted_conv_numpy(X, g, l, k), atol=1e-12)

    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 5), st.integers(0, 2**32 - 1))
    def test_time_channel(self, M, N, T, seed):
        rng, g, l, k = _case(seed, M, N, T)
        s = crandn(rng, M * N)
        np.testing.assert_allclose(kernels.time_channel_numba(s, g, l, k), kernels.time_channel_numpy(s, g, l, k), atol=1e-12)

    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 5), st.integers(0, 2**32 - 1))
    def test_effective_triplets(self, M, N, T, seed):
        rng, g, l, k = _case(seed, M, N, T)
        cells = np.sort(rng.choice(M * N, size=max(1, M * N // 2), replace=False)).astype(np.int64)
        a = kernels.effective_triplets_numba(g, l, k, cells, M, N)
        b = kernels.effective_triplets_numpy(g, l, k, cells, M, N)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        np.testing.assert_allclose(a[2], b[2], atol=1e-12)


def test_alpha_grid_matches_scalar():
    from otfsmu.channel import correction_factor
    from otfsmu.frame import GridDims

    A = kernels.alpha_grid(5, 3, 2, 1)
    dims = GridDims(5, 3)
    for m in range(5):
        for n in range(3):
            assert A[m, n] == pytest.approx(correction_factor(m, n, 2, 1, dims), abs=1e-14)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba" if _accel.HAS_NUMBA else "numpy")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, OTFSMU_DISABLE_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", "from otfsmu._accel import backend_name; print(backend_name())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == expected
