"""Inner loops of the delay-Doppler channel.

Every kernel has a pure-numpy implementation (``*_numpy``) and a numba one
(``*_numba``). The unsuffixed names point at whichever backend ``_accel``
selected, so callers never branch on the backend themselves.

Taps are passed as three parallel arrays ``gains`` (complex), ``delays`` and
``dopplers`` (integer), which is what numba can consume without boxing.
"""
import numpy as np

from ._accel import USE_NUMBA, HAS_NUMBA


# --------------------------------------------------------------------------
# numpy reference implementations
# --------------------------------------------------------------------------


def alpha_grid(M, N, l, k):
    """Correction factor of the twisted convolution on the whole M x N grid."""
    MN = M * N
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    base = np.exp(2j * np.pi * k * ((m - l) % M) / MN)
    wrap = np.exp(-2j * np.pi * n / N)
    return np.where(m < l, base * wrap, base * np.ones_like(wrap))


def twisted_conv_numpy(X, gains, delays, dopplers):
    M, N = X.shape
    Y = np.zeros((M, N), dtype=np.complex128)
    for h, l, k in zip(gains, delays, dopplers):
        l = int(l) % M
        k = int(k) % N
        shifted = np.roll(X, (l, k), axis=(0, 1))
        Y += h * alpha_grid(M, N, l, k) * shifted
    return Y


def time_channel_numpy(s, gains, delays, dopplers):
    MN = s.shape[0]
    idx = np.arange(MN)
    r = np.zeros(MN, dtype=np.complex128)
    for h, l, k in zip(gains, delays, dopplers):
        ramp = np.exp(2j * np.pi * ((idx * int(k)) % MN) / MN)
        r += h * np.roll(ramp * s, int(l))
    return r


def effective_triplets_numpy(gains, delays, dopplers, cells, M, N):
    """Nonzeros of the effective DD channel restricted to input ``cells``.

    ``cells`` holds column-major flat indices (m + n*M). Returns
    ``(rows, cols, vals)`` where ``cols`` indexes into ``cells``.
    """
    cells = np.asarray(cells, dtype=np.int64)
    m = cells % M
    n = cells // M
    pos = np.arange(cells.size, dtype=np.int64)
    MN = M * N
    rows, cols, vals = [], [], []
    for h, l, k in zip(gains, delays, dopplers):
        l = int(l) % M
        k = int(k) % N
        mo = (m + l) % M
        no = (n + k) % N
        a = np.exp(2j * np.pi * k * ((mo - l) % M) / MN)
        a = np.where(mo < l, a * np.exp(-2j * np.pi * no / N), a)
        rows.append(mo + no * M)
        cols.append(pos)
        vals.append(h * a)
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0, dtype=np.complex128)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _powers(MN):
        # z^j for j = 0..MN-1; every phase in the kernels is one of these
        z = np.empty(MN, dtype=np.complex128)
        for j in range(MN):
            z[j] = np.exp(2j * np.pi * j / MN)
        return z

    @njit(cache=True)
    def twisted_conv_numba(X, gains, delays, dopplers):
        M, N = X.shape
        MN = M * N
        z = _powers(MN)
        Y = np.zeros((M, N), dtype=np.complex128)
        for t in range(gains.shape[0]):
            h = gains[t]
            l = delays[t] % M
            k = dopplers[t] % N
            for n in range(N):
                wrap = z[(MN - n * M) % MN]  # exp(-j 2 pi n / N)
                ns = (n - k) % N
                for m in range(M):
                    ms = (m - l) % M
                    a = z[(k * ms) % MN]
                    if m < l:
                        a = a * wrap
                    Y[m, n] += h * a * X[ms, ns]
        return Y

    @njit(cache=True)
    def time_channel_numba(s, gains, delays, dopplers):
        MN = s.shape[0]
        z = _powers(MN)
        r = np.zeros(MN, dtype=np.complex128)
        for t in range(gains.shape[0]):
            h = gains[t]
            l = delays[t] % MN
            k = dopplers[t] % MN
            for i in range(MN):
                src = (i - l) % MN
                r[i] += h * z[(src * k) % MN] * s[src]
        return r

    @njit(cache=True)
    def effective_triplets_numba(gains, delays, dopplers, cells, M, N):
        MN = M * N
        z = _powers(MN)
        T = gains.shape[0]
        C = cells.shape[0]
        rows = np.empty(T * C, dtype=np.int64)
        cols = np.empty(T * C, dtype=np.int64)
        vals = np.empty(T * C, dtype=np.complex128)
        p = 0
        for t in range(T):
            h = gains[t]
            l = delays[t] % M
            k = dopplers[t] % N
            for c in range(C):
                m = cells[c] % M
                n = cells[c] // M
                mo = (m + l) % M
                no = (n + k) % N
                a = z[(k * ((mo - l) % M)) % MN]
                if mo < l:
                    a = a * z[(MN - no * M) % MN]
                rows[p] = mo + no * M
                cols[p] = c
                vals[p] = h * a
                p += 1
        return rows, cols, vals

else:  # pragma: no cover
    twisted_conv_numba = twisted_conv_numpy
    time_channel_numba = time_channel_numpy
    effective_triplets_numba = effective_triplets_numpy


def _as_tap_arrays(gains, delays, dopplers):
    return (
        np.ascontiguousarray(gains, dtype=np.complex128).reshape(-1),
        np.ascontiguousarray(delays, dtype=np.int64).reshape(-1),
        np.ascontiguousarray(dopplers, dtype=np.int64).reshape(-1),
    )


if USE_NUMBA:
    _twisted, _time, _trip = twisted_conv_numba, time_channel_numba, effective_triplets_numba
else:
    _twisted, _time, _trip = twisted_conv_numpy, time_channel_numpy, effective_triplets_numpy


def twisted_conv(X, gains, delays, dopplers):
    g, l, k = _as_tap_arrays(gains, delays, dopplers)
    return _twisted(np.ascontiguousarray(X, dtype=np.complex128), g, l, k)


def time_channel(s, gains, delays, dopplers):
    g, l, k = _as_tap_arrays(gains, delays, dopplers)
    return _time(np.ascontiguousarray(s, dtype=np.complex128), g, l, k)


def effective_triplets(gains, delays, dopplers, cells, M, N):
    g, l, k = _as_tap_arrays(gains, delays, dopplers)
    cells = np.ascontiguousarray(cells, dtype=np.int64).reshape(-1)
    return _trip(g, l, k, cells, int(M), int(N))
