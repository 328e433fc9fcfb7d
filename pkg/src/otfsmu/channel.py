"""Sparse delay-Doppler channels and the DD <-> time transforms.

The time-domain channel of one user is ``H = sum_i h_i Pi^l_i Delta^k_i`` with
``Pi`` the forward cyclic shift and ``Delta = diag(z^0, ..., z^(MN-1))``,
``z = exp(j 2 pi / MN)``. Everything here is matrix-free except
:func:`build_effective_channel_dense`, which exists as an oracle.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from . import kernels
from .frame import DDGrid, GridDims

DENSE_MN_CAP = 1024


class Tap(NamedTuple):
    gain: complex
    delay: int
    doppler: int


def tap_arrays(taps: Sequence[Tap]):
    """Split a tap list into (gains, delays, dopplers) arrays."""
    if len(taps) == 0:
        return np.zeros(0, np.complex128), np.zeros(0, np.int64), np.zeros(0, np.int64)
    g, l, k = zip(*taps)
    return np.asarray(g, np.complex128), np.asarray(l, np.int64), np.asarray(k, np.int64)


@dataclass
class ChannelRealization:
    per_user: list
    l_max: int
    k_max: int

    def __post_init__(self):
        self.per_user = [[Tap(complex(t[0]), int(t[1]), int(t[2])) for t in taps] for taps in self.per_user]
        for u, taps in enumerate(self.per_user):
            pairs = [(t.delay, t.doppler) for t in taps]
            if len(set(pairs)) != len(pairs):
                raise ValueError(f"user {u} has repeated (delay, doppler) pairs")

    @property
    def n_users(self) -> int:
        return len(self.per_user)

    def check_spread(self, dims: GridDims | None = None):
        if dims is not None and (self.l_max > dims.M or self.k_max > dims.N):
            raise ValueError("spreads exceed the grid")
        for taps in self.per_user:
            for t in taps:
                if not (0 <= t.delay < self.l_max and 0 <= t.doppler < self.k_max):
                    raise ValueError(f"tap {t} outside delay<{self.l_max}, doppler<{self.k_max}")

    def energy(self) -> float:
        return float(sum(abs(t.gain) ** 2 for taps in self.per_user for t in taps))

    def to_text(self) -> str:
        lines = [f"# l_max={self.l_max} k_max={self.k_max}", "user gain_re gain_im l k"]
        for u, taps in enumerate(self.per_user):
            for t in taps:
                lines.append(f"{u} {t.gain.real!r} {t.gain.imag!r} {t.delay} {t.doppler}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_users: int | None = None) -> "ChannelRealization":
        l_max = k_max = None
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("#"):
                for part in line[1:].split():
                    key, _, val = part.partition("=")
                    if key == "l_max":
                        l_max = int(val)
                    elif key == "k_max":
                        k_max = int(val)
                continue
            if not line or line.startswith("user"):
                continue
            u, re, im, l, k = line.split()
            rows.append((int(u), complex(float(re), float(im)), int(l), int(k)))
        if l_max is None or k_max is None:
            raise ValueError("channel record lacks the l_max/k_max header")
        count = n_users if n_users is not None else (max((r[0] for r in rows), default=-1) + 1)
        per_user = [[] for _ in range(count)]
        for u, g, l, k in rows:
            per_user[u].append(Tap(g, l, k))
        return cls(per_user, l_max, k_max)


@dataclass(frozen=True)
class PulsePair:
    g_tx: np.ndarray
    g_rx: np.ndarray

    @classmethod
    def rectangular(cls, M: int) -> "PulsePair":
        return cls(np.ones(M, np.complex128), np.ones(M, np.complex128))

    def check(self, dims: GridDims):
        if np.shape(self.g_tx) != (dims.M,) or np.shape(self.g_rx) != (dims.M,):
            raise ValueError("pulse sample vectors must have length M")


def draw_channel(rng, U, L, l_max, k_max, profile="uniform", decay=1.0) -> ChannelRealization:
    """Draw ``L`` distinct integer taps per user with CN gains of total mean power 1.

    ``profile="uniform"`` gives every tap variance 1/L. ``"exponential"``
    weights a tap with delay l by exp(-l/decay) before normalising the
    weights of the drawn taps to sum to one.
    """
    D = l_max * k_max
    if L > D:
        raise ValueError(f"cannot place {L} distinct taps in {l_max}x{k_max} positions")
    per_user = []
    for _ in range(U):
        pos = rng.choice(D, size=L, replace=False)
        delays = pos % l_max
        dopplers = pos // l_max
        if profile == "uniform":
            power = np.full(L, 1.0 / L)
        elif profile == "exponential":
            w = np.exp(-delays / float(decay))
            power = w / w.sum()
        else:
            raise ValueError(f"unknown power-delay profile {profile!r}")
        g = rng.standard_normal(L) + 1j * rng.standard_normal(L)
        gains = g * np.sqrt(power / 2.0)
        per_user.append([Tap(complex(h), int(l), int(k)) for h, l, k in zip(gains, delays, dopplers)])
    return ChannelRealization(per_user, l_max, k_max)


# --------------------------------------------------------------------------
# time-domain operators
# --------------------------------------------------------------------------


def cyclic_shift_apply(v, l: int) -> np.ndarray:
    """``Pi^l v`` with ``(Pi v)_i = v_(i-1 mod MN)``."""
    v = np.asarray(v)
    return np.roll(v, int(l) % v.shape[0])


def phase_ramp_apply(v, k: int) -> np.ndarray:
    """``Delta^k v`` with ``(Delta^k v)_i = z^(i k) v_i``."""
    v = np.asarray(v)
    MN = v.shape[0]
    exponent = (np.arange(MN) * int(k)) % MN
    return v * np.exp(2j * np.pi * exponent / MN)


def apply_time_channel(s, taps: Sequence[Tap]) -> np.ndarray:
    g, l, k = tap_arrays(taps)
    return kernels.time_channel(np.asarray(s), g, l, k)


def dd_to_time(x_dd, pulses: PulsePair | None, dims: GridDims) -> np.ndarray:
    """``(F_N^H kron G_tx) x_dd`` via inverse DFTs along the Doppler axis."""
    X = np.asarray(x_dd, dtype=np.complex128).reshape(dims.M, dims.N, order="F")
    S = np.fft.ifft(X, axis=1, norm="ortho")
    if pulses is not None:
        S = S * np.asarray(pulses.g_tx)[:, None]
    return S.reshape(-1, order="F")


def time_to_dd(r, pulses: PulsePair | None, dims: GridDims) -> np.ndarray:
    """``(F_N kron G_rx) r`` via DFTs along the Doppler axis."""
    R = np.asarray(r, dtype=np.complex128).reshape(dims.M, dims.N, order="F")
    if pulses is not None:
        R = R * np.asarray(pulses.g_rx)[:, None]
    return np.fft.fft(R, axis=1, norm="ortho").reshape(-1, order="F")


# --------------------------------------------------------------------------
# DD-domain relation
# --------------------------------------------------------------------------


def correction_factor(m: int, n: int, l: int, k: int, dims: GridDims) -> complex:
    M, N, MN = dims.M, dims.N, dims.MN
    if not (0 <= m < M and 0 <= n < N):
        raise ValueError(f"cell ({m}, {n}) outside the grid")
    base = cmath.exp(2j * math.pi * ((k * ((m - l) % M)) % MN) / MN)
    if m >= l:
        return base
    return cmath.exp(-2j * math.pi * n / N) * base


def apply_dd_channel_conv(x_grid, taps: Sequence[Tap]) -> DDGrid:
    """Noise-free twisted convolution of a DD grid with a tap list (rectangular pulses)."""
    if isinstance(x_grid, DDGrid):
        dims, X = x_grid.dims, x_grid.values
    else:
        X = np.asarray(x_grid, dtype=np.complex128)
        dims = GridDims(*X.shape)
    g, l, k = tap_arrays(taps)
    return DDGrid(dims, kernels.twisted_conv(X, g, l, k))


def time_channel_dense(taps: Sequence[Tap], MN: int) -> np.ndarray:
    H = np.zeros((MN, MN), dtype=np.complex128)
    cols = np.arange(MN)
    z_pow = np.exp(2j * np.pi * np.arange(MN) / MN)
    for t in taps:
        rows = (cols + t.delay) % MN
        H[rows, cols] += t.gain * z_pow[(cols * t.doppler) % MN]
    return H


def build_effective_channel_dense(
    taps: Sequence[Tap], pulses: PulsePair | None, dims: GridDims, max_mn: int = DENSE_MN_CAP
) -> np.ndarray:
    """Literal ``(F_N kron G_rx) H (F_N^H kron G_tx)`` as a dense matrix."""
    if dims.MN > max_mn:
        raise MemoryError(f"dense effective channel refused for MN={dims.MN} > cap {max_mn}")
    pulses = pulses or PulsePair.rectangular(dims.M)
    pulses.check(dims)
    F = np.fft.fft(np.eye(dims.N), norm="ortho")
    A = np.kron(F, np.diag(pulses.g_rx))
    B = np.kron(F.conj().T, np.diag(pulses.g_tx))
    return A @ time_channel_dense(taps, dims.MN) @ B


def effective_channel_sparse(taps: Sequence[Tap], dims: GridDims, cells=None) -> sp.csc_matrix:
    """Effective DD channel for rectangular pulses, columns restricted to ``cells``.

    ``cells`` are column-major flat indices; ``None`` keeps all MN columns.
    """
    if cells is None:
        cells = np.arange(dims.MN, dtype=np.int64)
    cells = np.asarray(cells, dtype=np.int64)
    g, l, k = tap_arrays(taps)
    rows, cols, vals = kernels.effective_triplets(g, l, k, cells, dims.M, dims.N)
    return sp.csc_matrix((vals, (rows, cols)), shape=(dims.MN, cells.size))
