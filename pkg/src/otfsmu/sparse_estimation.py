"""Greedy sparse recovery of multi-user DD channels from time-domain pilots.

Every user sends a full-length pilot ``s_u`` at the same time, so the AP sees
``r = sum_u H_u s_u + w = Psi h + w`` with one dictionary column
``Pi^l Delta^k s_u`` per (user, delay, Doppler) hypothesis.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .channel import ChannelRealization, Tap, apply_time_channel

log = logging.getLogger(__name__)


class DictionaryMode(str, enum.Enum):
    RESTRICTED = "restricted"
    FULL = "full"


@dataclass(frozen=True)
class SensingDictionary:
    columns: np.ndarray  # MN x (U*D)
    index_map: np.ndarray  # (U*D) x 3 rows of (user, delay, doppler)
    pilot_seqs: tuple
    n_delay: int
    n_doppler: int
    mode: DictionaryMode
    norms: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.pilot_seqs)

    @property
    def n_columns(self) -> int:
        return self.columns.shape[1]

    def column_index(self, user: int, delay: int, doppler: int) -> int:
        D = self.n_delay * self.n_doppler
        return user * D + doppler * self.n_delay + delay


def build_dictionary(pilot_seqs, l_max: int, k_max: int, mode=DictionaryMode.RESTRICTED, M: int | None = None):
    """Stack ``Pi^l Delta^k s_u`` user-major, then Doppler-major, delay fastest.

    Restricted mode spans ``l < l_max`` and ``k < k_max``. Full mode spans the
    whole grid and needs ``M`` (``N`` follows from the pilot length).
    """
    seqs = [np.asarray(s, dtype=np.complex128).reshape(-1) for s in pilot_seqs]
    if not seqs:
        raise ValueError("no pilot sequences")
    MN = seqs[0].size
    if any(s.size != MN for s in seqs):
        raise ValueError("pilot sequences differ in length")
    if any(not np.any(s) for s in seqs):
        raise ValueError("zero-norm pilot sequence")
    mode = DictionaryMode(mode)
    if mode is DictionaryMode.FULL:
        if M is None or MN % M:
            raise ValueError("full dictionary needs the delay bin count M dividing the pilot length")
        n_delay, n_doppler = M, MN // M
    else:
        n_delay, n_doppler = int(l_max), int(k_max)
    D = n_delay * n_doppler
    cols = np.empty((MN, len(seqs) * D), dtype=np.complex128)
    idx = np.arange(MN)
    ramps = np.exp(2j * np.pi * ((idx[None, :] * np.arange(n_doppler)[:, None]) % MN) / MN)
    index_map = np.empty((len(seqs) * D, 3), dtype=np.int64)
    c = 0
    for u, s in enumerate(seqs):
        modulated = ramps * s[None, :]
        for k in range(n_doppler):
            for l in range(n_delay):
                cols[:, c] = np.roll(modulated[k], l)
                index_map[c] = (u, l, k)
                c += 1
    norms = np.linalg.norm(cols, axis=0)
    return SensingDictionary(cols, index_map, tuple(seqs), n_delay, n_doppler, mode, norms)


@dataclass
class SparseSolution:
    support: list
    coeffs: np.ndarray
    residual_norms: list  # entry 0 is ||r||, then one per iteration
    iterations: int = 0
    ls_solves: int = 0
    inner_product_ops: int = 0
    truncated: bool = False
    trace: list = field(default_factory=list)


def _check_finite(r, dictionary):
    if not np.all(np.isfinite(r)):
        raise ValueError("received vector has non-finite entries")
    if not np.all(np.isfinite(dictionary.columns)):
        raise ValueError("dictionary has non-finite entries")


def _greedy(r, dictionary: SensingDictionary, max_iter: int, epsilon: float | None, trace: bool):
    """Shared OMP loop; ``epsilon=None`` runs exactly ``max_iter`` steps."""
    Psi = dictionary.columns
    MN, ncols = Psi.shape
    r = np.asarray(r, dtype=np.complex128).reshape(-1)
    if r.size != MN:
        raise ValueError(f"received vector length {r.size} != dictionary rows {MN}")
    _check_finite(r, dictionary)
    norms = np.where(dictionary.norms > 0, dictionary.norms, np.inf)

    Q = np.empty((MN, max_iter), dtype=np.complex128)
    R = np.zeros((max_iter, max_iter), dtype=np.complex128)
    b = np.zeros(max_iter, dtype=np.complex128)
    blocked = np.zeros(ncols, dtype=bool)
    support: list[int] = []
    q = r.copy()
    energy = float(np.vdot(q, q).real)
    sol = SparseSolution([], np.zeros(0, np.complex128), [float(np.sqrt(energy))])

    while len(support) < max_iter:
        corr = Psi.conj().T @ q
        sol.inner_product_ops += MN * ncols
        score = np.abs(corr) / norms
        score[blocked] = -1.0
        j = int(np.argmax(score))
        if score[j] < 0:
            break
        blocked[j] = True
        n = len(support)
        v = Psi[:, j].copy()
        proj = np.zeros(n, dtype=np.complex128)
        for _ in range(2):  # re-orthogonalise once
            if n:
                c = Q[:, :n].conj().T @ v
                v -= Q[:, :n] @ c
                proj += c
        rjj = np.linalg.norm(v)
        if rjj <= 1e-10 * dictionary.norms[j]:
            # column already in the span of the support
            continue
        Q[:, n] = v / rjj
        R[:n, n] = proj
        R[n, n] = rjj
        b[n] = np.vdot(Q[:, n], r)
        q = q - Q[:, n] * np.vdot(Q[:, n], q)
        support.append(j)
        sol.ls_solves += 1
        sol.iterations += 1
        new_energy = float(np.vdot(q, q).real)
        sol.residual_norms.append(float(np.sqrt(new_energy)))
        if trace:
            row = {"iteration": sol.iterations, "index": j, "residual_norm": sol.residual_norms[-1]}
            sol.trace.append(row)
            log.debug("omp %s", row)
        if epsilon is not None and (abs(energy - new_energy) <= epsilon or new_energy <= epsilon):
            break
        energy = new_energy

    k = len(support)
    sol.support = support
    if k:
        sol.coeffs = solve_triangular(R[:k, :k], b[:k], lower=False)
    return sol


def omp(r, dictionary: SensingDictionary, epsilon: float, max_support: int | None = None, trace=False):
    """OMP stopped once the residual energy drops by at most ``epsilon``
    (or falls to ``epsilon`` itself, which ends noiseless fits exactly).

    ``max_support`` caps runaway selection; hitting it sets ``truncated``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    cap = dictionary.n_columns if max_support is None else min(int(max_support), dictionary.n_columns)
    sol = _greedy(r, dictionary, cap, float(epsilon), trace)
    if max_support is not None and cap < dictionary.n_columns and len(sol.support) == cap:
        last_drop = sol.residual_norms[-2] ** 2 - sol.residual_norms[-1] ** 2
        if abs(last_drop) > epsilon and sol.residual_norms[-1] ** 2 > epsilon:
            sol.truncated = True
            log.info("omp support truncated at %d columns", cap)
    return sol


def omp_sci(r, dictionary: SensingDictionary, L: int, trace=False):
    """OMP with known sparsity: exactly ``L`` greedy steps."""
    L = int(L)
    if not 1 <= L <= dictionary.n_columns:
        raise ValueError(f"sparsity {L} outside 1..{dictionary.n_columns}")
    return _greedy(r, dictionary, L, None, trace)


def recover_taps(sol: SparseSolution, dictionary: SensingDictionary, floor: float = 1e-9):
    """Map the support back to per-user tap lists, dropping numerical zeros."""
    per_user = [[] for _ in range(dictionary.n_users)]
    for j, h in zip(sol.support, sol.coeffs):
        if abs(h) < floor:
            continue
        u, l, k = (int(x) for x in dictionary.index_map[j])
        per_user[u].append(Tap(complex(h), l, k))
    for taps in per_user:
        taps.sort(key=lambda t: (t.doppler, t.delay))
    return per_user


def received_pilots(channel: ChannelRealization, pilot_seqs) -> np.ndarray:
    """Noise-free superposition ``sum_u H_u s_u``."""
    r = np.zeros(np.asarray(pilot_seqs[0]).size, dtype=np.complex128)
    for taps, s in zip(channel.per_user, pilot_seqs):
        r += apply_time_channel(s, taps)
    return r


def _as_map(taps_per_user) -> dict:
    out: dict = {}
    per_user = taps_per_user.per_user if isinstance(taps_per_user, ChannelRealization) else taps_per_user
    for u, taps in enumerate(per_user):
        for t in taps:
            key = (u, int(t[1]), int(t[2]))
            out[key] = out.get(key, 0j) + complex(t[0])
    return out


def nmse(true_taps, est_taps, l_max: int | None = None, k_max: int | None = None) -> float:
    """``||h_hat - h||^2 / ||h||^2`` over the stacked (user, delay, Doppler) index space.

    With ``l_max``/``k_max`` given, estimated taps outside ``l <= l_max``,
    ``k <= k_max`` are rejected as a geometry error.
    """
    h = _as_map(true_taps)
    h_hat = _as_map(est_taps)
    if l_max is not None and k_max is not None:
        for _, l, k in h_hat:
            if not (0 <= l <= l_max and 0 <= k <= k_max):
                raise ValueError(f"estimated tap at ({l}, {k}) outside the dictionary geometry")
    ref = sum(abs(g) ** 2 for g in h.values())
    if ref == 0:
        raise ValueError("true channel has zero energy")
    err = sum(abs(h_hat.get(key, 0j) - h.get(key, 0j)) ** 2 for key in set(h) | set(h_hat))
    return float(err / ref)
