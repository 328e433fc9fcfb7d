"""Multi-user LMMSE detection on the embedded layout, plus QPSK/BPSK bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .frame import DDGrid, FrameLayout, Scheme


class DetectionError(np.linalg.LinAlgError):
    """The regularized Gram matrix could not be factorized."""


@dataclass(frozen=True)
class Constellation:
    kind: str
    points: np.ndarray  # index i carries the bits of i, MSB first
    bits_per_symbol: int

    @classmethod
    def from_kind(cls, kind: str) -> "Constellation":
        kind = kind.lower()
        if kind == "bpsk":
            return cls("bpsk", np.array([1.0 + 0j, -1.0 + 0j]), 1)
        if kind == "qpsk":
            # Gray: first bit picks the real sign, second the imaginary sign
            pts = np.array([(1 - 2 * (i >> 1)) + 1j * (1 - 2 * (i & 1)) for i in range(4)]) / np.sqrt(2)
            return cls("qpsk", pts, 2)
        raise ValueError(f"unsupported constellation {kind!r}")

    def modulate(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return self.points[bits @ weights]

    def slice_indices(self, soft) -> np.ndarray:
        soft = np.asarray(soft).reshape(-1)
        return np.argmin(np.abs(soft[:, None] - self.points[None, :]), axis=1)

    def demodulate(self, soft) -> np.ndarray:
        idx = self.slice_indices(soft)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((idx[:, None] >> shifts[None, :]) & 1).reshape(-1)


@dataclass
class DetectionProblem:
    y_dd: np.ndarray
    H_cols: object  # dense ndarray or scipy sparse, MN x n_data
    col_map: np.ndarray  # n_data x 3 rows of (user, m, n)
    snr: float
    user_columns: list  # per-user column positions into H_cols


def assemble_detection_problem(y_grid, h_eff_per_user, layout: FrameLayout, snr: float) -> DetectionProblem:
    """Keep, for every user, the columns of its effective channel at its data cells.

    Each entry of ``h_eff_per_user`` is either a full MN x MN matrix or one
    already restricted to that user's data cells (in sorted flat order).
    """
    if layout.scheme is not Scheme.EMBEDDED:
        raise ValueError("data detection needs an embedded layout")
    dims = layout.dims
    y = y_grid.values.reshape(-1, order="F") if isinstance(y_grid, DDGrid) else np.asarray(y_grid).reshape(-1)
    if y.size != dims.MN:
        raise ValueError("received vector does not match the grid")
    if len(h_eff_per_user) != layout.n_users:
        raise ValueError("one effective channel per user is required")
    blocks, cmap, user_cols = [], [], []
    start = 0
    for u in range(layout.n_users):
        idx = layout.data_indices(u)
        H = h_eff_per_user[u]
        if idx.size == 0:
            user_cols.append(np.zeros(0, dtype=np.int64))
            continue
        if H is None:
            raise ValueError(f"no channel estimate for user {u}")
        if H.shape[1] == dims.MN:
            H = H[:, idx]
        elif H.shape[1] != idx.size:
            raise ValueError(f"user {u} channel has {H.shape[1]} columns, expected {dims.MN} or {idx.size}")
        blocks.append(H)
        cmap.append(np.column_stack([np.full(idx.size, u), idx % dims.M, idx // dims.M]))
        user_cols.append(np.arange(start, start + idx.size))
        start += idx.size
    if all(sp.issparse(b) for b in blocks):
        H_cols = sp.hstack(blocks, format="csc")
    else:
        H_cols = np.hstack([b.toarray() if sp.issparse(b) else np.asarray(b) for b in blocks])
    col_map = np.vstack(cmap) if cmap else np.zeros((0, 3), dtype=np.int64)
    return DetectionProblem(y, H_cols, col_map, float(snr), user_cols)


def lmmse_detect(problem: DetectionProblem) -> list:
    """``(H^H H + I/snr)^-1 H^H y`` split back into per-user soft symbols."""
    if not problem.snr > 0:
        raise ValueError("snr must be positive")
    H, y = problem.H_cols, problem.y_dd
    n = H.shape[1]
    reg = 1.0 / problem.snr
    if sp.issparse(H):
        Hh = H.conj().T.tocsc()
        G = (Hh @ H + reg * sp.identity(n, dtype=np.complex128, format="csc")).tocsc()
        rhs = Hh @ y
        try:
            lu = spla.splu(G, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise DetectionError(f"regularized Gram matrix is singular: {exc}") from exc
        x = lu.solve(rhs)
    else:
        H = np.asarray(H)
        G = H.conj().T @ H + reg * np.eye(n)
        rhs = H.conj().T @ y
        try:
            x = la.cho_solve(la.cho_factor(G), rhs)
        except la.LinAlgError as exc:
            raise DetectionError(f"regularized Gram matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise DetectionError("LMMSE solve produced non-finite symbols")
    return [x[cols] for cols in problem.user_columns]


@dataclass
class BerReport:
    errors: list
    bits: list

    @property
    def per_user(self) -> list:
        return [e / b if b else 0.0 for e, b in zip(self.errors, self.bits)]

    @property
    def total_errors(self) -> int:
        return int(sum(self.errors))

    @property
    def total_bits(self) -> int:
        return int(sum(self.bits))

    @property
    def ber(self) -> float:
        return self.total_errors / self.total_bits if self.total_bits else 0.0


def slice_and_ber(soft, tx_bits, constellation: Constellation) -> BerReport:
    if len(soft) != len(tx_bits):
        raise ValueError("soft symbols and bit streams disagree on the user count")
    errors, bits = [], []
    for s, b in zip(soft, tx_bits):
        b = np.asarray(b).reshape(-1)
        if b.size != np.asarray(s).size * constellation.bits_per_symbol:
            raise ValueError("bit stream length does not match the symbol count")
        errors.append(int(np.count_nonzero(constellation.demodulate(s) != b)))
        bits.append(int(b.size))
    return BerReport(errors, bits)
