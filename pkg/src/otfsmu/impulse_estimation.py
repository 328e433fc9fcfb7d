"""Threshold tap detection around guarded impulse pilots."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .channel import PulsePair, Tap, build_effective_channel_dense, correction_factor, effective_channel_sparse
from .frame import DDGrid, FrameLayout, GridDims, LayoutError, observation_windows

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ThresholdConfig:
    """Detection threshold on ``|Y|``; ``tau=None`` means ``multiplier * sigma``."""

    sigma: float = 1.0
    multiplier: float = 3.0
    tau: float | None = None

    @property
    def threshold(self) -> float:
        tau = self.tau if self.tau is not None else self.multiplier * self.sigma
        if not tau > 0:
            raise ValueError("detection threshold must be positive")
        return float(tau)


def estimate_taps_impulse(y_grid, layout: FrameLayout, l_max: int, k_max: int, cfg: ThresholdConfig, report=None):
    """Scan each user's window after its pilot and keep cells with ``|Y| > tau``.

    A hit at offset ``(l, k)`` from the pilot gives ``h = Y / (p_u * alpha)``
    with the correction factor taken at the absolute grid cell. If ``report``
    is a list, one dict per detection is appended to it.
    """
    values = y_grid.values if isinstance(y_grid, DDGrid) else np.asarray(y_grid)
    dims = layout.dims
    if values.shape != (dims.M, dims.N):
        raise ValueError("received grid does not match the layout dimensions")
    windows = observation_windows(layout, l_max, k_max)
    seen = set()
    for w in windows:
        cells = set(w.tolist())
        if len(cells) != w.size or cells & seen:
            raise LayoutError("observation windows overlap; pilots are too close for this spread")
        seen |= cells
    tau = cfg.threshold
    y = values.reshape(-1, order="F")
    out = []
    for p, w in zip(layout.users, windows):
        taps = []
        hits = np.flatnonzero(np.abs(y[w]) > tau)
        for pos in hits:
            l, k = int(pos % (l_max + 1)), int(pos // (l_max + 1))
            m, n = dims.cell(w[pos])
            alpha = correction_factor(m, n, l, k, dims)
            g = complex(y[w[pos]] / (p.value * alpha))
            taps.append(Tap(g, l, k))
            if report is not None:
                report.append(
                    {"user": p.user_id, "l": l, "k": k, "gain": g, "abs_y": float(abs(y[w[pos]])), "tau": tau}
                )
        if report is not None:
            log.debug("user %d: %d detections above %.4g", p.user_id, len(taps), tau)
        out.append(taps)
    return out


def reconstruct_effective_channel(est_taps, dims: GridDims, pulses: PulsePair | None = None, sparse: bool = False):
    """One effective DD channel per user from estimated taps.

    The dense path runs the literal Kronecker construction and is capped in
    size; ``sparse=True`` uses the twisted-convolution structure (rectangular
    pulses only) and returns CSC matrices.
    """
    if sparse:
        if pulses is not None and not (np.allclose(pulses.g_tx, 1) and np.allclose(pulses.g_rx, 1)):
            raise ValueError("sparse effective channels assume rectangular pulses")
        return [effective_channel_sparse(taps, dims) for taps in est_taps]
    return [build_effective_channel_dense(taps, pulses, dims) for taps in est_taps]


def stack_effective_channels(per_user):
    """Horizontal stack ``[H_1, ..., H_U]``."""
    if all(sp.issparse(h) for h in per_user):
        return sp.hstack(per_user, format="csc")
    return np.hstack([h.toarray() if sp.issparse(h) else h for h in per_user])
