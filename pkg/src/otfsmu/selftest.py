"""Fast invariant checks at desk scale, runnable without pytest."""
from __future__ import annotations

import numpy as np

from .channel import apply_dd_channel_conv, build_effective_channel_dense, dd_to_time, draw_channel, effective_channel_sparse, time_to_dd, apply_time_channel
from .detection import assemble_detection_problem, lmmse_detect
from .frame import GridDims, build_embedded_layout, build_impulse_layout, devectorize, embedded_guard_overhead, footprint, max_simultaneous_users
from .harness import SimConfig, run_nmse_sweep
from .impulse_estimation import ThresholdConfig, estimate_taps_impulse
from .sparse_estimation import build_dictionary, nmse, omp_sci, received_pilots, recover_taps


def _pipelines_agree():
    rng = np.random.default_rng(0)
    dims = GridDims(6, 4)
    taps = draw_channel(rng, 1, 3, 3, 3).per_user[0]
    x = rng.standard_normal(dims.MN) + 1j * rng.standard_normal(dims.MN)
    dense = build_effective_channel_dense(taps, None, dims) @ x
    free = time_to_dd(apply_time_channel(dd_to_time(x, None, dims), taps), None, dims)
    conv = apply_dd_channel_conv(devectorize(x, dims), taps).values.reshape(-1, order="F")
    sparse = effective_channel_sparse(taps, dims) @ x
    return max(np.max(np.abs(dense - v)) for v in (free, conv, sparse)) < 1e-10


def _layout_arithmetic():
    l = k = 4
    dims = GridDims(32, 32)
    union = set()
    for u in range(4):
        cell = (u % 2 * (l + 1), u // 2 * (k + 1))
        new = footprint(cell, l, k, dims) - union
        if len(new) != embedded_guard_overhead(u + 1, l, k).cells:
            return False
        union |= new
    return len(union) == (3 * l + 2) * (3 * k + 2) and max_simultaneous_users(dims, 7, 7) == 16


def _noiseless_recovery():
    rng = np.random.default_rng(1)
    dims = GridDims(8, 8)
    ch = draw_channel(rng, 2, 3, 3, 3)
    pilots = [1.0 - 2.0 * rng.integers(0, 2, dims.MN) for _ in range(2)]
    D = build_dictionary(pilots, 3, 3)
    est = recover_taps(omp_sci(received_pilots(ch, pilots), D, 6), D)
    if nmse(ch, est) > 1e-12:
        return False
    layout = build_impulse_layout(dims, 1, 3, 3)
    x = np.zeros(dims.MN, complex)
    x[0] = 1.0
    y = apply_dd_channel_conv(devectorize(x, dims), ch.per_user[0])
    est = estimate_taps_impulse(y, layout, 3, 3, ThresholdConfig(tau=1e-9))
    return nmse(ch.per_user[:1], est) < 1e-20


def _lmmse_limit():
    rng = np.random.default_rng(2)
    dims = GridDims(16, 16)
    layout = build_embedded_layout(dims, 2, 2, 2)
    ch = draw_channel(rng, 2, 3, 2, 2)
    H = [effective_channel_sparse(t, dims, layout.data_indices(u)) for u, t in enumerate(ch.per_user)]
    y = rng.standard_normal(dims.MN) + 1j * rng.standard_normal(dims.MN)
    x = np.concatenate(lmmse_detect(assemble_detection_problem(y, H, layout, 1e12)))
    A = np.hstack([h.toarray() for h in H])
    ls = np.linalg.lstsq(A, y, rcond=None)[0]
    return np.linalg.norm(x - ls) / np.linalg.norm(ls) < 1e-6


def _sweep_deterministic():
    cfg = SimConfig(M=16, N=16, trials=3, users=(2,), snr_db_list=(0.0, 20.0), seed=5)
    return run_nmse_sweep(cfg, workers=1).to_csv() == run_nmse_sweep(cfg, workers=1).to_csv()


CHECKS = (
    ("pipelines agree", _pipelines_agree),
    ("layout arithmetic", _layout_arithmetic),
    ("noiseless recovery", _noiseless_recovery),
    ("lmmse to least squares", _lmmse_limit),
    ("sweep determinism", _sweep_deterministic),
)


def run_selftest(verbose: bool = False) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            passed = bool(fn())
            detail = ""
        except Exception as exc:  # report, keep going
            passed, detail = False, f" ({type(exc).__name__}: {exc})"
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}{detail}")
    if verbose:
        print("all checks passed" if ok else "some checks failed")
    return ok
