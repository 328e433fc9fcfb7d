"""Seeded Monte Carlo sweeps over SNR, threshold and user count.

Trial ``i`` of a sweep draws everything from a stream derived from
``(seed, i)`` and evaluates every x-axis point of the sweep on that one
realization (channel, pilots, bits and a unit-variance noise vector that is
rescaled per SNR). Trials are farmed out to a process pool and reduced in
trial order, so results do not depend on the worker count.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import __version__
from ._accel import backend_name
from .channel import ChannelRealization, PulsePair, apply_time_channel, dd_to_time, draw_channel, effective_channel_sparse, time_to_dd
from .detection import Constellation, DetectionError, assemble_detection_problem, lmmse_detect, slice_and_ber
from .frame import Allocation, GridDims, PilotSpec, Scheme, build_embedded_layout, build_impulse_layout, devectorize
from .impulse_estimation import ThresholdConfig, estimate_taps_impulse
from .sparse_estimation import DictionaryMode, build_dictionary, nmse, omp, omp_sci, received_pilots, recover_taps

log = logging.getLogger(__name__)

WORKERS_ENV = "OTFSMU_WORKERS"
ESTIMATORS = ("omp", "omp_sci", "impulse")


class ConfigError(ValueError):
    """Malformed or inconsistent simulation configuration."""


class SweepError(RuntimeError):
    """A sweep point ended with no successful trial."""


def _floats(values):
    return tuple(float(v) for v in values)


def _ints(values):
    return tuple(int(v) for v in values)


@dataclass(frozen=True)
class SimConfig:
    M: int = 32
    N: int = 32
    delta_f: float = 15e3
    f_c: float = 4e9
    users: tuple = (4,)
    L: int = 4
    l_max: int = 4
    k_max: int = 4
    snr_db_list: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    trials: int = 1000
    seed: int = 1
    estimator: tuple = ESTIMATORS
    # OMP stops when the residual energy drops by <= epsilon; unset means
    # epsilon_scale * M * N * sigma^2
    epsilon: float | None = None
    epsilon_scale: float = 1e-5
    omp_support_cap: int | None = None  # unset means 4 * U * L
    dictionary_mode: str = "restricted"
    tau_multiplier: float = 3.0
    tau_multipliers: tuple = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0)
    threshold_snr_db: float = 10.0
    scheme: str | None = None  # unset: impulse grid for NMSE, embedded for BER
    allocation: str = "partitioned"
    csi: tuple = ("perfect", "estimated")
    pilot_constellation: str = "bpsk"
    data_constellation: str = "qpsk"
    pilot_power_db: float = 15.0  # embedded pilot energy over data symbol energy
    path_power: float | None = None  # per-path gain variance; unset means 1/L
    gain_profile: str = "uniform"
    profile_decay: float = 1.0

    def __post_init__(self):
        conv = {
            "users": _ints,
            "snr_db_list": _floats,
            "tau_multipliers": _floats,
            "estimator": lambda v: tuple(str(x).lower() for x in v),
            "csi": lambda v: tuple(str(x).lower() for x in v),
        }
        for name, fn in conv.items():
            value = getattr(self, name)
            if isinstance(value, (str, int, float)):
                value = (value,)
            object.__setattr__(self, name, fn(value))
        self.validate()

    @property
    def dims(self) -> GridDims:
        return GridDims(self.M, self.N, self.delta_f)

    @property
    def per_path_power(self) -> float:
        return 1.0 / self.L if self.path_power is None else float(self.path_power)

    def validate(self):
        try:
            dims = self.dims
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.users or min(self.users) < 1:
            raise ConfigError("users must list positive user counts")
        if self.L < 1 or self.L > self.l_max * self.k_max:
            raise ConfigError(f"L={self.L} taps do not fit l_max*k_max={self.l_max * self.k_max}")
        if self.l_max > dims.M or self.k_max > dims.N:
            raise ConfigError("l_max and k_max must not exceed M and N")
        if not self.snr_db_list:
            raise ConfigError("snr_db_list is empty")
        bad = set(self.estimator) - set(ESTIMATORS)
        if bad:
            raise ConfigError(f"unknown estimator(s) {sorted(bad)}")
        bad = set(self.csi) - {"perfect", "estimated"}
        if bad:
            raise ConfigError(f"unknown csi mode(s) {sorted(bad)}")
        if self.scheme is not None and self.scheme not in {s.value for s in Scheme}:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.allocation not in {a.value for a in Allocation}:
            raise ConfigError(f"unknown allocation {self.allocation!r}")
        if self.dictionary_mode not in {d.value for d in DictionaryMode}:
            raise ConfigError(f"unknown dictionary mode {self.dictionary_mode!r}")
        if self.gain_profile not in ("uniform", "exponential"):
            raise ConfigError(f"unknown gain profile {self.gain_profile!r}")
        for name in ("pilot_constellation", "data_constellation"):
            if getattr(self, name) not in ("bpsk", "qpsk"):
                raise ConfigError(f"{name} must be bpsk or qpsk")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not self.epsilon_scale > 0 or not self.tau_multiplier > 0:
            raise ConfigError("epsilon_scale and tau_multiplier must be positive")
        if self.path_power is not None and not self.path_power > 0:
            raise ConfigError("path_power must be positive")

    def with_overrides(self, **kw) -> "SimConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            return dataclasses.replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def digest(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SimConfig)}
_LIST_FIELDS = {"users", "snr_db_list", "tau_multipliers", "estimator", "csi"}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    kind = _FIELD_TYPES[name]
    if name in _LIST_FIELDS:
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if raw.lower() in ("none", ""):
        if "None" in str(kind):
            return None
        raise ConfigError(f"{name} needs a value")
    try:
        if kind == "int":
            return int(raw, 0)
        if "float" in str(kind):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw.lower() if name in ("scheme", "allocation", "dictionary_mode", "gain_profile") else raw


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    """Read ``key = value`` lines (``#`` comments, comma-separated lists)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    try:
        return dataclasses.replace(base or SimConfig(), **values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


@dataclass
class SweepResult:
    columns: tuple
    rows: list
    metadata: dict = field(default_factory=dict)
    per_trial: dict = field(default_factory=dict, repr=False)

    def records(self, **filters) -> list:
        out = []
        for row in self.rows:
            rec = dict(zip(self.columns, row))
            if all(rec.get(k) == v for k, v in filters.items()):
                out.append(rec)
        return out

    def series(self, x: str, y: str, **filters):
        recs = sorted(self.records(**filters), key=lambda r: r[x])
        return np.array([r[x] for r in recs]), np.array([r[y] for r in recs])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"columns": list(self.columns), "rows": [dict(zip(self.columns, r)) for r in self.rows], "metadata": self.metadata}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    def write(self, path, fmt="csv"):
        text = self.to_csv() if fmt == "csv" else self.to_json()
        with open(path, "w", newline="") as fh:
            fh.write(text)


# --------------------------------------------------------------------------
# trial plumbing
# --------------------------------------------------------------------------


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial),)))


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", WORKERS_ENV, raw)
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def _map_trials(fn, n: int, workers: int | None = None) -> list:
    workers = worker_count() if workers is None else workers
    if workers <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    chunk = max(1, n // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n), chunksize=chunk))


def _cgauss(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def _draw(cfg: SimConfig, rng, U: int) -> ChannelRealization:
    ch = draw_channel(rng, U, cfg.L, cfg.l_max, cfg.k_max, cfg.gain_profile, cfg.profile_decay)
    scale = math.sqrt(cfg.per_path_power * cfg.L)
    if scale != 1.0:
        ch = ChannelRealization([[(t.gain * scale, t.delay, t.doppler) for t in taps] for taps in ch.per_user], ch.l_max, ch.k_max)
    return ch


def _bpsk(rng, n):
    return 1.0 - 2.0 * rng.integers(0, 2, n)


def transmit_dd(x_dd, taps, dims: GridDims, pulses: PulsePair | None = None):
    """One user's DD frame through its channel: DD -> time -> H -> DD, noise-free."""
    return time_to_dd(apply_time_channel(dd_to_time(x_dd, pulses, dims), taps), pulses, dims)


def _reduce(values: np.ndarray, label: str, excluded: dict):
    """Mean and sample std over finite entries, in trial order."""
    ok = values[np.isfinite(values)]
    n_bad = values.size - ok.size
    if n_bad:
        excluded[label] = int(n_bad)
        if n_bad > 0.01 * values.size:
            excluded.setdefault("flagged", []).append(label)
            log.warning("point %s lost %d of %d trials", label, n_bad, values.size)
    if ok.size == 0:
        raise SweepError(f"no successful trial at point {label}")
    std = float(np.std(ok, ddof=1)) if ok.size > 1 else 0.0
    return float(np.mean(ok)), std, int(ok.size)


def _metadata(cfg: SimConfig, sweep: str, excluded: dict, **extra) -> dict:
    meta = {
        "sweep": sweep,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "code_version": __version__,
        "backend": backend_name(),
        "trials_requested": cfg.trials,
        "excluded_trials": excluded,
    }
    meta.update(extra)
    return meta


# --------------------------------------------------------------------------
# NMSE sweep
# --------------------------------------------------------------------------


def _omp_epsilon(cfg: SimConfig, sigma2: float) -> float:
    if cfg.epsilon is not None:
        return cfg.epsilon
    return cfg.epsilon_scale * cfg.M * cfg.N * sigma2


def _nmse_trial(i: int, cfg: SimConfig, U: int, estimators: tuple):
    dims = cfg.dims
    MN = dims.MN
    rng = trial_rng(cfg.seed, i)
    ch = _draw(cfg, rng, U)
    pilots = [_bpsk(rng, MN).astype(np.complex128) for _ in range(U)]
    w_time = _cgauss(rng, MN)
    impulse_signs = _bpsk(rng, U)
    w_imp = _cgauss(rng, MN)

    n_snr = len(cfg.snr_db_list)
    out = np.full((n_snr, len(estimators)), np.nan)
    ls = np.zeros((n_snr, len(estimators)), dtype=np.int64)
    ops = np.zeros((n_snr, len(estimators)), dtype=np.int64)
    errors = []

    cs = [e for e in estimators if e in ("omp", "omp_sci")]
    if cs:
        dictionary = build_dictionary(pilots, cfg.l_max, cfg.k_max, cfg.dictionary_mode, M=cfg.M)
        r0 = received_pilots(ch, pilots)
    if "impulse" in estimators:
        scheme = Scheme(cfg.scheme) if cfg.scheme else Scheme.IMPULSE_FULL_GRID
        if scheme is Scheme.IMPULSE_FULL_GRID:
            layout = build_impulse_layout(dims, U, cfg.l_max, cfg.k_max, list(impulse_signs))
        else:
            layout = build_embedded_layout(dims, U, cfg.l_max, cfg.k_max, list(impulse_signs), cfg.allocation)
        y0 = np.zeros(MN, dtype=np.complex128)
        for p, taps in zip(layout.users, ch.per_user):
            x = np.zeros(MN, dtype=np.complex128)
            x[dims.flat(*p.cell)] = p.value
            y0 += transmit_dd(x, taps, dims)
        w_dd = time_to_dd(w_imp, None, dims)

    cap = cfg.omp_support_cap if cfg.omp_support_cap is not None else 4 * U * cfg.L
    for s, snr_db in enumerate(cfg.snr_db_list):
        sigma2 = 10.0 ** (-snr_db / 10.0)
        sigma = math.sqrt(sigma2)
        for e, name in enumerate(estimators):
            try:
                if name == "impulse":
                    y = devectorize(y0 + sigma * w_dd, dims)
                    est = estimate_taps_impulse(y, layout, cfg.l_max, cfg.k_max, ThresholdConfig(sigma, cfg.tau_multiplier))
                else:
                    r = r0 + sigma * w_time
                    if name == "omp":
                        sol = omp(r, dictionary, _omp_epsilon(cfg, sigma2), max_support=cap)
                    else:
                        sol = omp_sci(r, dictionary, U * cfg.L)
                    est = recover_taps(sol, dictionary)
                    ls[s, e], ops[s, e] = sol.ls_solves, sol.inner_product_ops
                out[s, e] = nmse(ch, est)
            except (ValueError, np.linalg.LinAlgError) as exc:
                errors.append(f"trial {i} {name} snr {snr_db}: {exc}")
    return out, ls, ops, errors


def run_nmse_sweep(cfg: SimConfig, workers: int | None = None) -> SweepResult:
    """Mean NMSE per (users, estimator, SNR); SNR is per pilot symbol."""
    estimators = tuple(cfg.estimator)
    rows, excluded, per_trial = [], {}, {}
    for U in cfg.users:
        results = _map_trials(partial(_nmse_trial, cfg=cfg, U=U, estimators=estimators), cfg.trials, workers)
        for msg in (m for r in results for m in r[3]):
            log.info("excluded: %s", msg)
        values = np.stack([r[0] for r in results])  # trials x snr x est
        per_trial[U] = {
            "nmse": values,
            "ls_solves": np.stack([r[1] for r in results]),
            "corr_ops": np.stack([r[2] for r in results]),
        }
        for e, name in enumerate(estimators):
            for s, snr_db in enumerate(cfg.snr_db_list):
                mean, std, n = _reduce(values[:, s, e], f"users={U},{name},snr={snr_db}", excluded)
                rows.append((float(snr_db), name, U, mean, std, n))
    columns = ("snr_db", "estimator", "users", "nmse_mean", "nmse_std", "trials")
    return SweepResult(columns, rows, _metadata(cfg, "nmse", excluded), per_trial)


def run_complexity_report(cfg: SimConfig, workers: int | None = None) -> SweepResult:
    """LS solves and correlation multiply-adds of OMP vs OMP-SCI on matched trials."""
    if cfg.trials < 1:
        raise ConfigError("complexity report needs at least one trial")
    estimators = ("omp", "omp_sci")
    rows, per_trial = [], {}
    totals = {name: [0, 0] for name in estimators}
    n_trials = 0
    for U in cfg.users:
        results = _map_trials(partial(_nmse_trial, cfg=cfg, U=U, estimators=estimators), cfg.trials, workers)
        ls = np.stack([r[1] for r in results])  # trials x snr x est
        ops = np.stack([r[2] for r in results])
        per_trial[U] = {"ls_solves": ls, "corr_ops": ops}
        n_trials += ls.shape[0]
        for e, name in enumerate(estimators):
            totals[name][0] += int(ls[:, :, e].sum())
            totals[name][1] += int(ops[:, :, e].sum())
    for name in estimators:
        rows.append((name, totals[name][0], totals[name][1], n_trials))
    columns = ("algorithm", "ls_solves_total", "corr_ops_total", "trials")
    return SweepResult(columns, rows, _metadata(cfg, "complexity", {}), per_trial)


# --------------------------------------------------------------------------
# BER sweeps (embedded pilots + LMMSE)
# --------------------------------------------------------------------------


class _EmbeddedFrame:
    """Per-trial embedded frame: layout with this trial's pilots, bits and received pilot/data grid."""

    def __init__(self, cfg: SimConfig, base_layout, rng, U: int):
        dims = cfg.dims
        MN = dims.MN
        self.dims = dims
        self.cfg = cfg
        self.channel = _draw(cfg, rng, U)
        amp = 10.0 ** (cfg.pilot_power_db / 20.0)
        pilot_c = Constellation.from_kind(cfg.pilot_constellation)
        self.data_c = Constellation.from_kind(cfg.data_constellation)
        pilot_vals = pilot_c.modulate(rng.integers(0, 2, U * pilot_c.bits_per_symbol)) * amp
        users = tuple(PilotSpec(p.user_id, p.cell, complex(v)) for p, v in zip(base_layout.users, pilot_vals))
        self.layout = dataclasses.replace(base_layout, users=users)
        self.bits = []
        y0 = np.zeros(MN, dtype=np.complex128)
        for u, p in enumerate(self.layout.users):
            idx = self.layout.data_indices(u)
            b = rng.integers(0, 2, idx.size * self.data_c.bits_per_symbol)
            self.bits.append(b)
            x = np.zeros(MN, dtype=np.complex128)
            x[idx] = self.data_c.modulate(b)
            x[dims.flat(*p.cell)] = p.value
            y0 += transmit_dd(x, self.channel.per_user[u], dims)
        self.y0 = y0
        self.w_dd = time_to_dd(_cgauss(rng, MN), None, dims)
        self._perfect = None

    def received(self, sigma: float) -> np.ndarray:
        return self.y0 + sigma * self.w_dd

    def channels(self, taps_per_user):
        return [effective_channel_sparse(t, self.dims, self.layout.data_indices(u)) for u, t in enumerate(taps_per_user)]

    def perfect_channels(self):
        if self._perfect is None:
            self._perfect = self.channels(self.channel.per_user)
        return self._perfect

    def estimated_channels(self, y, sigma, multiplier):
        taps = estimate_taps_impulse(
            devectorize(y, self.dims), self.layout, self.cfg.l_max, self.cfg.k_max, ThresholdConfig(sigma, multiplier)
        )
        return self.channels(taps)

    def ber(self, y, H, sigma) -> float:
        problem = assemble_detection_problem(y, H, self.layout, 1.0 / sigma**2)
        return slice_and_ber(lmmse_detect(problem), self.bits, self.data_c).ber


def _embedded_layout(cfg: SimConfig, U: int):
    if cfg.scheme not in (None, Scheme.EMBEDDED.value):
        raise ConfigError("BER sweeps need the embedded scheme")
    try:
        return build_embedded_layout(cfg.dims, U, cfg.l_max, cfg.k_max, None, cfg.allocation)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _threshold_trial(i: int, cfg: SimConfig, U: int, base_layout):
    frame = _EmbeddedFrame(cfg, base_layout, trial_rng(cfg.seed, i), U)
    sigma = 10.0 ** (-cfg.threshold_snr_db / 20.0)
    y = frame.received(sigma)
    out = np.full(len(cfg.tau_multipliers), np.nan)
    errors = []
    for j, mult in enumerate(cfg.tau_multipliers):
        try:
            out[j] = frame.ber(y, frame.estimated_channels(y, sigma, mult), sigma)
        except (ValueError, DetectionError) as exc:
            errors.append(f"trial {i} tau {mult}: {exc}")
    return out, errors


def run_threshold_sweep(cfg: SimConfig, multipliers=None, workers: int | None = None) -> SweepResult:
    """BER versus ``tau = m * sigma`` at ``cfg.threshold_snr_db`` for each user count."""
    if multipliers is not None:
        cfg = cfg.with_overrides(tau_multipliers=tuple(multipliers))
    rows, excluded, per_trial = [], {}, {}
    for U in cfg.users:
        base = _embedded_layout(cfg, U)
        results = _map_trials(partial(_threshold_trial, cfg=cfg, U=U, base_layout=base), cfg.trials, workers)
        for msg in (m for r in results for m in r[1]):
            log.info("excluded: %s", msg)
        values = np.stack([r[0] for r in results])
        per_trial[U] = values
        for j, mult in enumerate(cfg.tau_multipliers):
            mean, _, n = _reduce(values[:, j], f"users={U},tau={mult}", excluded)
            rows.append((float(mult), U, mean, n))
    columns = ("tau_multiplier", "users", "ber", "trials")
    meta = _metadata(cfg, "threshold", excluded, snr_db=cfg.threshold_snr_db)
    return SweepResult(columns, rows, meta, per_trial)


def _ber_trial(i: int, cfg: SimConfig, U: int, base_layout, modes: tuple):
    frame = _EmbeddedFrame(cfg, base_layout, trial_rng(cfg.seed, i), U)
    out = np.full((len(modes), len(cfg.snr_db_list)), np.nan)
    errors = []
    for s, snr_db in enumerate(cfg.snr_db_list):
        sigma = 10.0 ** (-snr_db / 20.0)
        y = frame.received(sigma)
        for c, mode in enumerate(modes):
            try:
                if mode == "perfect":
                    H = frame.perfect_channels()
                else:
                    H = frame.estimated_channels(y, sigma, cfg.tau_multiplier)
                out[c, s] = frame.ber(y, H, sigma)
            except (ValueError, DetectionError) as exc:
                errors.append(f"trial {i} {mode} snr {snr_db}: {exc}")
    return out, errors


def run_ber_sweep(cfg: SimConfig, csi=None, workers: int | None = None) -> SweepResult:
    """BER versus data-symbol SNR with perfect and/or threshold-estimated CSI."""
    modes = cfg.csi if csi is None else ((csi,) if isinstance(csi, str) else tuple(csi))
    modes = tuple(m.lower() for m in modes)
    if set(modes) - {"perfect", "estimated"}:
        raise ConfigError(f"unknown csi mode in {modes}")
    rows, excluded, per_trial = [], {}, {}
    for U in cfg.users:
        base = _embedded_layout(cfg, U)
        results = _map_trials(partial(_ber_trial, cfg=cfg, U=U, base_layout=base, modes=modes), cfg.trials, workers)
        for msg in (m for r in results for m in r[1]):
            log.info("excluded: %s", msg)
        values = np.stack([r[0] for r in results])  # trials x mode x snr
        per_trial[U] = values
        for c, mode in enumerate(modes):
            for s, snr_db in enumerate(cfg.snr_db_list):
                mean, _, n = _reduce(values[:, c, s], f"users={U},{mode},snr={snr_db}", excluded)
                rows.append((float(snr_db), U, mode, mean, n))
    columns = ("snr_db", "users", "csi", "ber", "trials")
    return SweepResult(columns, rows, _metadata(cfg, "ber", excluded), per_trial)
