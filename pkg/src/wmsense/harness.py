"""Monte Carlo detection / false-alarm benchmark on synthetic data.

Every random draw comes from ``SeedSequence(master_seed, spawn_key=(role,
index))``, so a trial's inputs depend only on its role and index. The same
noise and carrier phases are reused at every SNR and every L (common random
numbers), which keeps Pd comparisons across the grid tight and makes the
result independent of execution order.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .calibrate import (NoiseProfile, ThresholdTable, build_noise_profile, calibrate_thresholds,
                        compute_test_statistics, whiten)
from .core_dsp import estimate_autocorr
from .detector import detect
from .exceptions import ConfigError
from .synth import DEFAULT_CARRIERS_HZ, FS_DEFAULT, LOUD, WmMode, gen_colored_noise, gen_wm_signal, mix_at_snr

__all__ = ["BenchConfig", "BenchPoint", "TrialRecord", "BenchResult", "trial_seed", "train_synthetic", "run_bench"]

log = logging.getLogger(__name__)

ROLE_PROFILE, ROLE_CALIBRATION, ROLE_SIGNAL, ROLE_NOISE = range(4)

SUMMARY_FIELDS = ["snr_db", "L", "pd", "pfa", "pd_stderr", "pfa_stderr", "carrier_rmse_hz"]
DETAIL_FIELDS = ["snr_db", "L", "trials", "pd", "pfa", "pd_stderr", "pfa_stderr",
                 "mean_count_error", "carrier_rmse_hz", "thresholds"]
TRIAL_FIELDS = ["snr_db", "L", "kind", "trial", "true_count", "detected", "counted", "correct",
                "max_carrier_error_hz"]


@dataclass(frozen=True)
class BenchConfig:
    snr_grid_db: tuple = tuple(float(s) for s in range(-30, -14))
    l_grid: tuple = (100, 200, 500)
    trials_per_point: int = 200
    max_signals: int = 5
    target_pfa: float = 0.1
    master_seed: int = 0
    num_samples: int = 20000
    sample_rate_hz: float = FS_DEFAULT
    carriers_hz: tuple = DEFAULT_CARRIERS_HZ
    mode: WmMode = LOUD
    profile_sets: int = 3
    calibration_trials: int = 500
    carrier_tolerance_hz: float = 100e3
    rule: str = "last"

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "l_grid", tuple(int(v) for v in self.l_grid))
        object.__setattr__(self, "carriers_hz", tuple(float(c) for c in self.carriers_hz))
        if not isinstance(self.mode, WmMode):
            object.__setattr__(self, "mode", WmMode.from_json(self.mode))
        if not self.snr_grid_db or not self.l_grid:
            raise ConfigError("snr_grid_db and l_grid must be nonempty")
        if self.trials_per_point < 50:
            raise ConfigError(f"trials_per_point must be >= 50, got {self.trials_per_point}")
        if not 1 <= self.max_signals <= min(5, len(self.carriers_hz)):
            raise ConfigError("max_signals must be in 1..min(5, len(carriers_hz))")
        if any(not 11 <= L <= self.num_samples // 2 for L in self.l_grid):
            raise ConfigError(f"every L must lie in [11, {self.num_samples // 2}]")
        if self.profile_sets < 1:
            raise ConfigError("profile_sets must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative")
        if self.rule not in ("last", "prefix"):
            raise ConfigError(f"rule must be 'last' or 'prefix', got {self.rule!r}")

    def to_dict(self) -> dict:
        return {
            "snr_grid_db": list(self.snr_grid_db),
            "l_grid": list(self.l_grid),
            "trials_per_point": self.trials_per_point,
            "max_signals": self.max_signals,
            "target_pfa": self.target_pfa,
            "master_seed": self.master_seed,
            "num_samples": self.num_samples,
            "sample_rate_hz": self.sample_rate_hz,
            "carriers_hz": list(self.carriers_hz),
            "mode": self.mode.to_json(),
            "profile_sets": self.profile_sets,
            "calibration_trials": self.calibration_trials,
            "carrier_tolerance_hz": self.carrier_tolerance_hz,
            "rule": self.rule,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BenchConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown BenchConfig fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "BenchConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TrialRecord:
    snr_db: float
    L: int
    kind: str
    trial: int
    true_count: int
    detected: int
    counted: int
    correct: bool
    max_carrier_error_hz: float
    sq_carrier_error_hz2: float = 0.0


@dataclass(frozen=True)
class BenchPoint:
    snr_db: float
    L: int
    trials: int
    measured_pd: float
    measured_pfa: float
    mean_count_error: float
    carrier_rmse_hz: float
    thresholds: tuple

    @property
    def pd_stderr(self) -> float:
        return math.sqrt(self.measured_pd * (1 - self.measured_pd) / self.trials)

    @property
    def pfa_stderr(self) -> float:
        return math.sqrt(self.measured_pfa * (1 - self.measured_pfa) / self.trials)


def _csv_text(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    w.writerows(rows)
    return buf.getvalue()


@dataclass
class BenchResult:
    config: BenchConfig
    points: list
    records: list = field(repr=False)
    profiles: dict = field(repr=False)
    tables: dict = field(repr=False)

    def point(self, snr_db: float, L: int) -> BenchPoint:
        for p in self.points:
            if p.snr_db == float(snr_db) and p.L == L:
                return p
        raise KeyError((snr_db, L))

    def summary_csv(self) -> str:
        return _csv_text(SUMMARY_FIELDS, [
            [p.snr_db, p.L, p.measured_pd, p.measured_pfa, p.pd_stderr, p.pfa_stderr, p.carrier_rmse_hz]
            for p in self.points])

    def detail_csv(self) -> str:
        return _csv_text(DETAIL_FIELDS, [
            [p.snr_db, p.L, p.trials, p.measured_pd, p.measured_pfa, p.pd_stderr, p.pfa_stderr,
             p.mean_count_error, p.carrier_rmse_hz, " ".join(repr(t) for t in p.thresholds)]
            for p in self.points])

    def trials_csv(self) -> str:
        return _csv_text(TRIAL_FIELDS, [
            [r.snr_db, r.L, r.kind, r.trial, r.true_count, r.detected, r.counted, int(r.correct),
             r.max_carrier_error_hz] for r in self.records])

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "summary": out / "bench_summary.csv",
            "detail": out / "bench_detail.csv",
            "trials": out / "bench_trials.csv",
        }
        paths["summary"].write_text(self.summary_csv())
        paths["detail"].write_text(self.detail_csv())
        paths["trials"].write_text(self.trials_csv())
        return paths


def trial_seed(master_seed: int, role: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(role, index))


def _noise(cfg: BenchConfig, role: int, index: int):
    return gen_colored_noise(cfg.sample_rate_hz, cfg.num_samples, trial_seed(cfg.master_seed, role, index))


def train_synthetic(cfg: BenchConfig, L: int, threads: int = 1) -> tuple:
    """Noise profile and H0-calibrated ThresholdTable at order L.

    The profile averages ``cfg.profile_sets`` noise sets; calibration uses
    ``cfg.calibration_trials`` further, independent noise realizations.
    """
    sets = [_noise(cfg, ROLE_PROFILE, i) for i in range(cfg.profile_sets)]
    profile = build_noise_profile(sets, L)
    return profile, _calibrate(cfg, profile, threads)


def _calibrate(cfg: BenchConfig, profile: NoiseProfile, threads: int) -> ThresholdTable:
    L = profile.order_L

    def stat(i):
        return compute_test_statistics(whiten(estimate_autocorr(_noise(cfg, ROLE_CALIBRATION, i), L), profile))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        noise_stats = list(pool.map(stat, range(cfg.calibration_trials)))
    return calibrate_thresholds(noise_stats, None, cfg.target_pfa, rule=cfg.rule, snr_grid=cfg.snr_grid_db)


def _signal_components(cfg: BenchConfig, i: int):
    ss = trial_seed(cfg.master_seed, ROLE_SIGNAL, i)
    count_seed, noise_seed, *sig_seeds = ss.spawn(2 + len(cfg.carriers_hz))
    ns = int(np.random.default_rng(count_seed).integers(1, cfg.max_signals + 1))
    noise = gen_colored_noise(cfg.sample_rate_hz, cfg.num_samples, noise_seed)
    carriers = cfg.carriers_hz[:ns]
    sigs = [gen_wm_signal(cfg.mode, fc, cfg.sample_rate_hz, cfg.num_samples, s)
            for fc, s in zip(carriers, sig_seeds)]
    return noise, sigs, np.array(carriers)


def _score(report, carriers: np.ndarray, tol: float):
    if report.num_signals != carriers.size:
        return False, float("nan"), 0.0
    err = np.abs(np.asarray(report.carriers_hz) - np.sort(carriers))
    return bool(np.all(err <= tol)), float(err.max()), float(np.sum(err ** 2))


def run_bench(cfg: BenchConfig, tables: Mapping[int, ThresholdTable] | None = None, threads: int = 1,
              psd_dir=None, psd_trials: int = 0,
              profiles: Mapping[int, NoiseProfile] | None = None) -> BenchResult:
    """Measure Pd and Pfa on every (SNR, L) grid point.

    For each L a fresh noise profile is built and, unless ``tables``
    supplies one, thresholds are calibrated from noise-only trials
    (``profiles`` likewise replaces the synthetic profile). Each
    grid point then runs ``trials_per_point`` signal trials (1 to
    ``max_signals`` carriers taken in order from ``carriers_hz``) and as
    many noise-only trials. A signal trial counts as detected when the
    carrier count is exact and every carrier is within
    ``carrier_tolerance_hz``; a noise trial is a false alarm when any
    signal is reported.
    """
    for name, given in (("threshold table", tables), ("noise profile", profiles)):
        if given is not None:
            missing = [L for L in cfg.l_grid if L not in given]
            if missing:
                raise ConfigError(f"no {name} for L in {missing}")
    if profiles is not None:
        for L in cfg.l_grid:
            if profiles[L].order_L != L:
                raise ConfigError(f"profile for L={L} has order {profiles[L].order_L}")
            if abs(profiles[L].sample_rate_hz - cfg.sample_rate_hz) > 1e-9 * cfg.sample_rate_hz:
                raise ConfigError(f"profile for L={L} was trained at {profiles[L].sample_rate_hz} Hz")
    threads = max(1, int(threads))
    given_profiles = profiles
    profiles, used_tables = {}, {}
    for L in cfg.l_grid:
        if given_profiles is not None:
            profiles[L] = given_profiles[L]
        if tables is None and given_profiles is None:
            profiles[L], used_tables[L] = train_synthetic(cfg, L, threads)
        elif tables is None:
            used_tables[L] = _calibrate(cfg, profiles[L], threads)
        else:
            if L not in profiles:
                sets = [_noise(cfg, ROLE_PROFILE, i) for i in range(cfg.profile_sets)]
                profiles[L] = build_noise_profile(sets, L)
            used_tables[L] = tables[L]
        log.info("L=%d thresholds %s", L, used_tables[L].select(cfg.snr_grid_db[0]))

    psd_path = Path(psd_dir) if psd_dir is not None else None
    if psd_path is not None:
        psd_path.mkdir(parents=True, exist_ok=True)

    def signal_task(i):
        noise, sigs, carriers = _signal_components(cfg, i)
        out = []
        for L in cfg.l_grid:
            for snr in cfg.snr_grid_db:
                rep = detect(mix_at_snr(sigs, noise, snr), profiles[L], used_tables[L], snr_db=snr, rule=cfg.rule)
                ok, maxerr, sq = _score(rep, carriers, cfg.carrier_tolerance_hz)
                out.append(TrialRecord(snr, L, "signal", i, carriers.size, rep.num_signals, rep.counted,
                                       ok, maxerr, sq))
                if psd_path is not None and i < psd_trials and rep.psd is not None:
                    rep.psd.to_csv(psd_path / f"psd_snr{snr:+g}_L{L}_trial{i}.csv")
        return out

    def noise_task(j):
        buf = _noise(cfg, ROLE_NOISE, j)
        out = []
        for L in cfg.l_grid:
            seen = {}
            for snr in cfg.snr_grid_db:
                t = used_tables[L].select(snr)
                if t not in seen:
                    seen[t] = detect(buf, profiles[L], t, rule=cfg.rule)
                rep = seen[t]
                out.append(TrialRecord(snr, L, "noise", j, 0, rep.num_signals, rep.counted,
                                       rep.num_signals == 0, float("nan")))
        return out

    n = cfg.trials_per_point
    with ThreadPoolExecutor(max_workers=threads) as pool:
        sig = [r for chunk in pool.map(signal_task, range(n)) for r in chunk]
        noi = [r for chunk in pool.map(noise_task, range(n)) for r in chunk]

    records = sorted(sig + noi, key=lambda r: (r.L, r.snr_db, r.kind != "signal", r.trial))
    points = []
    for L in cfg.l_grid:
        for snr in cfg.snr_grid_db:
            s = [r for r in sig if r.L == L and r.snr_db == snr]
            z = [r for r in noi if r.L == L and r.snr_db == snr]
            pd = sum(r.correct for r in s) / len(s)
            pfa = sum(r.detected > 0 for r in z) / len(z)
            cerr = float(np.mean([abs(r.detected - r.true_count) for r in s]))
            matched = [r for r in s if r.detected == r.true_count]
            ncar = sum(r.true_count for r in matched)
            rmse = math.sqrt(sum(r.sq_carrier_error_hz2 for r in matched) / ncar) if ncar else float("nan")
            points.append(BenchPoint(snr, L, n, pd, pfa, cerr, rmse, used_tables[L].select(snr)))
    return BenchResult(cfg, points, records, profiles, used_tables)
