"""Binaural unmasking model: equalization-cancellation BMLD plus better-ear SNR.

Two variants share the front end.  ``fast`` computes the BMLD on 24 ms
frames and smooths the linear ratio with a 300 ms leaky integrator;
``slow`` computes it on 300 ms frames and holds each value on the 12 ms
grid.  Both add the better-ear SNR (200 ms integrator) and take the
maximum over bands, then over time.
"""
from dataclasses import dataclass, field, asdict
import csv
import json

import numpy as np
from scipy import stats

from .errors import NoValidFrameError
from .frontend import (CueSeries, FilterbankSpec, FrameGrid, SILENCE_FLOOR, binaural_cues,
                       exp_filter)

SIGMA_EPS = 0.25
SIGMA_DELTA = 0.105e-3
VARIANTS = ("fast", "slow")


@dataclass
class ModelConfig:
    variant: str = "fast"
    sigma_eps: float = SIGMA_EPS
    sigma_delta: float = SIGMA_DELTA
    frame: float = 0.024
    hop: float = 0.012
    slow_frame: float = 0.300
    slow_hop: float = 0.150
    tau_bmld: float = 0.300
    tau_snr: float = 0.200
    barks: tuple = tuple(range(2, 23))
    floor: float = SILENCE_FLOOR

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not (self.sigma_eps > 0 and self.sigma_delta > 0):
            raise ValueError("sigma_eps and sigma_delta must be positive")
        self.barks = tuple(self.barks)

    @property
    def filterbank(self):
        return FilterbankSpec(barks=self.barks)

    def to_dict(self):
        return asdict(self)


def k_factor(f, sigma_eps=SIGMA_EPS, sigma_delta=SIGMA_DELTA):
    """Processing-error factor k(f) = (1 + sigma_eps^2) exp((2 pi f sigma_delta)^2)."""
    f = np.asarray(f, dtype=float)
    return (1.0 + sigma_eps ** 2) * np.exp((2.0 * np.pi * f * sigma_delta) ** 2)


def bmld_ratio(phi_t, phi_m, rho_m, f, sigma_eps=SIGMA_EPS, sigma_delta=SIGMA_DELTA):
    """Linear BMLD (k - cos(phi_t - phi_m)) / (k - rho_m), clamped below at 1."""
    k = k_factor(f, sigma_eps, sigma_delta)
    r = (k - np.cos(np.asarray(phi_t) - np.asarray(phi_m))) / (k - np.asarray(rho_m))
    return np.maximum(r, 1.0)


def bmld_ceiling_db(f, sigma_eps=SIGMA_EPS, sigma_delta=SIGMA_DELTA):
    k = k_factor(f, sigma_eps, sigma_delta)
    return 10.0 * np.log10((k + 1.0) / (k - 1.0))


def better_ear_ratio(power_t, power_m, valid_m=None):
    """Linear better-ear SNR per band x frame from (2, bands, frames) powers.

    Frames where the masker is flagged get ratio 0.
    """
    power_t = np.asarray(power_t, float)
    power_m = np.asarray(power_m, float)
    ok = np.all(power_m > 0, axis=0)
    if valid_m is not None:
        ok &= valid_m
    safe = np.where(ok, power_m, 1.0)
    return np.where(ok, np.max(power_t / safe, axis=0), 0.0)


def better_ear_snr_series(target_cues, masker_cues, tau=0.2, hop=0.012):
    """Better-ear SNR (dB) per band x frame after a ``tau`` leaky integrator."""
    ratio = better_ear_ratio(target_cues.power, masker_cues.power, masker_cues.valid)
    smooth = exp_filter(ratio, tau, hop, axis=-1)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(smooth)


@dataclass
class Prediction:
    """Binaural benefit with the matrices it was derived from."""

    benefit: float
    bmld_db: np.ndarray
    snr_db: np.ndarray
    valid: np.ndarray
    cfs: np.ndarray
    times: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def total_db(self):
        return np.where(self.valid, self.bmld_db + self.snr_db, -np.inf)

    @property
    def best_band_series(self):
        return np.max(self.total_db, axis=0)

    @property
    def best_band(self):
        return np.argmax(self.total_db, axis=0)

    @property
    def best_frame(self):
        return int(np.argmax(self.best_band_series))

    def recompute_benefit(self):
        return float(np.max(self.total_db))

    def summary(self):
        k = self.best_frame
        b = int(self.best_band[k])
        return {"benefit_db": float(self.benefit), "best_frame": k,
                "best_time_s": float(self.times[k]), "best_band": b,
                "best_cf_hz": float(self.cfs[b]), "bmld_db_at_best": float(self.bmld_db[b, k]),
                "snr_db_at_best": float(self.snr_db[b, k]), "config": self.config}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["band", "cf_hz", "frame", "time_s", "bmld_db", "snr_db", "valid"])
            for b in range(self.bmld_db.shape[0]):
                for k in range(self.bmld_db.shape[1]):
                    w.writerow([b, f"{self.cfs[b]:.6g}", k, f"{self.times[k]:.6g}",
                                f"{self.bmld_db[b, k]:.9g}", f"{self.snr_db[b, k]:.9g}",
                                int(self.valid[b, k])])


def _as_array(x):
    return np.atleast_2d(np.asarray(getattr(x, "data", x), dtype=float))


def _hold(values, slow_times, fast_times):
    """Zero-order hold of per-frame ``values`` (..., K) onto ``fast_times``.

    Each fast frame takes the latest slow frame whose centre is not later;
    frames before the first centre take the first slow frame.
    """
    idx = np.searchsorted(slow_times, fast_times, side="right") - 1
    idx = np.clip(idx, 0, len(slow_times) - 1)
    return values[..., idx]


def predict(target, masker, cfg=None, fs=None, window=None):
    """Binaural benefit (dB) of a target in a masker, both given as clean two-ear signals.

    ``window`` = (start, stop) in seconds restricts the frames (by centre)
    that may supply the maximum.
    """
    cfg = cfg or ModelConfig()
    fs = fs if fs is not None else getattr(target, "fs", None)
    if fs is None:
        raise ValueError("sample rate required")
    if getattr(masker, "fs", fs) != fs:
        raise ValueError("target and masker sample rates differ")
    t = _as_array(target)
    m = _as_array(masker)
    n = max(t.shape[1], m.shape[1])
    t = np.pad(t, ((0, 0), (0, n - t.shape[1])))
    m = np.pad(m, ((0, 0), (0, n - m.shape[1])))
    spec = cfg.filterbank
    grid = FrameGrid(fs, cfg.frame, cfg.hop)
    ct = binaural_cues(t, fs, grid, spec, cfg.floor)
    cm = binaural_cues(m, fs, grid, spec, cfg.floor)
    if ct.phi.shape[1] == 0:
        raise NoValidFrameError("signal shorter than one frame")
    cues = CueSeries.from_cues(ct, cm)
    cfs = spec.cfs[:, None]
    valid = cues.valid_m
    if cfg.variant == "fast":
        ok = cues.valid_t & cues.valid_m
        r = np.where(ok, bmld_ratio(cues.phi_t, cues.phi_m, cues.rho_m, cfs,
                                    cfg.sigma_eps, cfg.sigma_delta), 1.0)
        bmld_db = 10.0 * np.log10(exp_filter(r, cfg.tau_bmld, cfg.hop, initial=1.0))
    else:
        sgrid = FrameGrid(fs, cfg.slow_frame, cfg.slow_hop)
        st = binaural_cues(t, fs, sgrid, spec, cfg.floor)
        sm = binaural_cues(m, fs, sgrid, spec, cfg.floor)
        if st.phi.shape[1] == 0:
            raise NoValidFrameError("signal shorter than one slow frame")
        ok = st.valid & sm.valid
        r = np.where(ok, bmld_ratio(st.phi, sm.phi, sm.rho, cfs,
                                    cfg.sigma_eps, cfg.sigma_delta), 1.0)
        bmld_db = _hold(10.0 * np.log10(r), st.times, ct.times)
        valid = valid & _hold(sm.valid, st.times, ct.times)
    snr_db = better_ear_snr_series(ct, cm, cfg.tau_snr, cfg.hop)
    valid = valid & np.isfinite(snr_db)
    if window is not None:
        valid = valid & (ct.times >= window[0]) & (ct.times <= window[1])
    if not np.any(valid):
        raise NoValidFrameError("no frame with a valid masker and target")
    pred = Prediction(0.0, bmld_db, snr_db, valid, spec.cfs, ct.times, cfg.to_dict())
    pred.benefit = pred.recompute_benefit()
    return pred


@dataclass
class Evaluation:
    offset: float
    rmse: float
    pearson: float
    n: int

    def to_dict(self):
        return asdict(self)


def evaluate(predicted, measured):
    """Offset, RMSE and Pearson correlation between predicted and measured thresholds.

    ``predicted`` are threshold-like values (e.g. negated benefits); the
    least-squares offset mean(measured - predicted) is applied before the
    RMSE.  Pearson is NaN when either list has zero variance.
    """
    p = np.asarray(predicted, dtype=float)
    m = np.asarray(measured, dtype=float)
    if p.shape != m.shape or p.ndim != 1:
        raise ValueError("predicted and measured must be 1-D and equally long")
    if p.size < 2:
        raise ValueError("need at least two values")
    offset = float(np.mean(m - p))
    rmse = float(np.sqrt(np.mean((p + offset - m) ** 2)))
    if np.ptp(p) == 0 or np.ptp(m) == 0:
        r = float("nan")
    else:
        r = float(stats.pearsonr(p, m)[0])
    return Evaluation(offset, rmse, r, int(p.size))


def thresholds_from_benefits(benefits, offset=0.0):
    """Predicted thresholds: -benefit + offset."""
    return -np.asarray(benefits, dtype=float) + offset
