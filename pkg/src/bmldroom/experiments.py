"""Condition matrices, model runs and replications of two earlier room studies.

Experiment 1 truncates the target's room response after 15 to 500 ms for a
frontal and a lateral target; experiment 2 removes the reflections between
the direct sound and 15 to 500 ms for the frontal target.  The masker is an
anechoic frontal noise in both.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, replace
from functools import lru_cache
import csv
import hashlib
import json

import numpy as np

from .binaural import HeadModel, hybrid_brir, render_point_source
from .errors import BmldroomError, InsufficientDecayError
from .frontend import FrameGrid, binaural_cues, FilterbankSpec
from .model import ModelConfig, VARIANTS, predict, evaluate
from .rir import LAB_REVERB, analyze_rir, direct_to_reverberant, manipulate_rir
from .room import lab_receiver, lab_room, pose_at, shoebox
from .stimuli import (HctSpec, NoiseSpec, band_noise, pad_to, set_level,
                      spatialize, synth_hct, synth_uen)

TIMES_MS = (15, 20, 45, 75, 150, 250, 500)
ALPHAS = (0.1, 0.5)
AZIMUTHS = (0.0, 60.0)
FS = 44100
RIR_LENGTH = 0.5
FACING = (0.0, 1.0, 0.0)
RESULT_COLUMNS = ("experiment", "alpha", "azimuth_deg", "mode", "t_ms", "variant",
                  "benefit_db", "threshold_db", "drr_db", "rt60_s", "mean_ic", "condition_id")


@dataclass(frozen=True)
class ConditionSpec:
    experiment: int
    alpha: float
    azimuth_deg: float
    mode: str
    t_ms: float
    room: str = "lab"
    distance: float = 5.0
    masker_azimuth_deg: float = 0.0
    masker_distance: float = 2.4
    target_level_db: float = 60.0
    masker_level_db: float = 60.0
    seed: int = 0
    fs: int = FS

    @property
    def cid(self):
        return (f"exp{self.experiment}_a{self.alpha:g}_az{self.azimuth_deg:g}"
                f"_{self.mode}{self.t_ms:g}")

    def to_dict(self):
        return asdict(self)


@dataclass
class ResultRow:
    experiment: int
    alpha: float
    azimuth_deg: float
    mode: str
    t_ms: float
    variant: str
    benefit_db: float
    threshold_db: float
    drr_db: float = float("nan")
    rt60_s: float = float("nan")
    mean_ic: float = float("nan")
    condition_id: str = ""

    def as_csv_row(self):
        vals = []
        for k in RESULT_COLUMNS:
            v = getattr(self, k)
            vals.append(f"{v:.6f}" if isinstance(v, float) else str(v))
        return vals


def build_conditions(experiment, seed=0, times=TIMES_MS):
    """Condition list of experiment 1 (28, truncation) or 2 (14, cut, frontal only)."""
    if experiment == 1:
        return [ConditionSpec(1, a, az, "truncate", float(t), seed=seed)
                for a in ALPHAS for az in AZIMUTHS for t in times]
    if experiment == 2:
        return [ConditionSpec(2, a, 0.0, "cut", float(t), seed=seed)
                for a in ALPHAS for t in times]
    raise ValueError("experiment must be 1 or 2")


def _sub_seed(*parts):
    h = hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).digest()
    return int.from_bytes(h[:4], "little")


def lab_head():
    return HeadModel(lab_receiver(), FACING)


@lru_cache(maxsize=16)
def lab_brir(alpha, azimuth_deg, seed=0, fs=FS, distance=5.0):
    """Unmanipulated 500 ms target response in the lab room."""
    room = lab_room(alpha)
    head = lab_head()
    src = pose_at(head.position, head.facing, azimuth_deg, distance)
    rt, drrs = LAB_REVERB[alpha]
    drr = drrs[abs(azimuth_deg)]
    return hybrid_brir(room, src, head, fs=fs, rt60=rt, drr_db=drr,
                       seed=_sub_seed("tail", seed, alpha, azimuth_deg),
                       n_samples=int(round(RIR_LENGTH * fs)))


def condition_brir(cond):
    base = lab_brir(cond.alpha, cond.azimuth_deg, cond.seed, cond.fs, cond.distance)
    return manipulate_rir(base, cond.mode, cond.t_ms)


@lru_cache(maxsize=4)
def _dry_target(fs):
    return synth_hct(HctSpec(), fs)


@lru_cache(maxsize=4)
def _lab_masker(seed, fs, az, dist, level_db):
    noise = synth_uen(NoiseSpec(seed=_sub_seed("masker", seed), fs=fs))
    m = spatialize(noise, render_point_source(az, dist, lab_head(), fs))
    return set_level(m, level_db)


def condition_signals(cond):
    """(target, masker) binaural signals of a lab condition, time-aligned.

    The target is centred in the masker and normalized to the ear-summed
    energy of the dry tone at the target level on both ears.
    """
    fs = cond.fs
    dry = set_level(_dry_target(fs), cond.target_level_db)
    tgt = spatialize(dry, condition_brir(cond))
    tgt = tgt.scaled(np.sqrt(2.0 * dry.energy / tgt.energy))
    masker = _lab_masker(cond.seed, fs, cond.masker_azimuth_deg, cond.masker_distance,
                           cond.masker_level_db)
    onset = (masker.n_samples - dry.n_samples) // 2
    n = max(masker.n_samples, onset + tgt.n_samples)
    return pad_to(tgt, n, onset), pad_to(masker, n, 0), onset


def masker_window(spec=None):
    """Steady-state part of the masker (after its onset ramp, before its offset ramp)."""
    spec = spec or NoiseSpec()
    return (spec.ramp, spec.duration - spec.ramp)


def ic_timeseries(signal, grid=None, band_bark=5, fs=None):
    """Per-frame interaural coherence in one Bark band (default the 500 Hz band).

    Returns (ic, times, valid).
    """
    data = getattr(signal, "data", signal)
    fs = fs or signal.fs
    spec = FilterbankSpec(barks=(band_bark,))
    cues = binaural_cues(data, fs, grid or FrameGrid(fs), spec)
    return cues.rho[0], cues.times, cues.valid[0]


def steady_state_mean(values, times, valid, start, stop):
    sel = valid & (times >= start) & (times <= stop)
    if not np.any(sel):
        return float("nan")
    return float(np.mean(values[sel]))


def target_mean_ic(target, onset, fs):
    """Mean IC of the target over its plateau (50 ms after onset to its offset)."""
    spec = HctSpec()
    ic, t, ok = ic_timeseries(target, fs=fs)
    t0 = onset / fs + spec.ramp + 0.05
    return steady_state_mean(ic, t, ok, t0, onset / fs + spec.duration - spec.ramp)


def run_condition(cond, variants=VARIANTS, cfg=None):
    """Result rows of one condition, one per requested variant."""
    try:
        tgt, msk, onset = condition_signals(cond)
        brir = condition_brir(cond)
        drr = direct_to_reverberant(brir)
        try:
            rt = analyze_rir(brir).rt60
        except InsufficientDecayError:
            rt = float("nan")
        ic = target_mean_ic(tgt, onset, cond.fs)
        rows = []
        for v in variants:
            c = replace(cfg, variant=v) if cfg is not None else ModelConfig(variant=v)
            b = predict(tgt, msk, c, window=masker_window()).benefit
            rows.append(ResultRow(cond.experiment, cond.alpha, cond.azimuth_deg, cond.mode,
                                  cond.t_ms, v, b, -b, drr, rt, ic, cond.cid))
        return rows
    except BmldroomError as exc:
        raise type(exc)(f"{cond.cid}: {exc}") from exc


def _run_one(args):
    cond, variants, cfg = args
    return run_condition(cond, variants, cfg)


def run_conditions(conditions, variants=VARIANTS, cfg=None, jobs=1):
    """Rows for all conditions in input order; ``jobs`` > 1 uses worker processes."""
    tasks = [(c, tuple(variants), cfg) for c in conditions]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_run_one, tasks))
    else:
        parts = [_run_one(t) for t in tasks]
    return [r for p in parts for r in p]


def write_results_csv(rows, path, header_comment=None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow(r.as_csv_row())


def read_results_csv(path):
    """Rows of a results or measured-data CSV as dicts (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---- earlier room studies ----------------------------------------------------

@dataclass
class BraaschConfig:
    dims: tuple = (5.0, 6.0, 3.0)
    alpha: float = 0.3
    receiver: tuple = (2.5, 2.0, 1.5)
    facing: tuple = FACING
    azimuths: tuple = (0.0, 2.0, 20.0)
    distance: float = 2.0
    band: tuple = (200.0, 14000.0)
    duration: float = 0.5
    level_db: float = 60.0
    reverberant_masker: bool = True
    seed: int = 0
    fs: int = FS
    max_order: int = 8
    variants: tuple = VARIANTS


def replicate_braasch(cfg=None, model_cfg=None):
    """Predicted thresholds (-benefit) of a broadband target at small azimuths.

    Target and masker use the same noise token and the late tail is keyed on
    the room and receiver only, so a frontal target equals the masker.
    """
    cfg = cfg or BraaschConfig()
    room = shoebox(*cfg.dims, cfg.alpha)
    head = HeadModel(cfg.receiver, cfg.facing)
    fs = cfg.fs
    noise = band_noise(cfg.band[0], cfg.band[1], cfg.duration, fs,
                       seed=_sub_seed("braasch", cfg.seed), level_db=cfg.level_db)
    tail_seed = _sub_seed("braasch-tail", cfg.seed)
    n = int(round(RIR_LENGTH * fs))

    def render(az):
        src = pose_at(head.position, head.facing, az, cfg.distance)
        return hybrid_brir(room, src, head, fs=fs, max_order=cfg.max_order, seed=tail_seed,
                           n_samples=n)

    if cfg.reverberant_masker:
        masker = spatialize(noise, render(0.0))
    else:
        masker = spatialize(noise, render_point_source(0.0, cfg.distance, head, fs))
    masker = set_level(masker, cfg.level_db)
    rows = []
    for az in cfg.azimuths:
        tgt = set_level(spatialize(noise, render(az)), cfg.level_db)
        for v in cfg.variants:
            c = replace(model_cfg, variant=v) if model_cfg is not None else ModelConfig(variant=v)
            b = predict(tgt, masker, c).benefit
            rows.append(ResultRow(0, cfg.alpha, az, "braasch", 0.0, v, b, -b,
                                  condition_id=f"braasch_az{az:g}"))
    return rows


@dataclass
class ZurekConfig:
    dims: tuple = (4.8, 6.6, 2.6)
    alphas: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    receiver: tuple = (2.0, 2.5, 1.3)
    turn_left_deg: float = 20.0
    target_distance: float = 1.0
    masker_azimuth_deg: float = 60.0
    masker_distance: float = 1.0
    target_band: tuple = (500.0 * 2 ** (-1 / 6), 500.0 * 2 ** (1 / 6))
    masker_band: tuple = (100.0, 10000.0)
    target_duration: float = 0.5
    masker_duration: float = 0.9
    level_db: float = 60.0
    target_level_db: float = 40.0
    seed: int = 0
    fs: int = FS
    max_order: int = 8
    variants: tuple = VARIANTS

    @property
    def facing(self):
        th = np.deg2rad(self.turn_left_deg)
        return (-np.sin(th), np.cos(th), 0.0)


def zurek_signals(cfg, alpha):
    """(target, masker, onset) for one absorption value; target source power fixed."""
    fs = cfg.fs
    room = shoebox(*cfg.dims, alpha)
    head = HeadModel(cfg.receiver, cfg.facing)
    src = pose_at(head.position, head.facing, 0.0, cfg.target_distance)
    brir = hybrid_brir(room, src, head, fs=fs, max_order=cfg.max_order,
                       seed=_sub_seed("zurek-tail", cfg.seed),
                       n_samples=int(round(RIR_LENGTH * fs)))
    dry = band_noise(*cfg.target_band, cfg.target_duration, fs,
                     seed=_sub_seed("zurek-target", cfg.seed), level_db=cfg.target_level_db)
    # source power fixed: the direct sound alone would be at target_level_db
    tgt = spatialize(dry, brir).scaled(cfg.target_distance)
    mn = band_noise(*cfg.masker_band, cfg.masker_duration, fs,
                    seed=_sub_seed("zurek-masker", cfg.seed), level_db=cfg.level_db)
    masker = set_level(spatialize(mn, render_point_source(cfg.masker_azimuth_deg,
                                                          cfg.masker_distance, head, fs)),
                       cfg.level_db)
    onset = (masker.n_samples - dry.n_samples) // 2
    n = max(masker.n_samples, onset + tgt.n_samples)
    return pad_to(tgt, n, onset), pad_to(masker, n, 0), onset


def replicate_zurek(cfg=None, model_cfg=None):
    """Predicted benefit per absorption coefficient for a reverberant 500 Hz target."""
    cfg = cfg or ZurekConfig()
    rows = []
    for a in cfg.alphas:
        tgt, msk, _ = zurek_signals(cfg, a)
        for v in cfg.variants:
            c = replace(model_cfg, variant=v) if model_cfg is not None else ModelConfig(variant=v)
            b = predict(tgt, msk, c).benefit
            rows.append(ResultRow(0, a, 0.0, "zurek", 0.0, v, b, -b,
                                  condition_id=f"zurek_a{a:g}"))
    return rows


def rmse_against(rows, data, key="azimuth_deg"):
    """Per-variant evaluation of predicted thresholds against measured rows.

    ``data`` is a list of dicts with ``key`` and ``threshold_db``.
    """
    measured = {float(d[key]): float(d["threshold_db"]) for d in data}
    out = {}
    for v in sorted({r.variant for r in rows}):
        sel = [r for r in rows if r.variant == v and float(getattr(r, key)) in measured]
        out[v] = evaluate([r.threshold_db for r in sel],
                          [measured[float(getattr(r, key))] for r in sel])
    return out
