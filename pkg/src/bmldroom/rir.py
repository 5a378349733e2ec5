"""Impulse responses: synthesis, diffuse tails, manipulation and analysis."""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InsufficientDecayError
from .room import SPEED_OF_SOUND, compute_image_sources

log = logging.getLogger(__name__)

FD_TAPS = 31
_FD_HALF = FD_TAPS // 2
DIRECT_PROTECT = (0.5e-3, 1.5e-3)

# measured reverberation of the jittered lab room: alpha -> (RT60 s, {azimuth: DRR dB})
LAB_REVERB = {
    0.1: (0.736, {0.0: -11.8, 60.0: -12.3}),
    0.5: (0.302, {0.0: -4.2, 60.0: -4.9}),
}


@dataclass
class RIR:
    """Sampled impulse response, shape (channels, samples)."""

    data: np.ndarray
    fs: float
    t_direct: float = None
    manipulations: list = field(default_factory=list)
    tail_seed: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def duration(self):
        return self.n_samples / self.fs

    @property
    def energy(self):
        return float(np.sum(self.data ** 2))

    def direct_window(self, protect=DIRECT_PROTECT):
        """Inclusive sample range [start, end] of the protected direct sound."""
        if self.t_direct is None or not np.isfinite(self.t_direct):
            raise ValueError("impulse response has no identifiable direct sound")
        start = max(int(np.floor((self.t_direct - protect[0]) * self.fs)), 0)
        end = int(np.ceil((self.t_direct + protect[1]) * self.fs))
        return start, end


def fractional_delay_taps(delay_samples):
    """Windowed-sinc fractional delay filters.

    Returns the index of the first tap and a (M, 31) array of taps normalized
    to unit DC gain.
    """
    d = np.atleast_1d(np.asarray(delay_samples, dtype=float))
    centre = np.round(d).astype(np.int64)
    k = np.arange(-_FD_HALF, _FD_HALF + 1)
    x = (centre[:, None] + k[None, :]) - d[:, None]
    w = np.cos(np.pi * x / (2 * (_FD_HALF + 1))) ** 2
    h = np.sinc(x) * w
    h /= h.sum(axis=1, keepdims=True)
    return centre - _FD_HALF, h


def accumulate_impulses(n_samples, delay_samples, gains):
    """Sum of fractionally delayed, scaled impulses into a length-``n_samples`` array."""
    out = np.zeros(n_samples)
    if len(np.atleast_1d(gains)) == 0:
        return out
    start, taps = fractional_delay_taps(delay_samples)
    idx = start[:, None] + np.arange(FD_TAPS)[None, :]
    vals = taps * np.asarray(gains, dtype=float)[:, None]
    ok = (idx >= 0) & (idx < n_samples)
    out += np.bincount(idx[ok], weights=vals[ok], minlength=n_samples)[:n_samples]
    return out


def synthesize_rir(images, fs, c=None, n_samples=None):
    """Omnidirectional RIR: one fractional-delay impulse per image source.

    Amplitude of each impulse is reflection factor / distance.
    """
    if fs < 16000:
        raise ValueError("fs must be at least 16 kHz")
    c = images.c if c is None else c
    if len(images) == 0:
        n = n_samples or 1
        return RIR(np.zeros(n), fs, t_direct=None, meta={"empty": True})
    dist = images.distances
    delays = dist / c * fs
    if n_samples is None:
        n_samples = int(np.ceil(delays.max())) + _FD_HALF + 2
    h = accumulate_impulses(n_samples, delays, images.factors / dist)
    direct = np.nonzero(images.orders == 0)[0]
    t_d = float(dist[direct[0]] / c) if direct.size else None
    return RIR(h, fs, t_direct=t_d)


@dataclass
class TailSpec:
    """Parameters of the stochastic late tail.

    ``onset`` is the centre of the crossfade from the exact early part;
    coherence between the two channels follows sin(x)/x with
    x = 2 pi f (2 a) / c.
    """

    rt60: float
    drr_db: float
    onset: float
    t_direct: float = 0.0
    head_radius: float = 0.0875
    c: float = SPEED_OF_SOUND
    seed: int = 0
    crossfade: float = 0.005

    def __post_init__(self):
        if not self.rt60 > 0:
            raise ValueError("RT60 must be positive")
        if self.onset < self.t_direct:
            raise ValueError("tail onset precedes the direct sound")


def ear_coherence(freqs, head_radius=0.0875, c=SPEED_OF_SOUND):
    x = 2 * np.pi * np.asarray(freqs, float) * 2 * head_radius / c
    return np.sinc(x / np.pi)


def _fade(n, fs, centre, width, rising):
    t = np.arange(n) / fs
    if width <= 0:
        ramp = (t >= centre).astype(float)
    else:
        u = np.clip((t - (centre - width / 2)) / width, 0.0, 1.0)
        ramp = np.sin(0.5 * np.pi * u) ** 2
    return ramp if rising else 1.0 - ramp


def tail_energy(direct_energy, early_energy, drr_db, min_energy=0.0):
    """Tail energy meeting the DRR target, floored at ``min_energy``."""
    return max(direct_energy * 10.0 ** (-drr_db / 10.0) - early_energy, min_energy)


def synthesize_diffuse_tail(spec, fs, n_samples=None, direct_energy=1.0, early_energy=0.0,
                            channels=2, min_energy=0.0, energy=None):
    """Exponentially decaying two-channel noise tail.

    Energies are in the caller's domain (summed over channels): the tail is
    scaled so direct / (early + tail) equals ``spec.drr_db``, or to
    ``min_energy`` when that is larger.  ``energy`` overrides both.

    Returns
    -------
    ndarray, shape (channels, n_samples)
    """
    if spec.onset < spec.t_direct:
        raise ValueError("tail onset precedes the direct sound")
    start_t = max(spec.onset - spec.crossfade / 2, 0.0)
    if n_samples is None:
        n_samples = int(np.ceil((spec.onset + spec.rt60 * 80.0 / 60.0) * fs))
    out = np.zeros((channels, n_samples))
    if energy is None and not np.isfinite(spec.drr_db) and spec.drr_db > 0:
        return out
    if energy is None:
        budget = tail_energy(direct_energy, early_energy, spec.drr_db, min_energy)
    else:
        budget = float(energy)
    if budget <= 0:
        log.warning("early reflections already exceed the DRR budget; tail left empty")
        return out
    i0 = int(np.floor(start_t * fs))
    n = n_samples - i0
    if n <= 0:
        return out
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal((2, n))
    spec1 = np.fft.rfft(noise[0])
    spec2 = np.fft.rfft(noise[1])
    gamma = ear_coherence(np.fft.rfftfreq(n, 1.0 / fs), spec.head_radius, spec.c)
    a = np.sqrt((1.0 + gamma) / 2.0)
    b = np.sqrt((1.0 - gamma) / 2.0)
    left = np.fft.irfft(a * spec1 + b * spec2, n)
    right = np.fft.irfft(a * spec1 - b * spec2, n)
    t = (i0 + np.arange(n)) / fs
    env = 10.0 ** (-3.0 * (t - spec.onset) / spec.rt60)
    env *= _fade(n_samples, fs, spec.onset, spec.crossfade, rising=True)[i0:]
    chans = np.vstack([left, right])[:channels] * env
    e = np.sum(chans ** 2)
    if e > 0:
        chans *= np.sqrt(budget / e)
    out[:, i0:] = chans
    return out


def lab_tail_targets(alpha, azimuth_deg):
    """Measured (RT60, DRR) of the jittered lab room, or None if not tabulated."""
    for a, (rt, drrs) in LAB_REVERB.items():
        if abs(a - alpha) < 1e-9:
            for az, drr in drrs.items():
                if abs(abs(azimuth_deg) - az) < 1e-9:
                    return rt, drr
    return None


def continuation_energy(arrival_times, energies, mixing_time, rt60, t_direct=0.0,
                        window=0.025):
    """Energy of a tail that continues the early energy density at ``mixing_time``.

    The density is averaged over the last ``window`` seconds before t_m (not
    reaching back past t_d) and the continuation decays with energy time
    constant RT60 / (6 ln 10).
    """
    t = np.asarray(arrival_times, float)
    e = np.asarray(energies, float)
    lo = max(mixing_time - window, t_direct)
    if mixing_time <= lo:
        return 0.0
    dens = e[(t > lo) & (t <= mixing_time)].sum() / (mixing_time - lo)
    return float(dens * rt60 / (6.0 * np.log(10.0)))


def _early_parts(images, fs, c, n_samples, mixing_time, crossfade):
    """Sampled direct sound and faded-out reflections."""
    direct = images.select(images.orders == 0)
    refl = images.select(images.orders > 0)
    h_dir = synthesize_rir(direct, fs, c, n_samples).data[0]
    h_ref = synthesize_rir(refl, fs, c, n_samples).data[0] if len(refl) else np.zeros(n_samples)
    h_ref *= _fade(n_samples, fs, mixing_time, crossfade, rising=False)
    return h_dir, h_ref


def _omni_tail_energy(images, h_dir, h_ref, mixing_time, rt60, drr_db, t_d):
    """Tail energy for an omnidirectional response with the given early parts."""
    e_dir = float(np.sum(h_dir ** 2))
    refl = images.orders > 0
    rel_e = (images.factors / images.distances) ** 2 * images.distances[0] ** 2
    floor = e_dir * continuation_energy(images.arrival_times[refl], rel_e[refl],
                                        mixing_time, rt60, t_d)
    return tail_energy(e_dir, float(np.sum(h_ref ** 2)), drr_db, floor)


def hybrid_rir(room, source, receiver, fs=44100, max_order=8, mixing_time=0.075,
               crossfade=0.005, rt60=None, drr_db=None, seed=0, n_samples=None,
               c=SPEED_OF_SOUND, invisible_parent_limit=7, level_cutoff_db=80.0):
    """Omnidirectional exact-early + stochastic-late impulse response.

    ``rt60`` defaults to Eyring and ``drr_db`` to the room-constant estimate.
    The tail carries the energy the DRR target leaves after the exact early
    part, but never less than the energy that continues the early level at
    the mixing time (:func:`continuation_energy`).  When the early part
    nearly exhausts the budget the achieved DRR is therefore lower than the
    target.
    """
    mixing_time = float(mixing_time)
    images = compute_image_sources(room, source, receiver, max_order,
                                   invisible_parent_limit=invisible_parent_limit,
                                   level_cutoff_db=level_cutoff_db,
                                   max_time=mixing_time + crossfade / 2, c=c)
    dist = np.linalg.norm(np.asarray(source, float) - np.asarray(receiver, float))
    t_d = dist / c
    rt60 = room.eyring_rt60(c) if rt60 is None else rt60
    drr_db = room.diffuse_drr(dist) if drr_db is None else drr_db
    has_tail = rt60 > 0 and np.isfinite(drr_db)
    if n_samples is None:
        t_end = mixing_time + (rt60 * 80.0 / 60.0 if has_tail else crossfade)
        n_samples = int(np.ceil(t_end * fs)) + FD_TAPS
    h_dir, h_ref = _early_parts(images, fs, c, n_samples, mixing_time, crossfade)
    h = h_dir + h_ref
    if has_tail:
        spec = TailSpec(rt60=rt60, drr_db=drr_db, onset=mixing_time, t_direct=t_d,
                        c=c, seed=seed, crossfade=crossfade)
        e_tail = _omni_tail_energy(images, h_dir, h_ref, mixing_time, rt60, drr_db, t_d)
        h = h + synthesize_diffuse_tail(spec, fs, n_samples, channels=1, energy=e_tail)[0]
    return RIR(h, fs, t_direct=t_d, tail_seed=seed if has_tail else None,
               meta={"n_images": len(images), "rt60_target": rt60, "drr_target": drr_db,
                     "max_order": max_order, "mixing_time": mixing_time})


def manipulate_rir(rir, mode, t_ms, protect=DIRECT_PROTECT):
    """Truncate (keep up to ``t_ms``) or cut (drop from the direct sound to ``t_ms``).

    Times are measured from source emission.  The direct-sound window
    [t_d - 0.5 ms, t_d + 1.5 ms] is never zeroed.
    """
    if t_ms < 0:
        raise ValueError("t_ms must be non-negative")
    if mode not in ("truncate", "cut"):
        raise ValueError(f"unknown manipulation {mode!r}")
    _, end = rir.direct_window(protect)
    t = t_ms * 1e-3
    if mode == "truncate" and t < rir.t_direct - protect[0]:
        raise ValueError("truncation before the direct sound would delete it")
    b = int(round(t * rir.fs))
    data = rir.data.copy()
    if mode == "truncate":
        data[:, max(b, end + 1):] = 0.0
    else:
        if b > end + 1:
            data[:, end + 1:b] = 0.0
    rec = list(rir.manipulations) + [{"mode": mode, "t_ms": float(t_ms)}]
    return replace(rir, data=data, manipulations=rec)


def direct_part(rir, protect=DIRECT_PROTECT):
    """The response restricted to samples up to the end of the direct window."""
    _, end = rir.direct_window(protect)
    data = rir.data.copy()
    data[:, end + 1:] = 0.0
    return data


def direct_to_reverberant(rir, protect=DIRECT_PROTECT):
    """DRR in dB; +inf when nothing but the direct window carries energy."""
    start, end = rir.direct_window(protect)
    e = np.sum(rir.data ** 2, axis=0)
    e_dir = float(e[start:end + 1].sum())
    e_rest = float(e.sum() - e_dir)
    if e_rest <= 0:
        return np.inf
    return 10.0 * np.log10(e_dir / e_rest)


def energy_decay_curve(rir):
    """Schroeder backward-integrated energy in dB re total (channels summed)."""
    e = np.sum(rir.data ** 2, axis=0)
    edc = np.cumsum(e[::-1])[::-1]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(edc / edc[0])


def rt60_schroeder(rir, fit_range=(-5.0, -35.0), protect=DIRECT_PROTECT):
    """RT60 from a line fit to the EDC between -5 and -35 dB (T30 x 2)."""
    edc = energy_decay_curve(rir)
    hi, lo = fit_range
    i_hi = np.argmax(edc <= hi)
    reach = edc <= lo
    if not reach.any() or edc[i_hi] > hi:
        raise InsufficientDecayError("energy decay curve does not reach %g dB" % lo)
    i_lo = np.argmax(reach)
    if rir.t_direct is not None:
        _, end = rir.direct_window(protect)
        if i_lo <= end:
            raise InsufficientDecayError("decay range lies inside the direct sound")
    if i_lo - i_hi < 2:
        raise InsufficientDecayError("decay range too short for a fit")
    t = np.arange(i_hi, i_lo + 1) / rir.fs
    slope, _ = np.polyfit(t, edc[i_hi:i_lo + 1], 1)
    if slope >= 0:
        raise InsufficientDecayError("energy decay curve is not decaying")
    return -60.0 / slope


@dataclass
class RirAnalysis:
    rt60: float
    drr: float


def analyze_rir(rir):
    """RT60 (Schroeder T30) and DRR of an impulse response.

    Raises
    ------
    InsufficientDecayError
        When the decay spans less than 35 dB; the exception carries ``drr``.
    """
    drr = direct_to_reverberant(rir)
    try:
        rt = rt60_schroeder(rir)
    except InsufficientDecayError as exc:
        raise InsufficientDecayError(str(exc), drr=drr) from None
    return RirAnalysis(rt60=rt, drr=drr)
