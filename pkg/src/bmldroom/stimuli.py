"""Target and masker stimuli, level calibration and spatialization.

Levels follow one global convention: a signal with unit RMS is 100 dB SPL.
Multichannel signals are leveled on their RMS over all channels.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

CAL_DB = 100.0


def critical_bandwidth(f):
    """Zwicker critical bandwidth (Hz): 25 + 75 (1 + 1.4 (f/kHz)^2)^0.69."""
    f = np.asarray(f, dtype=float)
    return 25.0 + 75.0 * (1.0 + 1.4 * (f / 1000.0) ** 2) ** 0.69


@dataclass
class Signal:
    """Sampled audio, shape (channels, samples), with its dB SPL calibration."""

    data: np.ndarray
    fs: float
    cal_db: float = CAL_DB
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if not np.all(np.isfinite(self.data)):
            raise ValueError("signal contains non-finite samples")

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

    def scaled(self, g):
        return Signal(self.data * g, self.fs, self.cal_db, dict(self.meta))


def level(x, cal_db=CAL_DB):
    """dB SPL of an array or Signal (RMS over all samples and channels)."""
    if isinstance(x, Signal):
        cal_db, x = x.cal_db, x.data
    rms = np.sqrt(np.mean(np.square(x)))
    with np.errstate(divide="ignore"):
        return float(cal_db + 20.0 * np.log10(rms))


def set_level(x, level_db, cal_db=CAL_DB):
    """Scale ``x`` (array or Signal) to ``level_db`` dB SPL."""
    cur = level(x, cal_db)
    if not np.isfinite(cur):
        raise ValueError("cannot set the level of a silent signal")
    g = 10.0 ** ((level_db - cur) / 20.0)
    return x.scaled(g) if isinstance(x, Signal) else np.asarray(x) * g


def gaussian_ramp(duration, fs):
    """Rising half of a Gaussian with sigma = duration / 2.5, shifted to start at 0."""
    n = int(round(duration * fs))
    if n <= 0:
        return np.ones(0)
    sigma = duration / 2.5
    t = np.arange(n) / fs - duration
    g = np.exp(-0.5 * (t / sigma) ** 2)
    g0 = np.exp(-0.5 * (duration / sigma) ** 2)
    return (g - g0) / (1.0 - g0)


def _ramp_90(duration):
    """Time between the ramp's 90% point and its end."""
    sigma = duration / 2.5
    g0 = np.exp(-0.5 * 2.5 ** 2)
    return sigma * np.sqrt(-2.0 * np.log(0.9 * (1.0 - g0) + g0))


def envelope(n, fs, ramp):
    """Flat envelope of ``n`` samples with Gaussian onset and offset ramps."""
    r = gaussian_ramp(ramp, fs)
    if 2 * len(r) > n:
        raise ValueError("ramps longer than the signal")
    env = np.ones(n)
    env[:len(r)] = r
    env[n - len(r):] = r[::-1]
    return env


@dataclass
class HctSpec:
    """Harmonic complex tone with equal energy per critical band."""

    f0: float = 50.0
    harmonics: tuple = (7, 8, 9, 10, 11, 12, 13)
    effective_duration: float = 0.5
    ramp: float = 0.010
    level_db: float = 60.0
    random_phase: bool = False
    seed: int = 0

    @property
    def frequencies(self):
        return self.f0 * np.asarray(self.harmonics, dtype=float)

    @property
    def plateau(self):
        """Flat part giving ``effective_duration`` above 90% of the maximum."""
        return self.effective_duration - 2.0 * _ramp_90(self.ramp)

    @property
    def duration(self):
        return self.plateau + 2.0 * self.ramp


def hct_amplitudes(spec):
    """Relative amplitudes sqrt(f0 / CB(f_h))."""
    return np.sqrt(spec.f0 / critical_bandwidth(spec.frequencies))


def synth_hct(spec=None, fs=44100):
    """Mono harmonic complex tone at ``spec.level_db``."""
    spec = spec or HctSpec()
    if fs < 4000:
        raise ValueError("fs must be at least 4 kHz")
    n = int(round(spec.duration * fs))
    t = np.arange(n) / fs
    amps = hct_amplitudes(spec)
    if spec.random_phase:
        phases = np.random.default_rng(spec.seed).uniform(0, 2 * np.pi, len(amps))
    else:
        phases = np.zeros(len(amps))
    x = np.zeros(n)
    for a, f, p in zip(amps, spec.frequencies, phases):
        x += a * np.sin(2 * np.pi * f * t + p)
    x *= envelope(n, fs, spec.ramp)
    return set_level(Signal(x, fs, meta={"kind": "hct"}), spec.level_db)


@dataclass
class NoiseSpec:
    """Uniform exciting noise: equal power per critical band within the passband."""

    f_lo: float = 250.0
    f_hi: float = 750.0
    duration: float = 0.9
    ramp: float = 0.030
    level_db: float = 60.0
    seed: int = 0
    fs: float = 44100

    def __post_init__(self):
        if not 0 < self.f_lo < self.f_hi <= self.fs / 2:
            raise ValueError("band edges must satisfy 0 < f_lo < f_hi <= fs/2")


def synth_uen(spec=None):
    """Random-phase noise with power density proportional to 1/CB(f) in the band."""
    spec = spec or NoiseSpec()
    fs = spec.fs
    n = int(round(spec.duration * fs))
    rng = np.random.default_rng(spec.seed)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    band = (f >= spec.f_lo) & (f <= spec.f_hi)
    mag = np.zeros_like(f)
    mag[band] = 1.0 / np.sqrt(critical_bandwidth(f[band]))
    phase = rng.uniform(0.0, 2.0 * np.pi, f.size)
    x = np.fft.irfft(mag * np.exp(1j * phase), n)
    x *= envelope(n, fs, spec.ramp)
    return set_level(Signal(x, fs, meta={"kind": "uen", "seed": spec.seed}), spec.level_db)


def band_noise(f_lo, f_hi, duration, fs, seed=0, ramp=0.030, level_db=60.0):
    """Random-phase noise with a flat power density between ``f_lo`` and ``f_hi``."""
    n = int(round(duration * fs))
    rng = np.random.default_rng(seed)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    mag = ((f >= f_lo) & (f <= f_hi)).astype(float)
    x = np.fft.irfft(mag * np.exp(1j * rng.uniform(0, 2 * np.pi, f.size)), n)
    x *= envelope(n, fs, ramp)
    return set_level(Signal(x, fs, meta={"kind": "noise", "seed": seed}), level_db)


def spatialize(signal, brir):
    """Convolve a mono signal with each ear of ``brir`` (full linear convolution)."""
    if signal.fs != brir.fs:
        raise ValueError("sample rates differ")
    if signal.n_channels != 1:
        raise ValueError("spatialize expects a mono signal")
    x = signal.data[0]
    out = np.vstack([fftconvolve(x, h) for h in brir.data])
    return Signal(out, signal.fs, signal.cal_db, dict(signal.meta))


def normalize_across_conditions(signals):
    """Scale each signal so its ear-summed energy equals that of the first."""
    if not signals:
        raise ValueError("empty signal list")
    ref = signals[0].energy
    out = []
    for s in signals:
        e = s.energy
        if e <= 0:
            raise ValueError("cannot normalize a zero-energy signal")
        out.append(s.scaled(np.sqrt(ref / e)))
    return out


def pad_to(signal, n, offset=0):
    """Place ``signal`` at ``offset`` samples in a zero array of length ``n``."""
    if offset < 0 or offset + signal.n_samples > n:
        raise ValueError("signal does not fit")
    out = np.zeros((signal.n_channels, n))
    out[:, offset:offset + signal.n_samples] = signal.data
    return Signal(out, signal.fs, signal.cal_db, dict(signal.meta))
