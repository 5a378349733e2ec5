"""Auditory front end: Bark-spaced complex gammatone filters, framing and cues.

Interaural cues come from the zero-lag complex cross-correlation of the
analytic subband signals of the two ears.
"""
from dataclasses import dataclass, field
import csv

import numpy as np
from scipy.signal import get_window, lfilter

from .stimuli import critical_bandwidth

SILENCE_FLOOR = 1e-10  # mean square; -100 dB re the unit-RMS calibration point
GT_ORDER = 4
ERB_PER_B = 0.9817  # ERB / b of a 4th-order gammatone


def bark_to_hz(z):
    """Inverse of Traunmueller's Bark formula."""
    z = np.asarray(z, dtype=float)
    return 1960.0 * (z + 0.53) / (26.28 - z)


def hz_to_bark(f):
    f = np.asarray(f, dtype=float)
    return 26.81 * f / (1960.0 + f) - 0.53


@dataclass
class FilterbankSpec:
    """Gammatone filters at integer Bark positions, bandwidth CB(f) each."""

    barks: tuple = tuple(range(2, 23))
    order: int = GT_ORDER

    @property
    def cfs(self):
        return bark_to_hz(self.barks)

    @property
    def bandwidths(self):
        return critical_bandwidth(self.cfs)

    def check(self, fs):
        cfs = self.cfs
        if np.any(np.diff(cfs) <= 0):
            raise ValueError("centre frequencies must increase")
        if np.any(cfs >= fs / 2):
            raise ValueError("centre frequency above Nyquist")


def gammatone_coefficients(cf, bandwidth, fs, order=GT_ORDER):
    """(b, a) of a complex gammatone with unit gain at ``cf`` and ERB = ``bandwidth``."""
    b_hz = bandwidth / ERB_PER_B
    mag = np.exp(-2.0 * np.pi * b_hz / fs)
    pole = mag * np.exp(2j * np.pi * cf / fs)
    a = np.poly(np.full(order, pole))
    b = np.array([(1.0 - mag) ** order], dtype=complex)
    return b, a


def gammatone_analytic(x, cf, bandwidth, fs, order=GT_ORDER):
    """Complex subband signal of ``x`` (last axis is time)."""
    if cf >= fs / 2:
        raise ValueError("centre frequency above Nyquist")
    b, a = gammatone_coefficients(cf, bandwidth, fs, order)
    return lfilter(b, a, np.asarray(x, dtype=float), axis=-1)


def gammatone_response(f, cf, bandwidth, fs, order=GT_ORDER):
    """Complex frequency response at frequencies ``f`` (Hz)."""
    b, a = gammatone_coefficients(cf, bandwidth, fs, order)
    z = np.exp(-2j * np.pi * np.asarray(f, float) / fs)
    return np.polyval(b[::-1], z) / np.polyval(a[::-1], z)


def filterbank(x, fs, spec=None):
    """Subband signals, shape (bands,) + x.shape."""
    spec = spec or FilterbankSpec()
    spec.check(fs)
    x = np.asarray(x, dtype=float)
    return np.stack([gammatone_analytic(x, cf, bw, fs, spec.order)
                     for cf, bw in zip(spec.cfs, spec.bandwidths)])


@dataclass
class FrameGrid:
    """Periodic Hann frames; default 24 ms with 50% overlap."""

    fs: float
    length: float = 0.024
    hop: float = 0.012

    @property
    def n_len(self):
        return int(round(self.length * self.fs))

    @property
    def n_hop(self):
        return int(round(self.hop * self.fs))

    @property
    def window(self):
        return get_window("hann", self.n_len, fftbins=True)

    def n_frames(self, n_samples):
        if n_samples < self.n_len:
            return 0
        return 1 + (n_samples - self.n_len) // self.n_hop

    def starts(self, n_samples):
        return np.arange(self.n_frames(n_samples)) * self.n_hop

    def centres(self, n_samples):
        """Frame centre times (s)."""
        return (self.starts(n_samples) + self.n_len / 2) / self.fs

    def frames(self, x):
        """Windowed frames of the last axis: shape x.shape[:-1] + (frames, length)."""
        x = np.asarray(x)
        n = x.shape[-1]
        idx = self.starts(n)[:, None] + np.arange(self.n_len)[None, :]
        return x[..., idx] * self.window


def interaural_cue(left, right, floor=SILENCE_FLOOR):
    """Normalized zero-lag complex cross-correlation of windowed analytic frames.

    Returns (rho, phi, valid).  Works on the last axis; frames whose mean
    power in either ear is below ``floor`` are flagged invalid with rho = 0,
    phi = 0.
    """
    left = np.asarray(left)
    right = np.asarray(right)
    if left.shape != right.shape:
        raise ValueError("frames differ in shape")
    cross = np.sum(left * np.conj(right), axis=-1)
    pl = np.sum(np.abs(left) ** 2, axis=-1)
    pr = np.sum(np.abs(right) ** 2, axis=-1)
    n = left.shape[-1]
    valid = (pl / n >= floor) & (pr / n >= floor)
    denom = np.sqrt(np.where(valid, pl * pr, 1.0))
    rho = np.where(valid, np.minimum(np.abs(cross) / denom, 1.0), 0.0)
    phi = np.where(valid, np.angle(cross), 0.0)
    return rho, phi, valid


@dataclass
class BinauralCues:
    """Per band x frame cues of one binaural signal."""

    rho: np.ndarray
    phi: np.ndarray
    power: np.ndarray  # (2, bands, frames), mean square of the windowed frame
    valid: np.ndarray
    cfs: np.ndarray
    times: np.ndarray


def binaural_cues(data, fs, grid=None, spec=None, floor=SILENCE_FLOOR):
    """Filter both ears, frame them and extract cues and per-ear powers."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] != 2:
        raise ValueError("expected a two-channel signal")
    spec = spec or FilterbankSpec()
    grid = grid or FrameGrid(fs)
    sub = filterbank(data, fs, spec)  # (bands, 2, n)
    fr_l = grid.frames(sub[:, 0])
    fr_r = grid.frames(sub[:, 1])
    rho, phi, valid = interaural_cue(fr_l, fr_r, floor)
    n = grid.n_len
    power = np.stack([np.sum(np.abs(fr_l) ** 2, axis=-1) / n,
                      np.sum(np.abs(fr_r) ** 2, axis=-1) / n])
    return BinauralCues(rho, phi, power, valid, spec.cfs, grid.centres(data.shape[1]))


@dataclass
class CueSeries:
    """Target and masker cues on a common grid."""

    phi_t: np.ndarray
    phi_m: np.ndarray
    rho_m: np.ndarray
    power_t: np.ndarray
    power_m: np.ndarray
    valid_t: np.ndarray
    valid_m: np.ndarray
    cfs: np.ndarray
    times: np.ndarray
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_cues(cls, target, masker):
        if target.phi.shape != masker.phi.shape:
            raise ValueError("target and masker were not analysed on the same grid")
        return cls(target.phi, masker.phi, masker.rho, target.power, masker.power,
                   target.valid, masker.valid, target.cfs, target.times,
                   {"rho_t": target.rho})

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["band", "cf_hz", "frame", "time_s", "phi_t", "phi_m", "rho_m",
                        "p_t_left", "p_t_right", "p_m_left", "p_m_right",
                        "valid_t", "valid_m"])
            for b in range(self.phi_t.shape[0]):
                for k in range(self.phi_t.shape[1]):
                    w.writerow([b, f"{self.cfs[b]:.6g}", k, f"{self.times[k]:.6g}",
                                f"{self.phi_t[b, k]:.9g}", f"{self.phi_m[b, k]:.9g}",
                                f"{self.rho_m[b, k]:.9g}",
                                f"{self.power_t[0, b, k]:.9g}", f"{self.power_t[1, b, k]:.9g}",
                                f"{self.power_m[0, b, k]:.9g}", f"{self.power_m[1, b, k]:.9g}",
                                int(self.valid_t[b, k]), int(self.valid_m[b, k])])


def exp_filter(series, tau, hop, axis=-1, initial=None):
    """Leaky integrator y[n] = beta y[n-1] + (1 - beta) x[n], beta = exp(-hop/tau).

    ``initial`` is y[-1]: a scalar or an array broadcastable to the other
    axes.  By default the state starts at the first input sample, so a
    constant input passes unchanged.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    x = np.moveaxis(np.asarray(series, dtype=float), axis, -1)
    if x.shape[-1] == 0:
        return np.moveaxis(x.copy(), -1, axis)
    beta = np.exp(-hop / tau)
    y0 = x[..., 0] if initial is None else np.broadcast_to(np.asarray(initial, float),
                                                           x.shape[:-1])
    zi = beta * np.asarray(y0)[..., None]
    y, _ = lfilter([1.0 - beta], [1.0, -beta], x, axis=-1, zi=zi)
    return np.moveaxis(y, -1, axis)
