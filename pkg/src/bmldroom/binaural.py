"""Spherical-head binaural rendering of image sources and point sources.

Each arrival is placed at each ear with a Woodworth delay and a one-pole,
one-zero head-shadow filter whose zero depends on the angle between the
arrival direction and the ear axis.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .rir import (RIR, FD_TAPS, TailSpec, _early_parts, _omni_tail_energy,
                  accumulate_impulses, synthesize_diffuse_tail)
from .room import SPEED_OF_SOUND, compute_image_sources, horizontal_axes

EARS = ("left", "right")


@dataclass
class HeadModel:
    """Rigid sphere with ears at +-90 degrees from the facing direction."""

    position: np.ndarray
    facing: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    radius: float = 0.0875
    c: float = SPEED_OF_SOUND
    alpha_min: float = 0.1
    theta_min_deg: float = 150.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.facing, self.right = horizontal_axes(self.facing)
        if not self.radius > 0:
            raise ValueError("head radius must be positive")

    def ear_axis(self, ear):
        if ear == "right":
            return self.right
        if ear == "left":
            return -self.right
        raise ValueError(f"unknown ear {ear!r}")

    def incidence(self, points, ear):
        """Angle (rad) between the ear axis and the direction to each point."""
        d = np.atleast_2d(np.asarray(points, float)) - self.position
        u = d / np.linalg.norm(d, axis=1, keepdims=True)
        return np.arccos(np.clip(u @ self.ear_axis(ear), -1.0, 1.0))

    def direction(self, azimuth_deg):
        th = np.deg2rad(azimuth_deg)
        return np.cos(th) * self.facing + np.sin(th) * self.right


def woodworth_delay(gamma, radius=0.0875, c=SPEED_OF_SOUND):
    """Ear delay relative to the head centre for incidence angle ``gamma`` (rad).

    Negative on the lit side, a/c (gamma - pi/2) around the sphere otherwise.
    """
    g = np.asarray(gamma, float)
    return np.where(g < np.pi / 2, -np.cos(g), g - np.pi / 2) * radius / c


def ear_delay(azimuth_deg, ear, radius=0.0875, c=SPEED_OF_SOUND):
    """Woodworth delay (s) of one ear for a far source in the horizontal plane.

    Azimuth is relative to the facing direction, positive to the right.
    """
    az = np.deg2rad(np.asarray(azimuth_deg, float))
    if ear == "right":
        gamma = np.arccos(np.clip(np.sin(az), -1, 1))
    elif ear == "left":
        gamma = np.arccos(np.clip(-np.sin(az), -1, 1))
    else:
        raise ValueError(f"unknown ear {ear!r}")
    return woodworth_delay(gamma, radius, c)


def itd(azimuth_deg, radius=0.0875, c=SPEED_OF_SOUND):
    """Left minus right ear delay; positive for sources on the right."""
    return ear_delay(azimuth_deg, "left", radius, c) - ear_delay(azimuth_deg, "right", radius, c)


def shadow_alpha(gamma, alpha_min=0.1, theta_min_deg=150.0):
    """High-frequency gain of the shadow filter (2 at the lit pole, alpha_min in shadow)."""
    g = np.rad2deg(np.asarray(gamma, float))
    return (1 + alpha_min / 2) + (1 - alpha_min / 2) * np.cos(np.deg2rad(g * 180.0 / theta_min_deg))


def shadow_coefficients(alpha, fs, radius=0.0875, c=SPEED_OF_SOUND):
    """Bilinear-transformed H(s) = (1 + alpha s/w0) / (1 + s/w0), w0 = c/a.

    Returns (b0, b1, a1); the pole does not depend on ``alpha``.
    """
    k = 2.0 * fs * radius / c
    alpha = np.asarray(alpha, float)
    b0 = (1 + alpha * k) / (1 + k)
    b1 = (1 - alpha * k) / (1 + k)
    a1 = (1 - k) / (1 + k)
    return b0, b1, a1


def shadow_tail_samples(fs, radius=0.0875, c=SPEED_OF_SOUND, rel=1e-12):
    """Samples until the shadow filter's impulse response decays below ``rel``."""
    a1 = abs(shadow_coefficients(1.0, fs, radius, c)[2])
    return int(np.ceil(np.log(rel) / np.log(a1))) if a1 > 0 else 1


def shadow_energy(alpha, fs, radius=0.0875, c=SPEED_OF_SOUND):
    """Energy of the shadow filter's impulse response."""
    b0, b1, a1 = shadow_coefficients(alpha, fs, radius, c)
    return b0 ** 2 + (b1 - a1 * b0) ** 2 / (1.0 - a1 ** 2)


def image_ear_energies(images, head, fs):
    """Ear-summed rendered energy of each image (1/r spreading and shadow filter)."""
    e = np.zeros(len(images))
    for ear in EARS:
        gamma = head.incidence(images.positions, ear)
        e += shadow_energy(shadow_alpha(gamma, head.alpha_min, head.theta_min_deg), fs,
                           head.radius, head.c)
    return e * (images.factors / images.distances) ** 2


@dataclass
class BRIR(RIR):
    """Two-channel (left, right) impulse response with per-ear direct arrivals."""

    t_direct_ears: tuple = None

    @property
    def left(self):
        return self.data[0]

    @property
    def right(self):
        return self.data[1]


def _render_arrivals(points, gains, head, fs, n_samples):
    """Both ear signals for arrivals from ``points`` with linear ``gains``.

    Distance delay is taken to the head centre; gains already include 1/r.
    """
    points = np.atleast_2d(points)
    r = np.linalg.norm(points - head.position, axis=1)
    out = np.zeros((2, n_samples))
    t_ears = []
    for ch, ear in enumerate(EARS):
        gamma = head.incidence(points, ear)
        delay = (r / head.c + woodworth_delay(gamma, head.radius, head.c)) * fs
        b0, b1, a1 = shadow_coefficients(
            shadow_alpha(gamma, head.alpha_min, head.theta_min_deg), fs, head.radius, head.c)
        x0 = accumulate_impulses(n_samples, delay, gains * b0)
        x1 = accumulate_impulses(n_samples, delay, gains * b1)
        x = x0
        x[1:] += x1[:-1]
        out[ch] = lfilter([1.0], [1.0, a1], x)
        t_ears.append(delay / fs)
    return out, t_ears


def render_brir(images, head, fs, tail=None, n_samples=None, mixing_time=None,
                crossfade=0.005):
    """Render an image-source set at the ears, optionally adding a 2-channel tail.

    With ``mixing_time`` the reflections are faded out around it.  ``tail``
    is an RIR-like object (``data``, ``fs``) added unmodified.
    """
    if len(images) == 0:
        raise ValueError("image set is empty")
    if tail is not None and tail.fs != fs:
        raise ValueError("tail sample rate differs from the requested one")
    if not np.allclose(images.receiver, head.position):
        raise ValueError("image sources were computed for a different receiver")
    dist = images.distances
    if n_samples is None:
        n_samples = int(np.ceil((dist.max() + 2 * head.radius) / head.c * fs)) + FD_TAPS \
            + shadow_tail_samples(fs, head.radius, head.c)
        if tail is not None:
            n_samples = max(n_samples, tail.data.shape[1])
    gains = images.factors / dist
    if mixing_time is not None:
        t = dist / head.c
        lo, hi = mixing_time - crossfade / 2, mixing_time + crossfade / 2
        u = np.clip((t - lo) / crossfade, 0.0, 1.0) if crossfade > 0 else (t >= mixing_time) * 1.0
        gains = gains * np.where(images.orders == 0, 1.0, 1.0 - np.sin(0.5 * np.pi * u) ** 2)
        keep = (images.orders == 0) | (t <= hi)
        data, t_ears = _render_arrivals(images.positions[keep], gains[keep], head, fs, n_samples)
    else:
        data, t_ears = _render_arrivals(images.positions, gains, head, fs, n_samples)
    if tail is not None:
        m = min(n_samples, tail.data.shape[1])
        data[:, :m] += tail.data[:, :m]
    direct = np.nonzero(images.orders == 0)[0]
    t_d = float(dist[direct[0]] / head.c) if direct.size else None
    t_de = None
    if direct.size:
        i = direct[0] if mixing_time is None else int(np.sum(keep[:direct[0]]))
        t_de = (float(t_ears[0][i]), float(t_ears[1][i]))
    return BRIR(data, fs, t_direct=t_d, t_direct_ears=t_de,
                meta={"head_radius": head.radius, "n_images": int(len(images))})


def render_point_source(azimuth_deg, distance, head, fs, n_samples=None):
    """Anechoic BRIR of a point source in the horizontal plane of the head."""
    if not distance > head.radius:
        raise ValueError("source must lie outside the head")
    pos = head.position + distance * head.direction(azimuth_deg)
    if n_samples is None:
        n_samples = int(np.ceil((distance + 2 * head.radius) / head.c * fs)) + FD_TAPS \
            + shadow_tail_samples(fs, head.radius, head.c)
    data, t_ears = _render_arrivals(pos[None, :], np.array([1.0 / distance]), head, fs, n_samples)
    return BRIR(data, fs, t_direct=distance / head.c,
                t_direct_ears=(float(t_ears[0][0]), float(t_ears[1][0])),
                meta={"head_radius": head.radius, "azimuth_deg": float(azimuth_deg),
                      "distance": float(distance), "anechoic": True})


def diffuse_shadow_energy(fs, radius=0.0875, c=SPEED_OF_SOUND, alpha_min=0.1,
                          theta_min_deg=150.0, n=2048):
    """Shadow-filter energy averaged over directions uniform on the sphere."""
    g = (np.arange(n) + 0.5) * np.pi / n
    w = np.sin(g)
    e = shadow_energy(shadow_alpha(g, alpha_min, theta_min_deg), fs, radius, c)
    return float(np.sum(w * e) / np.sum(w))


def hybrid_brir(room, source, head, fs=44100, max_order=8, mixing_time=0.075,
                crossfade=0.005, rt60=None, drr_db=None, seed=0, n_samples=None,
                invisible_parent_limit=7, level_cutoff_db=80.0):
    """Binaural exact-early + stochastic-late response of ``source`` at ``head``.

    The tail energy relative to the direct sound is fixed in the omnidirectional
    domain with the rule of :func:`bmldroom.rir.hybrid_rir`, then passed through
    the diffuse-field average of the head-shadow filter.  The DRR at the ears
    therefore differs from the omnidirectional one by the head's direct-sound
    gain.
    """
    c = head.c
    images = compute_image_sources(room, source, head.position, max_order,
                                   invisible_parent_limit=invisible_parent_limit,
                                   level_cutoff_db=level_cutoff_db,
                                   max_time=mixing_time + crossfade / 2, c=c)
    dist = float(np.linalg.norm(np.asarray(source, float) - head.position))
    t_d = dist / c
    rt60 = room.eyring_rt60(c) if rt60 is None else rt60
    drr_db = room.diffuse_drr(dist) if drr_db is None else drr_db
    has_tail = rt60 > 0 and np.isfinite(drr_db)
    if n_samples is None:
        t_end = mixing_time + (rt60 * 80.0 / 60.0 if has_tail else crossfade)
        n_samples = int(np.ceil(t_end * fs)) + FD_TAPS
    early = render_brir(images, head, fs, n_samples=n_samples, mixing_time=mixing_time,
                        crossfade=crossfade)
    data = early.data
    if has_tail:
        h_dir, h_ref = _early_parts(images, fs, c, n_samples, mixing_time, crossfade)
        rel = _omni_tail_energy(images, h_dir, h_ref, mixing_time, rt60, drr_db, t_d) \
            / float(np.sum(h_dir ** 2))
        e_tail = rel * 2.0 * diffuse_shadow_energy(fs, head.radius, c, head.alpha_min,
                                                   head.theta_min_deg) / dist ** 2
        spec = TailSpec(rt60=rt60, drr_db=drr_db, onset=mixing_time, t_direct=t_d,
                        head_radius=head.radius, c=c, seed=seed, crossfade=crossfade)
        data = data + synthesize_diffuse_tail(spec, fs, n_samples, channels=2, energy=e_tail)
    return BRIR(data, fs, t_direct=early.t_direct, t_direct_ears=early.t_direct_ears,
                tail_seed=seed if has_tail else None,
                meta={"head_radius": head.radius, "n_images": len(images),
                      "rt60_target": rt60, "drr_target": drr_db, "max_order": max_order,
                      "mixing_time": mixing_time})
