"""Polygonal rooms and the image-source method.

Rooms are convex hexahedra given by 8 corners (floor 1-4 clockwise, ceiling
5-8).  Each wall is kept as one planar polygon when its 4 corners are
coplanar and is split into two triangles otherwise.  Image sources are
enumerated depth-first with backtracking visibility, pruned by invisible
ancestor runs, level, path length and order.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import GeometryError

SPEED_OF_SOUND = 343.0
OCTAVE_BANDS = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0)
WALL_NAMES = ("floor", "ceiling", "wall_12", "wall_23", "wall_34", "wall_41")
# corner indices of the 6 logical walls
_WALL_QUADS = ((0, 1, 2, 3), (4, 5, 6, 7), (0, 1, 5, 4),
               (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7))

LAB_ROOM_CORNERS = np.array([
    [0.00, 0.00, 0.00],
    [0.77, 17.49, 0.15],
    [8.06, 16.71, 0.19],
    [7.24, -0.39, 0.31],
    [0.01, 0.02, 3.12],
    [0.46, 17.14, 2.84],
    [7.58, 16.49, 3.04],
    [7.01, -0.12, 3.35],
])

_PLANAR_TOL = 1e-9
_DEGENERATE_AREA = 1e-9


def shoebox_corners(width, length, height):
    """Corners of an axis-aligned box, x across (width), y along (length)."""
    floor = np.array([[0, 0, 0], [0, length, 0], [width, length, 0], [width, 0, 0]], float)
    ceil = floor + [0, 0, height]
    return np.vstack([floor, ceil])


@dataclass
class Room:
    """Convex polyhedral room with per-wall, per-octave-band absorption."""

    corners: np.ndarray
    faces: list
    face_wall: np.ndarray
    absorption: np.ndarray
    normals: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    edge_normals: np.ndarray = field(repr=False)
    edge_offsets: np.ndarray = field(repr=False)
    nverts: np.ndarray = field(repr=False)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def wall_reflection(self):
        """Frequency-flat amplitude reflection factor sqrt(1 - alpha) per wall."""
        return np.sqrt(1.0 - self.absorption.mean(axis=1))

    @property
    def face_reflection(self):
        return self.wall_reflection[self.face_wall]

    def signed_distances(self, point):
        return self.normals @ np.asarray(point, float) + self.offsets

    def contains(self, point, margin=0.0):
        return bool(np.all(self.signed_distances(point) > margin))

    @property
    def centroid(self):
        return self.corners.mean(axis=0)

    @property
    def volume(self):
        c = self.centroid
        vol = 0.0
        for poly in self.faces:
            for i in range(1, len(poly) - 1):
                a, b, d = poly[0] - c, poly[i] - c, poly[i + 1] - c
                vol += abs(np.dot(a, np.cross(b, d))) / 6.0
        return vol

    def face_areas(self):
        areas = []
        for poly in self.faces:
            a = 0.0
            for i in range(1, len(poly) - 1):
                a += 0.5 * np.linalg.norm(np.cross(poly[i] - poly[0], poly[i + 1] - poly[0]))
            areas.append(a)
        return np.array(areas)

    @property
    def surface_area(self):
        return float(self.face_areas().sum())

    def mean_absorption(self):
        """Area-weighted broadband absorption coefficient."""
        areas = self.face_areas()
        alpha = self.absorption.mean(axis=1)[self.face_wall]
        return float(np.sum(areas * alpha) / areas.sum())

    def eyring_rt60(self, c=SPEED_OF_SOUND):
        """Eyring reverberation time in seconds (0 for a fully absorbing room)."""
        a = self.mean_absorption()
        if a >= 1.0:
            return 0.0
        return 24.0 * np.log(10.0) * self.volume / (c * -self.surface_area * np.log(1.0 - a))

    def diffuse_drr(self, distance):
        """Direct-to-reverberant ratio (dB) from the classical room constant."""
        a = self.mean_absorption()
        if a >= 1.0:
            return np.inf
        room_constant = self.surface_area * a / (1.0 - a)
        return 10.0 * np.log10(room_constant / (16.0 * np.pi * distance ** 2))


def _plane(points, inside):
    n = np.zeros(3)
    m = len(points)
    for i in range(m):  # Newell normal
        p, q = points[i], points[(i + 1) % m]
        n += np.cross(p, q)
    norm = np.linalg.norm(n)
    if norm < _DEGENERATE_AREA:
        raise GeometryError("degenerate wall: collinear or coincident corners")
    n /= norm
    off = -np.dot(n, points.mean(axis=0))
    if np.dot(n, inside) + off < 0:
        n, off = -n, -off
    return n, off


def _edge_planes(poly, normal):
    cen = poly.mean(axis=0)
    en, eo = [], []
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        m = np.cross(normal, b - a)
        nm = np.linalg.norm(m)
        if nm < 1e-12:
            raise GeometryError("degenerate wall edge (coincident corners)")
        m /= nm
        if np.dot(m, cen - a) < 0:
            m = -m
        en.append(m)
        eo.append(-np.dot(m, a))
    return en, eo


def _as_absorption(absorption):
    a = np.asarray(absorption, dtype=float)
    if a.ndim == 0:
        a = np.full((6, len(OCTAVE_BANDS)), float(a))
    elif a.ndim == 1:
        if a.shape[0] != len(OCTAVE_BANDS):
            raise ValueError("per-band absorption needs one value per octave band 125 Hz-4 kHz")
        a = np.tile(a, (6, 1))
    elif a.shape != (6, len(OCTAVE_BANDS)):
        raise ValueError("absorption must be scalar, (6,) per band or (6 walls, 6 bands)")
    if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
        raise ValueError("absorption coefficients must lie in [0, 1]")
    return a


def build_room(corners, absorption):
    """Build a convex room from 8 corners.

    Parameters
    ----------
    corners : (8, 3) array_like
        Floor corners 1-4 followed by ceiling corners 5-8, in meters.
    absorption : float or array_like
        Scalar, per octave band (6,), or per wall and band (6, 6).

    Raises
    ------
    GeometryError
        Collinear/coincident corners, zero volume, or a non-convex result.
    """
    corners = np.asarray(corners, dtype=float)
    if corners.shape != (8, 3):
        raise GeometryError("a room needs exactly 8 corners")
    absorption = _as_absorption(absorption)
    inside = corners.mean(axis=0)
    scale = np.ptp(corners, axis=0).max()
    if scale <= 0:
        raise GeometryError("coincident corners")

    faces, face_wall, normals, offsets = [], [], [], []
    for w, quad in enumerate(_WALL_QUADS):
        pts = corners[list(quad)]
        n, off = _plane(pts, inside)
        dev = np.abs(pts @ n + off).max()
        if dev <= _PLANAR_TOL * scale:
            polys = [pts]
        else:
            # split along the diagonal that folds outward (keeps the room convex)
            cands = [([0, 1, 2], [0, 2, 3], 3), ([0, 1, 3], [1, 2, 3], 2)]
            polys = None
            for t1, t2, probe in cands:
                n1, o1 = _plane(pts[t1], inside)
                if np.dot(n1, pts[probe]) + o1 >= 0:
                    polys = [pts[t1], pts[t2]]
                    break
            if polys is None:
                polys = [pts[[0, 1, 2]], pts[[0, 2, 3]]]
        for poly in polys:
            n, off = _plane(poly, inside)
            faces.append(poly)
            face_wall.append(w)
            normals.append(n)
            offsets.append(off)

    normals = np.array(normals)
    offsets = np.array(offsets)
    tol = 1e-6 * scale
    d = corners @ normals.T + offsets
    if np.any(d < -tol):
        raise GeometryError("room is not convex")
    if np.any(normals @ inside + offsets <= tol):
        raise GeometryError("room has no interior (degenerate corners)")

    max_v = 4
    edge_n = np.zeros((len(faces), max_v, 3))
    edge_o = np.zeros((len(faces), max_v))
    nverts = np.zeros(len(faces), dtype=np.int32)
    for i, poly in enumerate(faces):
        en, eo = _edge_planes(poly, normals[i])
        edge_n[i, :len(en)] = en
        edge_o[i, :len(eo)] = eo
        nverts[i] = len(en)

    room = Room(corners=corners, faces=faces, face_wall=np.array(face_wall),
                absorption=absorption, normals=normals, offsets=offsets,
                edge_normals=edge_n, edge_offsets=edge_o, nverts=nverts)
    if room.volume <= 1e-9 * scale ** 3:
        raise GeometryError("room has zero volume")
    return room


def lab_room(alpha):
    return build_room(LAB_ROOM_CORNERS, alpha)


def shoebox(width, length, height, alpha):
    return build_room(shoebox_corners(width, length, height), alpha)


def place_in_corner(room, walls, distances):
    """Point at given perpendicular distances from three wall planes.

    ``walls`` are logical wall indices (see ``WALL_NAMES``); the best-fit
    plane of each wall's corners is used.
    """
    inside = room.centroid
    a, b = [], []
    for w, dist in zip(walls, distances):
        n, off = _plane(room.corners[list(_WALL_QUADS[w])], inside)
        a.append(n)
        b.append(dist - off)
    return np.linalg.solve(np.array(a), np.array(b))


def lab_receiver(room=None):
    """Listener 1.5 m from the two walls at corner 1, 1.4 m above the floor."""
    room = room if room is not None else lab_room(0.1)
    return place_in_corner(room, (2, 5, 0), (1.5, 1.5, 1.4))


def horizontal_axes(facing):
    facing = np.asarray(facing, dtype=float)
    facing = facing / np.linalg.norm(facing)
    right = np.cross(facing, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    return facing, right


def pose_at(receiver, facing, azimuth_deg, distance):
    """Point at ``distance`` and horizontal azimuth (positive = to the right)."""
    f, r = horizontal_axes(facing)
    th = np.deg2rad(azimuth_deg)
    return np.asarray(receiver, float) + distance * (np.cos(th) * f + np.sin(th) * r)


@dataclass
class ImageSource:
    position: np.ndarray
    order: int
    walls: tuple
    factor: float
    arrival_time: float
    visible: bool = True


@dataclass
class ImageSourceSet:
    """Visible image sources sorted by (order, arrival time)."""

    positions: np.ndarray
    orders: np.ndarray
    face_sequences: np.ndarray
    factors: np.ndarray
    source: np.ndarray
    receiver: np.ndarray
    face_wall: np.ndarray
    c: float = SPEED_OF_SOUND
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.orders)

    @property
    def distances(self):
        return np.linalg.norm(self.positions - self.receiver, axis=1)

    @property
    def arrival_times(self):
        return self.distances / self.c

    @property
    def amplitudes(self):
        return self.factors / self.distances

    def wall_sequence(self, i):
        seq = self.face_sequences[i]
        return tuple(int(self.face_wall[f]) for f in seq if f >= 0)

    def __getitem__(self, i):
        return ImageSource(position=self.positions[i], order=int(self.orders[i]),
                           walls=self.wall_sequence(i), factor=float(self.factors[i]),
                           arrival_time=float(self.arrival_times[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def select(self, mask):
        return ImageSourceSet(self.positions[mask], self.orders[mask],
                              self.face_sequences[mask], self.factors[mask],
                              self.source, self.receiver, self.face_wall, self.c,
                              dict(self.params))


def compute_image_sources(room, source, receiver, max_order, invisible_parent_limit=7,
                          level_cutoff_db=80.0, max_time=None, c=SPEED_OF_SOUND,
                          backend=None):
    """Enumerate the visible image sources of ``source`` seen from ``receiver``.

    Parameters
    ----------
    max_order : int
        Maximum number of reflections.
    invisible_parent_limit : int
        A node whose run of consecutive invisible ancestors exceeds this is not
        expanded.
    level_cutoff_db : float
        Branches whose level (reflection factors x 1/r) is this far below the
        direct sound are dropped.
    max_time : float, optional
        Drop images arriving later than this (seconds).  Path length only
        grows down a branch in a convex room, so the whole branch is cut.
    backend : {None, "compiled", "python"}
    """
    source = np.asarray(source, dtype=float)
    receiver = np.asarray(receiver, dtype=float)
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    if not room.contains(source):
        raise GeometryError("source is outside the room")
    if not room.contains(receiver):
        raise GeometryError("receiver is outside the room")
    d0 = np.linalg.norm(source - receiver)
    if d0 == 0:
        raise GeometryError("source and receiver coincide")
    max_dist = np.inf if max_time is None else c * max_time
    min_amp = 10.0 ** (-level_cutoff_db / 20.0) / d0

    if backend is None:
        fn = _kernels.ism_traverse
    elif backend == "compiled":
        if _kernels.ism_traverse_ext is None:
            raise RuntimeError("compiled kernel not available")
        fn = _kernels.ism_traverse_ext
    elif backend == "python":
        fn = _kernels.ism_traverse_py
    else:
        raise ValueError(f"unknown backend {backend!r}")

    pos, orders, seqs, amps = fn(
        np.ascontiguousarray(room.normals), np.ascontiguousarray(room.offsets),
        np.ascontiguousarray(room.edge_normals), np.ascontiguousarray(room.edge_offsets),
        np.ascontiguousarray(room.nverts, dtype=np.int32),
        np.ascontiguousarray(room.face_reflection, dtype=float),
        source, receiver, int(max_order), float(max_dist), float(min_amp),
        int(invisible_parent_limit), 1e-9)

    dist = np.linalg.norm(pos - receiver, axis=1)
    key = np.lexsort((pos[:, 2], pos[:, 1], pos[:, 0], dist, orders))
    params = dict(max_order=int(max_order), invisible_parent_limit=int(invisible_parent_limit),
                  level_cutoff_db=float(level_cutoff_db), max_time=max_time)
    return ImageSourceSet(pos[key], orders[key], seqs[key], amps[key], source, receiver,
                          room.face_wall.copy(), c, params)


def lattice_image_sources(dims, source, max_order):
    """Brute-force image lattice of an axis-aligned box [0, W] x [0, L] x [0, H].

    Returns (positions, orders); independent of the generic traversal and
    used to check it.
    """
    dims = np.asarray(dims, float)
    source = np.asarray(source, float)
    out_p, out_o = [], []
    rng = range(-max_order - 1, max_order + 2)
    for u in (0, 1):
        for v in (0, 1):
            for w in (0, 1):
                for lx in rng:
                    for ly in rng:
                        for lz in rng:
                            order = (abs(lx) + abs(lx - u) + abs(ly) + abs(ly - v)
                                     + abs(lz) + abs(lz - w))
                            if order > max_order:
                                continue
                            pos = (1 - 2 * np.array([u, v, w])) * source \
                                + 2 * np.array([lx, ly, lz]) * dims
                            out_p.append(pos)
                            out_o.append(order)
    return np.array(out_p), np.array(out_o)
