"""Time-dependent 2D velocity fields on regular grids.

A field stores one velocity frame per time step on a regular spatial grid.
Sampling interpolates bilinearly in space and linearly in time; the spatial
velocity gradient is formed by finite differences on grid nodes (central in
the interior, one-sided second-order at boundaries) and interpolated with the
same weights as the velocity.

Frames are kept as float32 (matching the on-disk format); all interpolation
and downstream accumulation arithmetic is float64.

Dataset file format ("VF2D", version 1, little-endian):

    magic   4 bytes  b"VF2D"
    u32     version = 1
    u32     nx, ny, nt
    f64     origin_x, origin_y, spacing_x, spacing_y, t_min, t_max
    payload nt*ny*nx*2 float32, t-major, y-major, x-minor, components
            interleaved (u, v)
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"VF2D"
_VERSION = 1
_HEADER = struct.Struct("<4s4I6d")  # magic, version, nx, ny, nt, origin[2], spacing[2], t_min, t_max


class DatasetError(ValueError):
    """Base class for dataset ingestion failures."""


class MalformedHeaderError(DatasetError):
    """Magic, version or header fields are invalid."""


class PayloadSizeError(DatasetError):
    """Payload length does not match the header declaration."""


class NonFiniteDataError(DatasetError):
    """Payload contains NaN or Inf velocity components."""


class UnknownFieldError(ValueError):
    """Requested analytic field name is not registered."""


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a regular space/time grid.

    origin/spacing are in domain units; nx, ny are node counts per axis and
    nt the number of stored time steps spanning [t_min, t_max].
    """

    origin: tuple[float, float]
    spacing: tuple[float, float]
    nx: int
    ny: int
    t_min: float
    t_max: float
    nt: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2 nodes per axis, got {self.nx}x{self.ny}")
        if self.nt < 2:
            raise ValueError(f"grid needs at least 2 time steps, got {self.nt}")
        if not (self.spacing[0] > 0 and self.spacing[1] > 0):
            raise ValueError(f"spacing must be strictly positive, got {self.spacing}")
        if not self.t_min < self.t_max:
            raise ValueError(f"empty time range [{self.t_min}, {self.t_max}]")

    @property
    def x_max(self) -> float:
        return self.origin[0] + self.spacing[0] * (self.nx - 1)

    @property
    def y_max(self) -> float:
        return self.origin[1] + self.spacing[1] * (self.ny - 1)

    @property
    def t_step(self) -> float:
        return (self.t_max - self.t_min) / (self.nt - 1)

    def x_nodes(self) -> np.ndarray:
        return self.origin[0] + self.spacing[0] * np.arange(self.nx)

    def y_nodes(self) -> np.ndarray:
        return self.origin[1] + self.spacing[1] * np.arange(self.ny)

    def frame_times(self) -> np.ndarray:
        return self.t_min + self.t_step * np.arange(self.nt)

    def contains(self, x: float, y: float) -> bool:
        return (self.origin[0] <= x <= self.x_max) and (self.origin[1] <= y <= self.y_max)


@dataclass
class VelocitySample:
    """Velocity and velocity gradient at a query point.

    gradient rows are components, columns are derivative directions:
    [[du/dx, du/dy], [dv/dx, dv/dy]].  When ``inside`` is False the velocity
    and gradient are unspecified and must not be consumed.
    """

    velocity: np.ndarray
    gradient: np.ndarray
    inside: bool


class VectorField2D:
    """Immutable gridded velocity data plus an evaluation counter.

    ``frames`` has shape (nt, ny, nx, 2) with frames[k][j, i] the velocity at
    node (i, j) of frame k.  ``samples_taken`` counts velocity/gradient
    evaluations performed through this object (used to verify that cached
    query paths never touch velocity data).
    """

    def __init__(self, spec: GridSpec, frames: np.ndarray):
        frames = np.ascontiguousarray(frames, dtype=np.float32)
        expected = (spec.nt, spec.ny, spec.nx, 2)
        if frames.shape != expected:
            raise ValueError(f"frames shape {frames.shape} does not match spec {expected}")
        if not np.isfinite(frames).all():
            raise NonFiniteDataError("velocity data contains non-finite values")
        frames.setflags(write=False)
        self.spec = spec
        self.frames = frames
        self.samples_taken = 0
        self._fingerprint: bytes | None = None
        self._node_grads: np.ndarray | None = None

    # -- sampling ---------------------------------------------------------

    def _locate(self, x: float, y: float, t: float):
        """Clamped cell indices and fractions (extrapolates edge cells outside)."""
        sp = self.spec
        gx = (x - sp.origin[0]) / sp.spacing[0]
        gy = (y - sp.origin[1]) / sp.spacing[1]
        gt = (t - sp.t_min) / sp.t_step
        i = min(max(int(math.floor(gx)), 0), sp.nx - 2)
        j = min(max(int(math.floor(gy)), 0), sp.ny - 2)
        k = min(max(int(math.floor(gt)), 0), sp.nt - 2)
        return i, j, k, gx - i, gy - j, gt - k

    def node_gradients(self) -> np.ndarray:
        """Per-node velocity gradients, shape (nt, ny, nx, 4) float32.

        Channels are (du/dx, du/dy, dv/dx, dv/dy): central differences in the
        interior, one-sided second order at boundaries (first order on axes
        with only two nodes).  Built lazily and cached; sampling interpolates
        this table with the same weights as the velocity.
        """
        if self._node_grads is None:
            sp = self.spec
            hx, hy = sp.spacing
            out = np.empty((sp.nt, sp.ny, sp.nx, 4), dtype=np.float32)
            for k in range(sp.nt):
                f = self.frames[k].astype(np.float64)  # (ny, nx, 2)
                for c in range(2):
                    comp = f[:, :, c]
                    dx = np.empty_like(comp)
                    dx[:, 1:-1] = (comp[:, 2:] - comp[:, :-2]) / (2.0 * hx)
                    if sp.nx >= 3:
                        dx[:, 0] = (-3.0 * comp[:, 0] + 4.0 * comp[:, 1] - comp[:, 2]) / (2.0 * hx)
                        dx[:, -1] = (3.0 * comp[:, -1] - 4.0 * comp[:, -2] + comp[:, -3]) / (2.0 * hx)
                    else:
                        dx[:, 0] = (comp[:, 1] - comp[:, 0]) / hx
                        dx[:, -1] = dx[:, 0]
                    dy = np.empty_like(comp)
                    dy[1:-1, :] = (comp[2:, :] - comp[:-2, :]) / (2.0 * hy)
                    if sp.ny >= 3:
                        dy[0, :] = (-3.0 * comp[0, :] + 4.0 * comp[1, :] - comp[2, :]) / (2.0 * hy)
                        dy[-1, :] = (3.0 * comp[-1, :] - 4.0 * comp[-2, :] + comp[-3, :]) / (2.0 * hy)
                    else:
                        dy[0, :] = (comp[1, :] - comp[0, :]) / hy
                        dy[-1, :] = dy[0, :]
                    out[k, :, :, 2 * c] = dx
                    out[k, :, :, 2 * c + 1] = dy
            out.setflags(write=False)
            self._node_grads = out
        return self._node_grads

    def sample(self, x: float, y: float, t: float) -> VelocitySample:
        """Interpolated velocity and gradient at (x, y, t).

        Out-of-domain queries are legal; they return inside=False and the
        numeric payload is then unspecified (the edge-cell extrapolation).
        """
        self.samples_taken += 1
        sp = self.spec
        inside = sp.contains(x, y) and (sp.t_min <= t <= sp.t_max)
        i, j, k, fx, fy, ft = self._locate(x, y, t)
        w00 = (1.0 - fx) * (1.0 - fy)
        w10 = fx * (1.0 - fy)
        w01 = (1.0 - fx) * fy
        w11 = fx * fy

        vel = np.empty(2)
        for c in range(2):
            lo = (w00 * float(self.frames[k, j, i, c]) + w10 * float(self.frames[k, j, i + 1, c])
                  + w01 * float(self.frames[k, j + 1, i, c]) + w11 * float(self.frames[k, j + 1, i + 1, c]))
            hi = (w00 * float(self.frames[k + 1, j, i, c]) + w10 * float(self.frames[k + 1, j, i + 1, c])
                  + w01 * float(self.frames[k + 1, j + 1, i, c]) + w11 * float(self.frames[k + 1, j + 1, i + 1, c]))
            vel[c] = (1.0 - ft) * lo + ft * hi

        ng = self.node_gradients()
        g4 = np.empty(4)
        for c in range(4):
            lo = (w00 * float(ng[k, j, i, c]) + w10 * float(ng[k, j, i + 1, c])
                  + w01 * float(ng[k, j + 1, i, c]) + w11 * float(ng[k, j + 1, i + 1, c]))
            hi = (w00 * float(ng[k + 1, j, i, c]) + w10 * float(ng[k + 1, j, i + 1, c])
                  + w01 * float(ng[k + 1, j + 1, i, c]) + w11 * float(ng[k + 1, j + 1, i + 1, c]))
            g4[c] = (1.0 - ft) * lo + ft * hi
        grad = np.array([[g4[0], g4[1]], [g4[2], g4[3]]])

        return VelocitySample(velocity=vel, gradient=grad, inside=inside)

    # -- identity ---------------------------------------------------------

    def fingerprint(self) -> bytes:
        """SHA-256 of the canonical dataset serialization of this field.

        Loading a dataset file and rasterizing the same data in memory yield
        the same fingerprint, so caches can be validated against either.
        """
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(_pack_header(self.spec))
            h.update(self.frames)
            self._fingerprint = h.digest()
        return self._fingerprint


def _pack_header(spec: GridSpec) -> bytes:
    return _HEADER.pack(
        _MAGIC, _VERSION, spec.nx, spec.ny, spec.nt,
        spec.origin[0], spec.origin[1], spec.spacing[0], spec.spacing[1],
        spec.t_min, spec.t_max,
    )


def save_dataset(field: VectorField2D, path) -> None:
    """Write the field in the documented binary format."""
    with open(path, "wb") as fh:
        fh.write(_pack_header(field.spec))
        fh.write(field.frames.tobytes())


def load_dataset(path) -> VectorField2D:
    """Read a dataset file, validating header, size and finiteness."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise MalformedHeaderError(f"file too short for header: {len(head)} bytes")
        magic, version, nx, ny, nt, ox, oy, sx, sy, t_min, t_max = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise MalformedHeaderError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        if version != _VERSION:
            raise MalformedHeaderError(f"unsupported format version {version}")
        try:
            spec = GridSpec((ox, oy), (sx, sy), nx, ny, t_min, t_max, nt)
        except ValueError as exc:
            raise MalformedHeaderError(str(exc)) from exc
        expected = nt * ny * nx * 2 * 4
        payload = fh.read(expected)
        if len(payload) != expected:
            raise PayloadSizeError(f"payload is {len(payload)} bytes, header declares {expected}")
        if fh.read(1):
            raise PayloadSizeError("trailing data after declared payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(nt, ny, nx, 2)
    if not np.isfinite(data).all():
        raise NonFiniteDataError("velocity data contains non-finite values")
    out = VectorField2D(spec, data)
    h = hashlib.sha256()
    h.update(head)
    h.update(payload)
    out._fingerprint = h.digest()
    return out


# -- analytic test flows ---------------------------------------------------

_DG_A = 0.1
_DG_OMEGA = 2.0 * np.pi / 10.0
_DG_EPS = 0.25

# Two-population stitch layout: rotation about (1, 0) on the left, saddle
# about (3, 0) on the right, smoothstep blend over x in [1.8, 2.2].
_TP_ROT_CENTER = (1.0, 0.0)
_TP_SAD_CENTER = (3.0, 0.0)
_TP_BAND = (1.8, 2.2)


def _v_constant(x, y, t):
    one = np.ones_like(x)
    return one, np.zeros_like(x)


def _v_rigid_rotation(x, y, t):
    return -y, x


def _v_saddle(x, y, t):
    return x, -y


def _v_double_gyre(x, y, t):
    """Classic oscillating double gyre on [0,2]x[0,1] (A=0.1, omega=2*pi/10, eps=0.25)."""
    s = _DG_EPS * np.sin(_DG_OMEGA * t)
    f = s * x * x + (1.0 - 2.0 * s) * x
    dfdx = 2.0 * s * x + (1.0 - 2.0 * s)
    u = -np.pi * _DG_A * np.sin(np.pi * f) * np.cos(np.pi * y)
    v = np.pi * _DG_A * np.cos(np.pi * f) * np.sin(np.pi * y) * dfdx
    return u, v


def _v_two_population(x, y, t):
    """Rigid rotation (left) stitched to a contracting/stretching saddle (right).

    The saddle contracts toward x = 3 and stretches in y, so right-side
    pathlines never cross the blend band; left-side orbits with radius
    below 0.8 stay in the pure-rotation region.  The two populations have
    disjoint strain/rotation invariants (rotation: alpha = 0, beta > 0;
    saddle: alpha < 0, beta = 0).
    """
    u_rot = -(y - _TP_ROT_CENTER[1])
    v_rot = x - _TP_ROT_CENTER[0]
    u_sad = -(x - _TP_SAD_CENTER[0])
    v_sad = y - _TP_SAD_CENTER[1]
    w = np.clip((x - _TP_BAND[0]) / (_TP_BAND[1] - _TP_BAND[0]), 0.0, 1.0)
    s = w * w * (3.0 - 2.0 * w)
    return (1.0 - s) * u_rot + s * u_sad, (1.0 - s) * v_rot + s * v_sad


ANALYTIC_FIELDS = {
    "constant": _v_constant,
    "rigid_rotation": _v_rigid_rotation,
    "saddle": _v_saddle,
    "double_gyre": _v_double_gyre,
    "two_population": _v_two_population,
}

# Convenient default extents for the closed forms above (used by the CLI).
DEFAULT_GRIDS = {
    "constant": GridSpec((0.0, 0.0), (1.0 / 31, 1.0 / 31), 32, 32, 0.0, 1.0, 2),
    "rigid_rotation": GridSpec((-2.0, -2.0), (4.0 / 127, 4.0 / 127), 128, 128, 0.0, 10.0, 2),
    "saddle": GridSpec((-3.0, -3.0), (6.0 / 127, 6.0 / 127), 128, 128, 0.0, 2.0, 2),
    "double_gyre": GridSpec((0.0, 0.0), (2.0 / 255, 1.0 / 127), 256, 128, 0.0, 10.0, 101),
    "two_population": GridSpec((0.0, -1.0), (4.0 / 255, 2.0 / 127), 256, 128, 0.0, 2.0, 3),
}


def analytic_velocity(name: str, x, y, t):
    """Evaluate a registered closed-form field directly (test oracle)."""
    try:
        fn = ANALYTIC_FIELDS[name]
    except KeyError:
        raise UnknownFieldError(f"unknown analytic field {name!r}; known: {sorted(ANALYTIC_FIELDS)}") from None
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u, v = fn(x, y, t)
    return np.broadcast_to(u, x.shape).astype(float), np.broadcast_to(v, x.shape).astype(float)


def make_analytic(name: str, spec: GridSpec) -> VectorField2D:
    """Rasterize a registered closed-form field onto the given grid."""
    if name not in ANALYTIC_FIELDS:
        raise UnknownFieldError(f"unknown analytic field {name!r}; known: {sorted(ANALYTIC_FIELDS)}")
    xs = spec.x_nodes()
    ys = spec.y_nodes()
    xg, yg = np.meshgrid(xs, ys)  # shape (ny, nx)
    frames = np.empty((spec.nt, spec.ny, spec.nx, 2), dtype=np.float32)
    for k, t in enumerate(spec.frame_times()):
        u, v = analytic_velocity(name, xg, yg, float(t))
        frames[k, :, :, 0] = u
        frames[k, :, :, 1] = v
    return VectorField2D(spec, frames)
