"""Fields on a periodic box and their spectral representation.

Everything lives on the uniform grid of a cube ``[0, length)^3`` with
periodic boundary conditions.  Transforms follow the convention that the
mode array of a constant field ``c`` is ``c`` at wavevector zero, i.e.
``modes = fftn(values) / n**3``, so the mean of ``|f|^2`` equals the plain
sum of ``|modes|^2`` (discrete Parseval).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

SNAPSHOT_MAGIC = b"WLNS"
SNAPSHOT_VERSION = 1

TWO_PI = 2.0 * np.pi


class SnapshotFormatError(ValueError):
    """Raised when a snapshot file does not follow the binary layout."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, length)^3``.

    Parameters
    ----------
    n : int
        Points per axis.  Must be even and at least 8 so the spectral
        symbols pair up and the 2/3 dealiasing rule has room to act.
    length : float
        Box edge length, ``2*pi`` by default so integer wavevectors are
        the derivative symbols.
    """

    n: int
    length: float = TWO_PI

    def __post_init__(self) -> None:
        if self.n % 2 != 0 or self.n < 8:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")
        if not (self.length > 0.0 and np.isfinite(self.length)):
            raise ValueError(f"box length must be positive, got {self.length}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def volume(self) -> float:
        return self.length**3

    @cached_property
    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Meshed ``(X, Y, Z)`` cell coordinates, ``ij`` indexed."""
        x = self.axis_coordinates
        return tuple(np.meshgrid(x, x, x, indexing="ij"))

    @cached_property
    def mode_numbers(self) -> np.ndarray:
        """Integer mode numbers along one axis in FFT layout."""
        return np.rint(np.fft.fftfreq(self.n) * self.n).astype(np.int64)

    @cached_property
    def wavevectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Meshed wavevector components ``(2*pi/length) * m``."""
        k1 = (TWO_PI / self.length) * self.mode_numbers.astype(np.float64)
        return tuple(np.meshgrid(k1, k1, k1, indexing="ij"))

    @cached_property
    def deriv_symbols(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # First-derivative symbols with the unpaired Nyquist mode zeroed,
        # the standard choice for odd-order spectral derivatives of real data.
        k1 = (TWO_PI / self.length) * self.mode_numbers.astype(np.float64)
        k1[self.n // 2] = 0.0
        return tuple(np.meshgrid(k1, k1, k1, indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.wavevectors
        return kx**2 + ky**2 + kz**2

    def dealias_mask(self, fraction: float = 2.0 / 3.0) -> np.ndarray:
        """Boolean keep-mask: True where every ``|m_j| <= fraction*n/2``."""
        cutoff = fraction * self.n / 2.0
        m = np.abs(self.mode_numbers)
        keep1 = m <= cutoff
        return (
            keep1[:, None, None] & keep1[None, :, None] & keep1[None, None, :]
        )

    def index_of(self, point: Sequence[float]) -> tuple[int, int, int]:
        """Grid index of a point, erroring if it is not on the grid."""
        idx = []
        for c in point:
            j = c / self.spacing
            jr = int(round(j)) % self.n
            if abs(j - round(j)) > 1e-9:
                raise ValueError(f"coordinate {c} is not a grid point")
            idx.append(jr)
        return tuple(idx)


def _check_values(grid: Grid, values: np.ndarray, shape: tuple) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != shape:
        raise ValueError(f"expected shape {shape}, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("field values must be finite")
    return values


@dataclass(frozen=True)
class ScalarField:
    """Real scalar samples on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n
        v = _check_values(self.grid, self.values, (n, n, n))
        object.__setattr__(self, "values", v)

    def mean(self) -> float:
        return float(self.values.mean())

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


@dataclass(frozen=True)
class VectorField:
    """Velocity-style field with three scalar components."""

    grid: Grid
    u1: ScalarField
    u2: ScalarField
    u3: ScalarField

    def __post_init__(self) -> None:
        for c in (self.u1, self.u2, self.u3):
            if c.grid != self.grid:
                raise ValueError("vector components live on different grids")

    @classmethod
    def from_arrays(cls, grid: Grid, u1, u2, u3) -> "VectorField":
        return cls(
            grid,
            ScalarField(grid, u1),
            ScalarField(grid, u2),
            ScalarField(grid, u3),
        )

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return (self.u1, self.u2, self.u3)

    def as_array(self) -> np.ndarray:
        """Stacked ``(3, n, n, n)`` view of the component values."""
        return np.stack([c.values for c in self.components])

    def magnitude(self) -> ScalarField:
        return ScalarField(self.grid, np.sqrt(sum(c.values**2 for c in self.components)))

    def max_abs(self) -> float:
        return float(np.sqrt(sum(c.values**2 for c in self.components)).max())


@dataclass(frozen=True)
class SpectralField:
    """Fourier modes of a scalar (``ndim == 3``) or vector (``ndim == 4``)."""

    grid: Grid
    modes: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n
        modes = np.asarray(self.modes, dtype=np.complex128)
        if modes.shape not in ((n, n, n), (3, n, n, n)):
            raise ValueError(f"bad mode array shape {modes.shape} for n={n}")
        if not np.all(np.isfinite(modes)):
            raise ValueError("spectral modes must be finite")
        object.__setattr__(self, "modes", modes)

    @property
    def is_vector(self) -> bool:
        return self.modes.ndim == 4

    def hermitian_defect(self) -> float:
        """Max deviation of ``mode(-k) - conj(mode(k))`` over all modes."""
        m = self.modes
        axes = (-3, -2, -1)
        flipped = np.roll(np.flip(m, axis=axes), 1, axis=axes)
        return float(np.abs(flipped - np.conj(m)).max())


def forward_transform(field: ScalarField | VectorField) -> SpectralField:
    """FFT a physical field; modes are normalised by ``n**3``."""
    if isinstance(field, VectorField):
        stack = field.as_array()
        modes = np.fft.fftn(stack, axes=(1, 2, 3)) / field.grid.n**3
        return SpectralField(field.grid, modes)
    modes = np.fft.fftn(field.values) / field.grid.n**3
    return SpectralField(field.grid, modes)


def inverse_transform(spec: SpectralField) -> ScalarField | VectorField:
    """Inverse FFT back to physical samples (imaginary part discarded).

    The round trip ``inverse_transform(forward_transform(f))`` reproduces
    ``f`` to machine precision; the discarded imaginary part of a physical
    field is pure FFT roundoff.
    """
    n3 = spec.grid.n**3
    if spec.is_vector:
        values = np.fft.ifftn(spec.modes * n3, axes=(1, 2, 3)).real
        return VectorField.from_arrays(spec.grid, values[0], values[1], values[2])
    values = np.fft.ifftn(spec.modes * n3).real
    return ScalarField(spec.grid, values)


def _scalar_modes(field: ScalarField | SpectralField) -> tuple[Grid, np.ndarray]:
    if isinstance(field, ScalarField):
        spec = forward_transform(field)
        return field.grid, spec.modes
    if field.is_vector:
        raise ValueError("expected a scalar field")
    return field.grid, field.modes


def gradient(field: ScalarField | SpectralField) -> VectorField:
    """Spectral gradient of a scalar field."""
    grid, modes = _scalar_modes(field)
    kx, ky, kz = grid.deriv_symbols
    n3 = grid.n**3
    parts = [
        np.fft.ifftn(1j * k * modes * n3).real for k in (kx, ky, kz)
    ]
    return VectorField.from_arrays(grid, *parts)


def divergence(field: VectorField | SpectralField) -> ScalarField:
    """Spectral divergence of a vector field."""
    if isinstance(field, VectorField):
        spec = forward_transform(field)
    else:
        if not field.is_vector:
            raise ValueError("expected a vector field")
        spec = field
    grid = spec.grid
    kx, ky, kz = grid.deriv_symbols
    n3 = grid.n**3
    div_modes = 1j * (
        kx * spec.modes[0] + ky * spec.modes[1] + kz * spec.modes[2]
    )
    return ScalarField(grid, np.fft.ifftn(div_modes * n3).real)


def laplacian(field: ScalarField | SpectralField) -> ScalarField:
    """Spectral Laplacian, defined as divergence of the gradient.

    Sharing the first-derivative symbols keeps ``laplacian`` exactly equal
    to ``divergence(gradient(.))`` on every input.
    """
    grid, modes = _scalar_modes(field)
    kx, ky, kz = grid.deriv_symbols
    sym = -(kx**2 + ky**2 + kz**2)
    n3 = grid.n**3
    return ScalarField(grid, np.fft.ifftn(sym * modes * n3).real)


def sample_scalar(grid: Grid, func: Callable) -> ScalarField:
    """Evaluate ``func(X, Y, Z)`` on the grid."""
    X, Y, Z = grid.coordinates
    return ScalarField(grid, np.asarray(func(X, Y, Z), dtype=np.float64))


def sample_vector(grid: Grid, func: Callable) -> VectorField:
    """Evaluate a closed form returning three components on the grid."""
    X, Y, Z = grid.coordinates
    u1, u2, u3 = func(X, Y, Z)
    u1 = np.broadcast_to(np.asarray(u1, dtype=np.float64), X.shape)
    u2 = np.broadcast_to(np.asarray(u2, dtype=np.float64), X.shape)
    u3 = np.broadcast_to(np.asarray(u3, dtype=np.float64), X.shape)
    return VectorField.from_arrays(grid, u1, u2, u3)


def rescale(
    field: ScalarField | VectorField,
    eps: float,
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> ScalarField | VectorField:
    """Zoomed field ``x -> eps * f(center + eps * x)`` on the same grid.

    Grid samples can only be zoomed by integer factors (the stretched
    points must land back on the grid); anything else needs the closed
    form, see :func:`rescale_profile`.
    """
    if abs(eps - round(eps)) > 1e-12 or round(eps) < 1:
        raise ValueError(
            "grid fields rescale only by positive integer factors; "
            "use rescale_profile with the closed form otherwise"
        )
    factor = int(round(eps))
    grid = field.grid
    i0 = grid.index_of(center)
    idx = [(i0[a] + factor * np.arange(grid.n)) % grid.n for a in range(3)]

    def zoom(values: np.ndarray) -> np.ndarray:
        return factor * values[np.ix_(idx[0], idx[1], idx[2])]

    if isinstance(field, VectorField):
        return VectorField.from_arrays(
            grid, *[zoom(c.values) for c in field.components]
        )
    return ScalarField(grid, zoom(field.values))


def rescale_profile(
    func: Callable, eps: float, center: Sequence[float] = (0.0, 0.0, 0.0)
) -> Callable:
    """Closed-form version of :func:`rescale` for arbitrary ``eps > 0``."""
    if not eps > 0:
        raise ValueError("scaling factor must be positive")
    cx, cy, cz = center

    def zoomed(X, Y, Z):
        out = func(cx + eps * X, cy + eps * Y, cz + eps * Z)
        if isinstance(out, tuple):
            return tuple(eps * np.asarray(c) for c in out)
        return eps * np.asarray(out)

    return zoomed


def ball_mask(grid: Grid, center: Sequence[float], radius: float) -> np.ndarray:
    """Cells whose centers lie in the (non-wrapping) ball of given radius."""
    X, Y, Z = grid.coordinates
    cx, cy, cz = center
    dist2 = (X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2
    return dist2 <= radius**2


def ball_boundary_cells(grid: Grid, center: Sequence[float], radius: float) -> int:
    """Count of cells straddling the sphere, for volume error brackets."""
    X, Y, Z = grid.coordinates
    cx, cy, cz = center
    dist = np.sqrt((X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2)
    half_diag = 0.5 * np.sqrt(3.0) * grid.spacing
    return int(np.count_nonzero(np.abs(dist - radius) <= half_diag))


# ---------------------------------------------------------------------------
# Binary snapshots
#
# Little-endian layout: magic "WLNS", version u32, n u32, length f64,
# time f64, field count u32, then each field as n^3 float64 values with
# the x index varying fastest.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sII d d I")


def write_snapshot(path, time: float, fields: Sequence[ScalarField] | VectorField) -> None:
    if isinstance(fields, VectorField):
        fields = fields.components
    if not fields:
        raise ValueError("snapshot needs at least one field")
    grid = fields[0].grid
    for f in fields:
        if f.grid != grid:
            raise ValueError("snapshot fields must share one grid")
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                SNAPSHOT_MAGIC,
                SNAPSHOT_VERSION,
                grid.n,
                grid.length,
                float(time),
                len(fields),
            )
        )
        for f in fields:
            payload = np.ascontiguousarray(
                f.values.ravel(order="F"), dtype="<f8"
            )
            fh.write(payload.tobytes())


def read_snapshot(path) -> tuple[float, Grid, list[ScalarField]]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise SnapshotFormatError("truncated snapshot header")
        magic, version, n, length, time, count = _HEADER.unpack(head)
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotFormatError(f"bad magic {magic!r}")
        if version != SNAPSHOT_VERSION:
            raise SnapshotFormatError(f"unsupported snapshot version {version}")
        grid = Grid(n=n, length=length)
        fields = []
        for _ in range(count):
            raw = fh.read(8 * n**3)
            if len(raw) != 8 * n**3:
                raise SnapshotFormatError("truncated snapshot payload")
            values = np.frombuffer(raw, dtype="<f8").reshape((n, n, n), order="F")
            fields.append(ScalarField(grid, values.copy()))
        trailing = fh.read(1)
        if trailing:
            raise SnapshotFormatError("trailing bytes after snapshot payload")
    return time, grid, fields


def read_vector_snapshot(path) -> tuple[float, VectorField]:
    time, grid, fields = read_snapshot(path)
    if len(fields) != 3:
        raise SnapshotFormatError(f"expected 3 fields, found {len(fields)}")
    return time, VectorField(grid, *fields)
