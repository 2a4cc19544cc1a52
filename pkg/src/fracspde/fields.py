"""Core lattice types and the Fourier transform conventions.

Everything downstream discretizes R^d as a uniform periodic grid on
[-L/2, L/2)^d with n points per axis and angular frequencies
xi_k = 2*pi*k/L, k in {-n/2, ..., n/2 - 1}.

Transform pair (continuum convention, pinned by the Gaussian test case):

    forward   F(f)(xi) = int f(x) exp(+i<xi, x>) dx
    inverse   f(x)     = (2*pi)^-d int F(xi) exp(-i<xi, x>) dxi

Discretely, ``to_frequency`` approximates the forward integral by its
Riemann sum (exact for band-limited periodic data) and ``to_physical``
inverts it; the pair round-trips to machine precision.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolationError

__all__ = [
    "FractionalIndex",
    "Grid",
    "Field",
    "to_frequency",
    "to_physical",
    "write_array_binary",
    "read_array_binary",
    "write_field_binary",
    "read_field_binary",
]

# alpha values this close to the excluded point 1 are rejected outright:
# the symbol's phase becomes numerically degenerate there.
ALPHA_ONE_GAP = 1e-3


@dataclass(frozen=True)
class FractionalIndex:
    """Stability/skewness multi-index of the fractional generator.

    Each axis i carries a stability exponent alpha_i in (0, 2] \\ {1} and a
    skewness delta_i with |delta_i| <= min(alpha_i, 2 - alpha_i).
    """

    alpha: tuple
    delta: tuple

    def __init__(self, alpha, delta=None):
        alpha = tuple(float(a) for a in np.atleast_1d(alpha))
        if delta is None:
            delta = (0.0,) * len(alpha)
        delta = tuple(float(x) for x in np.atleast_1d(delta))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta", delta)
        self._validate()

    def _validate(self):
        if len(self.alpha) != len(self.delta) or not self.alpha:
            raise ConstraintViolationError(
                "alpha and delta must be non-empty sequences of equal length"
            )
        for i, (a, dl) in enumerate(zip(self.alpha, self.delta)):
            if not (0.0 < a <= 2.0):
                raise ConstraintViolationError(
                    f"alpha[{i}]={a} outside (0, 2]"
                )
            if abs(a - 1.0) < ALPHA_ONE_GAP:
                raise ConstraintViolationError(
                    f"alpha[{i}]={a} too close to the excluded value 1"
                )
            if abs(dl) > min(a, 2.0 - a) + 1e-12:
                raise ConstraintViolationError(
                    f"|delta[{i}]|={abs(dl)} exceeds min(alpha, 2-alpha)="
                    f"{min(a, 2.0 - a)}"
                )

    @property
    def d(self) -> int:
        return len(self.alpha)

    @property
    def min_alpha(self) -> float:
        """Smallest stability exponent across axes."""
        return min(self.alpha)

    @property
    def min_damping(self) -> float:
        """min_i cos(delta_i*pi/2): worst-case modulus damping factor."""
        return float(min(np.cos(np.asarray(self.delta) * np.pi / 2)))

    @property
    def inverse_alpha_sum(self) -> float:
        """sum_i 1/alpha_i, the white-noise admissibility threshold."""
        return float(sum(1.0 / a for a in self.alpha))


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on [-L/2, L/2)^d.

    Powers of two per axis are recommended (everything downstream is
    FFT-based) but not required.
    """

    d: int
    n_per_dim: int
    box_length: float

    def __post_init__(self):
        if self.d < 1:
            raise ConstraintViolationError("grid dimension must be >= 1")
        if self.n_per_dim < 1:
            raise ConstraintViolationError("n_per_dim must be >= 1")
        if not self.box_length > 0:
            raise ConstraintViolationError("box_length must be > 0")

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_per_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.d

    @property
    def shape(self) -> tuple:
        return (self.n_per_dim,) * self.d

    def axis_coordinates(self) -> np.ndarray:
        """Monotone physical coordinates of one axis."""
        return -self.box_length / 2 + self.spacing * np.arange(self.n_per_dim)

    def frequency_axis(self) -> np.ndarray:
        """Angular frequencies of one axis in FFT (wrap-around) order."""
        return 2 * np.pi * np.fft.fftfreq(self.n_per_dim, d=self.spacing)

    def frequency_mesh(self) -> list:
        """Per-axis angular frequency arrays broadcastable to ``shape``."""
        ax = self.frequency_axis()
        return list(np.meshgrid(*([ax] * self.d), indexing="ij", sparse=True))

    def coordinate_mesh(self) -> list:
        ax = self.axis_coordinates()
        return list(np.meshgrid(*([ax] * self.d), indexing="ij", sparse=True))

    @property
    def max_frequency(self) -> float:
        """Magnitude of the largest resolved frequency per axis."""
        return np.pi * self.n_per_dim / self.box_length


PHYSICAL = "physical"
FREQUENCY = "frequency"


class Field:
    """Array of values over a Grid, tagged physical- or frequency-space.

    Values are frozen after construction; all operations return new Fields.
    """

    __slots__ = ("grid", "values", "space")

    def __init__(self, grid, values, space=PHYSICAL, _skip_copy=False):
        if space not in (PHYSICAL, FREQUENCY):
            raise ConstraintViolationError(f"unknown space tag {space!r}")
        values = np.asarray(values) if _skip_copy else np.array(values)
        if values.shape != grid.shape:
            raise ConstraintViolationError(
                f"values shape {values.shape} != grid shape {grid.shape}"
            )
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.space = space

    def __repr__(self):
        return (f"Field(space={self.space!r}, shape={self.values.shape}, "
                f"dtype={self.values.dtype})")

    @classmethod
    def physical(cls, grid, values):
        return cls(grid, values, PHYSICAL)

    @classmethod
    def frequency(cls, grid, values):
        return cls(grid, values, FREQUENCY)

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.shape, float(value)), PHYSICAL,
                   _skip_copy=True)

    @classmethod
    def from_function(cls, grid, fn):
        """Sample a vectorized function of the coordinate mesh."""
        vals = np.broadcast_to(fn(*grid.coordinate_mesh()), grid.shape)
        return cls(grid, np.array(vals, dtype=float), PHYSICAL,
                   _skip_copy=True)

    @classmethod
    def spike(cls, grid):
        """Discrete delta: cell mass 1 at the box center."""
        vals = np.zeros(grid.shape)
        vals[(grid.n_per_dim // 2,) * grid.d] = 1.0 / grid.cell_volume
        return cls(grid, vals, PHYSICAL, _skip_copy=True)

    def mass(self) -> float:
        """Integral of the field over the box (sum times cell volume)."""
        return float(np.real(self.values.sum()) * self.grid.cell_volume)

    def require_space(self, space):
        if self.space != space:
            raise ConstraintViolationError(
                f"expected a {space} field, got {self.space}"
            )
        return self


def to_frequency(field: Field) -> Field:
    """Forward transform; output samples F(f) on the frequency lattice."""
    field.require_space(PHYSICAL)
    g = field.grid
    vals = np.fft.ifftn(np.fft.ifftshift(field.values)) * g.box_length**g.d
    return Field(g, vals, FREQUENCY, _skip_copy=True)


def to_physical(field: Field) -> Field:
    """Inverse transform; output samples the band-limited f on the grid."""
    field.require_space(FREQUENCY)
    g = field.grid
    vals = np.fft.fftshift(np.fft.fftn(field.values)) / g.box_length**g.d
    return Field(g, vals, PHYSICAL, _skip_copy=True)


_MAGIC = b"FSPD"


def write_array_binary(path, values):
    """Dump a real array: magic, uint64 ndim, uint64 dims, little-endian f64
    entries in row-major order."""
    vals = np.ascontiguousarray(np.real(values), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", vals.ndim))
        fh.write(struct.pack(f"<{vals.ndim}Q", *vals.shape))
        fh.write(vals.tobytes())


def read_array_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ConstraintViolationError(f"{path}: not an array dump")
        (ndim,) = struct.unpack("<Q", fh.read(8))
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(shape)
    return np.array(data)


def write_field_binary(path, field: Field):
    write_array_binary(path, field.values)


def read_field_binary(path, grid: Grid) -> Field:
    data = read_array_binary(path)
    if data.shape != grid.shape:
        raise ConstraintViolationError(
            f"{path}: dump shape {data.shape} != grid shape {grid.shape}"
        )
    return Field(grid, data, PHYSICAL, _skip_copy=True)
