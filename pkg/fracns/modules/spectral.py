import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft

from fracns.config import Config
from fracns.errors import (
    DilationRangeError,
    GridMismatchError,
    NumericalFailureError,
    ParameterError,
)
from fracns.utils import is_power_of_two

logger = logging.getLogger(__name__)

# rows of the interpolation matrix evaluated at once by stretch()
INTERPOLATION_CHUNK = 512


@dataclass(frozen=True)
class Grid:
    """
    Periodic box [-L/2, L/2)^N sampled with n points per axis.

    Nodes are x_j = -L/2 + j*L/n, so the origin is the node j = n/2.
    """

    dim: int
    box_length: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError(f"Grid dimension must be positive, got {self.dim}")

        box_length = _per_axis(self.box_length, self.dim, float, "box_length")
        points = _per_axis(self.points, self.dim, int, "points")
        object.__setattr__(self, "box_length", box_length)
        object.__setattr__(self, "points", points)

        for length in box_length:
            if not length > 0:
                raise ParameterError(f"Box length must be positive, got {length}")
        for n in points:
            if n < 8 or not is_power_of_two(n):
                raise ParameterError(
                    f"Points per axis must be a power of two >= 8, got {n}"
                )
        if self.dim > 2:
            logger.debug(f"Grid of dimension {self.dim} is outside the tested range")

    @staticmethod
    def uniform(dim: int, box_length: float, points: int) -> "Grid":
        return Grid(dim=dim, box_length=(box_length,) * dim, points=(points,) * dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.box_length, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.box_length))

    @cached_property
    def axes(self) -> list[np.ndarray]:
        return [
            -L / 2 + h * np.arange(n)
            for L, h, n in zip(self.box_length, self.spacing, self.points)
        ]

    @cached_property
    def coordinates(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes, indexing="ij")

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(x**2 for x in self.coordinates))

    @cached_property
    def wavenumbers(self) -> list[np.ndarray]:
        # fftfreq places the Nyquist mode at -n/2
        return [
            2 * np.pi * np.fft.fftfreq(n, d=h)
            for n, h in zip(self.points, self.spacing)
        ]

    @cached_property
    def k_squared(self) -> np.ndarray:
        mesh = np.meshgrid(*self.wavenumbers, indexing="ij")
        return sum(k**2 for k in mesh)

    def symbol(self, s: float) -> np.ndarray:
        """|k|^{2s} on the transform grid."""
        return self.k_squared**s

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def sample(self, function) -> "Field":
        """Evaluates function(*coordinates) at the nodes."""
        return Field(self, function(*self.coordinates))

    @property
    def dict(self):
        return {
            "dim": self.dim,
            "box_length": list(self.box_length),
            "points": list(self.points),
        }


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.size != self.grid.size:
            raise GridMismatchError(
                f"Field has {values.size} values but grid has {self.grid.size} cells"
            )
        values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise ParameterError("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def __add__(self, other: "Field") -> "Field":
        check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self.with_values(-self.values)


@dataclass(frozen=True, eq=False)
class SpectralCoeffs:
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def conjugate_symmetric(self, rtol: float = 1e-12) -> bool:
        c = self.coeffs
        axes = tuple(range(c.ndim))
        mirrored = np.conj(np.roll(np.flip(c, axis=axes), 1, axis=axes))
        scale = max(float(np.max(np.abs(c))), np.finfo(float).tiny)
        return float(np.max(np.abs(c - mirrored))) <= rtol * scale


def check_same_grid(*fields: Field):
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid != grid:
            raise GridMismatchError(f"Grid mismatch: {grid} vs {other.grid}")


def check_order(s: float):
    if not 0 < s <= 1:
        raise ParameterError(f"Fractional order s must lie in (0, 1], got {s}")


def to_spectral(u: Field) -> SpectralCoeffs:
    return SpectralCoeffs(u.grid, fft.fftn(u.values, workers=Config.FFT_WORKERS))


def from_spectral(c: SpectralCoeffs) -> Field:
    return Field(c.grid, fft.ifftn(c.coeffs, workers=Config.FFT_WORKERS).real)


def apply_multiplier(values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    coeffs = fft.fftn(values, workers=Config.FFT_WORKERS)
    return fft.ifftn(multiplier * coeffs, workers=Config.FFT_WORKERS).real


def frac_laplacian(u: Field, s: float) -> Field:
    """(-Δ)^s u as the Fourier multiplier |k|^{2s}."""
    check_order(s)
    coeffs = to_spectral(u)
    return from_spectral(SpectralCoeffs(u.grid, u.grid.symbol(s) * coeffs.coeffs))


def hs_seminorm_sq(u: Field, s: float) -> float:
    """∫|(-Δ)^{s/2}u|² by Parseval."""
    check_order(s)
    return kinetic_from_values(u.values, u.grid, s)


def kinetic_from_values(values: np.ndarray, grid: Grid, s: float) -> float:
    coeffs = fft.fftn(values, workers=Config.FFT_WORKERS)
    weight = grid.cell_volume / grid.size
    return float(weight * np.sum(grid.symbol(s) * np.abs(coeffs) ** 2))


def mass(u: Field) -> float:
    return float(u.grid.cell_volume * np.sum(u.values**2))


def inner(u: Field, v: Field) -> float:
    check_same_grid(u, v)
    return float(u.grid.cell_volume * np.sum(u.values * v.values))


def translate(u: Field, shift) -> Field:
    """
    u(x - shift) by a spectral phase shift. The Nyquist coefficient gets the
    nearest real unit phase so the map stays unitary on real fields.
    """
    grid = u.grid
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (grid.dim,))
    if not np.any(shift):
        return u.with_values(u.values)

    coeffs = fft.fftn(u.values, workers=Config.FFT_WORKERS)
    for axis, (k, d, n) in enumerate(zip(grid.wavenumbers, shift, grid.points)):
        phase = np.exp(-1j * k * d)
        phase[n // 2] = 1.0 if np.cos(k[n // 2] * d) >= 0 else -1.0
        shape = [1] * grid.dim
        shape[axis] = n
        coeffs = coeffs * phase.reshape(shape)
    return u.with_values(fft.ifftn(coeffs, workers=Config.FFT_WORKERS).real)


def _interpolate_axis(
    values: np.ndarray, grid: Grid, axis: int, points: np.ndarray
) -> np.ndarray:
    n = grid.points[axis]
    x0 = grid.axes[axis][0]
    k = grid.wavenumbers[axis]

    moved = np.moveaxis(values, axis, -1)
    coeffs = fft.fft(moved, axis=-1, workers=Config.FFT_WORKERS)
    out = np.empty(moved.shape[:-1] + (len(points),))
    for start in range(0, len(points), INTERPOLATION_CHUNK):
        rows = points[start : start + INTERPOLATION_CHUNK]
        basis = np.exp(1j * np.outer(rows - x0, k))
        out[..., start : start + len(rows)] = (coeffs @ basis.T).real / n
    return np.moveaxis(out, -1, axis)


def stretch(u: Field, t: float, tau_max: float | None = None) -> tuple[Field, float]:
    """
    u_t(x) = u(x / t) through the trigonometric interpolant of u.

    Returns the stretched field and the relative discrete mass defect against
    the continuous identity mass(u_t) = t^N mass(u).
    """
    tau_max = Config.TAU_MAX if tau_max is None else tau_max
    if not t > 0:
        raise ParameterError(f"Stretch factor must be positive, got {t}")
    if abs(np.log(t)) > tau_max:
        raise DilationRangeError(
            f"Stretch factor {t} exceeds the resolvable range e^±{tau_max}"
        )

    grid = u.grid
    if t == 1:
        return u.with_values(u.values), 0.0

    values = u.values
    for axis in range(grid.dim):
        preimages = grid.axes[axis] / t
        values = _interpolate_axis(values, grid, axis, preimages)
        # u lives on one period; preimages past the box edge would sample its copies
        half = grid.box_length[axis] / 2
        inside = (preimages >= -half) & (preimages < half)
        shape = [1] * grid.dim
        shape[axis] = grid.points[axis]
        values = np.where(inside.reshape(shape), values, 0.0)
    result = u.with_values(values)

    expected = t**grid.dim * mass(u)
    defect = abs(mass(result) - expected) / expected if expected > 0 else 0.0
    return result, defect


def dilate(u: Field, tau: float, tau_max: float | None = None) -> tuple[Field, float]:
    """(τ∗u)(x) = e^{Nτ/2} u(e^τ x); mass preserving up to the returned defect."""
    tau_max = Config.TAU_MAX if tau_max is None else tau_max
    if abs(tau) > tau_max:
        raise DilationRangeError(f"|tau| = {abs(tau)} exceeds tau_max = {tau_max}")
    if tau == 0:
        return u.with_values(u.values), 0.0

    stretched, defect = stretch(u, float(np.exp(-tau)), tau_max=tau_max)
    return stretched * float(np.exp(u.grid.dim * tau / 2)), defect


def _resample_axis(coeffs: np.ndarray, axis: int, n_new: int) -> np.ndarray:
    c = np.moveaxis(coeffs, axis, -1)
    n_old = c.shape[-1]
    out = np.zeros(c.shape[:-1] + (n_new,), dtype=complex)
    if n_new > n_old:
        half = n_old // 2
        out[..., :half] = c[..., :half]
        out[..., n_new - half :] = c[..., half:]
        out[..., half] = 0.5 * c[..., half]
        out[..., n_new - half] = 0.5 * c[..., half]
    else:
        half = n_new // 2
        out[..., :half] = c[..., :half]
        out[..., half + 1 :] = c[..., n_old - half + 1 :]
        out[..., half] = c[..., half] + c[..., n_old - half]
    return np.moveaxis(out * (n_new / n_old), -1, axis)


def resample(u: Field, grid: Grid) -> Field:
    """Transfers u to a grid over the same box with other point counts."""
    if grid.dim != u.grid.dim or not np.allclose(grid.box_length, u.grid.box_length):
        raise GridMismatchError("Resampling needs the same dimension and box")
    if grid == u.grid:
        return u.with_values(u.values)

    coeffs = to_spectral(u).coeffs
    for axis, (n_old, n_new) in enumerate(zip(u.grid.points, grid.points)):
        if n_old != n_new:
            coeffs = _resample_axis(coeffs, axis, n_new)
    resampled = SpectralCoeffs(grid, coeffs)
    if not resampled.conjugate_symmetric(rtol=1e-10):
        raise NumericalFailureError("Resampled coefficients no longer describe a real field")
    return from_spectral(resampled)


def boundary_mass_fraction(u: Field, width_fraction: float = 1 / 16) -> float:
    grid = u.grid
    band = np.zeros(grid.shape, dtype=bool)
    for x, L in zip(grid.coordinates, grid.box_length):
        band |= np.abs(x) >= L / 2 - width_fraction * L
    total = np.sum(u.values**2)
    if total == 0:
        return 0.0
    return float(np.sum(u.values[band] ** 2) / total)


def _per_axis(value, dim: int, kind, name: str) -> tuple:
    if np.isscalar(value):
        return (kind(value),) * dim
    value = tuple(kind(v) for v in value)
    if len(value) != dim:
        raise ParameterError(f"{name} needs {dim} entries, got {len(value)}")
    return value
