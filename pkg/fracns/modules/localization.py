import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from fracns.errors import (
    ConfigError,
    DegenerateInputError,
    NumericalFailureError,
    ParameterError,
)
from fracns.modules.energy import EnergyContext, energy
from fracns.modules.landscape import frozen_levels
from fracns.modules.model import Nonlinearity, PotentialSpec
from fracns.modules.optimizer import SolveResult, SolverOptions, multistart
from fracns.modules.spectral import Field, Grid, check_same_grid, mass, translate

logger = logging.getLogger(__name__)

DEFAULT_RHO_BAR = 1.0
LAMBDA_BOUND_TOL = 1e-6


@dataclass(frozen=True)
class TruncationMap:
    """χ(x) = x inside the ball of radius r̄, r̄·x/|x| outside."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"Truncation radius must be positive, got {self.radius}")

    def __call__(self, *x):
        r = np.sqrt(sum(xi**2 for xi in x))
        factor = np.where(r <= self.radius, 1.0, self.radius / np.maximum(r, 1e-300))
        return [xi * factor for xi in x]


@dataclass(frozen=True)
class RegionGeometry:
    centers: tuple
    rho_bar: float
    r_bar: float

    def __post_init__(self):
        centers = tuple(tuple(float(x) for x in np.atleast_1d(c)) for c in self.centers)
        object.__setattr__(self, "centers", centers)
        if not (self.rho_bar > 0 and self.r_bar > 0):
            raise ParameterError("rho_bar and r_bar must be positive")
        for a, b in combinations(centers, 2):
            if np.linalg.norm(np.subtract(a, b)) <= 2 * self.rho_bar:
                raise ParameterError(f"Balls around {a} and {b} overlap")
        for c in centers:
            if np.linalg.norm(c) + self.rho_bar > self.r_bar:
                raise ParameterError(f"Ball around {c} leaves B_r̄(0)")

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def chi(self) -> TruncationMap:
        return TruncationMap(self.r_bar)

    def distances(self, point) -> np.ndarray:
        return np.linalg.norm(np.subtract(self.centers, point), axis=1)

    @property
    def dict(self):
        return {
            "centers": [list(c) for c in self.centers],
            "rho_bar": self.rho_bar,
            "r_bar": self.r_bar,
        }


def barycenter(u: Field, eps: float, chi: TruncationMap) -> tuple[float, ...]:
    """G_ε(u) = ∫χ(εx)|u|² / ∫|u|² with the nodal quadrature of mass()."""
    weight = u.values**2
    total = np.sum(weight)
    if not total > 0:
        raise DegenerateInputError("Barycenter of the zero field")
    clamped = chi(*(eps * x for x in u.grid.coordinates))
    return tuple(float(np.sum(c * weight) / total) for c in clamped)


def choose_geometry(centers, default_rho: float = DEFAULT_RHO_BAR) -> RegionGeometry:
    """ρ̄ = min pairwise distance / 3 (default_rho for one center), r̄ = max|a_i| + 2ρ̄."""
    points = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers]
    if not points:
        raise ParameterError("At least one center is required")
    if len(points) == 1:
        rho = default_rho
    else:
        gaps = [np.linalg.norm(a - b) for a, b in combinations(points, 2)]
        if min(gaps) == 0:
            raise ParameterError("Centers must be distinct")
        rho = min(gaps) / 3
    r_bar = max(np.linalg.norm(p) for p in points) + 2 * rho
    return RegionGeometry(tuple(points), float(rho), float(r_bar))


def _nearest_within(u: Field, eps: float, geom: RegionGeometry, radius: float):
    distances = geom.distances(barycenter(u, eps, geom.chi))
    inside = np.flatnonzero(distances <= radius)
    return int(inside[0]) if inside.size else None


def region_membership(u: Field, eps: float, geom: RegionGeometry) -> int | None:
    """Index i with |G_ε(u) - a_i| <= ρ̄; unique since the balls are disjoint."""
    return _nearest_within(u, eps, geom, geom.rho_bar)


def core_membership(u: Field, eps: float, geom: RegionGeometry) -> int | None:
    """Index i with G_ε(u) in the core ball of radius ρ̄/2 around a_i."""
    return _nearest_within(u, eps, geom, geom.rho_bar / 2)


def distinctness(
    r1: SolveResult, r2: SolveResult, geom: RegionGeometry, eps: float, tol: float = 1e-3
) -> bool:
    """
    Different occupied regions make two solutions distinct; otherwise they are
    distinct when |u1 - u2|_2 > tol·sqrt(a).
    """
    check_same_grid(r1.u, r2.u)
    i1 = region_membership(r1.u, eps, geom)
    i2 = region_membership(r2.u, eps, geom)
    if i1 is not None and i2 is not None and i1 != i2:
        return True
    return bool(np.sqrt(mass(r1.u - r2.u)) > tol * np.sqrt(mass(r1.u)))


def field_width(u: Field) -> float:
    """RMS radius of |u|² about the peak node, on the periodic box."""
    grid = u.grid
    peak = np.unravel_index(np.argmax(np.abs(u.values)), grid.shape)
    r2 = 0.0
    for axis, (x, L) in enumerate(zip(grid.coordinates, grid.box_length)):
        d = x - grid.axes[axis][peak[axis]]
        d = (d + L / 2) % L - L / 2
        r2 = r2 + d**2
    weight = u.values**2
    return float(np.sqrt(np.sum(r2 * weight) / np.sum(weight)))


def required_box_length(centers, eps: float, width: float, margin: float = 5) -> float:
    """
    Smallest power of two holding every a_i/ε with margin·width to spare on
    both sides.
    """
    if not (eps > 0 and width > 0):
        raise ParameterError("eps and width must be positive")
    reach = max(np.max(np.abs(np.atleast_1d(c))) for c in centers) / eps
    needed = 2 * (reach + margin * width)
    return float(2 ** int(np.ceil(np.log2(needed))))


@dataclass
class RegionEntry:
    index: int
    center: tuple[float, ...]
    seed_offset: tuple[float, ...]
    seed_core: bool
    result: SolveResult
    region: int | None = None
    core: bool = False
    distinct: bool = False
    level: float | None = None
    boundary_probe: float | None = None

    @property
    def dict(self):
        r = self.result
        return {
            "center": list(self.center),
            "seed_offset": list(self.seed_offset),
            "seed_in_core": self.seed_core,
            "converged": r.converged,
            "energy": r.energy,
            "lambda": r.lam,
            "mass": r.mass,
            "barycenter": None if r.barycenter is None else list(r.barycenter),
            "region": self.region,
            "core": self.core,
            "distinct": self.distinct,
            "status": r.status.value,
            "error": r.error,
            "thresholds": {
                "level": self.level,
                "below_level": bool(r.energy < self.level) if r.ok else False,
                "boundary_probe": self.boundary_probe,
                "below_boundary_probe": bool(r.energy < self.boundary_probe)
                if r.ok
                else False,
            },
        }


@dataclass
class MultiplicityReport:
    geometry: RegionGeometry
    a: float
    eps: float
    E_inf_a: float
    E_ai_a: list[float]
    rho0: float
    entries: list[RegionEntry] = field(default_factory=list)
    failed_criteria: list[str] = field(default_factory=list)

    @property
    def lambda_bound(self) -> float:
        return 2 * self.E_inf_a / self.a

    @property
    def k_found(self) -> int:
        regions = {e.region for e in self.entries if e.distinct and e.region is not None}
        return len(regions)

    @property
    def success(self) -> bool:
        return not self.failed_criteria and self.k_found == self.geometry.k

    @property
    def summary(self):
        return {
            "k_requested": self.geometry.k,
            "k_found": self.k_found,
            "success": self.success,
            "failed_criteria": self.failed_criteria,
        }

    @property
    def dict(self):
        return {
            "a": self.a,
            "eps": self.eps,
            "geometry": self.geometry.dict,
            "levels": {
                "E_inf_a": self.E_inf_a,
                "E_ai_a": self.E_ai_a,
                "rho0": self.rho0,
                "lambda_bound": self.lambda_bound,
            },
            "regions": [e.dict for e in self.entries],
            "summary": self.summary,
        }


def _boundary_probe(ctx: EnergyContext, u0: Field, center, rho_bar: float, eps: float):
    # u0 moved onto ∂θ^i along each axis; its energy bounds the boundary level
    values = []
    for axis in range(ctx.grid.dim):
        for sign in (1, -1):
            point = np.array(center, dtype=float)
            point[axis] += sign * rho_bar
            values.append(energy(ctx, translate(u0, point / eps)))
    return min(values)


def multiplicity_experiment(
    spec: PotentialSpec,
    nl: Nonlinearity,
    s: float,
    grid: Grid,
    a: float,
    eps: float,
    opts: SolverOptions,
    rho0: float | None = None,
    rho0_fraction: float = 0.5,
    threads: int | None = None,
) -> MultiplicityReport:
    """
    One I_ε minimization per maximum point a_i of h, seeded with the frozen
    minimizer of I_{a_1} moved to a_i/ε, then classified by region.
    """
    geom = choose_geometry(spec.centers)
    for i, c in enumerate(geom.centers):
        if np.any(np.abs(np.array(c) / eps) >= np.array(grid.box_length) / 2):
            raise ConfigError(
                f"Center a_{i} / eps = {np.array(c) / eps} lies outside the box "
                f"{list(grid.box_length)}",
                path=f"potential.centers[{i}]",
            )

    infinity, frozen = frozen_levels(spec, nl, s, grid, a, opts, threads)
    if frozen[0].u is None:
        raise NumericalFailureError(f"Frozen problem at a_0 failed: {frozen[0].error}")
    if not infinity.ok:
        raise NumericalFailureError(f"Problem at infinity failed: {infinity.error}")
    u0 = frozen[0].u
    E_ai = [r.energy for r in frozen]
    if rho0 is None:
        rho0 = rho0_fraction * (infinity.energy - max(E_ai))

    ctx = EnergyContext.nonautonomous(grid, s, nl, spec, eps)
    offsets = [np.array(c) / eps for c in geom.centers]
    seeds = [translate(u0, offset) for offset in offsets]

    solved = multistart(ctx, a, seeds, opts, distinct=lambda r1, r2: True, threads=threads)
    by_seed = {r.seed_index: r for r in solved}

    report = MultiplicityReport(
        geometry=geom, a=a, eps=eps, E_inf_a=infinity.energy, E_ai_a=E_ai, rho0=rho0
    )
    for i, (center, offset, seed) in enumerate(zip(geom.centers, offsets, seeds)):
        result = by_seed[i]
        entry = RegionEntry(
            index=i,
            center=center,
            seed_offset=tuple(float(x) for x in offset),
            seed_core=core_membership(seed, eps, geom) == i,
            result=result,
            level=E_ai[i] + rho0,
            boundary_probe=_boundary_probe(ctx, u0, center, geom.rho_bar, eps),
        )
        if result.u is not None:
            result.barycenter = barycenter(result.u, eps, geom.chi)
            entry.region = region_membership(result.u, eps, geom)
            entry.core = core_membership(result.u, eps, geom) is not None
        report.entries.append(entry)

    solutions = [e for e in report.entries if e.result.converged]
    for entry in solutions:
        entry.distinct = all(
            distinctness(entry.result, other.result, geom, eps)
            for other in solutions
            if other is not entry
        )

    failed = report.failed_criteria
    for e in report.entries:
        r = e.result
        tag = f"region[{e.index}]"
        if not r.converged:
            failed.append(f"{tag}.converged")
            continue
        if not r.energy < 0:
            failed.append(f"{tag}.energy_negative")
        if not r.lam < 0:
            failed.append(f"{tag}.lambda_negative")
        if not r.lam <= report.lambda_bound + LAMBDA_BOUND_TOL:
            failed.append(f"{tag}.lambda_bound")
        if e.region != e.index:
            failed.append(f"{tag}.region")
        if not e.distinct:
            failed.append(f"{tag}.distinct")
        if not r.energy < e.level:
            failed.append(f"{tag}.below_level")

    logger.info(
        f"Multiplicity at eps = {eps:g}: {report.k_found} of {geom.k} regions occupied"
        + (f", failed {failed}" if failed else "")
    )
    return report
