import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import ceil
from typing import Callable, NamedTuple

import numpy as np
from scipy import fft, optimize

from fracns.config import Config
from fracns.enum import SolveStatus
from fracns.errors import (
    DegenerateInputError,
    FracnsError,
    InfeasibleError,
    NumericalFailureError,
    ParameterError,
    ResolutionError,
    UsageError,
)
from fracns.modules.energy import (
    EnergyContext,
    energy,
    energy_from_values,
    gradient_from_values,
    pohozaev_relative,
    pohozaev_virial_form,
)
from fracns.modules.spectral import (
    Field,
    apply_multiplier,
    boundary_mass_fraction,
    dilate,
    mass,
    translate,
)

logger = logging.getLogger(__name__)

# relative L² threshold (times sqrt(a)) below which two minimizers coincide
DEDUP_TOL = 1e-3
BOUNDARY_WARNING = 1e-8
# relative slack of the Armijo test, the energy may rise by at most this times 1 + |E|
ENERGY_ROUNDOFF = 8 * np.finfo(float).eps
MIN_STEP = 1e-14


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    grad_tol: float = 1e-8
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    rng_seed: int = 0
    tau_seed_step: float = 0.25
    preconditioner_shift: float | None = 1.0
    max_step: float = 1.0
    record_trace: bool = False
    seed_width: float = 2.0
    restarts: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.grad_tol > 0:
            raise ParameterError(f"grad_tol must be positive, got {self.grad_tol}")
        if not 0 < self.backtrack_factor < 1:
            raise ParameterError(
                f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}"
            )
        if not 0 < self.armijo_c < 1:
            raise ParameterError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0 < self.initial_step <= self.max_step:
            raise ParameterError("Steps must satisfy 0 < initial_step <= max_step")
        if not self.tau_seed_step > 0:
            raise ParameterError("tau_seed_step must be positive")
        if self.preconditioner_shift is not None and not self.preconditioner_shift > 0:
            raise ParameterError("preconditioner_shift must be positive or None")
        if not self.seed_width > 0:
            raise ParameterError("seed_width must be positive")
        if self.restarts < 1:
            raise ParameterError("restarts must be >= 1")

    def replace(self, **changes) -> "SolverOptions":
        return replace(self, **changes)

    @property
    def dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


class TracePoint(NamedTuple):
    iteration: int
    energy: float
    grad_norm: float
    step: float


@dataclass
class SolveResult:
    u: Field | None
    energy: float
    lam: float
    mass: float
    iterations: int
    converged: bool
    grad_norm: float
    status: SolveStatus
    pohozaev_rel: float | None = None
    pohozaev_virial: float | None = None
    barycenter: tuple[float, ...] | None = None
    error: str | None = None
    trace: list[TracePoint] = field(default_factory=list)
    seed_index: int | None = None
    boundary_mass: float | None = None
    positivity: float | None = None
    asymmetry: float | None = None

    @staticmethod
    def failed(error: str, seed_index: int | None = None) -> "SolveResult":
        return SolveResult(
            u=None,
            energy=float("nan"),
            lam=float("nan"),
            mass=float("nan"),
            iterations=0,
            converged=False,
            grad_norm=float("nan"),
            status=SolveStatus.FAILED,
            error=error,
            seed_index=seed_index,
        )

    @property
    def ok(self) -> bool:
        return self.status != SolveStatus.FAILED

    @property
    def dict(self):
        return {
            "energy": self.energy,
            "lambda": self.lam,
            "mass": self.mass,
            "pohozaev_rel": self.pohozaev_rel,
            "pohozaev_virial": self.pohozaev_virial,
            "barycenter": None if self.barycenter is None else list(self.barycenter),
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "status": self.status.value,
            "error": self.error,
            "seed_index": self.seed_index,
            "boundary_mass": self.boundary_mass,
            "positivity": self.positivity,
            "asymmetry": self.asymmetry,
        }


def project_to_sphere(u: Field, a: float) -> Field:
    """u·sqrt(a/|u|²_2), the retraction onto S_a."""
    if not a > 0:
        raise ParameterError(f"Mass must be positive, got {a}")
    m = mass(u)
    if not m > 0:
        raise DegenerateInputError("Cannot project the zero field onto the sphere")
    return u * float(np.sqrt(a / m))


def _project_values(values: np.ndarray, a: float, cell_volume: float) -> np.ndarray:
    return values * np.sqrt(a / (cell_volume * np.sum(values**2)))


def _converged(grad_norm: float, lam: float, a: float, grad_tol: float) -> bool:
    return grad_norm <= grad_tol * min(1.0, (1 + abs(lam)) * np.sqrt(a))


def _positivity(values: np.ndarray) -> float:
    peak = np.max(values)
    return float(np.min(values) / peak) if peak > 0 else float("nan")


def _asymmetry(values: np.ndarray) -> float:
    """Relative L² defect of u against its point reflection about the peak node."""
    peak = np.unravel_index(np.argmax(values), values.shape)
    shifts = tuple(2 * p + 1 - n for p, n in zip(peak, values.shape))
    axes = tuple(range(values.ndim))
    reflected = np.roll(np.flip(values), shifts, axis=axes)
    norm = np.linalg.norm(values)
    return float(np.linalg.norm(values - reflected) / norm) if norm > 0 else 0.0


def minimize_on_sphere(
    ctx: EnergyContext, a: float, seed: Field, opts: SolverOptions
) -> SolveResult:
    """
    Preconditioned projected gradient descent of the energy on S_a.

    Each iteration takes d = Pg - (<Pg,u>/<Pu,u>)Pu with P = ((-Δ)^s + σ)^{-1}
    (P = identity when σ is None), so d is tangent at u; the trial point
    project_to_sphere(u - t·d, a) is accepted by an Armijo test on the energy.
    """
    ctx.check_field(seed)
    if not a > 0:
        raise ParameterError(f"Mass must be positive, got {a}")

    grid = ctx.grid
    dv = grid.cell_volume
    u = project_to_sphere(seed, a).values.copy()

    if opts.preconditioner_shift is None:
        precondition = None
    else:
        precondition = 1.0 / (grid.symbol(ctx.s) + opts.preconditioner_shift)

    step = opts.initial_step
    trace = []
    status = SolveStatus.MAX_ITERS

    e = energy_from_values(ctx, u)
    if not np.isfinite(e):
        raise NumericalFailureError("Non-finite energy at the seed", Field(grid, u), 0)

    steps = 0
    for iteration in range(1, opts.max_iters + 1):
        g = gradient_from_values(ctx, u)
        lam = dv * np.sum(g * u) / a
        grad_norm = float(np.sqrt(dv * np.sum((g - lam * u) ** 2)))

        if opts.record_trace:
            trace.append(TracePoint(iteration - 1, float(e), grad_norm, float(step)))
        if _converged(grad_norm, lam, a, opts.grad_tol):
            status = SolveStatus.CONVERGED
            break

        if precondition is None:
            pg, pu = g, u
        else:
            pg = apply_multiplier(g, precondition)
            pu = apply_multiplier(u, precondition)
        d = pg - (np.sum(pg * u) / np.sum(pu * u)) * pu
        slope = dv * np.sum(g * d)

        while True:
            trial = _project_values(u - step * d, a, dv)
            e_trial = energy_from_values(ctx, trial)
            if not np.isfinite(e_trial):
                raise NumericalFailureError(
                    f"Non-finite energy at iteration {iteration}",
                    last_iterate=Field(grid, u),
                    iteration=iteration,
                )
            allowance = ENERGY_ROUNDOFF * (1 + abs(e))
            if e_trial <= e - opts.armijo_c * step * slope + allowance:
                break
            step *= opts.backtrack_factor
            if step < MIN_STEP:
                break

        if step < MIN_STEP:
            status = SolveStatus.STALLED
            logger.debug(f"Line search stalled at iteration {iteration}")
            break

        u, e = trial, e_trial
        steps = iteration
        logger.debug(
            f"iter {iteration}: E = {e:.15g}, |grad| = {grad_norm:.3e}, step = {step:.3g}"
        )
        step = min(step / opts.backtrack_factor, opts.max_step)

    # J is even; report the representative with nonnegative integral
    if np.sum(u) < 0:
        u = -u

    result_field = Field(grid, u)
    g = gradient_from_values(ctx, u)
    lam = float(dv * np.sum(g * u) / a)
    grad_norm = float(np.sqrt(dv * np.sum((g - lam * u) ** 2)))
    converged = status == SolveStatus.CONVERGED

    result = SolveResult(
        u=result_field,
        energy=energy(ctx, result_field),
        lam=lam,
        mass=mass(result_field),
        iterations=steps,
        converged=converged,
        grad_norm=grad_norm,
        status=status,
        trace=trace,
        boundary_mass=boundary_mass_fraction(result_field),
        positivity=_positivity(u),
        asymmetry=_asymmetry(u),
    )
    if ctx.translation_invariant:
        result.pohozaev_virial = pohozaev_virial_form(ctx, result_field, lam)
        try:
            result.pohozaev_rel = pohozaev_relative(ctx, result_field)
        except DegenerateInputError:
            logger.debug("Zero kinetic energy, no Pohozaev residual")

    if result.boundary_mass > BOUNDARY_WARNING:
        logger.warning(
            f"{result.boundary_mass:.2e} of the mass sits in the boundary band, "
            "the box may be too small"
        )
    if not converged:
        logger.warning(
            f"Solve ended with status {status.value} after {steps} iterations, "
            f"|grad| = {grad_norm:.3e}"
        )
    else:
        logger.debug(f"Converged in {steps} iterations, E = {result.energy:.12g}")
    return result


def gaussian_seed(ctx: EnergyContext, a: float, width: float, center=None) -> Field:
    grid = ctx.grid
    center = np.zeros(grid.dim) if center is None else np.broadcast_to(center, (grid.dim,))
    bump = grid.sample(
        lambda *x: np.exp(-sum((xi - c) ** 2 for xi, c in zip(x, center)) / (2 * width**2))
    )
    return project_to_sphere(bump, a)


def seed_negative_energy(ctx: EnergyContext, a: float, opts: SolverOptions) -> Field:
    """
    A point of S_a below the level βa/2 of the constant potential, found by
    spreading a normalized Gaussian along the mass preserving fiber τ∗u, τ < 0.
    """
    ctx.require_translation_invariant("seed_negative_energy")
    if not ctx.nonlinearity.active:
        raise InfeasibleError(
            "The nonlinearity vanishes, the energy never dips below the linear level"
        )

    target = ctx.shift * a / 2
    bump = gaussian_seed(ctx, a, opts.seed_width)
    if energy(ctx, bump) < target:
        return bump

    steps = ceil(Config.TAU_MAX / opts.tau_seed_step)
    for i in range(1, steps + 1):
        tau = -min(i * opts.tau_seed_step, Config.TAU_MAX)
        spread, _ = dilate(bump, tau)
        spread = project_to_sphere(spread, a)
        value = energy(ctx, spread)
        logger.debug(f"Seed search tau = {tau:.3f}: E = {value:.6g}, target {target:.6g}")
        if value < target:
            return spread

    raise ResolutionError(
        f"No dilation with |tau| <= {Config.TAU_MAX} brought the energy below {target}"
    )


def random_seeds(
    ctx: EnergyContext, a: float, opts: SolverOptions, count: int
) -> list[Field]:
    """Gaussians of random width around the configured one, reproducible by rng_seed."""
    rng = np.random.default_rng(opts.rng_seed)
    widths = opts.seed_width * np.exp(rng.uniform(-np.log(2), np.log(2), count))
    return [gaussian_seed(ctx, a, float(w)) for w in widths]


def aligned_distance(u: Field, v: Field) -> float:
    """min over periodic shifts d of |u - v(· - d)|_2."""
    grid = u.grid
    dv = grid.cell_volume
    cu = fft.fftn(u.values, workers=Config.FFT_WORKERS)
    cv = fft.fftn(v.values, workers=Config.FFT_WORKERS)
    correlation = fft.ifftn(cu * np.conj(cv), workers=Config.FFT_WORKERS).real
    index = np.unravel_index(np.argmax(correlation), correlation.shape)
    spacing = np.array(grid.spacing)
    best = np.array(
        [i if i <= n // 2 else i - n for i, n in zip(index, grid.points)]
    ) * spacing

    def overlap(shift):
        return -dv * np.sum(u.values * translate(v, shift).values)

    refined = optimize.minimize(
        overlap,
        best,
        method="Powell",
        bounds=list(zip(best - spacing, best + spacing)),
        options={"xtol": 1e-10, "ftol": 1e-15},
    )
    overlap_max = max(-refined.fun, -overlap(best))
    return float(np.sqrt(max(0.0, mass(u) + mass(v) - 2 * overlap_max)))


def _default_distinct(ctx: EnergyContext, a: float):
    if ctx.translation_invariant:
        return lambda r1, r2: aligned_distance(r1.u, r2.u) > DEDUP_TOL * np.sqrt(a)
    return lambda r1, r2: np.sqrt(mass(r1.u - r2.u)) > DEDUP_TOL * np.sqrt(a)


def multistart(
    ctx: EnergyContext,
    a: float,
    seeds: list[Field],
    opts: SolverOptions,
    distinct: Callable[[SolveResult, SolveResult], bool] | None = None,
    threads: int | None = None,
) -> list[SolveResult]:
    """
    Minimizes from every seed concurrently, keeps one representative per
    distinct minimizer and returns them by increasing energy. Failed seeds come
    last as FAILED entries.
    """
    if not seeds:
        raise UsageError("multistart needs at least one seed")
    distinct = distinct or _default_distinct(ctx, a)
    threads = threads or Config.THREADS

    def solve(index: int, seed: Field) -> SolveResult:
        try:
            result = minimize_on_sphere(ctx, a, seed, opts)
        except FracnsError as e:
            logger.warning(f"Seed {index} failed: {e}")
            return SolveResult.failed(str(e), index)
        result.seed_index = index
        return result

    with ThreadPoolExecutor(max_workers=min(threads, len(seeds))) as executor:
        results = list(executor.map(solve, range(len(seeds)), seeds))

    solved = sorted(
        (r for r in results if r.ok), key=lambda r: (r.energy, r.seed_index)
    )
    failed = [r for r in results if not r.ok]

    kept = []
    for result in solved:
        if all(distinct(result, other) for other in kept):
            kept.append(result)
        else:
            logger.debug(f"Seed {result.seed_index} duplicates a kept minimizer")
    return kept + failed


def solve_ground_state(
    ctx: EnergyContext,
    a: float,
    opts: SolverOptions,
    seeds: list[Field] | None = None,
    threads: int | None = None,
) -> SolveResult:
    """
    Lowest minimizer from the fiber seed plus opts.restarts - 1 random seeds
    (translation invariant contexts) or from the given seeds.
    """
    if seeds is None:
        seeds = [seed_negative_energy(ctx, a, opts)]
        if opts.restarts > 1:
            seeds += random_seeds(ctx, a, opts, opts.restarts - 1)
    results = multistart(ctx, a, seeds, opts, threads=threads)
    return results[0]
