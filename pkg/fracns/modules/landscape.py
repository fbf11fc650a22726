import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from fracns.config import Config
from fracns.errors import FracnsError, ParameterError, UsageError
from fracns.modules.energy import EnergyContext, mass_scaling_energy
from fracns.modules.model import Nonlinearity, PotentialSpec, ValidationReport
from fracns.modules.optimizer import (
    SolveResult,
    SolverOptions,
    multistart,
    project_to_sphere,
    random_seeds,
    seed_negative_energy,
    solve_ground_state,
)
from fracns.modules.spectral import Grid, resample, translate

logger = logging.getLogger(__name__)

# a strictness margin above this counts as strict subadditivity
STRICT_MARGIN = 1e-6


def _mass_index(masses: list[float], a: float) -> int | None:
    for i, m in enumerate(masses):
        if np.isclose(m, a, rtol=1e-12, atol=0.0):
            return i
    return None


@dataclass
class LandscapeCurve:
    masses: list[float]
    energies: list[float]
    results: list[SolveResult]
    ctx: EnergyContext | None = None
    warm_started: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.masses) == len(self.energies) == len(self.results)):
            raise ParameterError("Curve lists must have equal length")
        if any(b <= a for a, b in zip(self.masses, self.masses[1:])):
            raise ParameterError("Curve masses must be strictly increasing")

    def index(self, a: float) -> int:
        i = _mass_index(self.masses, a)
        if i is None:
            raise UsageError(f"Mass {a} is not a point of the curve {self.masses}")
        return i

    def energy_at(self, a: float) -> float:
        return self.energies[self.index(a)]

    @property
    def rows(self) -> list[dict]:
        return [
            {
                "mass": a,
                "energy": r.energy,
                "lambda": r.lam,
                "pohozaev_rel": r.pohozaev_rel,
                "pohozaev_virial": r.pohozaev_virial,
                "converged": r.converged,
            }
            for a, r in zip(self.masses, self.results)
        ]

    @property
    def dict(self):
        return {
            "masses": self.masses,
            "energies": self.energies,
            "warm_started": self.warm_started,
            "points": [r.dict for r in self.results],
        }


def _solve_or_flag(ctx: EnergyContext, a: float, opts: SolverOptions, **kwargs):
    try:
        return solve_ground_state(ctx, a, opts, **kwargs)
    except FracnsError as e:
        logger.warning(f"Level at mass {a} failed: {e}")
        return SolveResult.failed(str(e))


def energy_curve(
    ctx: EnergyContext,
    masses: list[float],
    opts: SolverOptions,
    warm_start: bool = False,
    threads: int | None = None,
) -> LandscapeCurve:
    """
    a ↦ E_a over the given masses. With warm_start the masses are solved in
    order and the previous minimizer, rescaled to the next mass, joins the seeds.
    """
    ctx.require_translation_invariant("energy_curve")
    masses = [float(a) for a in masses]
    if not masses or any(a <= 0 for a in masses):
        raise ParameterError(f"Masses must be positive, got {masses}")
    if any(b <= a for a, b in zip(masses, masses[1:])):
        raise ParameterError(f"Masses must be strictly increasing, got {masses}")
    threads = threads or Config.THREADS

    results = []
    warm = []
    if warm_start:
        previous = None
        for a in masses:
            try:
                seeds = [seed_negative_energy(ctx, a, opts)]
                if opts.restarts > 1:
                    seeds += random_seeds(ctx, a, opts, opts.restarts - 1)
                if previous is not None and previous.u is not None:
                    seeds.append(project_to_sphere(previous.u, a))
                result = multistart(ctx, a, seeds, opts, threads=threads)[0]
            except FracnsError as e:
                logger.warning(f"Level at mass {a} failed: {e}")
                result = SolveResult.failed(str(e))
            warm.append(previous is not None and previous.ok)
            results.append(result)
            previous = result
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(masses))) as executor:
            results = list(
                executor.map(lambda a: _solve_or_flag(ctx, a, opts, threads=1), masses)
            )
        warm = [False] * len(masses)

    for a, r in zip(masses, results):
        logger.info(f"E_a at a = {a:g}: {r.energy:.10g} ({r.status.value})")
    return LandscapeCurve(
        masses=masses,
        energies=[r.energy for r in results],
        results=results,
        ctx=ctx,
        warm_started=warm,
    )


def check_landscape(
    curve: LandscapeCurve,
    pairs: list[tuple[float, float]],
    thetas: list[float],
    tol: float = 1e-8,
) -> ValidationReport:
    """
    Monotonicity, subadditivity (with its strictness margin), scaling
    E_{θa} <= θE_a and the level bound E_a < βa/2 on a computed curve.

    A scaling pair (θ, a) is checked on the curve when θa is a curve point and
    otherwise through the competitor ũ(x) = u_a(θ^{-1/N}x), whose energy bounds
    E_{θa} from above.
    """
    report = ValidationReport(meta={"tol": tol})
    masses, energies = curve.masses, curve.energies

    for (a1, e1), (a2, e2) in zip(zip(masses, energies), zip(masses[1:], energies[1:])):
        report.add(
            f"monotone({a1:g},{a2:g})",
            e1 >= e2 - tol,
            f"E_{a1:g} - E_{a2:g} = {e1 - e2:.3e}",
            witness=e1 - e2,
        )

    slopes = [
        abs(e2 - e1) / (a2 - a1)
        for a1, a2, e1, e2 in zip(masses, masses[1:], energies, energies[1:])
    ]
    report.meta["C_emp"] = max(slopes) if slopes else None

    for a, b in pairs:
        ea, eb, eab = curve.energy_at(a), curve.energy_at(b), curve.energy_at(a + b)
        margin = ea + eb - eab
        report.add(
            f"subadditive({a:g},{b:g})",
            eab <= ea + eb + tol,
            f"E_a + E_b - E_(a+b) = {margin:.3e}",
            witness=margin,
        )
        report.add(
            f"strict({a:g},{b:g})",
            margin > STRICT_MARGIN,
            f"strictness margin {margin:.3e}",
            witness=margin,
        )

    for theta in thetas:
        if theta < 1:
            raise ParameterError(f"Scaling factors must be >= 1, got {theta}")
        for a, e in zip(masses, energies):
            name = f"scaling({theta:g},{a:g})"
            j = _mass_index(masses, theta * a)
            if j is not None:
                report.add(
                    name,
                    energies[j] <= theta * e + tol,
                    f"θE_a - E_θa = {theta * e - energies[j]:.3e}",
                    witness=theta * e - energies[j],
                )
                continue
            u = curve.results[curve.index(a)].u
            if u is None or curve.ctx is None:
                raise UsageError(
                    f"Scaling check ({theta}, {a}) has neither the mass point "
                    f"{theta * a} nor a stored minimizer"
                )
            scaled = mass_scaling_energy(curve.ctx, u, theta)
            report.add(
                f"scaling_competitor({theta:g},{a:g})",
                scaled.energy <= theta * e + tol,
                f"θE_a - J(ũ) = {theta * e - scaled.energy:.3e}",
                witness=theta * e - scaled.energy,
            )

    if curve.ctx is not None:
        for a, e in zip(masses, energies):
            level = curve.ctx.shift * a / 2
            report.add(
                f"below_linear_level({a:g})",
                e < level,
                f"E_a - βa/2 = {e - level:.3e}",
                witness=e - level,
            )
    return report


class ResolutionCheck(NamedTuple):
    coarse: SolveResult
    fine: SolveResult
    relative_change: float


def resolution_stability(
    ctx: EnergyContext,
    a: float,
    opts: SolverOptions,
    factor: int = 2,
    coarse: SolveResult | None = None,
) -> ResolutionCheck:
    """E_a on ctx.grid and on the grid refined by factor, same box."""
    if factor < 2 or factor & (factor - 1):
        raise ParameterError(f"Refinement factor must be a power of two, got {factor}")
    grid = ctx.grid
    fine_grid = Grid(grid.dim, grid.box_length, tuple(n * factor for n in grid.points))
    fine_ctx = ctx.with_grid(fine_grid)

    coarse = coarse or solve_ground_state(ctx, a, opts)
    fine = multistart(fine_ctx, a, [resample(coarse.u, fine_grid)], opts)[0]
    change = abs(fine.energy - coarse.energy) / abs(coarse.energy)
    logger.info(f"Refining {grid.points} -> {fine_grid.points} changed E_a by {change:.2e}")
    return ResolutionCheck(coarse, fine, change)


@dataclass
class ComparisonLevels:
    E_eps_a: float
    E_ai_a: list[float]
    E_inf_a: float
    a: float
    eps: float
    rho0: float | None = None
    results: dict = field(default_factory=dict)

    @property
    def eps_gap(self) -> float:
        """E_{ε,a} - min_i E_{a_i,a}."""
        return self.E_eps_a - min(self.E_ai_a)

    def report(self, tol: float = 0.0) -> ValidationReport:
        report = ValidationReport(meta={"a": self.a, "eps": self.eps, "rho0": self.rho0})
        for i, e in enumerate(self.E_ai_a):
            report.add(
                f"levels.center_below_infinity[{i}]",
                e < self.E_inf_a - tol,
                f"E_inf - E_a{i} = {self.E_inf_a - e:.3e}",
                witness=self.E_inf_a - e,
            )
        report.add(
            "levels.infinity_negative",
            self.E_inf_a < 0,
            f"E_inf = {self.E_inf_a:.6g}",
            witness=self.E_inf_a,
        )
        report.add(
            "levels.eps_below_infinity",
            self.E_eps_a < self.E_inf_a,
            f"E_inf - E_eps = {self.E_inf_a - self.E_eps_a:.3e}",
            witness=self.E_inf_a - self.E_eps_a,
        )
        report.meta["eps_gap"] = self.eps_gap
        return report

    @property
    def dict(self):
        return {
            "E_eps_a": self.E_eps_a,
            "E_ai_a": self.E_ai_a,
            "E_inf_a": self.E_inf_a,
            "a": self.a,
            "eps": self.eps,
            "rho0": self.rho0,
            "eps_gap": self.eps_gap,
            "levels": {name: r.dict for name, r in self.results.items()},
        }


def frozen_levels(
    spec: PotentialSpec,
    nl: Nonlinearity,
    s: float,
    grid: Grid,
    a: float,
    opts: SolverOptions,
    threads: int | None = None,
) -> tuple[SolveResult, list[SolveResult]]:
    """
    Minimizers of I_∞ and of every I_{a_i}. Centers with the same frozen
    coefficients share one solve.
    """
    keys = [(spec.h_infinity, 0.0)]
    keys += [(spec.h_at(c), spec.v_at(c)) for c in spec.centers]
    unique = list(dict.fromkeys(keys))
    threads = threads or Config.THREADS

    def solve(key):
        alpha_h, beta_v = key
        ctx = EnergyContext.frozen(grid, s, nl, alpha_h, beta_v)
        return _solve_or_flag(ctx, a, opts, threads=1)

    with ThreadPoolExecutor(max_workers=min(threads, len(unique))) as executor:
        solved = dict(zip(unique, executor.map(solve, unique)))
    return solved[keys[0]], [solved[key] for key in keys[1:]]


def comparison_levels(
    spec: PotentialSpec,
    nl: Nonlinearity,
    s: float,
    grid: Grid,
    a: float,
    eps: float,
    opts: SolverOptions,
    rho0_fraction: float = 0.5,
    threads: int | None = None,
) -> ComparisonLevels:
    """
    E_{∞,a}, E_{a_i,a} and E_{ε,a} with the same solver budget. I_ε is
    minimized from the frozen minimizers translated to a_i/ε.
    """
    infinity, centers = frozen_levels(spec, nl, s, grid, a, opts, threads)
    ctx = EnergyContext.nonautonomous(grid, s, nl, spec, eps)

    seeds = [
        translate(r.u, np.array(c) / eps)
        for r, c in zip(centers, spec.centers)
        if r.u is not None
    ]
    if seeds:
        try:
            nonautonomous = multistart(ctx, a, seeds, opts, threads=threads)[0]
        except FracnsError as e:
            logger.warning(f"Level E_eps at eps = {eps} failed: {e}")
            nonautonomous = SolveResult.failed(str(e))
    else:
        nonautonomous = SolveResult.failed("No frozen minimizer to seed from")

    E_ai = [r.energy for r in centers]
    rho0 = rho0_fraction * (infinity.energy - max(E_ai))
    results = {"infinity": infinity, "eps": nonautonomous}
    results.update({f"center_{i}": r for i, r in enumerate(centers)})

    levels = ComparisonLevels(
        E_eps_a=nonautonomous.energy,
        E_ai_a=E_ai,
        E_inf_a=infinity.energy,
        a=a,
        eps=eps,
        rho0=rho0,
        results=results,
    )
    logger.info(
        f"Levels at eps = {eps:g}: E_eps = {levels.E_eps_a:.8g}, "
        f"E_ai = {[round(e, 8) for e in E_ai]}, E_inf = {levels.E_inf_a:.8g}"
    )
    return levels


def epsilon_sweep(
    spec: PotentialSpec,
    nl: Nonlinearity,
    s: float,
    grids: list[Grid],
    a: float,
    eps_values: list[float],
    opts: SolverOptions,
    threads: int | None = None,
) -> tuple[list[ComparisonLevels], ValidationReport]:
    """Comparison levels along a decreasing ε sweep and the trend of E_ε - min E_ai."""
    if len(grids) != len(eps_values):
        raise ParameterError("One grid per eps value is required")
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ParameterError(f"eps values must be strictly decreasing, got {eps_values}")

    sweep = [
        comparison_levels(spec, nl, s, grid, a, eps, opts, threads=threads)
        for grid, eps in zip(grids, eps_values)
    ]
    gaps = [levels.eps_gap for levels in sweep]
    report = ValidationReport(meta={"eps": list(eps_values), "gaps": gaps})
    for (e1, g1), (e2, g2) in zip(zip(eps_values, gaps), zip(eps_values[1:], gaps[1:])):
        report.add(
            f"eps_trend({e1:g},{e2:g})",
            g2 < g1,
            f"gap {g1:.3e} -> {g2:.3e}",
            witness=g1 - g2,
        )
    return sweep, report


def frozen_monotonicity_check(
    h1: float,
    v1: float,
    h2: float,
    v2: float,
    nl: Nonlinearity,
    s: float,
    grid: Grid,
    a: float,
    opts: SolverOptions,
    tol: float = 1e-8,
) -> ValidationReport:
    """E_{h2V2,a} < E_{h1V1,a} < 0 for 0 < h1 <= h2 and V2 <= V1 <= 0."""
    if not (0 < h1 <= h2 and v2 <= v1 <= 0):
        raise ParameterError(
            f"Need 0 < h1 <= h2 and V2 <= V1 <= 0, got h = ({h1}, {h2}), V = ({v1}, {v2})"
        )
    first = solve_ground_state(EnergyContext.frozen(grid, s, nl, h1, v1), a, opts)
    second = solve_ground_state(EnergyContext.frozen(grid, s, nl, h2, v2), a, opts)
    margin = first.energy - second.energy

    report = ValidationReport(
        meta={"E1": first.energy, "E2": second.energy, "margin": margin}
    )
    if (h1, v1) == (h2, v2):
        report.add(
            "ordering", abs(margin) <= tol, f"|E1 - E2| = {abs(margin):.3e}", margin
        )
    else:
        report.add("ordering", margin > 0, f"E1 - E2 = {margin:.3e}", margin)
    report.add("negative", first.energy < 0, f"E1 = {first.energy:.6g}", first.energy)

    if h1 == h2:
        shift = (v1 - v2) * a / 2
        report.add(
            "constant_shift",
            abs(margin - shift) <= max(tol, 1e-6 * abs(first.energy)),
            f"margin {margin:.6e} against (V1 - V2)a/2 = {shift:.6e}",
            witness=margin - shift,
        )
    return report


def constant_shift_identity(
    alpha_h: float,
    beta_v: float,
    nl: Nonlinearity,
    s: float,
    grid: Grid,
    a: float,
    opts: SolverOptions,
    rtol: float = 1e-6,
) -> ValidationReport:
    """E_{αβ,a} = E_{α0,a} + βa/2, each side from its own solve."""
    shifted = solve_ground_state(EnergyContext.frozen(grid, s, nl, alpha_h, beta_v), a, opts)
    plain = solve_ground_state(EnergyContext.frozen(grid, s, nl, alpha_h, 0.0), a, opts)
    expected = plain.energy + beta_v * a / 2
    defect = abs(shifted.energy - expected) / abs(expected)

    report = ValidationReport(
        meta={"E_shifted": shifted.energy, "E_plain": plain.energy, "beta_v": beta_v}
    )
    report.add(
        "constant_shift",
        defect <= rtol,
        f"relative defect {defect:.3e}",
        witness=defect,
    )
    return report
