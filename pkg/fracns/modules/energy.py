import logging
from typing import NamedTuple

import numpy as np

from fracns.config import Config
from fracns.enum import Variant
from fracns.errors import (
    DegenerateInputError,
    GridMismatchError,
    ParameterError,
    UsageError,
)
from fracns.modules.model import Nonlinearity, PotentialSpec, sample_on_grid
from fracns.modules.spectral import (
    Field,
    Grid,
    apply_multiplier,
    check_order,
    dilate,
    kinetic_from_values,
    mass,
    stretch,
)

logger = logging.getLogger(__name__)


class EnergyContext:
    """
    One member of the functional family

        I(u) = ½∫|(-Δ)^{s/2}u|² + ½∫c(x)u² - ∫w(x)F(u)

    with (c, w) = (V(εx), h(εx)) for the nonautonomous problem, (η, μ) for the
    autonomous one and (β_V, α_h) for the frozen comparison problems.
    """

    grid: Grid
    s: float
    nonlinearity: Nonlinearity
    variant: Variant
    coefficient: float | np.ndarray
    weight: float | np.ndarray

    def __init__(
        self,
        grid: Grid,
        s: float,
        nonlinearity: Nonlinearity,
        variant: Variant,
        coefficient: float | np.ndarray,
        weight: float | np.ndarray,
        spec: PotentialSpec | None = None,
        eps: float | None = None,
        outside_centers: list[int] | None = None,
    ):
        check_order(s)
        self.grid = grid
        self.s = float(s)
        self.nonlinearity = nonlinearity
        self.variant = Variant(variant)
        self.coefficient = coefficient
        self.weight = weight
        self.spec = spec
        self.eps = eps
        self.outside_centers = outside_centers or []

    @staticmethod
    def autonomous(
        grid: Grid, s: float, nonlinearity: Nonlinearity, eta: float, mu: float
    ) -> "EnergyContext":
        if eta > 0 or not mu > 0:
            raise ParameterError(f"Autonomous problem needs eta <= 0 < mu, got {eta}, {mu}")
        return EnergyContext(grid, s, nonlinearity, Variant.AUTONOMOUS, eta, mu)

    @staticmethod
    def frozen(
        grid: Grid,
        s: float,
        nonlinearity: Nonlinearity,
        alpha_h: float,
        beta_v: float,
    ) -> "EnergyContext":
        if beta_v > 0 or not alpha_h > 0:
            raise ParameterError(
                f"Frozen problem needs beta_V <= 0 < alpha_h, got {beta_v}, {alpha_h}"
            )
        return EnergyContext(grid, s, nonlinearity, Variant.FROZEN, beta_v, alpha_h)

    @staticmethod
    def at_infinity(
        grid: Grid, s: float, nonlinearity: Nonlinearity, spec: PotentialSpec
    ) -> "EnergyContext":
        return EnergyContext.frozen(grid, s, nonlinearity, spec.h_infinity, 0.0)

    @staticmethod
    def at_center(
        grid: Grid, s: float, nonlinearity: Nonlinearity, spec: PotentialSpec, i: int
    ) -> "EnergyContext":
        center = spec.centers[i]
        return EnergyContext.frozen(
            grid, s, nonlinearity, spec.h_at(center), spec.v_at(center)
        )

    @staticmethod
    def nonautonomous(
        grid: Grid,
        s: float,
        nonlinearity: Nonlinearity,
        spec: PotentialSpec,
        eps: float,
    ) -> "EnergyContext":
        sampled = sample_on_grid(spec, grid, eps)
        return EnergyContext(
            grid,
            s,
            nonlinearity,
            Variant.NONAUTONOMOUS,
            sampled.v.values,
            sampled.h.values,
            spec=spec,
            eps=eps,
            outside_centers=sampled.outside_centers,
        )

    def with_grid(self, grid: Grid) -> "EnergyContext":
        """The same functional discretized on another grid."""
        if self.variant == Variant.NONAUTONOMOUS:
            return EnergyContext.nonautonomous(
                grid, self.s, self.nonlinearity, self.spec, self.eps
            )
        return EnergyContext(
            grid, self.s, self.nonlinearity, self.variant, self.coefficient, self.weight
        )

    @property
    def translation_invariant(self) -> bool:
        return self.variant != Variant.NONAUTONOMOUS

    @property
    def shift(self) -> float:
        """The constant potential (η or β_V) of a translation invariant context."""
        self.require_translation_invariant("shift")
        return float(self.coefficient)

    @property
    def strength(self) -> float:
        """The constant weight (μ or α_h) of a translation invariant context."""
        self.require_translation_invariant("strength")
        return float(self.weight)

    def require_translation_invariant(self, operation: str):
        if not self.translation_invariant:
            raise UsageError(f"{operation} is defined for autonomous contexts only")

    def check_field(self, u: Field):
        if u.grid != self.grid:
            raise GridMismatchError(
                f"Field on {u.grid} does not match context grid {self.grid}"
            )

    @property
    def dict(self):
        result = {"variant": self.variant.value, "s": self.s}
        if self.variant == Variant.AUTONOMOUS:
            result.update(eta=self.shift, mu=self.strength)
        elif self.variant == Variant.FROZEN:
            result.update(alpha_h=self.strength, beta_v=self.shift)
        else:
            result.update(eps=self.eps)
        return result

    def __repr__(self):
        return f"EnergyContext({self.dict})"


class EnergyParts(NamedTuple):
    kinetic: float
    potential: float
    nonlinear: float

    @property
    def total(self) -> float:
        return 0.5 * self.kinetic + 0.5 * self.potential - self.nonlinear


class FiberPoint(NamedTuple):
    tau: float
    energy: float
    closed_form: float
    mass_defect: float


class CoercivityProbe(NamedTuple):
    profile: list[FiberPoint]
    eventually_increasing: bool
    max_mass_defect: float

    @property
    def dict(self):
        return {
            "taus": [point.tau for point in self.profile],
            "energies": [point.energy for point in self.profile],
            "eventually_increasing": self.eventually_increasing,
            "max_mass_defect": self.max_mass_defect,
        }


class ScaledEnergy(NamedTuple):
    nu: float
    energy: float
    closed_form: float
    mass_defect: float


def parts_from_values(ctx: EnergyContext, values: np.ndarray) -> EnergyParts:
    dv = ctx.grid.cell_volume
    return EnergyParts(
        kinetic=kinetic_from_values(values, ctx.grid, ctx.s),
        potential=float(dv * np.sum(ctx.coefficient * values**2)),
        nonlinear=float(dv * np.sum(ctx.weight * ctx.nonlinearity.F(values))),
    )


def energy_from_values(ctx: EnergyContext, values: np.ndarray) -> float:
    return parts_from_values(ctx, values).total


def gradient_from_values(ctx: EnergyContext, values: np.ndarray) -> np.ndarray:
    return (
        apply_multiplier(values, ctx.grid.symbol(ctx.s))
        + ctx.coefficient * values
        - ctx.weight * ctx.nonlinearity.f(values)
    )


def energy_parts(ctx: EnergyContext, u: Field) -> EnergyParts:
    ctx.check_field(u)
    return parts_from_values(ctx, u.values)


def energy(ctx: EnergyContext, u: Field) -> float:
    ctx.check_field(u)
    return energy_from_values(ctx, u.values)


def energy_gradient(ctx: EnergyContext, u: Field) -> Field:
    """L²-gradient (-Δ)^s u + c u - w f(u)."""
    ctx.check_field(u)
    return u.with_values(gradient_from_values(ctx, u.values))


def lagrange_multiplier(ctx: EnergyContext, u: Field) -> float:
    """λ = <∇I(u), u> / |u|²_2, the Rayleigh projection of the gradient on u."""
    ctx.check_field(u)
    m = mass(u)
    if not m > 0:
        raise DegenerateInputError("Lagrange multiplier of the zero field")
    g = gradient_from_values(ctx, u.values)
    return float(ctx.grid.cell_volume * np.sum(g * u.values) / m)


def pohozaev_residual(ctx: EnergyContext, u: Field) -> float:
    """
    R(u) = K + (Nμ/s)∫F(u) - (Nμ/2s)∫f(u)u, zero at whole-space critical
    points of the translation invariant problem.
    """
    ctx.require_translation_invariant("pohozaev_residual")
    ctx.check_field(u)
    nl = ctx.nonlinearity
    dim, s, mu = ctx.grid.dim, ctx.s, ctx.strength
    dv = ctx.grid.cell_volume
    kinetic = kinetic_from_values(u.values, ctx.grid, s)
    integral_F = dv * np.sum(nl.F(u.values))
    integral_fu = dv * np.sum(nl.f(u.values) * u.values)
    return float(
        kinetic + dim * mu / s * integral_F - dim * mu / (2 * s) * integral_fu
    )


def pohozaev_relative(ctx: EnergyContext, u: Field) -> float:
    kinetic = kinetic_from_values(u.values, ctx.grid, ctx.s)
    if kinetic == 0:
        raise DegenerateInputError("Pohozaev residual relative to zero kinetic energy")
    return pohozaev_residual(ctx, u) / kinetic


def pohozaev_virial_form(ctx: EnergyContext, u: Field, lam: float | None = None):
    """(N-2s)K + N(η-λ)|u|² - 2Nμ∫F(u), the virial form of the same identity."""
    ctx.require_translation_invariant("pohozaev_virial_form")
    if lam is None:
        lam = lagrange_multiplier(ctx, u)
    dim, s = ctx.grid.dim, ctx.s
    parts = energy_parts(ctx, u)
    integral_F = parts.nonlinear / ctx.strength
    return float(
        (dim - 2 * s) * parts.kinetic
        + dim * (ctx.shift - lam) * mass(u)
        - 2 * dim * ctx.strength * integral_F
    )


def _nonlinear_scaling(ctx: EnergyContext, u: Field, tau: float) -> float:
    # ∫F(τ∗u) = Σ_r (c_r/r) e^{(r-2)Nτ/2} ∫|u|^r over the power terms of f
    nl = ctx.nonlinearity
    dim, dv = ctx.grid.dim, ctx.grid.cell_volume
    a = np.abs(u.values)
    total = nl.c_q / nl.q * np.exp((nl.q - 2) * dim * tau / 2) * dv * np.sum(a**nl.q)
    if nl.c_p:
        total += nl.c_p / nl.p * np.exp((nl.p - 2) * dim * tau / 2) * dv * np.sum(a**nl.p)
    return float(total)


def dilation_energy_profile(
    ctx: EnergyContext, u: Field, taus, tau_max: float | None = None
) -> list[FiberPoint]:
    """
    J(τ∗u) along the mass-preserving fiber, evaluated on the resampled field
    and in closed form ½e^{2sτ}K + ½ηa - μ∫F(τ∗u).
    """
    ctx.require_translation_invariant("dilation_energy_profile")
    ctx.check_field(u)
    tau_max = Config.TAU_MAX if tau_max is None else tau_max

    kinetic = kinetic_from_values(u.values, ctx.grid, ctx.s)
    a = mass(u)
    profile = []
    for tau in taus:
        dilated, defect = dilate(u, tau, tau_max=tau_max)
        closed = (
            0.5 * np.exp(2 * ctx.s * tau) * kinetic
            + 0.5 * ctx.shift * a
            - ctx.strength * _nonlinear_scaling(ctx, u, tau)
        )
        profile.append(
            FiberPoint(float(tau), energy(ctx, dilated), float(closed), defect)
        )
    return profile


def coercivity_probe(
    ctx: EnergyContext, u: Field, taus=None, tau_max: float | None = None
) -> CoercivityProbe:
    """
    Follows the fiber towards concentration on the dilated fields themselves;
    subcritical growth makes the evaluated energy rise. max_mass_defect tells
    whether the grid still resolves the most concentrated point.
    """
    tau_max = Config.TAU_MAX if tau_max is None else tau_max
    if taus is None:
        taus = np.linspace(0.0, tau_max, 13)
    profile = dilation_energy_profile(ctx, u, taus, tau_max=tau_max)
    tail = np.diff([point.energy for point in profile])[-3:]
    return CoercivityProbe(
        profile,
        bool(np.all(tail > 0)),
        max(point.mass_defect for point in profile),
    )


def mass_scaling_energy(
    ctx: EnergyContext, u: Field, nu: float, tau_max: float | None = None
) -> ScaledEnergy:
    """
    J(ũ) for ũ(x) = u(ν^{-1/N}x), which has mass ν|u|²_2; closed form
    ½ν^{(N-2s)/N}K + ½ην|u|²_2 - μν∫F(u).
    """
    ctx.require_translation_invariant("mass_scaling_energy")
    ctx.check_field(u)
    dim = ctx.grid.dim
    scaled, defect = stretch(u, nu ** (1 / dim), tau_max=tau_max)
    parts = energy_parts(ctx, u)
    closed = (
        0.5 * nu ** ((dim - 2 * ctx.s) / dim) * parts.kinetic
        + 0.5 * ctx.shift * nu * mass(u)
        - nu * parts.nonlinear
    )
    return ScaledEnergy(float(nu), energy(ctx, scaled), float(closed), defect)


def gns_exponent(alpha: float, s: float, dim: int) -> float:
    """θ = N(α-2)/(4s); θ < 1 exactly when α is L²-subcritical."""
    if not alpha > 2:
        raise ParameterError(f"Gagliardo-Nirenberg exponent needs alpha > 2, got {alpha}")
    return dim * (alpha - 2) / (4 * s)
