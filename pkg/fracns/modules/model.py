import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from fracns.enum import NonlinearityForm, Profile
from fracns.errors import GridMismatchError, ParameterError
from fracns.modules.spectral import Field, Grid

logger = logging.getLogger(__name__)


def critical_exponent(s: float, dim: int) -> float:
    """p̄ = 2 + 4s/N, the L²-critical growth."""
    return 2 + 4 * s / dim


@dataclass(frozen=True)
class Nonlinearity:
    """
    f(t) = c_q|t|^{q-2}t (+ c_p|t|^{p-2}t for two_power) and its primitive F.
    """

    form: NonlinearityForm
    q: float
    p: float | None = None
    c_q: float = 1.0
    c_p: float = 0.0

    def __post_init__(self):
        form = NonlinearityForm(self.form)
        object.__setattr__(self, "form", form)

        if form == NonlinearityForm.PURE_POWER:
            object.__setattr__(self, "p", float(self.q))
            object.__setattr__(self, "c_p", 0.0)
        elif self.p is None:
            raise ParameterError("two_power nonlinearity needs the exponent p")

        if not self.q > 2:
            raise ParameterError(f"Exponent q must exceed 2, got {self.q}")
        if self.p < self.q:
            raise ParameterError(
                f"Exponents must satisfy q <= p, got {self.q}, {self.p}"
            )
        if self.c_q < 0 or self.c_p < 0:
            raise ParameterError("Nonlinearity coefficients must be nonnegative")

    @staticmethod
    def pure_power(q: float, c: float = 1.0) -> "Nonlinearity":
        return Nonlinearity(form=NonlinearityForm.PURE_POWER, q=q, c_q=c)

    @staticmethod
    def two_power(q: float, p: float, c_q: float = 1.0, c_p: float = 1.0):
        return Nonlinearity(NonlinearityForm.TWO_POWER, q=q, p=p, c_q=c_q, c_p=c_p)

    @property
    def alpha(self) -> float:
        return self.q

    @property
    def beta(self) -> float:
        return self.p

    @property
    def active(self) -> bool:
        return self.c_q > 0 or self.c_p > 0

    def f(self, t):
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        value = self.c_q * a ** (self.q - 2) * t
        if self.c_p:
            value = value + self.c_p * a ** (self.p - 2) * t
        return value

    def F(self, t):
        a = np.abs(np.asarray(t, dtype=float))
        value = self.c_q * a**self.q / self.q
        if self.c_p:
            value = value + self.c_p * a**self.p / self.p
        return value

    def f_and_F(self, t) -> tuple[float, float]:
        return float(self.f(t)), float(self.F(t))

    @property
    def dict(self):
        return {
            "form": self.form.value,
            "q": self.q,
            "p": self.p,
            "c_q": self.c_q,
            "c_p": self.c_p,
        }


def _bump(profile: Profile, r2: np.ndarray) -> np.ndarray:
    if profile == Profile.GAUSSIAN:
        return np.exp(-r2)
    return 1 / np.cosh(np.sqrt(r2)) ** 2


def _shape(x) -> tuple[int, ...]:
    return np.broadcast_shapes(*(np.shape(xi) for xi in x))


def _as_points(points, name: str) -> tuple[tuple[float, ...], ...]:
    result = []
    for point in points:
        if np.isscalar(point):
            point = (point,)
        result.append(tuple(float(x) for x in point))
    if not result:
        raise ParameterError(f"{name} must contain at least one point")
    if len({len(p) for p in result}) != 1:
        raise ParameterError(f"{name} mixes dimensions")
    return tuple(result)


@dataclass(frozen=True)
class PotentialSpec:
    """
    h(x) = h_∞ + Σ_i (h_i - h_∞)·bump(|x - a_i|/w),
    V(x) = Σ_i V_i·bump(|x - c_i|/w_V).

    h_i defaults to the shared h_peak, V_i to v_depth and c_i to a_i; the
    overrides exist so that specs violating the assumptions can be expressed.
    """

    centers: tuple
    h_infinity: float = 1.0
    h_peak: float = 2.0
    h_bump_width: float = 1.0
    v_depth: float = -1.0
    v_well_width: float = 1.0
    profile: Profile = Profile.GAUSSIAN
    peak_heights: tuple | None = None
    well_depths: tuple | None = None
    well_centers: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "centers", _as_points(self.centers, "centers"))
        object.__setattr__(self, "profile", Profile(self.profile))

        if self.well_centers is not None:
            well_centers = _as_points(self.well_centers, "well_centers")
            if len(well_centers[0]) != self.dim:
                raise ParameterError("well_centers must match the center dimension")
            object.__setattr__(self, "well_centers", well_centers)
        for name in ("peak_heights", "well_depths"):
            override = getattr(self, name)
            if override is not None:
                override = tuple(float(v) for v in override)
                points = self.well_points if name == "well_depths" else self.centers
                expected = len(points)
                if len(override) != expected:
                    raise ParameterError(f"{name} needs {expected} entries")
                object.__setattr__(self, name, override)

        if not self.h_infinity > 0:
            raise ParameterError("h_infinity must be positive")
        if not (self.h_bump_width > 0 and self.v_well_width > 0):
            raise ParameterError("Bump and well widths must be positive")

    @property
    def dim(self) -> int:
        return len(self.centers[0])

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def heights(self) -> tuple[float, ...]:
        return self.peak_heights or (self.h_peak,) * self.k

    @property
    def well_points(self) -> tuple:
        return self.well_centers or self.centers

    @property
    def depths(self) -> tuple[float, ...]:
        return self.well_depths or (self.v_depth,) * len(self.well_points)

    def h(self, *x):
        value = np.full(_shape(x), self.h_infinity)
        for center, height in zip(self.centers, self.heights):
            r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, center))
            value = value + (height - self.h_infinity) * _bump(
                self.profile, r2 / self.h_bump_width**2
            )
        return value

    def v(self, *x):
        value = np.zeros(_shape(x))
        for center, depth in zip(self.well_points, self.depths):
            r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, center))
            value = value + depth * _bump(self.profile, r2 / self.v_well_width**2)
        return value

    def h_at(self, point) -> float:
        return float(self.h(*np.atleast_1d(point)))

    def v_at(self, point) -> float:
        return float(self.v(*np.atleast_1d(point)))

    @property
    def dict(self):
        return {
            "centers": [list(c) for c in self.centers],
            "h_infinity": self.h_infinity,
            "h_peak": self.h_peak,
            "h_bump_width": self.h_bump_width,
            "v_depth": self.v_depth,
            "v_well_width": self.v_well_width,
            "profile": self.profile.value,
            "peak_heights": self.peak_heights and list(self.peak_heights),
            "well_depths": self.well_depths and list(self.well_depths),
            "well_centers": self.well_centers
            and [list(c) for c in self.well_centers],
        }


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    witness: float | list | None = None

    @property
    def dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "detail": self.detail,
            "witness": self.witness,
        }


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, name: str, passed, detail: str = "", witness=None):
        self.checks.append(CheckResult(name, bool(passed), detail, witness))
        if not passed:
            logger.debug(f"Check {name} failed: {detail}")

    def __getitem__(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def group_passed(self, prefix: str) -> bool:
        return all(c.passed for c in self.checks if c.name.startswith(prefix))

    @property
    def failures(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed]

    @property
    def dict(self):
        return {
            "passed": self.passed,
            "checks": [check.dict for check in self.checks],
            "meta": self.meta,
        }


def check_growth_conditions(nl: Nonlinearity, s: float, dim: int) -> ValidationReport:
    p_bar = critical_exponent(s, dim)
    report = ValidationReport(
        meta={"p_bar": p_bar, "alpha": nl.alpha, "beta": nl.beta, "s": s, "dim": dim}
    )

    samples = np.array([1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3])
    odd_defect = np.max(np.abs(nl.f(-samples) + nl.f(samples)))
    report.add("odd", odd_defect == 0, f"max |f(-t) + f(t)| = {odd_defect:.3e}")

    t0 = 1e-8
    limit = float(np.abs(nl.f(t0)) / t0 ** (nl.q - 1))
    report.add(
        "f1",
        2 < nl.q < p_bar and limit > 0,
        f"q = {nl.q}, p̄ = {p_bar}, |f(t)|/|t|^(q-1) -> {limit:.6g} at t = {t0}",
        witness=limit,
    )

    tails = np.array([1e3, 1e6])
    tail_ratio = np.abs(nl.f(tails)) / tails ** (nl.p - 1)
    bounded = tail_ratio[1] <= tail_ratio[0] * (1 + 1e-9)
    report.add(
        "f2",
        2 < nl.p < p_bar and bounded,
        f"p = {nl.p}, p̄ = {p_bar}, |f(t)|/|t|^(p-1) = {tail_ratio[1]:.6g} at t = 1e6",
        witness=float(tail_ratio[1]),
    )

    t = np.logspace(-3, 3, 601)
    F = nl.F(t)
    tf = t * nl.f(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = tf / F
    slack = 1e-12 * np.abs(tf)
    bad = (F <= 0) | (nl.alpha * F > tf + slack) | (tf > nl.beta * F + slack)
    exponents_ok = 2 < nl.alpha <= nl.beta < p_bar
    witness = float(t[np.argmax(bad)]) if np.any(bad) else None
    report.add(
        "f3",
        exponents_ok and not np.any(bad),
        f"alpha = {nl.alpha}, beta = {nl.beta}, t*f/F in "
        f"[{np.nanmin(ratio):.6g}, {np.nanmax(ratio):.6g}]",
        witness=witness,
    )
    report.add(
        "subcritical",
        nl.q <= nl.p < p_bar,
        f"q = {nl.q} <= p = {nl.p} < p̄ = {p_bar}",
    )
    report.meta["ratio_min"] = float(np.nanmin(ratio))
    report.meta["ratio_max"] = float(np.nanmax(ratio))
    return report


def _probe_points(spec: PotentialSpec, probe_radius: float) -> list[np.ndarray]:
    count = 4001 if spec.dim == 1 else 301
    axis = np.linspace(-probe_radius, probe_radius, count)
    mesh = np.meshgrid(*([axis] * spec.dim), indexing="ij")
    coords = [m.ravel() for m in mesh]
    extra = np.array(spec.centers + spec.well_points)
    return [np.concatenate([c, extra[:, a]]) for a, c in enumerate(coords)]


def _tail_points(spec: PotentialSpec, radius: float) -> list[np.ndarray]:
    directions = np.vstack([np.eye(spec.dim), -np.eye(spec.dim)])
    directions = np.vstack([directions, np.ones(spec.dim) / np.sqrt(spec.dim)])
    scales = radius * np.array([4.0, 16.0, 64.0])
    points = np.array([d * r for r in scales for d in directions])
    return [points[:, a] for a in range(spec.dim)]


def check_A1_A2(
    spec: PotentialSpec,
    probe_radius: float | None = None,
    tol: float = 1e-9,
    tail_tol: float = 1e-6,
) -> ValidationReport:
    """
    Sampling-based check of the weight/potential assumptions: equal peaks of h
    at every a_i above h_∞, and V minimal and negative at every a_i with a
    vanishing tail.
    """
    if probe_radius is None:
        reach = max(np.linalg.norm(c) for c in spec.centers + spec.well_points)
        probe_radius = reach + 5 * max(spec.h_bump_width, spec.v_well_width)

    report = ValidationReport(meta={"probe_radius": probe_radius, "k": spec.k})
    points = _probe_points(spec, probe_radius)
    tails = _tail_points(spec, probe_radius)

    centers = np.array(spec.centers)
    distances = [
        np.linalg.norm(centers[i] - centers[j])
        for i in range(spec.k)
        for j in range(i + 1, spec.k)
    ]
    report.add(
        "A1.distinct_centers",
        all(d > 0 for d in distances),
        f"min pairwise distance {min(distances, default=np.inf):.6g}",
    )
    report.add(
        "A1.origin_center",
        not np.any(centers[0]),
        f"a_1 = {list(spec.centers[0])}",
    )

    peaks = np.array([spec.h_at(c) for c in spec.centers])
    spread = float(peaks.max() - peaks.min())
    report.add(
        "A1.equal_peaks",
        spread <= tol * peaks.max(),
        f"h(a_i) = {peaks.tolist()}",
        witness=spread,
    )
    h_sampled = spec.h(*points)
    h_max = float(h_sampled.max())
    report.add(
        "A1.peak_is_max",
        h_max <= peaks.min() + tol * max(1.0, h_max),
        f"max sampled h = {h_max:.12g}, min h(a_i) = {peaks.min():.12g}",
        witness=h_max,
    )
    report.add(
        "A1.h_infinity_below_peak",
        spec.h_infinity < peaks.min(),
        f"h_inf = {spec.h_infinity}, min h(a_i) = {peaks.min():.6g}",
    )
    report.add(
        "A1.h_positive",
        float(h_sampled.min()) > 0,
        f"min sampled h = {h_sampled.min():.6g}",
    )
    h_tail = float(np.max(np.abs(spec.h(*tails) - spec.h_infinity)))
    report.add(
        "A1.h_tail",
        h_tail <= tail_tol * spec.h_infinity,
        f"max |h - h_inf| on tail probes = {h_tail:.3e}",
        witness=h_tail,
    )

    wells = np.array([spec.v_at(c) for c in spec.centers])
    v_min = float(spec.v(*points).min())
    worst = int(np.argmax(wells))
    report.add(
        "A2.v_min_at_centers",
        np.all(wells <= v_min + tol * max(1.0, abs(v_min))),
        f"V(a_i) = {wells.tolist()}, inf sampled V = {v_min:.12g}",
        witness=list(spec.centers[worst]),
    )
    report.add(
        "A2.v_negative_at_centers",
        np.all(wells < 0),
        f"V(a_i) = {wells.tolist()}",
    )
    report.add(
        "A2.v_equal_depths",
        float(wells.max() - wells.min()) <= tol * max(1.0, abs(v_min)),
        f"spread {wells.max() - wells.min():.3e}",
    )
    v_tail = float(np.max(np.abs(spec.v(*tails))))
    report.add(
        "A2.v_tail",
        v_tail <= tail_tol,
        f"max |V| on tail probes = {v_tail:.3e}",
        witness=v_tail,
    )
    return report


class SampledCoefficients(NamedTuple):
    v: Field
    h: Field
    outside_centers: list[int]


def sample_on_grid(spec: PotentialSpec, grid: Grid, eps: float) -> SampledCoefficients:
    """V(εx) and h(εx) at the grid nodes."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if spec.dim != grid.dim:
        raise GridMismatchError(
            f"Potential of dimension {spec.dim} sampled on a {grid.dim}-d grid"
        )

    v = grid.sample(lambda *x: spec.v(*(eps * xi for xi in x)))
    h = grid.sample(lambda *x: spec.h(*(eps * xi for xi in x)))

    outside = []
    for i, center in enumerate(spec.centers):
        rescaled = np.array(center) / eps
        if np.any(np.abs(rescaled) >= np.array(grid.box_length) / 2):
            outside.append(i)
            logger.warning(
                f"Center a_{i} = {list(center)} maps to {rescaled.tolist()}, "
                f"outside the box of length {list(grid.box_length)} at eps = {eps}"
            )
    return SampledCoefficients(v=v, h=h, outside_centers=outside)
