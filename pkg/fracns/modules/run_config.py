import json
import logging
import math
from dataclasses import dataclass, field, fields

from fracns.enum import Command, Variant
from fracns.errors import ConfigError, FracnsError
from fracns.modules.model import Nonlinearity, PotentialSpec
from fracns.modules.optimizer import SolverOptions
from fracns.modules.spectral import Grid, check_order

logger = logging.getLogger(__name__)


def _number(value, path: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Expected a number, got {value!r}", path)
    if kind is int and not float(value).is_integer():
        raise ConfigError(f"Expected an integer, got {value!r}", path)
    return kind(value)


def _numbers(value, path: str) -> list[float]:
    if not isinstance(value, list):
        raise ConfigError(f"Expected a list of numbers, got {value!r}", path)
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _block(raw: dict, name: str, required: bool = False) -> dict | None:
    value = raw.get(name)
    if value is None:
        if required:
            raise ConfigError(f"Missing block '{name}'", name)
        return None
    if not isinstance(value, dict):
        raise ConfigError(f"Block '{name}' must be an object", name)
    return value


def _check_keys(block: dict, allowed, path: str):
    for key in block:
        if key not in allowed:
            raise ConfigError(f"Unknown key '{key}'", f"{path}.{key}" if path else key)


@dataclass(frozen=True)
class ProblemConfig:
    dim: int
    s: float
    box_length: float
    points: int

    @property
    def grid(self) -> Grid:
        return Grid.uniform(self.dim, self.box_length, self.points)

    def grid_with_box(self, box_length: float) -> Grid:
        """Same spacing as the configured grid over another box."""
        scale = box_length / self.box_length
        points = max(8, 2 ** math.ceil(math.log2(self.points * scale)))
        return Grid.uniform(self.dim, box_length, points)


@dataclass(frozen=True)
class AutonomousConfig:
    eta: float = -1.0
    mu: float = 1.0


@dataclass(frozen=True)
class SolveConfig:
    variant: Variant = Variant.AUTONOMOUS
    eps: float | None = None
    seed_file: str | None = None


@dataclass(frozen=True)
class LandscapeConfig:
    masses: list[float]
    pairs: list[tuple[float, float]] = field(default_factory=list)
    thetas: list[float] = field(default_factory=list)
    eps: list[float] = field(default_factory=list)
    frozen_pairs: list[tuple[float, float, float, float]] = field(default_factory=list)
    warm_start: bool = False
    resolution_check: bool = False
    tol: float = 1e-8


@dataclass(frozen=True)
class MultiplicityConfig:
    eps: float
    rho0: float | None = None
    rho0_fraction: float = 0.5


@dataclass
class RunConfig:
    problem: ProblemConfig
    nonlinearity: Nonlinearity
    mass: float
    solver: SolverOptions
    autonomous: AutonomousConfig
    potential: PotentialSpec | None = None
    solve: SolveConfig | None = None
    landscape: LandscapeConfig | None = None
    multiplicity: MultiplicityConfig | None = None
    raw: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.problem.grid

    def require(self, command: Command):
        """Checks that every block the command reads is present."""
        command = Command(command)
        if command == Command.SOLVE:
            solve = self.solve or SolveConfig()
            if solve.variant == Variant.NONAUTONOMOUS:
                if self.potential is None:
                    raise ConfigError("Nonautonomous solve needs a potential", "potential")
                if solve.eps is None:
                    raise ConfigError("Nonautonomous solve needs eps", "solve.eps")
            elif solve.variant == Variant.FROZEN:
                raise ConfigError(
                    "solve.variant must be autonomous or nonautonomous", "solve.variant"
                )
        elif command == Command.LANDSCAPE:
            if self.landscape is None:
                raise ConfigError("Missing block 'landscape'", "landscape")
            if self.landscape.eps and self.potential is None:
                raise ConfigError("Comparison levels need a potential", "potential")
        elif command == Command.MULTIPLICITY:
            if self.potential is None:
                raise ConfigError("Multiplicity needs a potential", "potential")
            if self.multiplicity is None:
                raise ConfigError("Missing block 'multiplicity'", "multiplicity")

    @property
    def dict(self):
        return self.raw


def _parse_problem(raw: dict) -> ProblemConfig:
    block = _block(raw, "problem", required=True)
    _check_keys(block, ("dim", "s", "box_length", "points"), "problem")
    for key in ("dim", "s", "box_length", "points"):
        if key not in block:
            raise ConfigError(f"Missing key '{key}'", f"problem.{key}")
    problem = ProblemConfig(
        dim=_number(block["dim"], "problem.dim", int),
        s=_number(block["s"], "problem.s"),
        box_length=_number(block["box_length"], "problem.box_length"),
        points=_number(block["points"], "problem.points", int),
    )
    try:
        check_order(problem.s)
        problem.grid
    except FracnsError as e:
        raise ConfigError(str(e), "problem") from e
    return problem


def _parse_nonlinearity(raw: dict) -> Nonlinearity:
    block = _block(raw, "nonlinearity", required=True)
    _check_keys(block, ("form", "q", "p", "c_q", "c_p"), "nonlinearity")
    kwargs = {"form": block.get("form", "pure_power")}
    for key in ("q", "p", "c_q", "c_p"):
        if block.get(key) is not None:
            kwargs[key] = _number(block[key], f"nonlinearity.{key}")
    if "q" not in kwargs:
        raise ConfigError("Missing key 'q'", "nonlinearity.q")
    try:
        return Nonlinearity(**kwargs)
    except (FracnsError, ValueError) as e:
        raise ConfigError(str(e), "nonlinearity") from e


def _parse_potential(raw: dict) -> PotentialSpec | None:
    block = _block(raw, "potential")
    if block is None:
        return None
    allowed = [f.name for f in fields(PotentialSpec)]
    _check_keys(block, allowed, "potential")
    if "centers" not in block:
        raise ConfigError("Missing key 'centers'", "potential.centers")
    try:
        return PotentialSpec(**block)
    except (FracnsError, ValueError, TypeError) as e:
        raise ConfigError(str(e), "potential") from e


def _parse_solver(raw: dict) -> SolverOptions:
    block = _block(raw, "solver") or {}
    allowed = [f.name for f in fields(SolverOptions)]
    _check_keys(block, allowed, "solver")
    try:
        return SolverOptions(**block)
    except (FracnsError, TypeError) as e:
        raise ConfigError(str(e), "solver") from e


def _parse_mass(raw: dict) -> float:
    block = _block(raw, "constraint") or {}
    _check_keys(block, ("mass",), "constraint")
    a = _number(block.get("mass", 1.0), "constraint.mass")
    if not a > 0:
        raise ConfigError(f"Mass must be positive, got {a}", "constraint.mass")
    return a


def _parse_autonomous(raw: dict) -> AutonomousConfig:
    block = _block(raw, "autonomous") or {}
    _check_keys(block, ("eta", "mu"), "autonomous")
    config = AutonomousConfig(
        eta=_number(block.get("eta", -1.0), "autonomous.eta"),
        mu=_number(block.get("mu", 1.0), "autonomous.mu"),
    )
    if config.eta > 0:
        raise ConfigError("eta must be <= 0", "autonomous.eta")
    if not config.mu > 0:
        raise ConfigError("mu must be positive", "autonomous.mu")
    return config


def _parse_solve(raw: dict) -> SolveConfig | None:
    block = _block(raw, "solve")
    if block is None:
        return None
    _check_keys(block, ("variant", "eps", "seed_file"), "solve")
    try:
        variant = Variant(block.get("variant", "autonomous"))
    except ValueError as e:
        raise ConfigError(str(e), "solve.variant") from e
    eps = block.get("eps")
    if eps is not None:
        eps = _number(eps, "solve.eps")
        if not eps > 0:
            raise ConfigError("eps must be positive", "solve.eps")
    seed_file = block.get("seed_file")
    if seed_file is not None and not isinstance(seed_file, str):
        raise ConfigError("seed_file must be a path", "solve.seed_file")
    return SolveConfig(variant=variant, eps=eps, seed_file=seed_file)


def _parse_landscape(raw: dict) -> LandscapeConfig | None:
    block = _block(raw, "landscape")
    if block is None:
        return None
    allowed = [f.name for f in fields(LandscapeConfig)]
    _check_keys(block, allowed, "landscape")
    if "masses" not in block:
        raise ConfigError("Missing key 'masses'", "landscape.masses")

    masses = _numbers(block["masses"], "landscape.masses")
    if not masses or any(a <= 0 for a in masses):
        raise ConfigError("Masses must be positive", "landscape.masses")
    if any(b <= a for a, b in zip(masses, masses[1:])):
        raise ConfigError("Masses must be strictly increasing", "landscape.masses")

    pairs = []
    for i, pair in enumerate(block.get("pairs", [])):
        values = _numbers(pair, f"landscape.pairs[{i}]")
        if len(values) != 2:
            raise ConfigError("A pair has two masses", f"landscape.pairs[{i}]")
        pairs.append(tuple(values))

    frozen_pairs = []
    for i, quad in enumerate(block.get("frozen_pairs", [])):
        values = _numbers(quad, f"landscape.frozen_pairs[{i}]")
        if len(values) != 4:
            raise ConfigError(
                "A frozen pair is [h1, V1, h2, V2]", f"landscape.frozen_pairs[{i}]"
            )
        frozen_pairs.append(tuple(values))

    thetas = _numbers(block.get("thetas", []), "landscape.thetas")
    for i, theta in enumerate(thetas):
        if theta < 1:
            raise ConfigError("Scaling factors must be >= 1", f"landscape.thetas[{i}]")
    eps = _numbers(block.get("eps", []), "landscape.eps")
    if any(e <= 0 for e in eps):
        raise ConfigError("eps values must be positive", "landscape.eps")

    return LandscapeConfig(
        masses=masses,
        pairs=pairs,
        thetas=thetas,
        eps=sorted(eps, reverse=True),
        frozen_pairs=frozen_pairs,
        warm_start=bool(block.get("warm_start", False)),
        resolution_check=bool(block.get("resolution_check", False)),
        tol=_number(block.get("tol", 1e-8), "landscape.tol"),
    )


def _parse_multiplicity(raw: dict) -> MultiplicityConfig | None:
    block = _block(raw, "multiplicity")
    if block is None:
        return None
    _check_keys(block, ("eps", "rho0", "rho0_fraction"), "multiplicity")
    if "eps" not in block:
        raise ConfigError("Missing key 'eps'", "multiplicity.eps")
    eps = _number(block["eps"], "multiplicity.eps")
    if not eps > 0:
        raise ConfigError("eps must be positive", "multiplicity.eps")
    rho0 = block.get("rho0")
    return MultiplicityConfig(
        eps=eps,
        rho0=None if rho0 is None else _number(rho0, "multiplicity.rho0"),
        rho0_fraction=_number(
            block.get("rho0_fraction", 0.5), "multiplicity.rho0_fraction"
        ),
    )


SECTIONS = (
    "problem",
    "nonlinearity",
    "potential",
    "constraint",
    "solver",
    "autonomous",
    "solve",
    "landscape",
    "multiplicity",
)


def parse_config(raw) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("The configuration must be a JSON object")
    _check_keys(raw, SECTIONS, "")

    config = RunConfig(
        problem=_parse_problem(raw),
        nonlinearity=_parse_nonlinearity(raw),
        mass=_parse_mass(raw),
        solver=_parse_solver(raw),
        autonomous=_parse_autonomous(raw),
        potential=_parse_potential(raw),
        solve=_parse_solve(raw),
        landscape=_parse_landscape(raw),
        multiplicity=_parse_multiplicity(raw),
        raw=raw,
    )
    if config.potential is not None and config.potential.dim != config.problem.dim:
        raise ConfigError(
            f"Potential centers are {config.potential.dim}-d, problem is "
            f"{config.problem.dim}-d",
            "potential.centers",
        )
    return config


def loads(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON: {e.msg}", line=e.lineno, column=e.colno) from e
    return parse_config(raw)


def load(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e.strerror}") from e
    config = loads(text)
    logger.debug(f"Loaded configuration from {path}")
    return config
