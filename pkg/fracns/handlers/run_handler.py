import logging
import os
import time
from datetime import datetime, timezone

import humanize
import nanoid
import numpy as np

from fracns import __version__
from fracns.config import Config
from fracns.enum import Command, Variant
from fracns.errors import ConfigError, GridMismatchError, NumericalFailureError
from fracns.handlers.output_handler import OutputHandler, read_field_dump
from fracns.modules.energy import EnergyContext, coercivity_probe, gns_exponent
from fracns.modules.landscape import (
    check_landscape,
    constant_shift_identity,
    energy_curve,
    epsilon_sweep,
    frozen_levels,
    frozen_monotonicity_check,
    resolution_stability,
)
from fracns.modules.localization import (
    barycenter,
    choose_geometry,
    field_width,
    multiplicity_experiment,
    region_membership,
    required_box_length,
)
from fracns.modules.model import check_A1_A2, check_growth_conditions
from fracns.modules.optimizer import SolveResult, multistart, solve_ground_state
from fracns.modules.run_config import RunConfig
from fracns.modules.spectral import Field, resample, translate
from fracns.utils import dumps, md5hash

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = __version__
# fiber points checked after an autonomous solve, up to e-fold concentration
COERCIVITY_TAUS = np.linspace(0.0, 1.0, 9)


class RunHandler:
    id: str
    config: RunConfig
    output: OutputHandler

    def __init__(
        self,
        config: RunConfig,
        output_dir: str | None = None,
        threads: int | None = None,
        dump_fields: bool = False,
    ):
        self.id = nanoid.generate(alphabet="1234567890abcdef", size=12)
        self.config = config
        self.output = OutputHandler(output_dir or Config.OUTPUT_DIR)
        self.threads = threads or Config.THREADS
        self.dump_fields = dump_fields
        self.log_handler = None

        logger.info(f"Run {self.id} writing to {self.output.output_dir}")

    def __enter__(self):
        self.log_handler = logging.FileHandler(self.output.path("run.log"))
        self.log_handler.setFormatter(
            logging.Formatter(
                "%(asctime)s - %(levelname)s - %(message)s", "%Y-%m-%d %H:%M:%S"
            )
        )
        logging.getLogger().addHandler(self.log_handler)
        return self

    def __exit__(self, *exc):
        if self.log_handler is not None:
            logging.getLogger().removeHandler(self.log_handler)
            self.log_handler.close()
            self.log_handler = None

    def run(self, command: Command) -> dict:
        """
        Runs one subcommand and writes its results. The manifest is written
        even when the command fails, so partial outputs stay traceable.
        """
        command = Command(command)
        self.config.require(command)
        started = datetime.now(tz=timezone.utc)
        clock = time.perf_counter()
        try:
            handler = {
                Command.VALIDATE: self.validate,
                Command.SOLVE: self.solve,
                Command.LANDSCAPE: self.landscape,
                Command.MULTIPLICITY: self.multiplicity,
            }[command]
            return handler()
        finally:
            elapsed = time.perf_counter() - clock
            self.output.write_manifest(
                {
                    "config": self.config.dict,
                    "config_hash": md5hash(dumps(self.config.dict)),
                    "command": command.value,
                    "started": started.isoformat(),
                    "elapsed_s": elapsed,
                    "artifact_version": ARTIFACT_VERSION,
                    "run_id": self.id,
                    "threads": self.threads,
                }
            )
            logger.info(
                f"Run {self.id} ({command.value}) finished in "
                f"{humanize.precisedelta(elapsed, minimum_unit='milliseconds')}"
            )

    def validate(self) -> dict:
        cfg = self.config
        growth = check_growth_conditions(cfg.nonlinearity, cfg.problem.s, cfg.problem.dim)
        growth.meta["gns_exponent_q"] = gns_exponent(
            cfg.nonlinearity.q, cfg.problem.s, cfg.problem.dim
        )
        growth.meta["gns_exponent_p"] = gns_exponent(
            cfg.nonlinearity.p, cfg.problem.s, cfg.problem.dim
        )
        result = {"growth": growth.dict, "potential": None}
        passed = growth.passed
        if cfg.potential is not None:
            potential = check_A1_A2(cfg.potential)
            result["potential"] = potential.dict
            passed = passed and potential.passed
        result["passed"] = passed

        if not passed:
            logger.warning("Validation found failing checks")
        self.output.write_json("validation.json", result)
        return result

    def _write_solution(self, name: str, result: SolveResult):
        if result.trace:
            self.output.write_trace(name, result.trace)
        if self.dump_fields and result.u is not None:
            self.output.dump_field(name, result.u)

    def _seed_from_file(self) -> Field | None:
        solve = self.config.solve
        if solve is None or solve.seed_file is None:
            return None
        try:
            seed = read_field_dump(solve.seed_file)
        except (OSError, KeyError, ValueError) as e:
            raise ConfigError(f"Unreadable seed dump: {e}", "solve.seed_file") from e
        grid = self.config.grid
        if seed.grid != grid:
            logger.info(f"Resampling seed from {seed.grid.points} to {grid.points} points")
            try:
                seed = resample(seed, grid)
            except GridMismatchError as e:
                raise ConfigError(str(e), "solve.seed_file") from e
        return seed

    def solve(self) -> dict:
        cfg = self.config
        grid, s, nl, a = cfg.grid, cfg.problem.s, cfg.nonlinearity, cfg.mass
        variant = cfg.solve.variant if cfg.solve else Variant.AUTONOMOUS
        seed = self._seed_from_file()

        if variant == Variant.AUTONOMOUS:
            ctx = EnergyContext.autonomous(
                grid, s, nl, cfg.autonomous.eta, cfg.autonomous.mu
            )
            result = solve_ground_state(
                ctx,
                a,
                cfg.solver,
                seeds=None if seed is None else [seed],
                threads=self.threads,
            )
        else:
            spec, eps = cfg.potential, cfg.solve.eps
            ctx = EnergyContext.nonautonomous(grid, s, nl, spec, eps)
            _, frozen = frozen_levels(spec, nl, s, grid, a, cfg.solver, self.threads)
            seeds = [
                translate(r.u, np.array(c) / eps)
                for r, c in zip(frozen, spec.centers)
                if r.u is not None
            ]
            if seed is not None:
                seeds.insert(0, seed)
            if not seeds:
                raise NumericalFailureError("No frozen minimizer to seed from")
            result = multistart(ctx, a, seeds, cfg.solver, threads=self.threads)[0]
            if result.u is not None:
                geom = choose_geometry(spec.centers)
                result.barycenter = barycenter(result.u, eps, geom.chi)
                logger.info(
                    f"Solution sits in region {region_membership(result.u, eps, geom)}"
                )

        if not result.ok:
            raise NumericalFailureError(f"Solve failed: {result.error}")
        logger.info(
            f"E = {result.energy:.12g}, lambda = {result.lam:.12g}, "
            f"{result.iterations} iterations ({result.status.value})"
        )
        output = result.dict
        if ctx.translation_invariant:
            probe = coercivity_probe(ctx, result.u, COERCIVITY_TAUS)
            if not probe.eventually_increasing:
                logger.warning("Energy does not rise along the concentrating fiber")
            output["coercivity"] = probe.dict
        self.output.write_json("result.json", output)
        self._write_solution("solution", result)
        return output

    def landscape(self) -> dict:
        cfg = self.config
        block = cfg.landscape
        grid, s, nl = cfg.grid, cfg.problem.s, cfg.nonlinearity
        ctx = EnergyContext.autonomous(grid, s, nl, cfg.autonomous.eta, cfg.autonomous.mu)

        curve = energy_curve(
            ctx, block.masses, cfg.solver, warm_start=block.warm_start, threads=self.threads
        )
        report = check_landscape(curve, block.pairs, block.thetas, block.tol)
        self.output.write_curve("curve.csv", curve.rows)
        for a, r in zip(curve.masses, curve.results):
            self._write_solution(f"mass_{a:g}", r)
        output = {"curve": curve.dict, "report": report.dict}

        if block.resolution_check:
            index = int(np.argmin(np.abs(np.array(curve.masses) - cfg.mass)))
            check = resolution_stability(
                ctx, curve.masses[index], cfg.solver, coarse=curve.results[index]
            )
            output["resolution"] = {
                "mass": curve.masses[index],
                "coarse": check.coarse.energy,
                "fine": check.fine.energy,
                "relative_change": check.relative_change,
            }

        levels = {}
        if block.frozen_pairs:
            levels["monotonicity"] = [
                frozen_monotonicity_check(h1, v1, h2, v2, nl, s, grid, cfg.mass, cfg.solver).dict
                for h1, v1, h2, v2 in block.frozen_pairs
            ]
        if cfg.potential is not None:
            spec = cfg.potential
            center = spec.centers[0]
            levels["constant_shift"] = constant_shift_identity(
                spec.h_at(center), spec.v_at(center), nl, s, grid, cfg.mass, cfg.solver
            ).dict
        if block.eps:
            width = self._solution_width(curve)
            grids = [
                cfg.problem.grid_with_box(
                    max(
                        cfg.problem.box_length,
                        required_box_length(cfg.potential.centers, eps, width),
                    )
                )
                for eps in block.eps
            ]
            sweep, trend = epsilon_sweep(
                cfg.potential, nl, s, grids, cfg.mass, block.eps, cfg.solver, self.threads
            )
            levels["sweep"] = [
                dict(item.dict, report=item.report().dict) for item in sweep
            ]
            levels["trend"] = trend.dict
        if levels:
            output["levels"] = levels

        self.output.write_json("landscape.json", output)
        return output

    def _solution_width(self, curve) -> float:
        for r in curve.results:
            if r.u is not None:
                return field_width(r.u)
        return 1.0

    def multiplicity(self) -> dict:
        cfg = self.config
        block = cfg.multiplicity
        report = multiplicity_experiment(
            cfg.potential,
            cfg.nonlinearity,
            cfg.problem.s,
            cfg.grid,
            cfg.mass,
            block.eps,
            cfg.solver,
            rho0=block.rho0,
            rho0_fraction=block.rho0_fraction,
            threads=self.threads,
        )
        for entry in report.entries:
            self._write_solution(f"region_{entry.index}", entry.result)
        self.output.emit_results([entry.result for entry in report.entries], "regions")
        output = report.dict
        self.output.write_json("multiplicity.json", output)
        if not report.success:
            logger.warning(f"Multiplicity criteria failed: {report.failed_criteria}")
        return output


def default_output_dir(command: Command) -> str:
    stamp = datetime.now(tz=timezone.utc).strftime("%Y%m%d-%H%M%S")
    return os.path.join(Config.OUTPUT_DIR, f"{Command(command).value}-{stamp}")
