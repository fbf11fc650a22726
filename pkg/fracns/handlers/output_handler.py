import csv
import json
import logging
import os

import humanize
import numpy as np

from fracns.modules.optimizer import SolveResult, TracePoint
from fracns.modules.spectral import Field, Grid
from fracns.utils import dumps

logger = logging.getLogger(__name__)

CURVE_HEADER = ("mass", "energy", "lambda", "pohozaev_rel", "converged")
RESULT_HEADER = CURVE_HEADER + ("pohozaev_virial", "status")
TRACE_HEADER = ("iteration", "energy", "grad_norm", "step")
DUMP_DTYPE = "<f8"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class OutputHandler:
    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        os.makedirs(self.output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _written(self, path: str) -> str:
        logger.info(f"Wrote {path} ({humanize.naturalsize(os.path.getsize(path))})")
        return path

    def write_json(self, name: str, value) -> str:
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(dumps(value))
        return self._written(path)

    def write_csv(self, name: str, header, rows: list[dict]) -> str:
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(row.get(column)) for column in header])
        return self._written(path)

    def emit_results(self, results: list[SolveResult], name: str = "results"):
        """
        <name>.json holds the result records; <name>.csv the curve columns plus the
        virial form and status, only for a nonempty list.
        """
        paths = [self.write_json(f"{name}.json", [r.dict for r in results])]
        if results:
            rows = [
                {
                    "mass": r.mass,
                    "energy": r.energy,
                    "lambda": r.lam,
                    "pohozaev_rel": r.pohozaev_rel,
                    "pohozaev_virial": r.pohozaev_virial,
                    "converged": r.converged,
                    "status": r.status.value,
                }
                for r in results
            ]
            paths.append(self.write_csv(f"{name}.csv", RESULT_HEADER, rows))
        return paths

    def write_curve(self, name: str, rows: list[dict]) -> str:
        return self.write_csv(name, CURVE_HEADER, rows)

    def write_trace(self, name: str, trace: list[TracePoint]) -> str:
        return self.write_csv(f"trace_{name}.csv", TRACE_HEADER, [t._asdict() for t in trace])

    def dump_field(self, name: str, u: Field) -> str:
        """<name>.bin as flat little-endian doubles in C order plus a <name>.json sidecar."""
        path = self.path(f"{name}.bin")
        with open(path, "wb") as f:
            f.write(np.ascontiguousarray(u.values, dtype=DUMP_DTYPE).tobytes(order="C"))
        sidecar = dict(u.grid.dict, dtype=DUMP_DTYPE, order="C")
        self.write_json(f"{name}.json", sidecar)
        return self._written(path)

    def write_manifest(self, manifest: dict) -> str:
        return self.write_json("manifest.json", manifest)


def read_field_dump(path: str) -> Field:
    """Reads <path>.bin with its <path>.json sidecar; path may carry either suffix."""
    stem, ext = os.path.splitext(path)
    if ext not in (".bin", ".json"):
        stem = path
    with open(f"{stem}.json", "r", encoding="utf-8") as f:
        meta = json.load(f)
    grid = Grid(meta["dim"], tuple(meta["box_length"]), tuple(meta["points"]))
    values = np.fromfile(f"{stem}.bin", dtype=meta.get("dtype", DUMP_DTYPE))
    return Field(grid, values.reshape(grid.shape, order=meta.get("order", "C")))
