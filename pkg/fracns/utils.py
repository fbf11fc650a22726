import hashlib
import json
from dataclasses import asdict, is_dataclass
from enum import Enum

import numpy as np


def md5hash(name: str) -> str:
    h = hashlib.md5()
    h.update(name.encode("utf-8"))
    return h.hexdigest()


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def jsonable(value):
    """
    Converts numpy scalars/arrays, enums, tuples and dataclasses into plain
    JSON types. Non-finite floats become None.
    """
    if is_dataclass(value) and not isinstance(value, type):
        return jsonable(asdict(value))
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def dumps(value) -> str:
    return json.dumps(jsonable(value), indent=2, sort_keys=True) + "\n"
