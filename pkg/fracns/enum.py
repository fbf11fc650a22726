from enum import Enum


class NonlinearityForm(Enum):
    PURE_POWER = "pure_power"
    TWO_POWER = "two_power"


class Profile(Enum):
    GAUSSIAN = "gaussian"
    SECH2 = "sech2"


class Variant(Enum):
    NONAUTONOMOUS = "nonautonomous"
    AUTONOMOUS = "autonomous"
    FROZEN = "frozen"


class SolveStatus(Enum):
    CONVERGED = "CONVERGED"
    MAX_ITERS = "MAX_ITERS"
    STALLED = "STALLED"
    FAILED = "FAILED"


class Command(Enum):
    VALIDATE = "validate"
    SOLVE = "solve"
    LANDSCAPE = "landscape"
    MULTIPLICITY = "multiplicity"


class ExitStatus(Enum):
    OK = 0
    CONFIG_ERROR = 1
    USAGE_ERROR = 2
    COMPUTE_ERROR = 3
    IO_ERROR = 4
