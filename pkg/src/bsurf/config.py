"""Defaults, read through functions so callers always get fresh values"""

import os

CLOSURE_CAP = 10**6
MODULUS_CAP = 2**31 - 1
DEFAULT_SEED = 0
SCHEMA_VERSION = 1

# exhaustive abelian-subgroup enumeration
ENUMERATION_MODULI = (3, 5, 7, 9)
EXHAUSTIVE_CONJUGATION_LIMIT = 2016

CAP_ENV_VAR = "BSURF_CAP"


def closure_cap(override: int | None = None) -> int:
    """Resolve the closure cap: explicit override, then environment, then default

    Args:
        override (int | None, optional): Value given on the command line. Defaults to None.

    Raises:
        ValueError: The resolved cap is not a positive integer

    Returns:
        int: Maximum number of elements a closure may reach
    """
    if override is not None:
        cap = int(override)
    elif os.environ.get(CAP_ENV_VAR):
        cap = int(os.environ[CAP_ENV_VAR])
    else:
        cap = CLOSURE_CAP

    if cap < 1:
        raise ValueError(f"closure cap must be positive, got {cap}")

    return cap
