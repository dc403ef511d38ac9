import os
import re
from fractions import Fraction
from math import ceil

WORKERS_ENV = "EBDG_MAX_WORKERS"
ORDER_RANGE_PATTERN = re.compile(r'^\s*(\d+)\s*\.\.\s*(\d+)\s*$')


def parse_fraction(value: str | float | int) -> float:
    """Numbers or strings such as ``"1/40"``, ``"0.025"``."""
    if isinstance(value, bool):
        raise ValueError(f"Invalid number: {value}.")
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(Fraction(value.strip()))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"Invalid number or fraction: {value}.") from None


def parse_orders(value: str) -> list[int]:
    """``"1..4"`` or ``"1,2,4"`` to a list of polynomial orders."""
    match = ORDER_RANGE_PATTERN.match(value)
    if match:
        first, last = int(match.group(1)), int(match.group(2))
        if first > last:
            raise ValueError(f"Empty order range: {value}.")
        return list(range(first, last + 1))
    try:
        return [int(item) for item in parse_list(value)]
    except ValueError:
        raise ValueError(f"Invalid order list: {value}. Expected e.g. '1..4' or '1,2,3'.") from None


def parse_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_levels(value: str) -> list[float]:
    """Comma separated element sizes, e.g. ``"1/10,1/20,1/40"``."""
    levels = [parse_fraction(item) for item in parse_list(value)]
    if not levels:
        raise ValueError("At least one element size is required.")
    return levels


def halving_levels(coarsest: float, count: int) -> list[float]:
    return [coarsest / 2 ** i for i in range(count)]


def resolve_worker_count(requested: int | None = None) -> int:
    """Worker count from the environment, the request or the CPU count, in that order, capped at the CPU count."""
    cpu_count = os.cpu_count() or 1
    env = os.environ.get(WORKERS_ENV)
    if env is not None:
        try:
            requested = int(env)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer, got '{env}'.") from None
    if requested is None:
        return cpu_count
    if requested < 1:
        raise ValueError(f"Worker count must be positive, got {requested}.")
    return min(requested, cpu_count)


def calculate_chunksize(num_items: int, num_workers: int) -> int:
    # aim for about four chunks per worker
    chunks_per_worker = 4
    chunksize = max(1, ceil(num_items / (num_workers * chunks_per_worker)))
    return min(chunksize, 100)
