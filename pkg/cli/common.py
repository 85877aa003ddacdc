"""Argument types and the per-invocation context shared by the command modules."""
import argparse
from typing import List, Tuple, Type, TypeVar, Union

from core.analysis.experiments import parse_distance
from core.services.base_service import BaseService
from utils.errors import InvalidArgumentError

S = TypeVar("S", bound=BaseService)

class CommandContext:
    """Services created by one command; their outputs are removed if the command fails."""

    def __init__(self):
        self.services: List[BaseService] = []

    def service(self, cls: Type[S], *args, **kwargs) -> S:
        instance = cls(*args, **kwargs)
        self.services.append(instance)
        return instance

    def cleanup(self) -> int:
        return sum(service.remove_partial_outputs() for service in self.services)

def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value

def non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return value

def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return value

def float_list(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values

def distance_list(text: str) -> List[Union[float, str]]:
    """Comma-separated distances in metres; `ortho` stands for the orthographic camera."""
    try:
        values = [parse_distance(part.strip()) for part in text.split(",") if part.strip()]
    except InvalidArgumentError as e:
        raise argparse.ArgumentTypeError(e.detail)
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values

def positive_distances(text: str) -> List[float]:
    values = float_list(text)
    if any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError(f"distances must be positive, got {text!r}")
    return values

def pair(text: str) -> Tuple[float, float]:
    values = float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return values[0], values[1]

def triple(text: str) -> Tuple[float, float, float]:
    values = float_list(text)
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return values[0], values[1], values[2]

def image_size(text: str) -> Tuple[int, int]:
    width, height = pair(text)
    if width < 1 or height < 1 or width != int(width) or height != int(height):
        raise argparse.ArgumentTypeError(f"expected positive integer WIDTH,HEIGHT, got {text!r}")
    return int(width), int(height)

def add_seed(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0, help="base random seed (default 0)")

def add_threads(parser: argparse.ArgumentParser):
    parser.add_argument("--threads", type=positive_int, default=None,
                        help="worker threads (default GEOFIT_THREADS); output does not depend on it")

def seed_range(base: int, count: int) -> List[int]:
    return list(range(base, base + count))
