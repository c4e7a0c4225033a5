import re
from typing import List


def parse_seeds_str(input_str: str, max_seed: int = None) -> str:
    """Validate a seed list such as ``1-10,15`` and return it without spaces."""
    input_str = input_str.replace(" ", "")
    if not input_str:
        raise ValueError("empty seed list")

    for part in input_str.split(","):
        if re.fullmatch(r"\d+", part):
            seed = int(part)
            if max_seed is not None and seed > max_seed:
                raise ValueError(f"seed out of range: {part}")
        elif re.fullmatch(r"\d+-\d+", part):
            start, end = map(int, part.split("-"))
            if start > end:
                raise ValueError(f"invalid seed range: {part}")
            if max_seed is not None and end > max_seed:
                raise ValueError(f"seed range out of range: {part}")
        else:
            raise ValueError(f"malformed seed entry: {part}")

    return input_str


def extract_seeds(range_str: str) -> List[int]:
    result = set()
    for part in parse_seeds_str(range_str).split(","):
        if "-" in part:
            start, end = map(int, part.split("-"))
            result.update(range(start, end + 1))
        else:
            result.add(int(part))
    return sorted(result)


def merge_seeds(seeds: List[int]) -> str:
    if not seeds:
        return ""

    seeds = sorted(set(seeds))
    ranges = []
    start = prev = seeds[0]

    for s in seeds[1:]:
        if s == prev + 1:
            prev = s
        else:
            ranges.append(str(start) if start == prev else f"{start}-{prev}")
            start = prev = s

    ranges.append(str(start) if start == prev else f"{start}-{prev}")
    return ",".join(ranges)


def is_valid_seed_list(range_str: str) -> bool:
    try:
        parse_seeds_str(range_str)
        return True
    except ValueError:
        return False


def parse_tau(value) -> float | str:
    """``auto`` or a positive float."""
    if isinstance(value, str) and value.strip().lower() == "auto":
        return "auto"
    tau = float(value)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {value}")
    return tau


def parse_lipschitz(value) -> float | str:
    """``probabilistic`` or a nonnegative float."""
    if isinstance(value, str) and value.strip().lower() == "probabilistic":
        return "probabilistic"
    L_f = float(value)
    if L_f < 0:
        raise ValueError(f"Lipschitz constant must be nonnegative, got {value}")
    return L_f
