"""4-almost bijections between adjacent Hamming-weight slices and path choice.

Subsets of ``{0..2R-1}`` are bitmasks.  ``f`` maps a weight-``t`` set to
one of its ``(t-1)``-subsets for ``t <= R``; ``g(x) = ~f(~x)`` maps a
weight-``t`` set to a ``(t+1)``-superset for ``t >= R``.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations

from .grid_core import max_bipartite_matching

MAX_WIDTH = 24
CAPACITY = 4


class ParameterError(ValueError):
    pass


class LopsidedError(ValueError):
    """The group weight is outside the range where paths can be chosen."""


def popcount(x: int) -> int:
    return bin(x).count("1")


def slice_sets(width: int, t: int) -> list[int]:
    out = []
    for combo in combinations(range(width), t):
        mask = 0
        for i in combo:
            mask |= 1 << i
        out.append(mask)
    return sorted(out)


def bits_to_mask(bits) -> int:
    mask = 0
    for i, b in enumerate(bits):
        if b:
            mask |= 1 << i
    return mask


def mask_to_bits(mask: int, width: int) -> tuple:
    return tuple((mask >> i) & 1 for i in range(width))


@lru_cache(maxsize=None)
def f_table(width: int, t: int) -> dict:
    """Surjection from the weight-``t`` slice onto the weight-``t-1`` slice.

    A matching saturating the lower slice is found first; the remaining
    upper sets are then spread over the lower sets with at most three more
    preimages each.
    """
    if width % 2 or width > MAX_WIDTH:
        raise ParameterError(f"width must be even and at most {MAX_WIDTH}")
    R = width // 2
    if not 1 <= t <= R:
        raise ParameterError(f"f needs 1 <= t <= R, got t={t}, R={R}")
    upper = slice_sets(width, t)
    lower = slice_sets(width, t - 1)
    # lower sets on the left so the matching saturates them
    adj = {lo: [up for up in _supersets(lo, width)] for lo in lower}
    m1 = max_bipartite_matching(lower, adj)  # upper -> lower
    if len(m1) != len(lower):
        raise ParameterError("no matching saturates the lower slice")
    table = dict(m1)
    rest = [u for u in upper if u not in table]
    copies = {
        u: [(u ^ (1 << i), c) for i in range(width) if u >> i & 1 for c in range(CAPACITY - 1)]
        for u in rest
    }
    m2 = max_bipartite_matching(rest, copies)  # (lower, copy) -> upper
    if len(m2) != len(rest):
        raise ParameterError(f"no {CAPACITY}-almost bijection at width {width}, t={t}")
    for (lo, _), up in m2.items():
        table[up] = lo
    return table


def _supersets(lo: int, width: int) -> list[int]:
    return [lo | (1 << i) for i in range(width) if not lo >> i & 1]


@lru_cache(maxsize=None)
def f_inverse(width: int, t: int) -> dict:
    inv: dict = {}
    for up, lo in f_table(width, t).items():
        inv.setdefault(lo, []).append(up)
    return {k: sorted(v) for k, v in inv.items()}


def almost_bijection_f(v, width: int | None = None) -> int:
    """Image of a weight-``t`` set (bitmask or bit vector) under ``f``."""
    if not isinstance(v, int):
        width = len(v)
        v = bits_to_mask(v)
    return f_table(width, popcount(v))[v]


def almost_bijection_g(v: int, width: int) -> int:
    full = (1 << width) - 1
    return full ^ almost_bijection_f(full ^ v, width)


def g_preimages(v: int, width: int) -> list[int]:
    """Sets ``u`` of weight ``|v|-1`` with ``g(u) = v``, sorted."""
    full = (1 << width) - 1
    t = width - popcount(v) + 1  # weight of complements of preimages
    return sorted(full ^ u for u in f_inverse(width, t).get(full ^ v, []))


def select(candidates: list, advice: tuple[int, int]):
    """Pick one of at most four candidates with two advice bits."""
    b1, b2 = advice
    k = len(candidates)
    if k == 1:
        return candidates[0]
    if k == 2:
        return candidates[b1]
    if k == 3:
        return candidates[0] if b1 == b2 else candidates[1 + b1]
    if k == 4:
        return candidates[2 * b1 + b2]
    raise ParameterError(f"{k} candidates cannot be selected by two bits")


def candidates(state: int, width: int, direction: str) -> list[int]:
    """Paths whose flip the choice procedure may select, in index order."""
    R = width // 2
    t = popcount(state)
    if direction == "lower":
        if t < 1 or t > 2 * R:
            raise LopsidedError(f"cannot lower weight {t}")
        if t <= R:
            _check_f(width, t)
            return [(state ^ almost_bijection_f(state, width)).bit_length() - 1]
        _check_f(width, width - t + 1)
        return [(state ^ u).bit_length() - 1 for u in g_preimages(state, width)]
    if direction == "raise":
        if t >= R:
            _check_f(width, width - t)
            return [(state ^ almost_bijection_g(state, width)).bit_length() - 1]
        _check_f(width, t + 1)
        return [(state ^ u).bit_length() - 1 for u in f_inverse(width, t + 1).get(state, [])]
    raise ValueError(f"direction must be 'raise' or 'lower', not {direction!r}")


def _check_f(width: int, t: int) -> None:
    if t < 1 or t > width // 2:
        raise LopsidedError(f"weight {t} outside the domain of f")
    # capacity 4 requires C(2R, t) <= 4 C(2R, t-1)
    if (width - t + 1) > CAPACITY * t:
        raise LopsidedError(f"weight {t} too small for a {CAPACITY}-almost bijection")


def choose_path(group_state, direction: str, advice: tuple[int, int] = (0, 0)) -> int:
    """Index of the path to flip (``lower``: 1 -> 0, ``raise``: 0 -> 1)."""
    width = len(group_state)
    state = bits_to_mask(group_state)
    return select(candidates(state, width, direction), advice)


def is_lopsided(group_state) -> bool:
    width = len(group_state)
    t = sum(group_state)
    return t < width / 4 or width - t < width / 4
