"""Reward evaluation with isomorphism-class caching and two-stage screening.

Rewards are functions of the isomorphism class, so values are cached by
canonical code and isomorphic population members cost one evaluation (and at
most one oracle round trip).  Screening scores the whole population with a
cheap surrogate (typically the m-Bezout upper bound) and spends the
expensive main reward only on the top fraction.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .graphs import CanonicalCode, Graph, decode_int
from .nac import count_nac


class CachedReward:
    """Evaluator over canonical codes with a per-run cache."""

    def __init__(self, name: str, fn: Callable[[Graph], int]):
        self.name = name
        self.fn = fn
        self.cache: dict[CanonicalCode, int] = {}
        self.misses = 0

    def value(self, cc: CanonicalCode) -> int:
        if cc not in self.cache:
            self.misses += 1
            self.cache[cc] = self.fn(decode_int(cc.code, cc.n))
        return self.cache[cc]

    def __call__(self, g: Graph) -> int:
        from .graphs import canonical_code

        return self.value(canonical_code(g))


def make_reward(name: str, oracle=None, nac_guard: int = 34) -> CachedReward:
    """nac counts in process; plane/sphere/mbezout go through the oracle."""
    if name == "nac":
        return CachedReward("nac", lambda g: count_nac(g, max_edges=nac_guard))
    if name in ("plane", "sphere", "mbezout"):
        if oracle is None:
            raise ValueError(f"reward {name!r} needs an oracle")
        from .oracle import oracle_query

        return CachedReward(name, lambda g: oracle_query(oracle, name, g))
    raise ValueError(f"unknown reward {name!r}")


def two_stage_select(
    codes: Sequence[CanonicalCode],
    surrogate: CachedReward | None,
    main: CachedReward,
    rho_main: float,
) -> list[tuple[int, int]]:
    """Pick ceil(rho_main * len(codes)) members by descending surrogate score
    and evaluate the main reward on them.  rho_main = 1 evaluates everyone
    and never touches the surrogate.  Returns (population index, main value)
    pairs; surrogate ties break toward the smaller canonical code, then the
    earlier population slot.
    """
    if not 0 < rho_main <= 1:
        raise ValueError(f"rho_main must be in (0, 1], got {rho_main}")
    idxs = list(range(len(codes)))
    if rho_main < 1:
        if surrogate is None:
            raise ValueError("rho_main < 1 needs a surrogate reward")
        scores = [surrogate.value(codes[i]) for i in idxs]
        idxs.sort(key=lambda i: (-scores[i], codes[i], i))
        idxs = idxs[: math.ceil(rho_main * len(codes))]
    return [(i, main.value(codes[i])) for i in sorted(idxs)]
