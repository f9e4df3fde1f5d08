"""Fully connected multi-user networks built from dedicated channel pairs.

Every user pair gets its own channel pair; nothing is shared or multiplexed
probabilistically, so ``k`` users need ``k (k - 1) / 2`` channel pairs.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .spectral import ChannelPair


class InsufficientPairsError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    user_i: int
    user_j: int
    pair: ChannelPair
    rate: float


@dataclass(frozen=True)
class NetworkPlan:
    users: int
    links: tuple[Link, ...]
    leftover_pairs: int

    @property
    def total_rate(self) -> float:
        return math.fsum(link.rate for link in self.links)

    @property
    def min_link_rate(self) -> float:
        return min(link.rate for link in self.links)


def links_needed(users: int) -> int:
    return users * (users - 1) // 2


def max_fully_connected_users(n: int) -> int:
    """Largest ``k`` with ``k (k - 1) / 2 <= n``."""
    if n < 1:
        raise ValueError("need at least one channel pair")
    k = int((1 + math.isqrt(1 + 8 * n)) // 2)
    while links_needed(k + 1) <= n:
        k += 1
    while links_needed(k) > n:
        k -= 1
    return k


def point_to_point_users(n: int) -> tuple[int, int]:
    """Range of user counts reachable when channel pairs may share endpoints."""
    if n < 1:
        raise ValueError("need at least one channel pair")
    return 2, 2 * n


def assign_channels(users: int, pairs: Sequence[ChannelPair], rates: Sequence[float]) -> NetworkPlan:
    """Give the best ``k (k - 1) / 2`` channel pairs to the user pairs.

    User pairs in lexicographic order receive channel pairs in order of
    decreasing rate (ties broken by channel index), which maximizes the
    weakest link and makes the plan reproducible.
    """
    if users < 2:
        raise ValueError("a network needs at least two users")
    if len(pairs) != len(rates):
        raise ValueError("one rate per channel pair required")
    need = links_needed(users)
    if len(pairs) < need:
        raise InsufficientPairsError(
            f"{users} users need {need} channel pairs, only {len(pairs)} available"
        )
    ranked = sorted(range(len(pairs)), key=lambda i: (-rates[i], pairs[i].index))
    links = tuple(
        Link(i, j, pairs[c], float(rates[c]))
        for (i, j), c in zip(itertools.combinations(range(1, users + 1), 2), ranked)
    )
    return NetworkPlan(users, links, len(pairs) - need)


def write_plan_csv(plan: NetworkPlan, fh, comment: str | None = None) -> None:
    if comment:
        fh.write(f"# {comment}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["user_i", "user_j", "channel_low_index", "channel_high_index", "rate_bps"])
    for link in plan.links:
        w.writerow([link.user_i, link.user_j, f"{link.pair.itu_low:g}", f"{link.pair.itu_high:g}", repr(link.rate)])
