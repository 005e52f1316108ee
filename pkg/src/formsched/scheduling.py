"""Localization scheduling: AoI bookkeeping and the selection policies.

One agent per slot of length ts receives an exact position fix (the oracle
policy fixes everyone). Selection depends only on ages, noise levels and
centralities, never on positions, so whole schedules can be computed
offline. Ties always break toward the lowest agent index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Union

import numpy as np

POLICIES = ("maf", "mee", "mv", "oracle")
ORACLE_ALL = "all"

Selection = Union[int, str]   # 1-based agent index, or ORACLE_ALL


def voi_mee(aoi: float, sigma: float, dim: int) -> float:
    """Expected squared positioning error dim * sigma^2 * aoi (m^2)."""
    return dim * sigma * sigma * aoi


def voi_mv(aoi: float, sigma: float, zeta: float, dim: int) -> float:
    """Centrality-weighted expected squared error zeta * dim * sigma^2 * aoi."""
    return zeta * voi_mee(aoi, sigma, dim)


def select(policy: str, slot: int, aoi: Sequence[float], sigma: Sequence[float],
           zeta: Sequence[float], dim: int) -> Selection:
    """Agent localized at scheduling slot ``slot`` (>= 1).

    ``aoi`` holds each agent's age at t = slot * ts, before the reset.
    Returns a 1-based agent index, or ORACLE_ALL under the oracle policy.
    """
    if slot < 1:
        raise ValueError("slot index starts at 1")
    if policy == "oracle":
        return ORACLE_ALL
    aoi = np.asarray(aoi, dtype=float)
    if policy == "maf":
        score = aoi
    elif policy == "mee":
        score = dim * np.asarray(sigma, dtype=float) ** 2 * aoi
    elif policy == "mv":
        score = (np.asarray(zeta, dtype=float)
                 * dim * np.asarray(sigma, dtype=float) ** 2 * aoi)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    # argmax returns the first maximum, which is the lowest agent index
    return int(np.argmax(score)) + 1


@dataclass
class AoiTracker:
    """Integer slot-age bookkeeping for one episode.

    Ages count scheduling slots since each agent's last fix, so AoI values
    at slot boundaries are exact multiples of ts with no accumulation error.
    """

    n: int
    ages: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ages = np.zeros(self.n, dtype=np.int64)

    def advance(self) -> None:
        self.ages += 1

    def aoi(self, ts: float) -> np.ndarray:
        return self.ages * ts

    def reset(self, selection: Selection) -> None:
        if selection == ORACLE_ALL:
            self.ages[:] = 0
        else:
            self.ages[int(selection) - 1] = 0


def schedule_iter(policy: str, sigma: Sequence[float], zeta: Sequence[float],
                  dim: int, ts: float = 1.0) -> Iterator[Selection]:
    """Endless slot-by-slot selections from the all-localized start state."""
    sigma = np.asarray(sigma, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    tracker = AoiTracker(len(sigma))
    slot = 0
    while True:
        slot += 1
        tracker.advance()
        chosen = select(policy, slot, tracker.aoi(ts), sigma, zeta, dim)
        tracker.reset(chosen)
        yield chosen


def precompute_schedule(policy: str, sigma: Sequence[float],
                        zeta: Sequence[float], dim: int, n_slots: int,
                        ts: float = 1.0) -> List[Selection]:
    """First ``n_slots`` selections; equals the online choices slot by slot."""
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    it = schedule_iter(policy, sigma, zeta, dim, ts)
    return [next(it) for _ in range(n_slots)]
