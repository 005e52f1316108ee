"""Formation loss, empirical CDFs and nearest-rank percentiles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .controller import ControlGains, reference_trajectory
from .formation import AgentGraph


@dataclass(frozen=True)
class LossSample:
    """Loss of one episode at one sampling instant."""

    episode: int
    t: float
    loss_true: float
    loss_estimated: float


def formation_loss(positions: np.ndarray, t: float, graph: AgentGraph,
                   gains: ControlGains, horizon: float) -> float:
    """Tracking error plus weighted squared distance-constraint violations.

    ``positions`` is (n, d) over agents; the centroid term compares their
    mean against the reference at time t, the formation term sums
    a_ij * (|p_i - p_j|^2 - d_ij^2)^2 over graph edges.
    """
    p = np.asarray(positions, dtype=float)
    batch = batch_loss(p[None, :, :], t, graph, gains, horizon)
    return float(batch[0])


def batch_loss(positions: np.ndarray, t: float, graph: AgentGraph,
               gains: ControlGains, horizon: float) -> np.ndarray:
    """Formation loss over a (..., n, d) stack of position snapshots."""
    ref = reference_trajectory(t, horizon)
    centroid = positions.mean(axis=-2)
    track = 0.5 * gains.kp * ((centroid - ref) ** 2).sum(axis=-1)
    u = positions[..., graph.edges[:, 0], :] - positions[..., graph.edges[:, 1], :]
    sq = np.einsum("...ed,...ed->...e", u, u)
    shape = 0.5 * gains.kf * (graph.edge_w * (sq - graph.dist_sq) ** 2).sum(axis=-1)
    return track + shape


def pooled_losses(samples: Sequence[LossSample], burn_in: float = 1.0,
                  estimated: bool = False) -> np.ndarray:
    """All loss values with t > burn_in, across episodes, in input order."""
    pick = (lambda s: s.loss_estimated) if estimated else (lambda s: s.loss_true)
    vals = np.array([pick(s) for s in samples if s.t > burn_in])
    if vals.size == 0:
        raise ValueError("no samples remain after the burn-in filter")
    return vals


def ecdf(samples: Sequence[LossSample], burn_in: float = 1.0,
         estimated: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF of post-burn-in losses.

    Returns (values, probabilities): sorted values with cumulative
    probability k/m at the k-th of m points. Right-continuous and ends at 1.
    """
    vals = np.sort(pooled_losses(samples, burn_in, estimated), kind="stable")
    probs = np.arange(1, vals.size + 1) / vals.size
    return vals, probs


def ecdf_at(values: np.ndarray, probs: np.ndarray, x: float) -> float:
    """Evaluate an ECDF returned by ``ecdf`` at point x."""
    return float(probs[np.searchsorted(values, x, side="right") - 1]) \
        if x >= values[0] else 0.0


def percentile(values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the ceil(q*m)-th of m sorted values."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    vals = np.sort(np.asarray(values, dtype=float), kind="stable")
    if vals.size == 0:
        raise ValueError("percentile of empty input")
    rank = int(np.ceil(q * vals.size))
    return float(vals[max(rank, 1) - 1])
