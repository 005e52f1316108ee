"""Velocity commands: centroid tracking plus gradient formation keeping."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .formation import AgentGraph


@dataclass(frozen=True)
class ControlGains:
    """Positive rate gains. ke drives the estimator and should dominate."""

    kp: float = 10.0
    kf: float = 50.0
    ke: float = 100.0

    def __post_init__(self):
        if min(self.kp, self.kf, self.ke) <= 0:
            raise ValueError("all gains must be > 0")
        if self.ke <= max(self.kf, self.kp):
            warnings.warn("estimator gain ke should exceed kf and kp for "
                          "accurate centroid tracking", stacklevel=2)


def reference_trajectory(t: float, horizon: float) -> np.ndarray:
    """Desired centroid position at time t for an episode of length horizon.

    Moves at 1 m/s along x while descending from z ~= 10 m to z ~= 0 m
    through a tanh step centered at horizon / 2.
    """
    return np.array([t, 0.0, 5.0 - 5.0 * np.tanh(t - horizon / 2.0)])


def formation_term(agent: int, p_hat: np.ndarray, graph: AgentGraph,
                   kf: float) -> np.ndarray:
    """Distance-error gradient term for one agent (1-based index)."""
    i = agent - 1
    out = np.zeros(graph.d)
    for j in graph.neighbor_lists[i]:
        u = p_hat[i] - p_hat[j]
        out -= kf * graph.weights[i, j] * (u @ u - _dist_sq(graph, i, j)) * u
    return out


def _dist_sq(graph: AgentGraph, i: int, j: int) -> float:
    a, b = min(i, j), max(i, j)
    k = np.nonzero((graph.edges[:, 0] == a) & (graph.edges[:, 1] == b))[0]
    return float(graph.dist_sq[k[0]])


def control_input(agent: int, p_hat: np.ndarray, centroid_estimate: np.ndarray,
                  t: float, graph: AgentGraph, gains: ControlGains,
                  horizon: float) -> np.ndarray:
    """Commanded velocity of one agent (1-based index).

    ``p_hat`` stacks all current estimated positions (n, d); only the
    agent's own row and its neighbors' rows influence the result.
    """
    i = agent - 1
    track = -gains.kp * graph.node_w[i] * (
        centroid_estimate - reference_trajectory(t, horizon))
    return track + formation_term(agent, p_hat, graph, gains.kf)


def velocities(p_hat: np.ndarray, centroid_estimates: np.ndarray, t: float,
               graph: AgentGraph, gains: ControlGains,
               horizon: float) -> np.ndarray:
    """Commanded velocities of all agents from one snapshot, batch aware.

    ``p_hat`` and ``centroid_estimates`` have shape (..., n, d).
    """
    ref = reference_trajectory(t, horizon)
    v = -gains.kp * graph.node_w[:, None] * (centroid_estimates - ref)
    ei, ej = graph.edges[:, 0], graph.edges[:, 1]
    u = p_hat[..., ei, :] - p_hat[..., ej, :]
    sq = np.einsum("...ed,...ed->...e", u, u)
    pull = (gains.kf * graph.edge_w * (sq - graph.dist_sq))[..., None] * u
    v -= np.einsum("ne,...ed->...nd", graph.incidence, pull)
    return v
