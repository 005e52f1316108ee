"""Distributed consensus estimator of the stacked position vector.

Each agent i carries n blocks q^i_1 .. q^i_n of dimension d; block j is
agent i's running estimate of agent j's position. Blocks relax toward
neighbor consensus, the own block is additionally pinned to the agent's own
estimated position, and commanded velocities of the closed neighborhood are
fed forward. The mean of the blocks is the agent's local centroid estimate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formation import AgentGraph


@dataclass
class EstimatorState:
    """Consensus state of one agent: blocks[j] estimates agent j+1's position."""

    blocks: np.ndarray   # (n, d) meters


def init_blocks(graph: AgentGraph, p_hat0: np.ndarray) -> np.ndarray:
    """Initial (n, n, d) block tensor for all agents.

    For blocks inside the closed neighborhood the locally available estimate
    is used directly; every other block starts at the closed-neighborhood
    mean of the initial estimates.
    """
    n = graph.n
    p_hat0 = np.asarray(p_hat0, dtype=float)
    if p_hat0.shape != (n, graph.d):
        raise ValueError(f"p_hat0 must have shape ({n}, {graph.d})")
    q = np.tile(p_hat0[None, :, :], (n, 1, 1))
    for i in range(n):
        closed = (i, *graph.neighbor_lists[i])
        mean = p_hat0[list(closed)].mean(axis=0)
        outside = [j for j in range(n) if j not in closed]
        q[i, outside, :] = mean
    return q


def init_estimator(graph: AgentGraph, p_hat0: np.ndarray) -> list[EstimatorState]:
    """Per-agent estimator states initialized from the t=0 estimates."""
    q = init_blocks(graph, p_hat0)
    return [EstimatorState(blocks=q[i].copy()) for i in range(graph.n)]


def block_rates(q: np.ndarray, p_hat: np.ndarray, v: np.ndarray,
                graph: AgentGraph, ke: float) -> np.ndarray:
    """Time derivative of the full block tensor, batch aware.

    ``q`` has shape (..., n, n, d) indexed (agent, block, axis); ``p_hat``
    and ``v`` have shape (..., n, d). The three terms are neighbor consensus
    on whole block vectors, the own-block pin toward p_hat, and the
    commanded-velocity feedforward masked to the closed neighborhood.
    """
    n = graph.n
    own = np.arange(n)
    coupled = np.einsum("ij,...jkl->...ikl", graph.weights, q)
    dq = -ke * (graph.weighted_degree[:, None, None] * q - coupled)
    dq[..., own, own, :] -= ke * graph.node_w[:, None] * (q[..., own, own, :] - p_hat)
    dq += graph.closed_neighbor_mask[:, :, None] * v[..., None, :, :]
    return dq


def estimator_derivative(agent: int, states: list[EstimatorState],
                         p_hat_i: np.ndarray, v: np.ndarray,
                         graph: AgentGraph, ke: float) -> np.ndarray:
    """q-dot of one agent (1-based index) given everyone's current states.

    Only the agent's own blocks, its neighbors' blocks, its own estimate and
    closed-neighborhood velocities enter the result.
    """
    i = agent - 1
    n = graph.n
    dq = np.zeros_like(states[i].blocks)
    qi = states[i].blocks
    for j in graph.neighbor_lists[i]:
        dq -= ke * graph.weights[i, j] * (qi - states[j].blocks)
    dq[i] -= ke * graph.node_w[i] * (qi[i] - p_hat_i)
    for j in (i, *graph.neighbor_lists[i]):
        dq[j] += v[j]
    return dq


def local_centroid(state: EstimatorState) -> np.ndarray:
    """The agent's centroid estimate: arithmetic mean of its blocks."""
    return state.blocks.mean(axis=0)


def local_centroids(q: np.ndarray) -> np.ndarray:
    """Centroid estimates of all agents from a (..., n, n, d) block tensor."""
    return q.mean(axis=-2)
