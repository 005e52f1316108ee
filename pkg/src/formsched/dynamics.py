"""First-order agent motion with actuation noise and localization resets.

True positions integrate the commanded velocity plus white per-axis noise
(Euler-Maruyama); estimated positions dead-reckon on the commanded velocity
alone, so the estimation error is a scaled random walk until the next fix.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass
class AgentState:
    """One agent's kinematic state. Positions are d-vectors in meters."""

    true_position: np.ndarray
    estimated_position: np.ndarray
    commanded_velocity: np.ndarray
    noise_std: float            # m/s, per-axis Wiener intensity
    aoi: float = 0.0            # seconds since last localization


def advance_positions(p: np.ndarray, p_hat: np.ndarray, v: np.ndarray,
                      sigma: np.ndarray | float, dt: float,
                      noise: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Advance true and estimated positions by one step of length dt.

    ``noise`` holds standard-normal draws shaped like ``p``; ``sigma``
    broadcasts against the leading axes. Returns new (p, p_hat).
    """
    drift = v * dt
    p_new = p + drift + np.multiply(sigma, np.sqrt(dt)) * noise
    return p_new, p_hat + drift


def step_agent(state: AgentState, dt: float, rng: np.random.Generator) -> AgentState:
    """One integration step for a single agent; AoI grows by dt."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    g = rng.standard_normal(state.true_position.shape)
    p, p_hat = advance_positions(state.true_position, state.estimated_position,
                                 state.commanded_velocity, state.noise_std, dt, g)
    return replace(state, true_position=p, estimated_position=p_hat,
                   aoi=state.aoi + dt)


def localize(state: AgentState) -> AgentState:
    """Exact position fix: estimate snaps to truth and AoI resets to zero."""
    return replace(state, estimated_position=state.true_position.copy(), aoi=0.0)
