"""Episode orchestration and Monte Carlo batches over schedulers.

Within one integration step the order is fixed: localization resets (only
at slot boundaries), then loss recording, then control from the current
snapshot, then one Euler step of the estimator and of the positions. Every
scheduler compared under one master seed replays identical initial
conditions, slot assignments and noise, so differences are attributable to
the localization choices alone.

Per-episode randomness is consumed in a documented order from a single
stream seeded with ``derive_seed(master_seed, episode)``: first the n*d
initial position offsets, then the slot permutation, then one block of
standard normals per scheduling window.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import metrics
from ._kernel import advance_window
from .controller import ControlGains, velocities
from .dynamics import advance_positions
from .estimator import init_blocks, local_centroids
from .formation import (FORMATION_KINDS, AgentAssignment, AgentGraph,
                        FormationSpec, agent_graph, assign_agents,
                        build_formation)
from .metrics import LossSample
from .scheduling import ORACLE_ALL, POLICIES, select
from .seeding import episode_rng

INITIAL_POSITION_MEAN = 10.0   # m, every coordinate of every agent
INITIAL_POSITION_STD = 0.1     # m


class EpisodeDiverged(RuntimeError):
    """Raised when an episode produces non-finite state."""

    def __init__(self, scheduler: str, episode: int, t: float):
        super().__init__(f"episode {episode} under scheduler {scheduler!r} "
                         f"diverged near t = {t:.3f} s")
        self.scheduler = scheduler
        self.episode = episode
        self.t = t


@dataclass(frozen=True)
class EpisodeConfig:
    """Parameters of a single episode; times in seconds, lengths in meters."""

    formation: str = "symmetric"
    scheduler: str = "maf"
    duration: float = 10.0
    ts: float = 0.1
    dt: float = 1e-4
    gains: ControlGains = field(default_factory=ControlGains)
    sigma0: float = 0.5
    d0: float = 5.0
    master_seed: int = 0

    def __post_init__(self):
        if self.formation not in FORMATION_KINDS:
            raise ValueError(f"unknown formation {self.formation!r}")
        if self.scheduler not in POLICIES:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if min(self.duration, self.ts, self.dt, self.sigma0, self.d0) <= 0:
            raise ValueError("duration, ts, dt, sigma0 and d0 must be > 0")
        if abs(self.ts / self.dt - round(self.ts / self.dt)) > 1e-9:
            raise ValueError(f"dt={self.dt} must divide ts={self.ts} exactly")
        if abs(self.duration / self.ts - round(self.duration / self.ts)) > 1e-9:
            raise ValueError(f"ts={self.ts} must divide duration={self.duration}")

    @property
    def steps_per_slot(self) -> int:
        return round(self.ts / self.dt)

    @property
    def n_slots(self) -> int:
        return round(self.duration / self.ts)

    @property
    def total_steps(self) -> int:
        return self.n_slots * self.steps_per_slot


def sigma_profile(config: EpisodeConfig, n: int) -> np.ndarray:
    """Per-agent noise levels sigma0 * (1 + i) for agents i = 1..n."""
    return config.sigma0 * (1.0 + np.arange(1, n + 1))


@dataclass
class EpisodeState:
    """Mutable state of one running episode (reference integration path)."""

    config: EpisodeConfig
    episode: int
    spec: FormationSpec
    assignment: AgentAssignment
    graph: AgentGraph
    sigma: np.ndarray          # (n,) per agent
    rng: np.random.Generator
    step: int
    p: np.ndarray              # (n, d) true positions
    phat: np.ndarray           # (n, d) estimated positions
    q: np.ndarray              # (n, n, d) estimator blocks
    ages: np.ndarray           # (n,) int slots since last fix
    aoi: np.ndarray            # (n,) seconds since last fix
    samples: List[LossSample]
    _noise_window: np.ndarray | None = None

    @property
    def t(self) -> float:
        return self.step * self.config.dt


def init_episode(config: EpisodeConfig, episode: int) -> EpisodeState:
    """Fresh episode state; deterministic in (master_seed, episode)."""
    spec = build_formation(config.formation, config.d0)
    if spec.d != 3:
        raise ValueError("episodes require a 3-D formation")
    n, d = spec.n, spec.d
    rng = episode_rng(config.master_seed, episode)
    p0 = (INITIAL_POSITION_MEAN
          + INITIAL_POSITION_STD * rng.standard_normal(n * d)).reshape(n, d)
    assignment = assign_agents(spec, rng)
    graph = agent_graph(spec, assignment)
    phat0 = p0.copy()
    state = EpisodeState(
        config=config, episode=episode, spec=spec, assignment=assignment,
        graph=graph, sigma=sigma_profile(config, n), rng=rng, step=0,
        p=p0, phat=phat0, q=init_blocks(graph, phat0),
        ages=np.zeros(n, dtype=np.int64), aoi=np.zeros(n),
        samples=[],
    )
    _record(state, 0)
    return state


def _record(state: EpisodeState, slot: int) -> None:
    cfg = state.config
    t = slot * cfg.ts
    lt = metrics.formation_loss(state.p, t, state.graph, cfg.gains, cfg.duration)
    le = metrics.formation_loss(state.phat, t, state.graph, cfg.gains, cfg.duration)
    state.samples.append(LossSample(state.episode, t, lt, le))


def _slot_event(state: EpisodeState, slot: int) -> None:
    """Localization and loss sampling at t = slot * ts, slot >= 1."""
    cfg = state.config
    state.ages += 1
    state.aoi += cfg.ts
    chosen = select(cfg.scheduler, slot, state.ages * cfg.ts, state.sigma,
                    state.graph.zeta, state.spec.d)
    if chosen == ORACLE_ALL:
        state.phat[:] = state.p
        state.ages[:] = 0
        state.aoi[:] = 0.0
    else:
        a = int(chosen) - 1
        state.phat[a] = state.p[a]
        state.ages[a] = 0
        state.aoi[a] = 0.0
    _record(state, slot)


def step_episode(state: EpisodeState) -> EpisodeState:
    """Advance the reference path by one dt step (slot events included)."""
    cfg = state.config
    s = state.step
    if s >= cfg.total_steps:
        raise ValueError("episode already ran its full duration")
    spm = cfg.steps_per_slot
    if s > 0 and s % spm == 0:
        _slot_event(state, s // spm)
    t = s * cfg.dt
    pc = local_centroids(state.q)
    v = velocities(state.phat, pc, t, state.graph, cfg.gains, cfg.duration)
    state.q += cfg.dt * _rates(state, v)
    if s % spm == 0:
        state._noise_window = state.rng.standard_normal(
            (spm, state.spec.n, state.spec.d))
    noise = state._noise_window[s % spm]
    state.p, state.phat = advance_positions(
        state.p, state.phat, v, state.sigma[:, None], cfg.dt, noise)
    state.step = s + 1
    if not np.isfinite(state.p).all():
        raise EpisodeDiverged(cfg.scheduler, state.episode, state.t)
    return state


def _rates(state: EpisodeState, v: np.ndarray) -> np.ndarray:
    from .estimator import block_rates
    return block_rates(state.q, state.phat, v, state.graph,
                       state.config.gains.ke)


def finish_episode(state: EpisodeState) -> "EpisodeTrace":
    """Apply the final slot boundary at t = duration and build the trace."""
    if state.step != state.config.total_steps:
        raise ValueError("episode has not run its full duration yet")
    _slot_event(state, state.config.n_slots)
    t = np.array([s.t for s in state.samples])
    lt = np.array([s.loss_true for s in state.samples])
    le = np.array([s.loss_estimated for s in state.samples])
    return EpisodeTrace(state.config.scheduler, state.episode, t, lt, le)


def run_episode_reference(config: EpisodeConfig, episode: int) -> "EpisodeTrace":
    """Full episode on the step-by-step reference path (slow, for testing)."""
    state = init_episode(config, episode)
    for _ in range(config.total_steps):
        step_episode(state)
    return finish_episode(state)


@dataclass(frozen=True)
class EpisodeTrace:
    """Loss samples of one episode at t = 0, ts, 2 ts, ..., duration."""

    scheduler: str
    episode: int
    t: np.ndarray
    loss_true: np.ndarray
    loss_estimated: np.ndarray

    def samples(self) -> List[LossSample]:
        return [LossSample(self.episode, float(t), float(lt), float(le))
                for t, lt, le in zip(self.t, self.loss_true, self.loss_estimated)]


@dataclass(frozen=True)
class RunConfig:
    """A Monte Carlo comparison of schedulers under shared noise."""

    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    schedulers: Tuple[str, ...] = POLICIES
    n_episodes: int = 100
    workers: int = 1
    burn_in: float = 1.0

    def __post_init__(self):
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if len(set(self.schedulers)) != len(self.schedulers):
            raise ValueError("duplicate scheduler in run")
        for s in self.schedulers:
            if s not in POLICIES:
                raise ValueError(f"unknown scheduler {s!r}")


@dataclass(frozen=True)
class SchedulerResult:
    """All episode traces of one scheduler, stacked."""

    scheduler: str
    t: np.ndarray             # (K+1,)
    loss_true: np.ndarray     # (n_episodes, K+1)
    loss_estimated: np.ndarray

    def traces(self) -> List[EpisodeTrace]:
        return [EpisodeTrace(self.scheduler, e, self.t, self.loss_true[e],
                             self.loss_estimated[e])
                for e in range(self.loss_true.shape[0])]

    def samples(self) -> List[LossSample]:
        out: List[LossSample] = []
        for e in range(self.loss_true.shape[0]):
            out.extend(LossSample(e, float(t), float(lt), float(le))
                       for t, lt, le in zip(self.t, self.loss_true[e],
                                            self.loss_estimated[e]))
        return out

    def pooled(self, burn_in: float, estimated: bool = False) -> np.ndarray:
        mask = self.t > burn_in
        arr = self.loss_estimated if estimated else self.loss_true
        return arr[:, mask].ravel()

    def mean_curve(self, estimated: bool = False) -> np.ndarray:
        arr = self.loss_estimated if estimated else self.loss_true
        return arr.mean(axis=0)


@dataclass(frozen=True)
class RunSummary:
    """Results of one Monte Carlo run, keyed by scheduler."""

    config: RunConfig
    results: Dict[str, SchedulerResult]

    def summary_dict(self, ecdf_points: int = 200) -> dict:
        burn = self.config.burn_in
        sched: dict = {}
        for name, res in self.results.items():
            pooled_t = res.pooled(burn, estimated=False)
            pooled_e = res.pooled(burn, estimated=True)
            sched[name] = {
                "mean_loss_true": float(pooled_t.mean()),
                "mean_loss_estimated": float(pooled_e.mean()),
                "percentiles_true": {
                    str(q): metrics.percentile(pooled_t, q / 100.0)
                    for q in (50, 90, 99)},
                "percentiles_estimated": {
                    str(q): metrics.percentile(pooled_e, q / 100.0)
                    for q in (50, 90, 99)},
                "mean_curve": {
                    "t": [float(x) for x in res.t],
                    "loss_true": [float(x) for x in res.mean_curve()],
                    "loss_estimated": [float(x) for x in
                                       res.mean_curve(estimated=True)],
                },
                "ecdf_true": _ecdf_points(pooled_t, ecdf_points),
            }
        comparisons = {}
        if "mv" in self.results and "maf" in self.results:
            comparisons["mv_maf_p99_ratio_true"] = (
                sched["mv"]["percentiles_true"]["99"]
                / sched["maf"]["percentiles_true"]["99"])
        if "mee" in self.results and "mv" in self.results:
            comparisons["mee_mv_p99_reldiff_true"] = (
                abs(sched["mee"]["percentiles_true"]["99"]
                    - sched["mv"]["percentiles_true"]["99"])
                / sched["mv"]["percentiles_true"]["99"])
        ep = self.config.episode
        return {
            "format": "summary.v1",
            "master_seed": ep.master_seed,
            "burn_in_s": burn,
            "config": {
                "formation": ep.formation,
                "schedulers": list(self.results.keys()),
                "n_episodes": self.config.n_episodes,
                "duration_s": ep.duration,
                "ts_s": ep.ts,
                "dt_s": ep.dt,
                "kp": ep.gains.kp, "kf": ep.gains.kf, "ke": ep.gains.ke,
                "sigma0_mps": ep.sigma0,
                "d0_m": ep.d0,
            },
            "schedulers": sched,
            "comparisons": comparisons,
        }


def _ecdf_points(pooled: np.ndarray, max_points: int) -> dict:
    """ECDF of pooled losses, downsampled evenly for the JSON summary."""
    values = np.sort(pooled, kind="stable")
    probs = np.arange(1, values.size + 1) / values.size
    if values.size > max_points:
        pick = np.linspace(0, values.size - 1, max_points).round().astype(int)
        values, probs = values[pick], probs[pick]
    return {"value": [float(x) for x in values],
            "cumulative_probability": [float(x) for x in probs]}


def _prepare_rows(config: EpisodeConfig, schedulers: Sequence[str],
                  episodes: Sequence[int]):
    """Initial state and per-row graph tables for a fused policy batch."""
    spec = build_formation(config.formation, config.d0)
    if spec.d != 3:
        raise ValueError("episodes require a 3-D formation")
    n, d = spec.n, spec.d
    n_ep = len(episodes)
    rngs = [episode_rng(config.master_seed, e) for e in episodes]
    p0 = np.empty((n_ep, n, d))
    graphs: List[AgentGraph] = []
    for b, rng in enumerate(rngs):
        p0[b] = (INITIAL_POSITION_MEAN
                 + INITIAL_POSITION_STD * rng.standard_normal(n * d)).reshape(n, d)
        graphs.append(agent_graph(spec, assign_agents(spec, rng)))

    P = len(schedulers)
    R = P * n_ep
    E = len(spec.edges)
    maxdeg = max(len(x) for x in spec.neighbor_map)
    row_episode = np.tile(np.arange(n_ep, dtype=np.int64), P)
    edge_i = np.empty((R, E), dtype=np.int64)
    edge_j = np.empty((R, E), dtype=np.int64)
    node_w = np.empty((R, n))
    zeta = np.empty((R, n))
    nbr_idx = np.zeros((R, n, maxdeg), dtype=np.int64)
    nbr_w = np.zeros((R, n, maxdeg))
    nbr_cnt = np.zeros((R, n), dtype=np.int64)
    vmask = np.empty((R, n, n))
    for pi in range(P):
        for b, g in enumerate(graphs):
            r = pi * n_ep + b
            edge_i[r] = g.edges[:, 0]
            edge_j[r] = g.edges[:, 1]
            node_w[r] = g.node_w
            zeta[r] = g.zeta
            vmask[r] = g.closed_neighbor_mask
            for i in range(n):
                nb = g.neighbor_lists[i]
                nbr_cnt[r, i] = len(nb)
                for c, l in enumerate(nb):
                    nbr_idx[r, i, c] = l
                    nbr_w[r, i, c] = g.weights[i, l]

    p = np.tile(p0, (P, 1, 1))
    phat = p.copy()
    q = np.empty((R, n, n, d))
    for b, g in enumerate(graphs):
        qb = init_blocks(g, p0[b])
        for pi in range(P):
            q[pi * n_ep + b] = qb
    # edge weights and squared distances follow the formation edge order and
    # are assignment independent
    edge_w = graphs[0].edge_w
    dist_sq = graphs[0].dist_sq
    return (spec, rngs, graphs, row_episode, p, phat, q, edge_i, edge_j,
            edge_w, dist_sq, node_w, zeta, nbr_idx, nbr_w, nbr_cnt, vmask)


def _row_losses(x: np.ndarray, edge_i: np.ndarray, edge_j: np.ndarray,
                edge_w: np.ndarray, dist_sq: np.ndarray, ref: np.ndarray,
                gains: ControlGains) -> np.ndarray:
    centroid = x.mean(axis=1)
    track = 0.5 * gains.kp * ((centroid - ref) ** 2).sum(axis=1)
    pi = np.take_along_axis(x, edge_i[:, :, None], axis=1)
    pj = np.take_along_axis(x, edge_j[:, :, None], axis=1)
    u = pi - pj
    sq = np.einsum("red,red->re", u, u)
    shape = 0.5 * gains.kf * (edge_w * (sq - dist_sq) ** 2).sum(axis=1)
    return track + shape


def _run_rows(config: EpisodeConfig, schedulers: Sequence[str],
              episodes: Sequence[int]) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """Fused run of every (scheduler, episode) pair with shared noise."""
    (spec, rngs, graphs, row_episode, p, phat, q, edge_i, edge_j, edge_w,
     dist_sq, node_w, zeta, nbr_idx, nbr_w, nbr_cnt, vmask) = _prepare_rows(
        config, schedulers, episodes)
    n, d = spec.n, spec.d
    n_ep = len(episodes)
    P = len(schedulers)
    R = P * n_ep
    spm = config.steps_per_slot
    K = config.n_slots
    sigma = sigma_profile(config, n)
    gains = config.gains
    ages = np.zeros((R, n), dtype=np.int64)
    loss_true = np.empty((R, K + 1))
    loss_est = np.empty((R, K + 1))
    t_samples = np.arange(K + 1) * config.ts

    def boundary(slot: int) -> None:
        ages[:] += 1
        for pi, sched in enumerate(schedulers):
            for b in range(n_ep):
                r = pi * n_ep + b
                chosen = select(sched, slot, ages[r] * config.ts, sigma,
                                zeta[r], d)
                if chosen == ORACLE_ALL:
                    phat[r] = p[r]
                    ages[r] = 0
                else:
                    a = int(chosen) - 1
                    phat[r, a] = p[r, a]
                    ages[r, a] = 0
        record(slot)

    def record(slot: int) -> None:
        ref = np.array([t_samples[slot], 0.0,
                        5.0 - 5.0 * np.tanh(t_samples[slot] - config.duration / 2)])
        loss_true[:, slot] = _row_losses(p, edge_i, edge_j, edge_w, dist_sq,
                                         ref, gains)
        loss_est[:, slot] = _row_losses(phat, edge_i, edge_j, edge_w, dist_sq,
                                        ref, gains)

    record(0)
    noise = np.empty((n_ep, spm, n, d))
    for w in range(K):
        if w > 0:
            boundary(w)
        for b, rng in enumerate(rngs):
            noise[b] = rng.standard_normal((spm, n, d))
        advance_window(p, phat, q, sigma, noise, row_episode, w * spm,
                       config.dt, spm, config.duration, gains.kp, gains.kf,
                       gains.ke, edge_i, edge_j, edge_w, dist_sq, node_w,
                       nbr_idx, nbr_w, nbr_cnt, vmask)
        bad = ~np.isfinite(p).all(axis=(1, 2))
        if bad.any():
            r = int(np.nonzero(bad)[0][0])
            raise EpisodeDiverged(schedulers[r // n_ep],
                                  episodes[r % n_ep], (w + 1) * config.ts)
    boundary(K)

    out: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    for pi, sched in enumerate(schedulers):
        rows = slice(pi * n_ep, (pi + 1) * n_ep)
        out[sched] = (loss_true[rows].copy(), loss_est[rows].copy())
    return out


def run_episode(config: EpisodeConfig, episode: int) -> EpisodeTrace:
    """One episode on the fast path; identical to its batched counterpart."""
    out = _run_rows(config, [config.scheduler], [episode])
    lt, le = out[config.scheduler]
    t = np.arange(config.n_slots + 1) * config.ts
    return EpisodeTrace(config.scheduler, episode, t, lt[0], le[0])


def _run_chunk(args) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    config, schedulers, episodes = args
    return _run_rows(config, schedulers, episodes)


def run_monte_carlo(run: RunConfig) -> RunSummary:
    """All schedulers over n_episodes paired episodes; gathers in order."""
    episodes = list(range(run.n_episodes))
    schedulers = list(run.schedulers)
    if run.workers == 1 or run.n_episodes == 1:
        chunks = [_run_rows(run.episode, schedulers, episodes)]
    else:
        bounds = np.array_split(episodes, min(run.workers, run.n_episodes))
        with ProcessPoolExecutor(max_workers=run.workers) as pool:
            chunks = list(pool.map(
                _run_chunk,
                [(run.episode, schedulers, list(c)) for c in bounds if len(c)]))
    t = np.arange(run.episode.n_slots + 1) * run.episode.ts
    results: Dict[str, SchedulerResult] = {}
    for sched in schedulers:
        lt = np.concatenate([c[sched][0] for c in chunks], axis=0)
        le = np.concatenate([c[sched][1] for c in chunks], axis=0)
        results[sched] = SchedulerResult(sched, t, lt, le)
    return RunSummary(config=run, results=results)
