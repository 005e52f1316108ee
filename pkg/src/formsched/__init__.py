"""Multi-agent 3-D formation tracking under AoI/VoI-aware localization scheduling."""

from .controller import ControlGains, control_input, reference_trajectory, velocities
from .dynamics import AgentState, advance_positions, localize, step_agent
from .engine import (EpisodeConfig, EpisodeDiverged, EpisodeTrace, RunConfig,
                     RunSummary, SchedulerResult, init_episode, run_episode,
                     run_episode_reference, run_monte_carlo, sigma_profile,
                     step_episode)
from .estimator import (EstimatorState, estimator_derivative, init_blocks,
                        init_estimator, local_centroid, local_centroids)
from .formation import (AgentAssignment, AgentGraph, FormationSpec,
                        FormationError, agent_graph, assign_agents,
                        build_formation, centrality, identity_assignment,
                        is_rigid, make_formation, rigidity_rank,
                        spec_from_dict, spec_from_json)
from .metrics import LossSample, ecdf, formation_loss, percentile, pooled_losses
from .scheduling import (ORACLE_ALL, POLICIES, AoiTracker, precompute_schedule,
                         select, voi_mee, voi_mv)
from .seeding import derive_seed, episode_rng

__version__ = "0.1.0"
