"""Target formations: cube geometries, graph weights, rigidity, assignments.

Two built-in 8-agent formations are provided. Slots are numbered 1..n and
slot s of the cube sits at ``d0 * (b0, b1, b2)`` where ``(b0, b1, b2)`` are
the bits of ``s - 1``, least significant first:

    slot 1 -> (0, 0, 0),  slot 2 -> (1, 0, 0),  slot 3 -> (0, 1, 0), ...

The asymmetric variant moves slot 8 from the ``(1, 1, 1)`` vertex to the
cube barycenter ``(0.5, 0.5, 0.5)``, leaving that vertex empty.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence, Tuple

import numpy as np

FORMATION_KINDS = ("symmetric", "asymmetric")
FORMATION_FILE_FORMAT = "formation.v1"

Edge = Tuple[int, int]

# Edge sets of the two built-in formations, over 1-based slot indices.
SYMMETRIC_EDGES: Tuple[Edge, ...] = (
    (1, 2), (1, 4), (1, 5), (1, 6), (1, 8), (2, 3), (2, 4), (2, 6), (2, 8),
    (3, 4), (3, 5), (3, 6), (3, 7), (4, 6), (4, 8), (5, 6), (5, 7), (5, 8),
    (6, 7), (7, 8),
)
ASYMMETRIC_EDGES: Tuple[Edge, ...] = (
    (1, 2), (1, 4), (1, 5), (1, 6), (1, 8), (2, 3), (2, 4), (2, 6), (2, 7),
    (2, 8), (3, 4), (3, 5), (3, 7), (3, 8), (4, 7), (4, 8), (5, 6), (5, 7),
    (5, 8), (6, 7), (6, 8), (7, 8),
)


class FormationError(ValueError):
    """Raised when a formation description violates its structural rules."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FormationSpec:
    """Immutable description of a target formation.

    All indices in the public surface are 1-based slot numbers. Arrays are
    read-only so one spec can be shared freely across episode workers.
    """

    name: str
    n: int
    d: int
    slot_positions: np.ndarray          # (n, d) meters, row s-1 is slot s
    edges: Tuple[Edge, ...]             # (i, j) with i < j
    desired_distances: Mapping[Edge, float]
    centralities: np.ndarray            # (n,) dimensionless
    node_weights: np.ndarray            # (n,) a_ss, sums to 1
    edge_weights: Mapping[Edge, float]  # sqrt(a_ii * a_jj) per edge

    @cached_property
    def neighbor_map(self) -> Tuple[Tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i - 1].append(j)
            nbrs[j - 1].append(i)
        return tuple(tuple(sorted(x)) for x in nbrs)

    def neighbors(self, slot: int) -> Tuple[int, ...]:
        self._check_slot(slot)
        return self.neighbor_map[slot - 1]

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.desired_distances

    def distance(self, i: int, j: int) -> float:
        return self.desired_distances[(min(i, j), max(i, j))]

    def edge_weight(self, i: int, j: int) -> float:
        return self.edge_weights[(min(i, j), max(i, j))]

    def _check_slot(self, slot: int) -> None:
        if not 1 <= slot <= self.n:
            raise IndexError(f"slot index {slot} out of range 1..{self.n}")

    def as_dict(self) -> dict:
        edges = list(self.edges)
        return {
            "format": FORMATION_FILE_FORMAT,
            "name": self.name,
            "n": self.n,
            "d": self.d,
            "slot_positions_m": self.slot_positions.tolist(),
            "edges": [list(e) for e in edges],
            "desired_distances_m": [self.desired_distances[e] for e in edges],
            "centralities": self.centralities.tolist(),
            "node_weights": self.node_weights.tolist(),
            "edge_weights": [self.edge_weights[e] for e in edges],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent, sort_keys=True)


def canonical_slot_positions(kind: str, d0: float) -> np.ndarray:
    """Slot coordinates of a built-in formation (see module docstring)."""
    if kind not in FORMATION_KINDS:
        raise FormationError(f"kind: unknown formation {kind!r}, "
                             f"expected one of {FORMATION_KINDS}")
    pos = np.zeros((8, 3))
    for s in range(8):
        pos[s] = [(s >> 0) & 1, (s >> 1) & 1, (s >> 2) & 1]
    if kind == "asymmetric":
        pos[7] = [0.5, 0.5, 0.5]
    return pos * d0


def make_formation(name: str, slot_positions: Sequence[Sequence[float]],
                   edges: Sequence[Sequence[int]]) -> FormationSpec:
    """Build a validated FormationSpec from raw geometry and an edge list.

    Desired distances are the Euclidean slot distances; centralities and
    node/edge weights are derived from them. Raises FormationError with the
    offending field in the message when the description is inconsistent.
    """
    pos = np.asarray(slot_positions, dtype=float)
    if pos.ndim != 2 or pos.shape[0] < 2:
        raise FormationError("slot_positions_m: expected an (n, d) array with n >= 2")
    n, d = pos.shape

    norm_edges: list[Edge] = []
    seen = set()
    for k, e in enumerate(edges):
        if len(e) != 2:
            raise FormationError(f"edges[{k}]: expected a pair of slot indices")
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise FormationError(f"edges[{k}]: self-loop at slot {i}")
        if not (1 <= i <= n and 1 <= j <= n):
            raise FormationError(f"edges[{k}]: slot index out of range 1..{n}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise FormationError(f"edges[{k}]: duplicate edge {key}")
        seen.add(key)
        norm_edges.append(key)
    norm_edges.sort()

    dist = {}
    for i, j in norm_edges:
        dij = float(np.linalg.norm(pos[i - 1] - pos[j - 1]))
        if dij <= 0.0:
            raise FormationError(
                f"slot_positions_m: slots {i} and {j} coincide, d_ij must be > 0")
        dist[(i, j)] = dij

    nbrs: list[list[int]] = [[] for _ in range(n)]
    for i, j in norm_edges:
        nbrs[i - 1].append(j)
        nbrs[j - 1].append(i)
    if not all(nbrs):
        lone = nbrs.index([]) + 1
        raise FormationError(f"edges: slot {lone} has no incident edge")
    if not _connected(n, nbrs):
        raise FormationError("edges: formation graph is not connected")

    zeta = _centralities(pos)
    node_w = zeta / zeta.sum()
    edge_w = {(i, j): float(np.sqrt(node_w[i - 1] * node_w[j - 1]))
              for i, j in norm_edges}

    return FormationSpec(
        name=name, n=n, d=d,
        slot_positions=_frozen(pos),
        edges=tuple(norm_edges),
        desired_distances=dist,
        centralities=_frozen(zeta),
        node_weights=_frozen(node_w),
        edge_weights=edge_w,
    )


def _centralities(pos: np.ndarray) -> np.ndarray:
    """Distance-based centrality (n - 1) / sum of distances to all others.

    Nodes close to many others score high (the barycenter slot of the
    asymmetric formation tops its ranking); congruent slot geometries give
    exactly equal values because the distances are summed in sorted order.
    """
    n = pos.shape[0]
    gaps = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    out = np.empty(n)
    for i in range(n):
        others = np.sort(np.delete(gaps[i], i), kind="stable")
        out[i] = (n - 1) / others.sum()
    return out


def _connected(n: int, nbrs: Sequence[Sequence[int]]) -> bool:
    seen = {1}
    queue = deque([1])
    while queue:
        s = queue.popleft()
        for j in nbrs[s - 1]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


def build_formation(kind: str, d0: float = 5.0) -> FormationSpec:
    """Build one of the built-in formations: "symmetric" or "asymmetric"."""
    if d0 <= 0:
        raise FormationError("d0: cube side must be > 0")
    pos = canonical_slot_positions(kind, d0)
    edges = SYMMETRIC_EDGES if kind == "symmetric" else ASYMMETRIC_EDGES
    return make_formation(kind, pos, edges)


def centrality(spec: FormationSpec, slot: int) -> float:
    """Distance-based centrality of one slot, recomputed from the geometry."""
    spec._check_slot(slot)
    return float(_centralities(spec.slot_positions)[slot - 1])


def rigidity_rank(spec: FormationSpec, rel_tol: float = 1e-9) -> int:
    """Rank of the rigidity matrix at the slot geometry.

    Row for edge (i, j) carries (p_i - p_j) in block i and its negation in
    block j. Infinitesimal rigidity in dimension d holds iff the rank equals
    n*d - d*(d+1)/2. Singular values below rel_tol times the largest count
    as zero.
    """
    n, d = spec.n, spec.d
    R = np.zeros((len(spec.edges), n * d))
    for r, (i, j) in enumerate(spec.edges):
        u = spec.slot_positions[i - 1] - spec.slot_positions[j - 1]
        R[r, (i - 1) * d:i * d] = u
        R[r, (j - 1) * d:j * d] = -u
    sv = np.linalg.svd(R, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > rel_tol * sv[0]))


def is_rigid(spec: FormationSpec) -> bool:
    return rigidity_rank(spec) == spec.n * spec.d - spec.d * (spec.d + 1) // 2


@dataclass(frozen=True)
class AgentAssignment:
    """Bijection from agent index to formation slot, both 1-based."""

    slot_of_agent: Tuple[int, ...]

    def __post_init__(self):
        n = len(self.slot_of_agent)
        if sorted(self.slot_of_agent) != list(range(1, n + 1)):
            raise FormationError("slot_of_agent: not a permutation of 1..n")

    @cached_property
    def agent_of_slot(self) -> Tuple[int, ...]:
        inv = [0] * len(self.slot_of_agent)
        for agent, slot in enumerate(self.slot_of_agent, start=1):
            inv[slot - 1] = agent
        return tuple(inv)

    def slot(self, agent: int) -> int:
        return self.slot_of_agent[agent - 1]

    def agent(self, slot: int) -> int:
        return self.agent_of_slot[slot - 1]


def identity_assignment(n: int) -> AgentAssignment:
    return AgentAssignment(tuple(range(1, n + 1)))


def assign_agents(spec: FormationSpec, rng: np.random.Generator) -> AgentAssignment:
    """Uniformly random slot assignment; deterministic for a seeded rng."""
    perm = rng.permutation(spec.n)
    return AgentAssignment(tuple(int(s) + 1 for s in perm))


@dataclass(frozen=True)
class AgentGraph:
    """Formation graph remapped onto agent indices through an assignment.

    Arrays are 0-based over agents; ``edges[k] = (a, b)`` means agents a+1
    and b+1 occupy adjacent slots, with squared desired distance
    ``dist_sq[k]`` and weight ``edge_w[k]``. This is the view the dynamics,
    estimator, controller and loss all consume.
    """

    n: int
    d: int
    edges: np.ndarray        # (E, 2) int
    edge_w: np.ndarray       # (E,)
    dist_sq: np.ndarray      # (E,)
    node_w: np.ndarray       # (n,) a_ii of each agent's slot
    zeta: np.ndarray         # (n,) centrality of each agent's slot
    weights: np.ndarray      # (n, n) symmetric a_ij matrix, zero off-graph
    neighbor_lists: Tuple[Tuple[int, ...], ...]   # 0-based

    @cached_property
    def closed_neighbor_mask(self) -> np.ndarray:
        m = (self.weights > 0).astype(float) + np.eye(self.n)
        m.flags.writeable = False
        return m

    @cached_property
    def weighted_degree(self) -> np.ndarray:
        w = self.weights.sum(axis=1)
        w.flags.writeable = False
        return w

    @cached_property
    def incidence(self) -> np.ndarray:
        """Signed (n, E) incidence matrix: +1 at the lower agent index."""
        inc = np.zeros((self.n, len(self.edges)))
        for k, (a, b) in enumerate(self.edges):
            inc[a, k] = 1.0
            inc[b, k] = -1.0
        inc.flags.writeable = False
        return inc


def agent_graph(spec: FormationSpec, assignment: AgentAssignment) -> AgentGraph:
    """Remap slot-level weights and distances into agent index space."""
    n = spec.n
    if len(assignment.slot_of_agent) != n:
        raise FormationError("assignment size does not match formation")
    # edge arrays keep the formation edge-list order, so edge_w and dist_sq
    # are identical for every assignment; only the endpoints move
    edges = []
    ew = []
    d2 = []
    for (si, sj) in spec.edges:
        a, b = assignment.agent(si) - 1, assignment.agent(sj) - 1
        edges.append((min(a, b), max(a, b)))
        ew.append(spec.edge_weight(si, sj))
        d2.append(spec.distance(si, sj) ** 2)
    edges_arr = np.asarray(edges, dtype=np.int64)
    ew_arr = np.asarray(ew, dtype=float)
    d2_arr = np.asarray(d2, dtype=float)

    slots = np.asarray(assignment.slot_of_agent, dtype=np.int64) - 1
    node_w = spec.node_weights[slots].copy()
    zeta = spec.centralities[slots].copy()

    W = np.zeros((n, n))
    for (a, b), w in zip(edges_arr, ew_arr):
        W[a, b] = W[b, a] = w
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges_arr:
        nbrs[a].append(b)
        nbrs[b].append(a)

    return AgentGraph(
        n=n, d=spec.d,
        edges=edges_arr, edge_w=_frozen(ew_arr), dist_sq=_frozen(d2_arr),
        node_w=_frozen(node_w), zeta=_frozen(zeta), weights=_frozen(W),
        neighbor_lists=tuple(tuple(sorted(x)) for x in nbrs),
    )


def spec_from_dict(data: dict) -> FormationSpec:
    """Load a formation from its JSON dictionary form.

    Only geometry and edges are authoritative; derived fields, when present,
    are cross-checked and a FormationError names the mismatching field.
    """
    if not isinstance(data, dict):
        raise FormationError("root: expected a JSON object")
    for field in ("slot_positions_m", "edges"):
        if field not in data:
            raise FormationError(f"{field}: missing required field")
    name = data.get("name", "custom")
    spec = make_formation(name, data["slot_positions_m"], data["edges"])

    checks = (
        ("desired_distances_m", [spec.desired_distances[e] for e in spec.edges]),
        ("centralities", spec.centralities.tolist()),
        ("node_weights", spec.node_weights.tolist()),
        ("edge_weights", [spec.edge_weights[e] for e in spec.edges]),
    )
    for field, derived in checks:
        if field in data:
            given = np.asarray(data[field], dtype=float)
            if given.shape != (len(derived),) or not np.allclose(given, derived,
                                                                 rtol=1e-9, atol=1e-12):
                raise FormationError(f"{field}: inconsistent with slot geometry")
    return spec


def spec_from_json(text: str) -> FormationSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormationError(f"root: invalid JSON ({exc})") from exc
    return spec_from_dict(data)
