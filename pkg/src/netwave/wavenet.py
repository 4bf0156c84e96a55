"""Damped wave equation on networks via traveling-wave components.

On each edge the state ``(u', v)`` (spatial derivative of the displacement
and velocity) splits into two components moving at unit speed.  Vertex
conditions (continuity plus Kirchhoff at interior vertices, Dirichlet at
undamped ends, velocity feedback ``v = -eta du/dn`` at damped ends) become
a boundary matrix ``M`` acting on the outgoing components, so the wave
equation is a transport system handled by :mod:`netwave.transport`.

Component indices are 0-based: edge ``j`` owns components ``2j`` (the one
built from ``u' + v`` read backwards) and ``2j + 1`` (``u' - v``).
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from .ratlattice import DelayVector, as_fraction
from .signals import inf_norm
from .transport import TransportSystem, grid_counts, solve_transport, trapezoid

__all__ = [
    "Network",
    "ElementaryPath",
    "Classification",
    "DampingSignal",
    "DampingSet",
    "WaveState",
    "WaveTrajectory",
    "WaveVerdict",
    "Witness",
    "classify",
    "build_R",
    "dalembert_forward",
    "dalembert_inverse",
    "incoming_indices",
    "outgoing_indices",
    "build_M",
    "check_M_identity",
    "check_RM",
    "simulate_wave",
    "energy_identity_residual",
    "stability_verdict_wave",
    "periodic_witness",
    "path_to_vertex",
    "decay_rate_fit",
    "flip_edge",
]

ROLES = ("interior", "damped", "undamped")


class Network:
    """Connected oriented graph with lengths and exterior-vertex roles.

    Parameters
    ----------
    vertices : mapping from vertex name to role
        Roles are ``"interior"``, ``"damped"`` or ``"undamped"``.  Vertices
        of degree one must be damped or undamped, the others interior.
    edges : sequence of (alpha, omega)
        Oriented edges; ``alpha`` is the end at ``x = 0``.
    lengths : DelayVector or sequence of rationals
        Edge lengths.
    """

    def __init__(self, vertices: Mapping[str, str], edges: Sequence[tuple], lengths):
        self.vertices = list(vertices)
        self.roles = dict(vertices)
        if any(r not in ROLES for r in self.roles.values()):
            raise ValueError(f"vertex roles must be one of {ROLES}")
        self.edges = [tuple(e) for e in edges]
        if not self.edges:
            raise ValueError("network needs at least one edge")
        seen = set()
        for a, b in self.edges:
            if a not in self.roles or b not in self.roles:
                raise ValueError(f"edge ({a}, {b}) uses an unknown vertex")
            if a == b:
                raise ValueError("edges need two distinct endpoints")
            if frozenset((a, b)) in seen:
                raise ValueError(f"duplicate edge between {a} and {b}")
            seen.add(frozenset((a, b)))
        if isinstance(lengths, DelayVector):
            self.delays = lengths
        else:
            self.delays = DelayVector.from_rationals(lengths)
        if self.delays.N != len(self.edges):
            raise ValueError("one length per edge is required")
        self.lengths = self.delays.values
        self.graph = nx.Graph()
        self.graph.add_nodes_from(self.vertices)
        self.graph.add_edges_from(self.edges)
        if not nx.is_connected(self.graph):
            raise ValueError("network graph is disconnected")
        for q in self.vertices:
            deg = self.graph.degree[q]
            role = self.roles[q]
            if deg <= 1 and role == "interior":
                raise ValueError(f"vertex {q} has degree {deg} and must be damped or undamped")
            if deg >= 2 and role != "interior":
                raise ValueError(f"exterior vertex {q} must have degree 1")
        self.damped = [q for q in self.vertices if self.roles[q] == "damped"]
        self.undamped = [q for q in self.vertices if self.roles[q] == "undamped"]
        if not self.damped or not self.undamped:
            raise ValueError("need at least one damped and one undamped vertex")
        self._edge_of = {frozenset(e): j for j, e in enumerate(self.edges)}

    @property
    def N(self) -> int:
        return len(self.edges)

    def degree(self, q) -> int:
        return self.graph.degree[q]

    def edge_between(self, a, b) -> int:
        return self._edge_of[frozenset((a, b))]

    def with_lengths(self, lengths) -> "Network":
        return Network(self.roles, self.edges, lengths)

    def to_json(self) -> dict:
        return {
            "vertices": [{"name": q, "role": self.roles[q]} for q in self.vertices],
            "edges": [{"from": a, "to": b, "length": str(L)}
                      for (a, b), L in zip(self.edges, self.lengths)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Network":
        verts = {}
        for v in obj["vertices"]:
            verts[str(v["name"])] = v["role"]
        edges, lengths = [], []
        for e in obj["edges"]:
            edges.append((str(e["from"]), str(e["to"])))
            lengths.append(as_fraction(e["length"]))
        if "delays" in obj:
            return cls(verts, edges, DelayVector.from_json(obj["delays"]))
        return cls(verts, edges, lengths)


@dataclass
class ElementaryPath:
    """Path ``(q_1, ..., q_n)`` with its edges and signature."""

    vertices: tuple
    edges: tuple
    signs: tuple
    kind: str

    def signature(self, N: int) -> np.ndarray:
        s = np.zeros(N)
        for j, sg in zip(self.edges, self.signs):
            s[j] = sg
        return s


@dataclass
class Classification:
    is_tree: bool
    exterior: set
    interior: set
    elementary_paths: list


def _path_from_vertices(network: Network, verts: Sequence, kind: str) -> ElementaryPath:
    edges, signs = [], []
    for a, b in zip(verts, verts[1:]):
        j = network.edge_between(a, b)
        edges.append(j)
        signs.append(1 if network.edges[j][0] == a else -1)
    return ElementaryPath(tuple(verts), tuple(edges), tuple(signs), kind)


def _canonical_cycle(cycle: Sequence, order: dict) -> tuple:
    k = min(range(len(cycle)), key=lambda i: order[cycle[i]])
    rot = list(cycle[k:]) + list(cycle[:k])
    rev = [rot[0]] + rot[1:][::-1]
    if order[rev[1]] < order[rot[1]]:
        rot = rev
    return tuple(rot)


def classify(network: Network) -> Classification:
    """Tree test, exterior/interior split and the qualifying elementary paths.

    Qualifying paths are the cycles (each listed once, up to rotation and
    reversal, starting at its first vertex in declaration order) and the
    simple paths joining two undamped vertices (each unordered pair and
    route listed once).
    """
    G = network.graph
    if not nx.is_connected(G):
        raise ValueError("network graph is disconnected")
    order = {q: i for i, q in enumerate(network.vertices)}
    is_tree = G.number_of_edges() == G.number_of_nodes() - 1
    exterior = {q for q in network.vertices if G.degree[q] <= 1}
    interior = set(network.vertices) - exterior
    paths: list[ElementaryPath] = []
    cycles = sorted({_canonical_cycle(c, order) for c in nx.simple_cycles(G) if len(c) >= 3},
                    key=lambda c: [order[q] for q in c])
    for c in cycles:
        paths.append(_path_from_vertices(network, list(c) + [c[0]], "cycle"))
    und = network.undamped
    for i, a in enumerate(und):
        for b in und[i + 1:]:
            routes = sorted(nx.all_simple_paths(G, a, b), key=lambda p: [order[q] for q in p])
            for p in routes:
                paths.append(_path_from_vertices(network, p, "undamped"))
    return Classification(is_tree, exterior, interior, paths)


def build_R(network: Network, classification: Classification | None = None) -> np.ndarray:
    """Constraint rows ``R[i, 2j] = R[i, 2j+1] = s_i(j)``, shape ``(r, 2N)``."""
    cl = classification or classify(network)
    R = np.zeros((len(cl.elementary_paths), 2 * network.N))
    for i, p in enumerate(cl.elementary_paths):
        for j, s in zip(p.edges, p.signs):
            R[i, 2 * j] = s
            R[i, 2 * j + 1] = s
    return R


@dataclass
class WaveState:
    """Samples of ``u'_j`` and ``v_j`` on ``x_k = k h``, ``k = 0..L_j/h``."""

    network: Network
    step: Fraction
    du: list
    v: list

    def __post_init__(self):
        self.step = as_fraction(self.step)
        counts = grid_counts(self.network.lengths, self.step)
        self.du = [np.asarray(a, dtype=float) for a in self.du]
        self.v = [np.asarray(a, dtype=float) for a in self.v]
        for j, K in enumerate(counts):
            if self.du[j].shape != (K + 1,) or self.v[j].shape != (K + 1,):
                raise ValueError(f"edge {j} needs {K + 1} samples")

    @classmethod
    def zero(cls, network: Network, step) -> "WaveState":
        counts = grid_counts(network.lengths, as_fraction(step))
        return cls(network, step, [np.zeros(K + 1) for K in counts],
                   [np.zeros(K + 1) for K in counts])

    @classmethod
    def from_potentials(cls, network: Network, step, potentials: Mapping, bumps: Sequence,
                        velocities: Sequence) -> "WaveState":
        """State whose displacement takes given values at the vertices.

        ``bumps[j]`` are derivative samples on edge ``j``; a constant is
        added so that the discrete integral of ``u'_j`` equals
        ``potentials[omega] - potentials[alpha]`` exactly.  Undamped
        vertices are forced to zero.
        """
        step = as_fraction(step)
        h = float(step)
        pot = {q: (0.0 if network.roles[q] == "undamped" else float(potentials.get(q, 0.0)))
               for q in network.vertices}
        du = []
        for j, (a, b) in enumerate(network.edges):
            g = np.asarray(bumps[j], dtype=float)
            L = float(network.lengths[j])
            g = g - (trapezoid(g, h) - (pot[b] - pot[a])) / L
            du.append(g)
        return cls(network, step, du, [np.asarray(x, dtype=float) for x in velocities])

    @property
    def counts(self) -> list[int]:
        return [len(a) - 1 for a in self.du]

    def energy(self) -> float:
        h = float(self.step)
        return float(sum(trapezoid(a ** 2 + b ** 2, h) for a, b in zip(self.du, self.v)))

    def potentials(self) -> tuple[dict, float]:
        """Vertex displacements anchored at an undamped vertex, and the mismatch.

        The mismatch is the largest violation of ``u(omega) - u(alpha) =
        int u'`` over edges outside the search tree and of the Dirichlet
        condition at the other undamped vertices.
        """
        h = float(self.step)
        net = self.network
        ints = [trapezoid(a, h) for a in self.du]
        root = net.undamped[0]
        pot = {root: 0.0}
        for a, b in nx.bfs_edges(net.graph, root):
            j = net.edge_between(a, b)
            if net.edges[j][0] == a:
                pot[b] = pot[a] + ints[j]
            else:
                pot[b] = pot[a] - ints[j]
        mismatch = 0.0
        for j, (a, b) in enumerate(net.edges):
            mismatch = max(mismatch, abs(pot[a] + ints[j] - pot[b]))
        for q in net.undamped:
            mismatch = max(mismatch, abs(pot[q]))
        return pot, mismatch

    def displacement(self) -> list[np.ndarray]:
        """Displacement samples by path-anchored antiderivative."""
        h = float(self.step)
        pot, _ = self.potentials()
        out = []
        for j, (a, _b) in enumerate(self.network.edges):
            d = self.du[j]
            cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (d[1:] + d[:-1]))])
            out.append(pot[a] + cum)
        return out

    def compatibility_residual(self) -> float:
        return self.potentials()[1]

    def flipped(self, j: int) -> "WaveState":
        """The same physical state after reversing the orientation of edge ``j``."""
        du = [a.copy() for a in self.du]
        v = [b.copy() for b in self.v]
        du[j] = -du[j][::-1]
        v[j] = v[j][::-1]
        return WaveState(flip_edge(self.network, j), self.step, du, v)


def flip_edge(network: Network, j: int) -> Network:
    edges = list(network.edges)
    a, b = edges[j]
    edges[j] = (b, a)
    return Network(network.roles, edges, network.delays)


def dalembert_forward(state: WaveState) -> list[np.ndarray]:
    """Traveling components ``f_{2j}(x) = u'(L-x) + v(L-x)``, ``f_{2j+1} = u' - v``."""
    out = []
    for du, v in zip(state.du, state.v):
        out.append((du + v)[::-1].copy())
        out.append(du - v)
    return out


def dalembert_inverse(f: Sequence[np.ndarray], network: Network, step, tol: float = 1e-8,
                      R: np.ndarray | None = None) -> WaveState:
    """Wave state from traveling components; refuses profiles outside the constraint set."""
    step = as_fraction(step)
    if len(f) != 2 * network.N:
        raise ValueError(f"expected {2 * network.N} profiles")
    R = build_R(network) if R is None else R
    h = float(step)
    if R.shape[0]:
        ints = np.array([trapezoid(np.asarray(p, dtype=float), h) for p in f])
        res = float(np.abs(R @ ints).max())
        if res > tol:
            raise ValueError(f"profiles violate the path constraints (residual {res:.3e})")
    du, v = [], []
    for j in range(network.N):
        a = np.asarray(f[2 * j], dtype=float)[::-1]
        b = np.asarray(f[2 * j + 1], dtype=float)
        v.append(0.5 * (a - b))
        du.append(0.5 * (a + b))
    return WaveState(network, step, du, v)


def incoming_indices(network: Network, q) -> list[int]:
    """Components arriving at ``q``, ordered by edge index."""
    out = []
    for j, (a, b) in enumerate(network.edges):
        if b == q:
            out.append(2 * j + 1)
        elif a == q:
            out.append(2 * j)
    return out


def outgoing_indices(network: Network, q) -> list[int]:
    """Components leaving ``q``, ordered by edge index."""
    out = []
    for j, (a, b) in enumerate(network.edges):
        if a == q:
            out.append(2 * j + 1)
        elif b == q:
            out.append(2 * j)
    return out


def _eta_vector(network: Network, eta) -> dict:
    if isinstance(eta, Mapping):
        vals = {q: float(eta[q]) for q in network.damped}
    else:
        eta = list(eta)
        if len(eta) != len(network.damped):
            raise ValueError(f"need one damping value per damped vertex ({len(network.damped)})")
        vals = {q: float(e) for q, e in zip(network.damped, eta)}
    if any(e < 0 for e in vals.values()):
        raise ValueError("damping values must be nonnegative")
    return vals


def build_M(network: Network, eta) -> np.ndarray:
    """Boundary matrix mapping outgoing to incoming traveling components.

    Local blocks are ``I - (2/n_q) J`` at interior vertices, ``I`` at
    undamped vertices and ``(1 - eta)/(1 + eta)`` at damped ones, placed
    from incoming to outgoing indices; the sum is conjugated by
    ``D = diag(-1, 1, -1, 1, ...)`` and negated.
    """
    etas = _eta_vector(network, eta)
    n2 = 2 * network.N
    S = np.zeros((n2, n2))
    for q in network.vertices:
        ins = incoming_indices(network, q)
        outs = outgoing_indices(network, q)
        nq = len(ins)
        role = network.roles[q]
        if role == "interior":
            K = np.eye(nq) - (2.0 / nq) * np.ones((nq, nq))
        elif role == "undamped":
            K = np.eye(nq)
        else:
            e = etas[q]
            K = np.eye(nq) * ((1 - e) / (1 + e))
        S[np.ix_(outs, ins)] += K
    D = np.where(np.arange(n2) % 2 == 0, -1.0, 1.0)
    return -(D[:, None] * S * D[None, :])


def check_M_identity(M: np.ndarray, network: Network, eta) -> float:
    """``|M^T M - (I - sum_q 4 eta_q/(1+eta_q)^2 P_q)|`` in the infinity norm."""
    etas = _eta_vector(network, eta)
    n2 = 2 * network.N
    target = np.eye(n2)
    for q in network.damped:
        e = etas[q]
        for i in incoming_indices(network, q):
            target[i, i] -= 4 * e / (1 + e) ** 2
    return inf_norm(M.T @ M - target)


def check_RM(R: np.ndarray, M: np.ndarray) -> float:
    R = np.atleast_2d(R)
    if R.shape[0] == 0 or R.size == 0:
        return 0.0
    return inf_norm(R @ M - R)


class DampingSignal:
    """Right-continuous piecewise-constant damping values at the damped vertices.

    ``values[0]`` applies before the first breakpoint.  In simulations the
    value used at grid time ``k h`` is the one in force at that time, which
    moves each breakpoint to the next grid point.
    """

    def __init__(self, breakpoints: Sequence, values: Sequence[Sequence]):
        self.breakpoints = tuple(as_fraction(b) for b in breakpoints)
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        self.values = [tuple(float(as_fraction(x)) if isinstance(x, str) else float(x) for x in v)
                       for v in values]
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("need one damping vector per interval")
        if any(x < 0 for v in self.values for x in v):
            raise ValueError("damping must be nonnegative")
        if len({len(v) for v in self.values}) != 1:
            raise ValueError("damping vectors must share their length")

    @classmethod
    def constant(cls, values: Sequence) -> "DampingSignal":
        return cls((), [values])

    @classmethod
    def random(cls, n_damped: int, horizon, step, low: float, high: float, switches: int,
               seed: int = 0) -> "DampingSignal":
        """Random switching times on the grid and uniform values in ``[low, high]``."""
        rng = np.random.default_rng(seed)
        step = as_fraction(step)
        total = int(as_fraction(horizon) / step)
        ks = sorted(set(int(k) for k in rng.integers(1, max(total, 2), size=switches)))
        bps = [k * step for k in ks]
        vals = [tuple(rng.uniform(low, high, size=n_damped)) for _ in range(len(bps) + 1)]
        return cls(bps, vals)

    def __call__(self, t) -> tuple:
        return self.values[bisect_right(self.breakpoints, as_fraction(t))]

    def to_json(self) -> dict:
        return {"breakpoints": [str(b) for b in self.breakpoints],
                "values": [list(v) for v in self.values]}

    @classmethod
    def from_json(cls, obj) -> "DampingSignal":
        if isinstance(obj, list):
            return cls.constant(obj)
        return cls(obj.get("breakpoints", []), obj["values"])


@dataclass
class WaveTrajectory:
    """Simulation output: energy at every grid time plus lazily built states."""

    network: Network
    step: Fraction
    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    samples: list
    solution: object
    eta: DampingSignal
    state0: WaveState
    meta: dict = field(default_factory=dict)

    def state(self, k: int) -> WaveState:
        """Wave state at grid step ``k``."""
        if k == 0:
            return self.state0
        f = [np.real(p) for p in self.solution.field(k * self.solution.step)]
        return dalembert_inverse(f, self.network, self.step, tol=math.inf)

    def sampled_energy(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.array(self.samples)
        return self.times[idx], self.energy[idx]

    def write_energy_csv(self, path: str, every: int = 1) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "energy"])
            for k in range(0, len(self.times), every):
                w.writerow([repr(float(self.times[k])), repr(float(self.energy[k]))])


def _window_trapezoid(sq: np.ndarray, offset: int, K: int, steps: int, h: float) -> np.ndarray:
    """Trapezoid of ``sq`` over index windows ``[offset+k-K, offset+k]`` for all k.

    Windows are summed directly (no running cumsum) so small late energies
    keep their relative accuracy.
    """
    seg = sq[offset - K: offset + steps + 1]
    win = np.lib.stride_tricks.sliding_window_view(seg, K + 1)
    return h * (win.sum(axis=1) - 0.5 * (win[:, 0] + win[:, -1]))


def _boundary_dissipation(network: Network, sol, eta: DampingSignal, step: Fraction) -> np.ndarray:
    """``sum_q 2 eta_q |du/dx|^2`` at the damped ends, for every grid time.

    The boundary derivative comes from the inverse transform applied to
    the traces: at ``x = 0`` it is ``(f_{2j}(L) + f_{2j+1}(0)) / 2`` and at
    ``x = L`` it is ``(f_{2j}(0) + f_{2j+1}(L)) / 2``.
    """
    h = step
    steps = sol.steps
    off = sol.offset
    tr = sol.trace.real
    counts = sol.counts
    rates = np.zeros(steps + 1)
    etas = np.array([eta(k * h) for k in range(steps + 1)])
    k = np.arange(steps + 1)
    for qi, q in enumerate(network.damped):
        for j, (a, b) in enumerate(network.edges):
            if q not in (a, b):
                continue
            K = counts[2 * j]
            f_odd_0, f_odd_L = tr[2 * j, off + k], tr[2 * j, off + k - K]
            f_even_0, f_even_L = tr[2 * j + 1, off + k], tr[2 * j + 1, off + k - K]
            if a == q:
                du = 0.5 * (f_odd_L + f_even_0)
            else:
                du = 0.5 * (f_odd_0 + f_even_L)
            rates += 2 * etas[:, qi] * du ** 2
    return rates


def simulate_wave(state0: WaveState, network: Network | None, eta, horizon,
                  sample_every: int = 1) -> WaveTrajectory:
    """Evolve a wave state up to ``horizon`` on the grid of the state.

    Parameters
    ----------
    state0 : WaveState
    network : Network, optional
        Defaults to the network of ``state0``.
    eta : DampingSignal or sequence
        Damping at the damped vertices (a constant vector is accepted).
    horizon : rational
        Final time; must be a multiple of the grid step.
    sample_every : int
        Stride, in grid steps, of the sample times recorded for
        :func:`energy_identity_residual`.

    The energy at grid time ``t`` is half the squared norm of the traveling
    components, read off the boundary traces by trapezoid windows.
    """
    network = network or state0.network
    if not isinstance(eta, DampingSignal):
        eta = DampingSignal.constant(eta)
    if len(eta.values[0]) != len(network.damped):
        raise ValueError("damping signal size differs from the number of damped vertices")
    step = state0.step
    f0 = dalembert_forward(state0)
    lengths2 = [L for L in network.lengths for _ in range(2)]
    cache: dict = {}

    def matrix_at_step(k: int) -> np.ndarray:
        e = eta(k * step)
        m = cache.get(e)
        if m is None:
            m = build_M(network, e)
            cache[e] = m
        return m

    system = TransportSystem(lengths2, lambda t: matrix_at_step(int(as_fraction(t) / step)))
    sol = solve_transport(f0, system, horizon, step, matrix_at_step)
    h = float(step)
    tr = sol.trace.real
    energy = np.zeros(sol.steps + 1)
    for i, K in enumerate(sol.counts):
        energy += 0.5 * _window_trapezoid(tr[i] ** 2, sol.offset, K, sol.steps, h)
    diss = _boundary_dissipation(network, sol, eta, step)
    times = np.arange(sol.steps + 1) * h
    samples = list(range(0, sol.steps + 1, sample_every))
    if samples[-1] != sol.steps:
        samples.append(sol.steps)
    return WaveTrajectory(network, step, times, energy, diss, samples, sol, eta, state0,
                          {"horizon": str(as_fraction(horizon)), "step": str(step)})


def energy_identity_residual(traj: WaveTrajectory, eta: DampingSignal | None = None) -> float:
    """Largest violation of the energy balance over pairs of sample times.

    For sample times ``t < t'`` the balance reads
    ``E(t') - E(t) + int_t^t' sum_q 2 eta_q |du/dx(tau, q)|^2 dtau = 0``;
    the integral uses the trapezoid rule on the sample times.  The maximum
    over pairs is ``max(a) - min(a)`` for ``a = E + cumulative integral``.
    """
    if eta is not None:
        rates = _boundary_dissipation(traj.network, traj.solution, eta, traj.step)
    else:
        rates = traj.dissipation
    idx = np.array(traj.samples)
    t = traj.times[idx]
    r = rates[idx]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (r[1:] + r[:-1]))])
    a = traj.energy[idx] + cum
    return float(a.max() - a.min())


class DampingSet:
    """Admissible damping values: a finite set or a box of intervals."""

    def __init__(self, finite: Sequence[Sequence] | None = None,
                 box: Sequence[Sequence] | None = None):
        if (finite is None) == (box is None):
            raise ValueError("give exactly one of a finite set or a box")
        self.finite = None if finite is None else [tuple(float(as_fraction(x)) if isinstance(x, str)
                                                         else float(x) for x in v) for v in finite]
        self.box = None if box is None else [tuple(float(as_fraction(x)) if isinstance(x, str)
                                                   else float(x) for x in iv) for iv in box]
        if self.finite is not None and not self.finite:
            raise ValueError("finite damping set is empty")
        if self.box is not None and any(lo > hi or lo < 0 for lo, hi in self.box):
            raise ValueError("box intervals must satisfy 0 <= low <= high")

    @property
    def dimension(self) -> int:
        return len(self.finite[0]) if self.finite is not None else len(self.box)

    def infimum(self) -> list[float]:
        if self.finite is not None:
            return [min(v[i] for v in self.finite) for i in range(self.dimension)]
        return [lo for lo, _ in self.box]

    def to_json(self) -> dict:
        if self.finite is not None:
            return {"finite": [list(v) for v in self.finite]}
        return {"box": [list(iv) for iv in self.box]}

    @classmethod
    def from_json(cls, obj: dict) -> "DampingSet":
        if "finite" in obj:
            return cls(finite=obj["finite"])
        if "box" in obj:
            return cls(box=obj["box"])
        raise ValueError("damping set needs 'finite' or 'box'")


@dataclass
class WaveVerdict:
    stable: bool
    reasons: list

    def to_json(self) -> dict:
        return {"stable": self.stable, "reasons": list(self.reasons)}


def stability_verdict_wave(network: Network, damping: DampingSet) -> WaveVerdict:
    """Topological stability test: tree, one undamped vertex, damping bounded below."""
    if damping.dimension != len(network.damped):
        raise ValueError("damping set dimension differs from the number of damped vertices")
    reasons = []
    if not classify(network).is_tree:
        reasons.append("not a tree")
    if len(network.undamped) != 1:
        reasons.append("more than one undamped vertex")
    if any(x <= 0 for x in damping.infimum()):
        reasons.append("damping not bounded away from zero")
    return WaveVerdict(not reasons, reasons)


@dataclass
class Witness:
    """Periodic solution supported on one elementary path."""

    state: WaveState
    network: Network
    path: ElementaryPath
    boundary_residual: float
    constraint_residual: float


def path_to_vertex(network: Network, target) -> ElementaryPath:
    """Path from the first undamped vertex to ``target`` (e.g. a damped vertex)."""
    verts = nx.shortest_path(network.graph, network.undamped[0], target)
    return _path_from_vertices(network, verts, "to-vertex")


def integer_representative(network: Network) -> Network:
    """Same lattice structure with integer lengths (generators scaled up)."""
    ell = network.delays.ell
    from math import lcm
    den = 1
    for x in ell:
        den = lcm(den, x.denominator)
    if den == 1:
        return network
    return network.with_lengths(network.delays.scaled(den))


def periodic_witness(network: Network, path: ElementaryPath | None = None,
                     step=Fraction(1, 64)) -> Witness:
    """State of the solution ``s(j) sin(2 pi t) sin(2 pi x)`` on a path at ``t = 0``.

    Lengths are replaced by an integer representative of the same delay
    structure.  The displacement vanishes and the velocity is
    ``2 pi s(j) sin(2 pi x)`` on the path edges.  Without an explicit path
    the first qualifying path (cycle or undamped-to-undamped) is used; a
    network without one has no such witness.
    """
    net = integer_representative(network)
    if path is None:
        cl = classify(net)
        if not cl.elementary_paths:
            raise ValueError("no qualifying path: tree with a single undamped vertex")
        path = cl.elementary_paths[0]
    step = as_fraction(step)
    counts = grid_counts(net.lengths, step)
    h = float(step)
    du = [np.zeros(K + 1) for K in counts]
    v = [np.zeros(K + 1) for K in counts]
    for j, s in zip(path.edges, path.signs):
        x = np.arange(counts[j] + 1) * h
        v[j] = 2 * np.pi * s * np.sin(2 * np.pi * x)
    state = WaveState(net, step, du, v)
    bres = max(float(np.abs(a[[0, -1]]).max()) for a in v)
    R = build_R(net)
    f = dalembert_forward(state)
    cres = 0.0
    if R.shape[0]:
        ints = np.array([trapezoid(p, h) for p in f])
        cres = float(np.abs(R @ ints).max())
    return Witness(state, net, path, bres, cres)


def decay_rate_fit(times: Sequence[float], energy: Sequence[float]) -> dict:
    """Least-squares slope of ``ln energy`` over the trailing half of the trace."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(energy, dtype=float)
    if t.shape != e.shape or t.size < 4:
        raise ValueError("need matching times and energies (at least 4 samples)")
    half = t.size // 2
    t, e = t[half:], e[half:]
    if np.any(e <= 0):
        raise ValueError("energies must be positive")
    y = np.log(e)
    slope, icpt = np.polyfit(t, y, 1)
    fit = slope * t + icpt
    ss_res = float(((y - fit) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1 - ss_res / ss_tot
    return {"rate": float(slope), "r2": r2}
