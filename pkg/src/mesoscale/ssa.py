"""Exact simulation of the two-scale reaction-diffusion jump process.

The continuous species C lives as ``countsC[j]`` particles per cell with
concentration ``u_j = countsC[j] / l``; the discrete species D is an integer
count ``v_j`` per cell and does not diffuse.  C reactions fire at
``l * lambda_r(u_j, v_j)``, D reactions at ``lambda_r(u_j, v_j)``, and every C
particle hops to each neighbour at rate ``n^2``.

The process is stopped at the first time ``||u||_inf > M + 1`` or
``||v||_{H_N^{-alpha}} > M + 1``; from there on the jumps are frozen and the
state follows the drift ODE.  Drift integrals are accumulated exactly along
the path, so the martingale parts can be recovered afterwards.
"""

from __future__ import annotations

import io
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .lattice import (GridFunction, _basis_tables, check_odd, coeff_norm,
                      eigenvalues, laplacian_array, sobolev_weights, synthesize_array)
from .reactions import ReactionNetwork, compile_network

TRAJ_MAGIC = b"MSCTRJ01"
EVENTS_MAGIC = b"MSCEVT01"
FORMAT_VERSION = 1

_STATUS_TEXT = {
    K.NEG_RATE: "a reaction rate evaluated negative",
    K.NEG_COUNT: "a particle count went negative",
    K.EVENT_CAP: "event cap reached before the horizon",
    K.AUDIT_FAIL: "rate tree disagrees with freshly evaluated rates",
}


class SimulationError(RuntimeError):
    """Raised when the jump process hits an inconsistent state."""


def replica_seed(master_seed: int, index: int) -> int:
    """32-bit seed of replica ``index``, independent of scheduling."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(index)])
    return int(ss.generate_state(1, np.uint32)[0])


def sample_grid(T: float, count: int) -> tuple:
    """``count`` equally spaced sample times from 0 to T inclusive."""
    if count < 2:
        raise ValueError("need at least two samples")
    return tuple(float(t) for t in np.linspace(0.0, T, int(count)))


@dataclass(frozen=True)
class SimConfig:
    n: int
    l: float
    T: float
    sample_times: tuple
    seed: int = 0
    M: float | None = None
    alpha_trunc: float = 0.25
    trunc_check_every: int | None = None
    mode: str = "exact"
    tau_dt: float | None = None
    log_events: bool = False
    max_events: int = 10**10
    audit_every: int = 100_000

    def __post_init__(self):
        check_odd(self.n)
        if not self.l > 0:
            raise ValueError("population scale l must be positive")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        ts = np.asarray(self.sample_times, dtype=float)
        if ts.ndim != 1 or ts.size == 0:
            raise ValueError("sample_times must be a non-empty list")
        if np.any(np.diff(ts) < 0) or ts[0] < 0 or ts[-1] > self.T:
            raise ValueError("sample_times must be sorted and inside [0, T]")
        object.__setattr__(self, "sample_times", tuple(float(t) for t in ts))
        if not 0 < self.alpha_trunc < 0.5:
            raise ValueError("alpha_trunc must lie in (0, 1/2)")
        if self.mode not in ("exact", "tau_leap"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "tau_leap" and not (self.tau_dt and self.tau_dt > 0):
            raise ValueError("tau_leap mode needs a positive tau_dt")
        if self.trunc_check_every is not None and self.trunc_check_every < 1:
            raise ValueError("trunc_check_every must be positive")

    @property
    def check_every(self) -> int:
        return self.trunc_check_every or self.n

    def threshold(self, network: ReactionNetwork) -> float:
        return float(self.M if self.M is not None else network.M)


def reaction_table(network: ReactionNetwork) -> np.ndarray:
    """Reactions packed row-wise in the layout the compiled kernels read."""
    c = compile_network(network)
    R = len(c["species"])
    tab = np.zeros((R, K.COL_POLY + c["bpoly"].shape[1]))
    tab[:, K.COL_SPECIES] = c["species"]
    tab[:, K.COL_GAMMA] = c["gamma"]
    tab[:, K.COL_A] = c["a"]
    tab[:, K.COL_D] = c["d"]
    tab[:, K.COL_BKIND] = c["bkind"]
    tab[:, K.COL_VMAX:K.COL_HILL_H + 1] = c["bhill"]
    tab[:, K.COL_POLY:] = c["bpoly"]
    return tab


def _trunc_tables(n, alpha):
    cos, sin = _basis_tables(n)
    return sobolev_weights(n, -alpha).copy(), cos.copy(), sin.copy()


# ---------------------------------------------------------------------------
# state and single steps
# ---------------------------------------------------------------------------

@dataclass
class SimState:
    t: float
    countsC: np.ndarray
    countsD: np.ndarray
    rate_tree: np.ndarray
    tree_offset: int
    drift_accum_C: np.ndarray
    drift_accum_D: np.ndarray
    u_accum: np.ndarray
    l: float
    n_channels: int
    truncated_at: float | None = None

    @property
    def u(self) -> np.ndarray:
        return self.countsC / self.l

    @property
    def v(self) -> np.ndarray:
        return self.countsD.astype(float)

    @property
    def total_rate(self) -> float:
        return float(self.rate_tree[1])

    def leaf_rates(self) -> np.ndarray:
        """Channel rates in channel-id order."""
        return self.rate_tree[self.tree_offset:self.tree_offset + self.n_channels].copy()


@dataclass(frozen=True)
class Event:
    time: float
    channel: int
    cell: int
    kind: str  # "reaction", "diffuse_right", "diffuse_left" or "none"
    reaction: int = -1


def round_counts(x) -> np.ndarray:
    """Round half away from zero to integer counts."""
    x = np.asarray(x, dtype=float)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def initial_counts(network, u0, v0, config: SimConfig):
    n = config.n
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if u0.shape != (n,) or v0.shape != (n,):
        raise ValueError(f"initial data must have {n} cells")
    if np.any(u0 < 0) or np.any(v0 < 0):
        raise ValueError("initial data must be nonnegative")
    if np.any(v0 != np.round(v0)):
        raise ValueError("v0 must be integer-valued")
    M = config.threshold(network)
    if np.max(u0) >= M:
        raise ValueError(f"||u0||_inf = {np.max(u0):g} is not below M = {M:g}")
    return round_counts(config.l * u0), v0.astype(np.int64)


def init_state(network: ReactionNetwork, u0, v0, config: SimConfig) -> SimState:
    _check_scale(network, config)
    cC, cD = initial_counts(network, u0, v0, config)
    net = reaction_table(network)
    Kc = len(network.reactions) + 2
    P = int(K.tree_size(config.n * Kc))
    tree = np.zeros(2 * P)
    status = K.build_tree(cC, cD, float(config.l), config.n, net, Kc, tree, P)
    _raise_status(status)
    st = SimState(0.0, cC, cD, tree, P, np.zeros(config.n), np.zeros(config.n),
                  np.zeros(config.n), float(config.l), config.n * Kc)
    return st


def _check_scale(network, config):
    if config.l < network.gamma_max:
        raise ValueError(f"l = {config.l} is below the largest jump |gamma| = {network.gamma_max}")


def _raise_status(status):
    if status != K.OK:
        raise SimulationError(_STATUS_TEXT.get(int(status), f"status {status}"))


def decode_channel(channel: int, n_reactions: int):
    """``(cell, kind, reaction index)`` of a channel id."""
    Kc = n_reactions + 2
    j, k = divmod(int(channel), Kc)
    if k < n_reactions:
        return j, "reaction", k
    return j, ("diffuse_right" if k == n_reactions else "diffuse_left"), -1


def step(state: SimState, network: ReactionNetwork, config: SimConfig, rng) -> Event:
    """Fire one event of the direct method.

    With zero total rate the state is absorbing: time jumps to the next sample
    time (or the horizon) and an event of kind ``"none"`` is returned.
    """
    net = reaction_table(network)
    R = len(network.reactions)
    u, v = state.u, state.v
    rc = np.empty(config.n)
    rd = np.empty(config.n)
    K.drift_field(u, v, net, rc, rd)
    u1, u2 = rng.random(2)
    cC = state.countsC.copy()
    cD = state.countsD.copy()
    dt, ch, status = K.fire_once(net, config.n, float(config.l), cC, cD,
                                 state.rate_tree, state.tree_offset, u1, u2)
    if ch < 0:
        later = [s for s in config.sample_times if s > state.t]
        t_new = later[0] if later else config.T
        dt = t_new - state.t
        state.drift_accum_C += rc * dt
        state.drift_accum_D += rd * dt
        state.u_accum += u * dt
        state.t = t_new
        return Event(state.t, -1, -1, "none")
    _raise_status(status)
    state.drift_accum_C += rc * dt
    state.drift_accum_D += rd * dt
    state.u_accum += u * dt
    state.countsC[:] = cC
    state.countsD[:] = cD
    state.t += dt
    cell, kind, r = decode_channel(ch, R)
    return Event(state.t, int(ch), cell, kind, r)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    n: int
    l: float
    T: float
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    driftC: np.ndarray
    driftD: np.ndarray
    u_integral: np.ndarray
    u0: np.ndarray
    v0: np.ndarray
    rng_seed: int
    network_digest: bytes
    n_reactions: int
    event_count: int = 0
    truncated_at: float | None = None
    trunc_window: float = 0.0
    approximate: bool = False
    event_times: np.ndarray | None = None
    event_channels: np.ndarray | None = None
    max_audit_deviation: float = 0.0

    @property
    def samples(self):
        """``(t, u, v, int R_C, int R_D)`` per sample time, as grid functions."""
        return [(float(t), GridFunction(self.u[i]), GridFunction(self.v[i]),
                 GridFunction(self.driftC[i]), GridFunction(self.driftD[i]))
                for i, t in enumerate(self.times)]

    @property
    def has_event_log(self) -> bool:
        return self.event_times is not None

    @property
    def counts0(self):
        return round_counts(self.l * self.u0), self.v0.astype(np.int64)

    # binary file IO -------------------------------------------------------

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        S = len(self.times)
        tau = np.nan if self.truncated_at is None else self.truncated_at
        buf.write(TRAJ_MAGIC)
        buf.write(struct.pack("<IQdddQ32sQQdd??", FORMAT_VERSION, self.n, self.l, self.T,
                              tau, self.rng_seed, self.network_digest, S, self.event_count,
                              self.trunc_window, self.max_audit_deviation,
                              self.approximate, self.has_event_log))
        buf.write(struct.pack("<Q", self.n_reactions))
        buf.write(GridFunction(self.u0).to_bytes())
        buf.write(GridFunction(self.v0).to_bytes())
        for i in range(S):
            buf.write(struct.pack("<d", self.times[i]))
            for arr in (self.u, self.v, self.driftC, self.driftD, self.u_integral):
                buf.write(GridFunction(arr[i]).to_bytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Trajectory":
        if data[:8] != TRAJ_MAGIC:
            raise ValueError("not a trajectory file")
        head = struct.Struct("<IQdddQ32sQQdd??")
        (version, n, l, T, tau, seed, digest, S, events, window, audit,
         approx, logged) = head.unpack_from(data, 8)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported trajectory version {version}")
        off = 8 + head.size
        (R,) = struct.unpack_from("<Q", data, off)
        off += 8
        u0, off = GridFunction.from_bytes(data, off)
        v0, off = GridFunction.from_bytes(data, off)
        times = np.empty(S)
        blocks = [np.empty((S, n)) for _ in range(5)]
        for i in range(S):
            (times[i],) = struct.unpack_from("<d", data, off)
            off += 8
            for b in blocks:
                g, off = GridFunction.from_bytes(data, off)
                b[i] = g.values
        return cls(n, l, T, times, *blocks, u0.values, v0.values, seed, digest, R,
                   events, None if np.isnan(tau) else tau, window, approx,
                   max_audit_deviation=audit)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Trajectory":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def event_log_bytes(self) -> bytes:
        if not self.has_event_log:
            raise ValueError("trajectory carries no event log")
        rec = np.empty(len(self.event_times), dtype=[("t", "<f8"), ("c", "<u4")])
        rec["t"] = self.event_times
        rec["c"] = self.event_channels
        head = EVENTS_MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(rec))
        return head + rec.tobytes()

    def save_event_log(self, path):
        with open(path, "wb") as fh:
            fh.write(self.event_log_bytes())

    def attach_event_log(self, data: bytes):
        """Load an event log written by :meth:`save_event_log`."""
        if data[:8] != EVENTS_MAGIC:
            raise ValueError("not an event log file")
        version, count = struct.unpack_from("<IQ", data, 8)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported event log version {version}")
        rec = np.frombuffer(data, dtype=[("t", "<f8"), ("c", "<u4")], count=count, offset=20)
        self.event_times = rec["t"].astype(float)
        self.event_channels = rec["c"].astype(np.int64)


def simulate(network: ReactionNetwork, u0, v0, config: SimConfig) -> Trajectory:
    """Run one trajectory and record it at ``config.sample_times``."""
    _check_scale(network, config)
    cC, cD = initial_counts(network, u0, v0, config)
    net = reaction_table(network)
    n = config.n
    ts = np.asarray(config.sample_times, dtype=float)
    M = config.threshold(network)
    seed = int(config.seed) & 0xFFFFFFFF
    common = dict(n=n, l=float(config.l), T=float(config.T), times=ts,
                  u0=cC / config.l, v0=cD.astype(float), rng_seed=seed,
                  network_digest=network.digest(), n_reactions=len(network.reactions))
    if config.mode == "tau_leap":
        uu, vv, cc, dd, ii, steps = K.simulate_tau_leap(
            net, n, float(config.l), float(config.T), ts, seed, M, float(config.tau_dt), cC, cD)
        return Trajectory(u=uu, v=vv, driftC=cc, driftD=dd, u_integral=ii,
                          event_count=int(steps), approximate=True, **common)
    w, cos, sin = _trunc_tables(n, config.alpha_trunc)
    (uu, vv, cc, dd, ii, tau, window, events, status, ev_t, ev_c, audit) = K.simulate_exact(
        net, n, float(config.l), float(config.T), ts, seed, M, w, cos, sin,
        int(config.check_every), cC, cD, bool(config.log_events),
        int(config.max_events), int(config.audit_every))
    _raise_status(status)
    return Trajectory(u=uu, v=vv, driftC=cc, driftD=dd, u_integral=ii,
                      event_count=int(events),
                      truncated_at=None if tau < 0 else float(tau),
                      trunc_window=float(window),
                      event_times=ev_t if config.log_events else None,
                      event_channels=ev_c if config.log_events else None,
                      max_audit_deviation=float(audit), **common)


def simulate_ensemble(network, u0, v0, config: SimConfig, replicas: int, jobs: int = 1,
                      reduce=None):
    """Run replicas with seeds split from ``config.seed``.

    ``reduce`` maps each trajectory to whatever should be kept (the default
    keeps the trajectory); results are ordered by replica index.
    """
    from dataclasses import replace

    def one(i):
        cfg = replace(config, seed=replica_seed(config.seed, i))
        traj = simulate(network, u0, v0, cfg)
        return traj if reduce is None else reduce(traj)

    if jobs <= 1:
        return [one(i) for i in range(replicas)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, range(replicas)))


# ---------------------------------------------------------------------------
# post-hoc analysis
# ---------------------------------------------------------------------------

def martingale_arrays(traj: Trajectory):
    """``(Z_C, Z_D)`` as ``(samples, n)`` arrays.

    ``Z_C = u - u0 - int R_C - Delta_N int u`` and ``Z_D = v - v0 - int R_D``.
    """
    if traj.driftC is None or traj.u_integral is None:
        raise ValueError("trajectory carries no drift accumulators")
    zc = traj.u - traj.u0 - traj.driftC - laplacian_array(traj.u_integral)
    zd = traj.v - traj.v0 - traj.driftD
    return zc, zd


def extract_martingales(traj: Trajectory):
    """Martingale parts as lists of grid functions, one per sample."""
    zc, zd = martingale_arrays(traj)
    return [GridFunction(z) for z in zc], [GridFunction(z) for z in zd]


def _require_log(traj, network):
    if not traj.has_event_log:
        raise ValueError("this analysis needs a run with log_events=True")
    if network.digest() != traj.network_digest:
        raise ValueError("network does not match the one the trajectory was run with")


@dataclass(frozen=True)
class ConvolutionPath:
    """Spectral coefficients of the stochastic convolution at the sample times."""
    n: int
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def values(self) -> np.ndarray:
        return synthesize_array(self.a, self.b, self.n)

    def sup_norms(self) -> np.ndarray:
        return np.max(np.abs(self.values()), axis=-1)

    def sobolev_norms(self, beta) -> np.ndarray:
        return coeff_norm(self.a, self.b, beta, self.n)


def stochastic_convolution(traj: Trajectory, network: ReactionNetwork,
                           refresh_every: int = 4096) -> ConvolutionPath:
    """Replay the event log to get ``Y_t = int_0^t T_N(t-s) dZ_C(s ^ tau)``."""
    _require_log(traj, network)
    cC, cD = traj.counts0
    cos, sin = _basis_tables(traj.n)
    tau = -1.0 if traj.truncated_at is None else traj.truncated_at
    a, b = K.replay_convolution(reaction_table(network), traj.n, traj.l, traj.n_reactions + 2,
                                cC, cD, traj.event_times, traj.event_channels, tau,
                                eigenvalues(traj.n).copy(), cos.copy(), sin.copy(),
                                np.asarray(traj.times, dtype=float), int(refresh_every))
    return ConvolutionPath(traj.n, np.asarray(traj.times), a, b)


@dataclass(frozen=True)
class QuadraticVariation:
    """Realized squared jumps ``S`` of ``<Z_C, phi>`` and the compensator ``G``."""
    times: np.ndarray
    S: np.ndarray
    G: np.ndarray

    @property
    def gap(self) -> float:
        return float(self.S[-1] - self.G[-1])


def quadratic_variation(traj: Trajectory, network: ReactionNetwork, phi) -> QuadraticVariation:
    """Event-wise ``S(t)`` and ``G(t) = (1/(n l)) int <u, (grad+ phi)^2 + (grad- phi)^2>
    + <R~_C, phi^2> ds`` up to ``t ^ tau`` along one logged path."""
    _require_log(traj, network)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (traj.n,):
        raise ValueError("probe has the wrong number of cells")
    cC, cD = traj.counts0
    stop = traj.T if traj.truncated_at is None else min(traj.T, traj.truncated_at)
    s, g = K.replay_compensator(reaction_table(network), traj.n, traj.l, traj.n_reactions + 2,
                                cC, cD, traj.event_times, traj.event_channels, stop, phi,
                                np.asarray(traj.times, dtype=float))
    return QuadraticVariation(np.asarray(traj.times), s, g)


@dataclass(frozen=True)
class AuditReport:
    replicas: int
    mean_gap: float
    lo: float
    hi: float
    mean_S: float
    mean_G: float
    gaps: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    def to_dict(self) -> dict:
        return {"replicas": self.replicas, "mean_gap": self.mean_gap, "lo": self.lo,
                "hi": self.hi, "mean_S": self.mean_S, "mean_G": self.mean_G,
                "passed": self.passed}


def compensator_audit(trajs, network: ReactionNetwork, phi, level=0.99, seed=0) -> AuditReport:
    """Ensemble check that ``S(T) - G(T)`` has mean zero (bootstrap CI)."""
    from .stats import bootstrap_ci

    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    qv = [quadratic_variation(t, network, phi) for t in trajs]
    S = np.array([q.S[-1] for q in qv])
    G = np.array([q.G[-1] for q in qv])
    gaps = S - G
    lo, hi = bootstrap_ci(gaps, level=level, seed=seed)
    return AuditReport(len(gaps), float(gaps.mean()), lo, hi, float(S.mean()),
                       float(G.mean()), gaps)
