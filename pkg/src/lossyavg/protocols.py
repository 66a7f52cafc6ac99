"""Edge selection, rate accounting and the protocol runners.

Rates are charged analytically: an exchange costs each transmitting node
1/2 log2(1/d) bits per source symbol, or the Wyner-Ziv rate

    1/2 log2((1 - (1 - d) rho^2) / d)

when the receiver's estimate is used as side information. The rate mode
never changes the distortion trajectory.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ensemble
from .ensemble import BatchEnsemble, EnsembleState
from .rng import substream
from .spectral import validate_q
from .topology import Topology, is_connected

KINDS = ("gossip", "fixed", "star")


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    kind: str
    T: int = 0
    d: float = 0.1
    wz: bool = False
    seed: int = 0
    trials: int = 0
    sequence: tuple = ()  # fixed kind: 0-based edges
    d1: float | None = None  # star kind only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProtocolError(f"unknown protocol kind {self.kind!r}")
        if self.T < 0:
            raise ProtocolError("T must be >= 0")
        if not (0.0 <= self.d < 1.0):
            raise ProtocolError("d must lie in [0, 1)")
        if self.trials < 0:
            raise ProtocolError("trials must be >= 0")
        if self.kind == "star":
            if self.d1 is None or not (0.0 < self.d1 < 1.0) or not (0.0 < self.d < 1.0):
                raise ProtocolError("star protocol needs 0 < d < 1 and 0 < d1 < 1")
        if self.kind == "fixed" and len(self.sequence) != self.T:
            raise ProtocolError(f"fixed sequence has {len(self.sequence)} rounds, T={self.T}")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    i: int
    j: int
    rate_i: float
    rate_j: float
    rho2: float | None = None


@dataclass
class RunResult:
    per_node_rate: np.ndarray
    avg_rate: float
    per_node_distortion: np.ndarray
    avg_distortion: float
    rounds_used: int
    round_log: list
    seed: int
    rate_unbounded: bool = False
    monte_carlo: dict | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def num(x):
            x = float(x)
            return None if math.isinf(x) else x

        return {
            "per_node_rate": [num(r) for r in self.per_node_rate],
            "avg_rate": num(self.avg_rate),
            "per_node_distortion": [float(x) for x in self.per_node_distortion],
            "avg_distortion": float(self.avg_distortion),
            "rounds_used": self.rounds_used,
            "rate_unbounded": self.rate_unbounded,
            "seed": self.seed,
            "monte_carlo": self.monte_carlo,
            "extra": self.extra,
            "round_log": [{**asdict(r), "i": r.i + 1, "j": r.j + 1,
                           "rate_i": num(r.rate_i), "rate_j": num(r.rate_j)}
                          for r in self.round_log],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def round_log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "i", "j", "rate_i", "rate_j", "rho2"])
        for r in self.round_log:
            w.writerow([r.round, r.i + 1, r.j + 1, repr(r.rate_i), repr(r.rate_j),
                        "" if r.rho2 is None else repr(r.rho2)])
        return buf.getvalue()


# -- edge selection --------------------------------------------------------------

def _check_rows(q):
    rows = q.sum(axis=1)
    if np.any(rows <= 0):
        bad = int(np.argmax(rows <= 0))
        raise ProtocolError(f"row {bad + 1} of Q is all zero")


def sample_gossip_sequence(t: Topology, q, T: int, rng) -> list[tuple[int, int]]:
    """T rounds of: node i uniform on M, then neighbour j with probability Q_ij."""
    q = np.asarray(q, dtype=float)
    _check_rows(q)
    cum = np.cumsum(q, axis=1)
    cum /= cum[:, -1:]
    i = rng.integers(t.m, size=T)
    u = rng.random(T)
    j = np.array([np.searchsorted(cum[a], b, side="right") for a, b in zip(i, u)], dtype=int)
    j = np.minimum(j, t.m - 1)
    return [(int(a), int(b)) for a, b in zip(i, j)]


def sample_gossip_edge(t: Topology, q, rng) -> tuple[int, int]:
    return sample_gossip_sequence(t, q, 1, rng)[0]


def gossip_sequence(t: Topology, q, T: int, seed: int, index: int = 0):
    """The ``index``-th seeded gossip sequence; run_protocol uses index 0."""
    return sample_gossip_sequence(t, q, T, substream(seed, index))


def edge_probability(q, i: int, j: int) -> float:
    """Per-round probability that the unordered edge {i, j} is selected."""
    q = np.asarray(q)
    return float(q[i, j] + q[j, i]) / q.shape[0]


def sequence_probability(q, seq) -> float:
    """The displayed gossip pmf m^-T prod Q_ij^count, with i < j.

    This is the literal closed form; for asymmetric Q it differs from the
    true selection probability, which is prod edge_probability(q, i, j).
    """
    q = np.asarray(q, dtype=float)
    m = q.shape[0]
    p = float(m) ** (-len(seq))
    for a, b in seq:
        p *= q[min(a, b), max(a, b)]
    return p


def validate_sequence(t: Topology, seq) -> list[tuple[int, int]]:
    out = []
    for a, b in seq:
        a, b = int(a), int(b)
        if not t.has_edge(a, b):
            raise ProtocolError(f"{{{a + 1},{b + 1}}} is not an edge of the topology")
        out.append((a, b))
    return out


# -- rates ---------------------------------------------------------------------

def plain_rate(d: float) -> float:
    if d <= 0.0:
        return math.inf
    return 0.5 * math.log2(1.0 / d)


def wz_rate(d: float, rho2: float) -> float:
    if d <= 0.0:
        return math.inf
    arg = (1.0 - (1.0 - d) * rho2) / d
    assert arg > 0.0, "Wyner-Ziv rate argument must be positive"
    return max(0.5 * math.log2(arg), 0.0)


def per_round_rate(state: EnsembleState, i: int, j: int, d: float, wz: bool = False):
    """Rates (r_i, r_j) charged for an exchange, using the state before it."""
    if not (0.0 <= d < 1.0):
        raise ProtocolError("d must lie in [0, 1)")
    if not wz:
        r = plain_rate(d)
        return r, r
    rho2 = ensemble.wz_correlation(state, i, j)
    r = wz_rate(d, rho2)
    return r, r


# -- runners -------------------------------------------------------------------

def run_protocol(t: Topology, cfg: ProtocolConfig, q=None) -> RunResult:
    if not is_connected(t):
        raise ProtocolError("topology is not connected")
    if cfg.kind == "star":
        if not all(t.has_edge(0, k) for k in range(1, t.m)):
            raise ProtocolError("star protocol needs node 1 adjacent to every other node")
        res = run_star_centralized(t.m, cfg.d, cfg.d1)
        res.seed = cfg.seed
        if cfg.trials:
            res.monte_carlo = star_monte_carlo(t.m, cfg.d, cfg.d1, cfg.trials, cfg.seed)
        return res
    if cfg.kind == "gossip":
        if q is None:
            raise ProtocolError("gossip protocol needs a selection matrix Q")
        q = validate_q(t, q)
        seq = gossip_sequence(t, q, cfg.T, cfg.seed)
    else:
        if q is not None:
            raise ProtocolError("Q is only used by the gossip protocol")
        seq = validate_sequence(t, cfg.sequence)

    m = t.m
    state = ensemble.init_state(m)
    log = []
    charged = [[] for _ in range(m)]
    for k, (i, j) in enumerate(seq, start=1):
        rho2 = ensemble.wz_correlation(state, i, j) if cfg.wz else None
        ri, rj = per_round_rate(state, i, j, cfg.d, cfg.wz)
        charged[i].append(ri)
        charged[j].append(rj)
        log.append(RoundRecord(k, i, j, ri, rj, rho2))
        state.exchange_(i, j, cfg.d)

    unbounded = cfg.d == 0.0 and len(seq) > 0
    if cfg.wz:
        per_node = np.array([math.fsum(c) for c in charged])
    elif unbounded:
        per_node = np.where(state.selections > 0, math.inf, 0.0)
    else:
        # count * rate, so the average is exactly (T / m) log2(1 / d)
        per_node = state.selections * plain_rate(cfg.d)
    avg_rate = math.inf if unbounded else math.fsum(per_node) / m
    dist = ensemble.node_distortions(state)
    result = RunResult(
        per_node_rate=np.asarray(per_node, dtype=float),
        avg_rate=avg_rate,
        per_node_distortion=dist,
        avg_distortion=ensemble.average_distortion(state),
        rounds_used=len(seq),
        round_log=log,
        seed=cfg.seed,
        rate_unbounded=unbounded,
    )
    if cfg.trials:
        mc = ensemble.monte_carlo_run(m, seq, cfg.d, cfg.trials, cfg.seed)
        result.monte_carlo = {
            "trials": mc.trials,
            "per_node_distortion": mc.distortion.tolist(),
            "per_node_se": mc.distortion_se.tolist(),
            "avg_distortion": mc.avg_distortion,
            "avg_distortion_se": mc.avg_distortion_se,
        }
    return result


# -- centralized star protocol --------------------------------------------------

def star_distortions(m: int, d: float, d1: float) -> tuple[float, float]:
    """Closed-form (hub, leaf) distortions of the gather/scatter protocol."""
    hub = (m - 1) / m ** 2 * d
    u_power = 1.0 / m ** 2 + (m - 2) / m ** 2 * (1.0 - d)
    leaf = u_power * d1 + (m - 2) / m ** 2 * d
    return hub, leaf


def star_schedule(m: int):
    """Rounds of the star protocol as (round, leaf, hub_sends, leaf_sends).

    Leaves 2..m report to the hub in rounds 1..m-1; the hub answers leaf
    2m-t-1 in rounds m-1..2m-3, so round m-1 carries both directions.
    """
    rounds = []
    for t in range(1, 2 * m - 2):
        if t < m - 1:
            rounds.append((t, t, False, True))
        elif t == m - 1:
            rounds.append((t, m - 1, True, True))
        else:
            rounds.append((t, 2 * m - t - 2, True, False))
    return rounds


def run_star_centralized(m: int, d: float, d1: float) -> RunResult:
    if m < 3:
        raise ProtocolError("star protocol needs m >= 3")
    if not (0.0 < d < 1.0 and 0.0 < d1 < 1.0):
        raise ProtocolError("star protocol needs 0 < d, d1 < 1")
    r_leaf = plain_rate(d)
    r_hub = plain_rate(d1)
    rates = np.zeros(m)
    log = []
    for t, leaf, hub_sends, leaf_sends in star_schedule(m):
        ri = r_hub if hub_sends else 0.0
        rj = r_leaf if leaf_sends else 0.0
        rates[0] += ri
        rates[leaf] += rj
        log.append(RoundRecord(t, 0, leaf, ri, rj))
    hub, leaf = star_distortions(m, d, d1)
    dist = np.array([hub] + [leaf] * (m - 1))
    return RunResult(
        per_node_rate=rates,
        avg_rate=(m - 1) / (2 * m) * math.log2(1.0 / (d * d1)),
        per_node_distortion=dist,
        avg_distortion=(hub + (m - 1) * leaf) / m,
        rounds_used=2 * m - 3,
        round_log=log,
        seed=0,
    )


def star_monte_carlo(m: int, d: float, d1: float, trials: int, seed: int) -> dict:
    """Sample-path simulation of the star protocol's test channels."""
    xs_err = np.zeros(m)
    xs_err2 = np.zeros(m)
    n_total = 0
    # power of each hub-side description, built from its definition
    xhat_power = (1.0 - d) ** 2 * (1.0 + d / (1.0 - d))
    u_power = (1.0 + (m - 2) * xhat_power) / m ** 2
    for b, start in enumerate(range(0, trials, ensemble.MC_BLOCK)):
        n = min(ensemble.MC_BLOCK, trials - start)
        rng = substream(seed, b)
        x = rng.standard_normal((n, m))
        z = math.sqrt(d / (1.0 - d)) * rng.standard_normal((n, m - 1))
        xhat = (1.0 - d) * (x[:, 1:] + z)
        s1 = x[:, 0] / m + xhat.sum(axis=1) / m
        u = s1[:, None] - xhat / m
        zt = math.sqrt(u_power * d1 / (1.0 - d1)) * rng.standard_normal((n, m - 1))
        uhat = (1.0 - d1) * (u + zt)
        est = np.column_stack([s1, x[:, 1:] / m + uhat])
        err = (x.mean(axis=1, keepdims=True) - est) ** 2
        xs_err += err.sum(axis=0)
        xs_err2 += (err ** 2).sum(axis=0)
        n_total += n
    mean = xs_err / n_total
    var = np.maximum(xs_err2 / n_total - mean ** 2, 0.0) * n_total / max(n_total - 1, 1)
    return {
        "trials": n_total,
        "per_node_distortion": mean.tolist(),
        "per_node_se": np.sqrt(var / n_total).tolist(),
    }


# -- batched gossip runs ----------------------------------------------------------

@dataclass
class GossipBatchResult:
    avg_distortion: np.ndarray  # per run
    plain_rate: np.ndarray
    wz_rate: np.ndarray

    @staticmethod
    def _mean_se(x):
        x = np.asarray(x, dtype=float)
        se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return float(x.mean()), se


def gossip_edges(t: Topology, q, T: int, runs: int, seed: int) -> np.ndarray:
    """(runs, T, 2) array of seeded gossip sequences; run r uses index r."""
    out = np.zeros((runs, T, 2), dtype=int)
    for r in range(runs):
        seq = gossip_sequence(t, q, T, seed, r)
        if T:
            out[r] = np.array(seq)
    return out


def run_gossip_batch(m: int, edges: np.ndarray, d: float, record_every: int = 0):
    """Propagate all sequences of ``edges`` at once.

    Returns a GossipBatchResult and, when ``record_every`` > 0, the per-run
    average distortion after every ``record_every`` rounds (round 0 first).
    """
    runs, T = edges.shape[0], edges.shape[1]
    batch = BatchEnsemble(runs, m)
    wz_bits = np.zeros(runs)
    track = [batch.average_distortions()] if record_every else None
    r_plain = plain_rate(d)
    for t in range(T):
        i, j = edges[:, t, 0], edges[:, t, 1]
        rho2 = batch.exchange(i, j, d)
        if d > 0:
            arg = (1.0 - (1.0 - d) * rho2) / d
            wz_bits += 2.0 * np.maximum(0.5 * np.log2(arg), 0.0)
        if record_every and (t + 1) % record_every == 0:
            track.append(batch.average_distortions())
    plain = np.full(runs, T / m * math.log2(1.0 / d) if d > 0 else (math.inf if T else 0.0))
    wz = wz_bits / m if d > 0 else plain.copy()
    res = GossipBatchResult(batch.average_distortions(), plain, wz)
    if record_every:
        return res, np.array(track)
    return res
