"""Exact second-moment propagation of the weighted-sum update.

Every node estimate is a linear function of the unit-power sources plus
independent quantisation noise,

    S_i(t) = sum_j gamma_ij(t) X_j + V_i(t),

so the pair (Gamma, Sigma_V) with Sigma_V = Cov(V) describes the whole
ensemble. One exchange on {i, j} with normalised local distortion d is

    S_i' = S_i / 2 + (S_j + Z_j) / 2,   Var Z_j = E(S_j^2) d / (1 - d)

and symmetrically for j. ``monte_carlo_run`` simulates the same update on
sample paths and serves as the independent check of the engine.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import substream

MC_BLOCK = 4096
SOURCE_KINDS = ("gaussian", "rademacher", "uniform")


class EnsembleError(ValueError):
    pass


def noise_factor(d: float) -> float:
    """d / (1 - d), the test-channel noise power per unit signal power."""
    if not (0.0 <= d < 1.0):
        raise EnsembleError(f"normalised distortion must lie in [0, 1), got {d!r}")
    return d / (1.0 - d)


@dataclass
class EnsembleState:
    gamma: np.ndarray
    sigma_v: np.ndarray
    participated: np.ndarray
    selections: np.ndarray  # times each node was in the selected edge
    round: int = 0

    @property
    def m(self) -> int:
        return self.gamma.shape[0]

    def copy(self) -> "EnsembleState":
        return EnsembleState(self.gamma.copy(), self.sigma_v.copy(), self.participated.copy(),
                             self.selections.copy(), self.round)

    def second_moment(self, i: int) -> float:
        g = self.gamma[i]
        return float(g @ g + self.sigma_v[i, i])

    def cross_moment(self, i: int, j: int) -> float:
        return float(self.gamma[i] @ self.gamma[j] + self.sigma_v[i, j])

    def exchange_(self, i: int, j: int, d: float) -> None:
        """Apply one exchange in place."""
        if i == j:
            raise EnsembleError("an exchange needs two distinct nodes")
        c = noise_factor(d)
        g, s = self.gamma, self.sigma_v
        pi, pj = self.second_moment(i), self.second_moment(j)
        pooled = s[i, i] + s[j, j] + 2.0 * s[i, j]

        avg = (g[i] + g[j]) / 2.0
        g[i] = avg
        g[j] = avg

        row = (s[i] + s[j]) / 2.0
        s[i, :] = row
        s[j, :] = row
        s[:, i] = row
        s[:, j] = row
        s[i, i] = (pooled + c * pj) / 4.0
        s[j, j] = (pooled + c * pi) / 4.0
        s[i, j] = s[j, i] = pooled / 4.0

        self.participated[[i, j]] = True
        self.selections[[i, j]] += 1
        self.round += 1

    def to_json(self) -> str:
        return json.dumps({
            "m": self.m,
            "round": self.round,
            "gamma": self.gamma.tolist(),
            "sigma_v": self.sigma_v.tolist(),
            "participated": self.participated.tolist(),
            "selections": self.selections.tolist(),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnsembleState":
        obj = json.loads(text)
        return cls(
            gamma=np.array(obj["gamma"], dtype=float),
            sigma_v=np.array(obj["sigma_v"], dtype=float),
            participated=np.array(obj["participated"], dtype=bool),
            selections=np.array(obj["selections"], dtype=int),
            round=int(obj["round"]),
        )


def init_state(m: int) -> EnsembleState:
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise EnsembleError(f"need m >= 2, got {m!r}")
    m = int(m)
    return EnsembleState(np.eye(m), np.zeros((m, m)), np.zeros(m, dtype=bool),
                         np.zeros(m, dtype=int), 0)


def apply_exchange(state: EnsembleState, i: int, j: int, d: float) -> EnsembleState:
    new = state.copy()
    new.exchange_(i, j, d)
    return new


def node_distortion(state: EnsembleState, i: int) -> float:
    """E((S - S_i)^2) after the final-estimate rule.

    A node that never took part in an exchange reports X_i / m.
    """
    m = state.m
    if not state.participated[i]:
        return (m - 1) / m ** 2
    dev = state.gamma[i] - 1.0 / m
    return float(dev @ dev + state.sigma_v[i, i])


def node_distortions(state: EnsembleState) -> np.ndarray:
    return np.array([node_distortion(state, i) for i in range(state.m)])


def average_distortion(state: EnsembleState) -> float:
    m = state.m
    idle = int(np.count_nonzero(~state.participated))
    active = [node_distortion(state, i) for i in range(m) if state.participated[i]]
    # integer numerator keeps the all-idle case exactly (m - 1) / m^2
    return idle * (m - 1) / m ** 3 + math.fsum(active) / m


def wz_correlation(state: EnsembleState, i: int, j: int) -> float:
    """Squared correlation coefficient of S_i and S_j."""
    pi, pj = state.second_moment(i), state.second_moment(j)
    if pi <= 0.0 or pj <= 0.0:
        raise EnsembleError("zero second moment, correlation undefined")
    rho2 = state.cross_moment(i, j) ** 2 / (pi * pj)
    return min(max(rho2, 0.0), 1.0)


def run_sequence(m: int, seq, d: float) -> EnsembleState:
    state = init_state(m)
    for i, j in seq:
        state.exchange_(i, j, d)
    return state


def expected_distortion_complete(m: int, d: float, T: int) -> np.ndarray:
    """Average distortion averaged over uniform gossip on the complete graph.

    The second-moment matrix M = E[S S^T] evolves linearly given the edge,
    so its mean over edges does too, and on the complete graph it stays of
    the form x I + y (11^T - I). A node idle after t rounds (probability
    (1 - 2/m)^t) reports X_i / m. Returns rounds 0..T.
    """
    if m < 3:
        raise EnsembleError("needs m >= 3")
    c = noise_factor(d)
    x, y = 1.0, 0.0
    out = np.empty(T + 1)
    for t in range(T + 1):
        idle = (1.0 - 2.0 / m) ** t
        # active nodes: E(S - S_i)^2 = M_ii - 1/m, and idle ones have M_ii = 1
        out[t] = x - idle - (1.0 - idle) / m + idle * (m - 1) / m ** 2
        x, y = ((1.0 - 2.0 / m) * x + (2.0 / m) * ((2.0 + c) * x / 4.0 + y / 2.0),
                y + (x - y) / (m * (m - 1)))
    return out


# -- batched engine ------------------------------------------------------------

class BatchEnsemble:
    """Many independent ensembles advanced in lock step.

    Same update as :class:`EnsembleState`, vectorised over a leading batch
    axis so that the gossip runner can propagate many edge sequences at once.
    """

    def __init__(self, batch: int, m: int):
        self.n = batch
        self.m = m
        self.gamma = np.broadcast_to(np.eye(m), (batch, m, m)).copy()
        self.sigma_v = np.zeros((batch, m, m))
        self.participated = np.zeros((batch, m), dtype=bool)
        self._k = np.arange(batch)

    def exchange(self, i, j, d: float) -> np.ndarray:
        """Exchange on edges (i[b], j[b]); returns the pre-exchange rho^2."""
        c = noise_factor(d)
        k = self._k
        g, s = self.gamma, self.sigma_v
        gi, gj = g[k, i], g[k, j]
        sii, sjj, sij = s[k, i, i], s[k, j, j], s[k, i, j]
        pi = np.einsum("bk,bk->b", gi, gi) + sii
        pj = np.einsum("bk,bk->b", gj, gj) + sjj
        cross = np.einsum("bk,bk->b", gi, gj) + sij
        rho2 = np.clip(cross ** 2 / (pi * pj), 0.0, 1.0)
        pooled = sii + sjj + 2.0 * sij

        avg = (gi + gj) / 2.0
        g[k, i] = avg
        g[k, j] = avg
        row = (s[k, i] + s[k, j]) / 2.0
        s[k, i, :] = row
        s[k, j, :] = row
        s[k, :, i] = row
        s[k, :, j] = row
        s[k, i, i] = (pooled + c * pj) / 4.0
        s[k, j, j] = (pooled + c * pi) / 4.0
        s[k, i, j] = pooled / 4.0
        s[k, j, i] = pooled / 4.0
        self.participated[k, i] = True
        self.participated[k, j] = True
        return rho2

    def node_distortions(self) -> np.ndarray:
        m = self.m
        dev = self.gamma - 1.0 / m
        raw = np.einsum("bij,bij->bi", dev, dev) + np.einsum("bii->bi", self.sigma_v)
        return np.where(self.participated, raw, (m - 1) / m ** 2)

    def average_distortions(self) -> np.ndarray:
        return self.node_distortions().mean(axis=1)


# -- Monte Carlo oracle ----------------------------------------------------------

@dataclass
class MonteCarloResult:
    trials: int
    source_kind: str
    distortion: np.ndarray  # per node
    distortion_se: np.ndarray
    avg_distortion: float
    avg_distortion_se: float
    moments: np.ndarray  # E[S S^T] of the raw end states
    block_moments: list = field(repr=False, default_factory=list)

    def wz_correlation(self, i: int, j: int) -> tuple[float, float]:
        """Estimate and batch-means standard error of rho^2_ij."""
        est = self.moments[i, j] ** 2 / (self.moments[i, i] * self.moments[j, j])
        per_block = [mo[i, j] ** 2 / (mo[i, i] * mo[j, j]) for mo in self.block_moments]
        if len(per_block) < 2:
            return float(est), float("nan")
        return float(est), float(np.std(per_block, ddof=1) / math.sqrt(len(per_block)))


def draw_sources(rng, kind: str, shape) -> np.ndarray:
    """Unit-power i.i.d. sources."""
    if kind == "gaussian":
        return rng.standard_normal(shape)
    if kind == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=shape)
    if kind == "uniform":
        r = math.sqrt(3.0)
        return rng.uniform(-r, r, size=shape)
    raise EnsembleError(f"unknown source kind {kind!r}; choose from {SOURCE_KINDS}")


def _noise_powers(m: int, seq, d: float) -> np.ndarray:
    """Var Z_i, Var Z_j per round, from the explicit linear form of each estimate.

    Estimates are tracked as coefficient rows over all primitive unit-power
    variables (the m sources, then one column per noise draw), which is a
    different bookkeeping from the (Gamma, Sigma_V) recursion.
    """
    c = noise_factor(d)
    forms = np.zeros((m, m + 2 * len(seq)))
    forms[:, :m] = np.eye(m)
    out = np.zeros((len(seq), 2))
    col = m
    for t, (i, j) in enumerate(seq):
        vi = c * float(forms[i] @ forms[i])
        vj = c * float(forms[j] @ forms[j])
        out[t] = vi, vj
        zi = np.zeros(forms.shape[1])
        zj = np.zeros(forms.shape[1])
        zi[col] = math.sqrt(vi)
        zj[col + 1] = math.sqrt(vj)
        col += 2
        fi, fj = forms[i].copy(), forms[j].copy()
        forms[i] = fi / 2.0 + (fj + zj) / 2.0
        forms[j] = fj / 2.0 + (fi + zi) / 2.0
    return out


def monte_carlo_run(m: int, seq, d: float, trials: int, seed: int,
                    source_kind: str = "gaussian") -> MonteCarloResult:
    """Sample-path simulation of the weighted-sum protocol on a fixed sequence.

    Applies the test channel (1 - d)(S + Z) and the update literally. Trials
    run in blocks of ``MC_BLOCK``; block b draws from substream (seed, b).
    """
    if trials < 1:
        raise EnsembleError("need at least one trial")
    seq = [(int(i), int(j)) for i, j in seq]
    powers = _noise_powers(m, seq, d)
    sd = np.sqrt(powers)
    involved = np.zeros(m, dtype=bool)
    for i, j in seq:
        involved[[i, j]] = True

    n_total = 0
    sum_err = np.zeros(m)
    sum_err2 = np.zeros(m)
    sum_avg = 0.0
    sum_avg2 = 0.0
    moments_sum = np.zeros((m, m))
    block_moments = []
    for b, start in enumerate(range(0, trials, MC_BLOCK)):
        n = min(MC_BLOCK, trials - start)
        rng = substream(seed, b)
        x = draw_sources(rng, source_kind, (n, m))
        s = x.copy()
        for t, (i, j) in enumerate(seq):
            zi = sd[t, 0] * rng.standard_normal(n)
            zj = sd[t, 1] * rng.standard_normal(n)
            hat_i = (1.0 - d) * (s[:, i] + zi)
            hat_j = (1.0 - d) * (s[:, j] + zj)
            si = s[:, i] / 2.0 + hat_j / (2.0 * (1.0 - d))
            sj = s[:, j] / 2.0 + hat_i / (2.0 * (1.0 - d))
            s[:, i] = si
            s[:, j] = sj
        final = np.where(involved, s, x / m)
        err = (x.mean(axis=1, keepdims=True) - final) ** 2
        sum_err += err.sum(axis=0)
        sum_err2 += (err ** 2).sum(axis=0)
        avg = err.mean(axis=1)
        sum_avg += avg.sum()
        sum_avg2 += (avg ** 2).sum()
        mo = s.T @ s
        moments_sum += mo
        block_moments.append(mo / n)
        n_total += n

    mean = sum_err / n_total
    var = np.maximum(sum_err2 / n_total - mean ** 2, 0.0) * n_total / max(n_total - 1, 1)
    avg_mean = sum_avg / n_total
    avg_var = max(sum_avg2 / n_total - avg_mean ** 2, 0.0) * n_total / max(n_total - 1, 1)
    return MonteCarloResult(
        trials=n_total,
        source_kind=source_kind,
        distortion=mean,
        distortion_se=np.sqrt(var / n_total),
        avg_distortion=float(avg_mean),
        avg_distortion_se=math.sqrt(avg_var / n_total),
        moments=moments_sum / n_total,
        block_moments=block_moments,
    )
