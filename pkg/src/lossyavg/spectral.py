"""Expected averaging matrix of a gossip process and its spectrum.

For a row-stochastic selection matrix Q on a topology, the expected
averaging matrix is

    A = (1/m) sum_ij Q_ij A_ij,   A_ij = I - 1/2 (e_i - e_j)(e_i - e_j)^T

The spectral gap 1 - lambda2(A) sets the convergence speed of the gossip
protocols and enters every gossip bound in :mod:`lossyavg.bounds`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .topology import Topology, TopologyError, is_connected

ROW_SUM_TOL = 1e-12
SYM_TOL = 1e-9


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralSummary:
    a: np.ndarray
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, same order as eigenvalues
    lambda2: float
    gap: float


# -- selection matrices ------------------------------------------------------

def uniform_q(t: Topology) -> np.ndarray:
    """Each node picks one of its neighbours uniformly."""
    q = np.zeros((t.m, t.m))
    for i in range(t.m):
        nb = t.neighbors(i)
        if not nb:
            raise TopologyError(f"node {i + 1} has no neighbours")
        q[i, nb] = 1.0 / len(nb)
    return q


def random_q(t: Topology, rng) -> np.ndarray:
    q = np.zeros((t.m, t.m))
    for i in range(t.m):
        nb = t.neighbors(i)
        w = rng.random(len(nb)) + 1e-3
        q[i, nb] = w / w.sum()
    return q


def validate_q(t: Topology, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (t.m, t.m):
        raise SpectralError(f"Q has shape {q.shape}, expected {(t.m, t.m)}")
    if np.any(q < 0):
        raise SpectralError("Q has negative entries")
    support = t.adjacency()
    if np.any(q[~support] != 0):
        raise SpectralError("Q puts mass on a non-edge or the diagonal")
    if np.any(np.abs(q.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise SpectralError("Q rows must sum to 1")
    return q


def q_to_csv(q) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(q):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def q_from_csv(text: str) -> np.ndarray:
    rows = [[float(x) for x in r] for r in csv.reader(io.StringIO(text)) if r]
    return np.array(rows)


# -- matrices ----------------------------------------------------------------

def pairwise_matrix(i: int, j: int, m: int) -> np.ndarray:
    """Averaging matrix of one exchange on edge {i, j} (0-based)."""
    if i == j:
        raise SpectralError("pairwise matrix needs i != j")
    if not (0 <= i < m and 0 <= j < m):
        raise SpectralError(f"node index out of range for m={m}")
    a = np.eye(m)
    a[i, i] = a[j, j] = 0.5
    a[i, j] = a[j, i] = 0.5
    return a


def averaging_matrix(t: Topology, q) -> np.ndarray:
    m = t.m
    w = (np.asarray(q) + np.asarray(q).T) / (2.0 * m)  # weight of the unordered edge
    lap = np.diag(w.sum(axis=1)) - w
    a = np.eye(m) - lap
    # A_ij = A_ji term by term, so exact symmetry costs nothing
    return (a + a.T) / 2.0


def expected_matrix(t: Topology, q) -> SpectralSummary:
    if not is_connected(t):
        raise TopologyError("topology is not connected")
    q = validate_q(t, q)
    a = averaging_matrix(t, q)
    vals, vecs = jacobi_eigh(a)
    return SpectralSummary(a=a, eigenvalues=vals, eigenvectors=vecs,
                           lambda2=float(vals[1]), gap=float(1.0 - vals[1]))


# -- eigensolver -------------------------------------------------------------

def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvectors as columns. Ties keep the original diagonal order, which
    makes the choice among degenerate eigenvectors deterministic.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise SpectralError("matrix must be square")
    scale = np.linalg.norm(a)
    if np.max(np.abs(a - a.T), initial=0.0) > SYM_TOL * max(1.0, scale):
        raise SpectralError("matrix is not symmetric")
    a = (a + a.T) / 2.0
    v = np.eye(n)
    if n == 1 or scale == 0.0:
        return _sorted_eig(np.diag(a).copy(), v)

    target = tol * scale
    skip = target / n
    for _ in range(max_sweeps):
        if _off_norm(a) < target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if _off_norm(a) >= target:
            raise SpectralError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return _sorted_eig(np.diag(a).copy(), v)


def _off_norm(a):
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def _sorted_eig(vals, vecs):
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def second_eigenvalue(a) -> float:
    vals, _ = jacobi_eigh(a)
    if vals.size < 2:
        raise SpectralError("need at least a 2x2 matrix")
    return float(vals[1])


# -- lambda2 minimisation ----------------------------------------------------

def _project(q, support):
    q = np.where(support, np.clip(q, 0.0, None), 0.0)
    rows = q.sum(axis=1, keepdims=True)
    empty = rows[:, 0] <= 0.0
    if np.any(empty):
        q[empty] = support[empty] / support[empty].sum(axis=1, keepdims=True)
        rows = q.sum(axis=1, keepdims=True)
    return q / rows


def lambda2_subgradient(t: Topology, q) -> tuple[float, np.ndarray]:
    """lambda2(A(Q)) and a subgradient with respect to Q."""
    s = expected_matrix(t, q)
    v = s.eigenvectors[:, 1]
    diff = v[:, None] - v[None, :]
    # d lambda2 / dQ_ij = (1/m) v^T A_ij v = (1/m)(|v|^2 - (v_i - v_j)^2 / 2)
    g = (1.0 - 0.5 * diff ** 2) / t.m
    return s.lambda2, np.where(t.adjacency(), g, 0.0)


def optimize_q(t: Topology, iterations: int = 200, step: float = 0.5, q0=None) -> np.ndarray:
    """Projected subgradient descent on lambda2 with steps step/sqrt(k).

    Starts from the uniform-neighbour matrix (or ``q0``) and returns the
    best iterate seen, so the result never has a larger lambda2 than the
    start.
    """
    if iterations <= 0:
        raise SpectralError("iteration budget must be positive")
    if not is_connected(t):
        raise TopologyError("topology is not connected")
    support = t.adjacency()
    q = uniform_q(t) if q0 is None else validate_q(t, q0).copy()
    best_q, best = q, None
    for k in range(1, iterations + 1):
        lam2, g = lambda2_subgradient(t, q)
        if best is None or lam2 < best:
            best, best_q = lam2, q
        # keep row sums fixed: remove each row's mean over its support
        deg = support.sum(axis=1, keepdims=True)
        g = np.where(support, g - g.sum(axis=1, keepdims=True) / deg, 0.0)
        norm = np.linalg.norm(g)
        if norm < 1e-15:
            break
        q = _project(q - (step / math.sqrt(k)) * g / norm, support)
    lam2 = expected_matrix(t, q).lambda2
    if lam2 < best:
        best_q = q
    return _project(best_q, support)


# -- contraction check ---------------------------------------------------------

@dataclass(frozen=True)
class ContractionReport:
    trials: int
    lambda2: float
    mean_norm_ay: float
    se_norm_ay: float
    rhs_i: float
    mean_dev_ay: float
    se_dev_ay: float
    rhs_ii: float

    def holds(self, sigmas: float = 3.0) -> bool:
        ok_i = self.mean_norm_ay <= self.rhs_i + sigmas * self.se_norm_ay + 1e-12
        ok_ii = self.mean_dev_ay <= self.rhs_ii + sigmas * self.se_dev_ay + 1e-12
        return bool(ok_i and ok_ii)


def gossip_matrix_sampler(t: Topology, q):
    """Sampler of random exchange matrices A(t), chosen w.p. Q_ij / m."""
    q = validate_q(t, q)
    m = t.m
    flat = (q / m).ravel()

    def sample(rng, size):
        picks = rng.choice(m * m, size=size, p=flat)
        out = np.broadcast_to(np.eye(m), (size, m, m)).copy()
        i, j = np.divmod(picks, m)
        k = np.arange(size)
        out[k, i, i] = out[k, j, j] = 0.5
        out[k, i, j] = out[k, j, i] = 0.5
        return out

    return sample


def contraction_check(a_sampler, y_sampler, trials: int, lambda2: float, rng) -> ContractionReport:
    """Monte Carlo estimate of both sides of the norm-contraction inequalities.

    (i)  E|A Y|^2      <= lambda2 E|Y - JY|^2 + E|JY|^2
    (ii) E|A Y - JY|^2 <= lambda2 E|Y - JY|^2

    ``a_sampler(rng, n)`` returns n matrices, ``y_sampler(rng, n)`` n vectors,
    drawn independently.
    """
    a = a_sampler(rng, trials)
    y = np.asarray(y_sampler(rng, trials), dtype=float)
    jy = np.repeat(y.mean(axis=1, keepdims=True), y.shape[1], axis=1)
    ay = np.einsum("kij,kj->ki", a, y)
    norm_ay = np.sum(ay ** 2, axis=1)
    dev_ay = np.sum((ay - jy) ** 2, axis=1)
    dev_y = np.sum((y - jy) ** 2, axis=1)
    norm_jy = np.sum(jy ** 2, axis=1)

    def se(x):
        return float(x.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0

    return ContractionReport(
        trials=trials,
        lambda2=lambda2,
        mean_norm_ay=float(norm_ay.mean()),
        se_norm_ay=se(norm_ay),
        rhs_i=float(lambda2 * dev_y.mean() + norm_jy.mean()),
        mean_dev_ay=float(dev_ay.mean()),
        se_dev_ay=se(dev_ay),
        rhs_ii=float(lambda2 * dev_y.mean()),
    )
