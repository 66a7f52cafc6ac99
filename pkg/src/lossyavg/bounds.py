"""Closed-form rate-distortion bounds and round-count bounds.

Rates are in bits per node per source symbol (log2); ``ln`` is used
exactly where the expressions carry a natural log. Negative values are
clamped to 0 and flagged; inputs outside a bound's domain give
``valid=False`` with the value still computed where it is finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundValue:
    name: str
    value: float
    valid: bool
    domain_note: str = ""
    asymptotic: bool = False
    clamped: bool = False


def _log2(x):
    if x <= 0:
        return -math.inf
    return math.log2(x)


def _ln(x):
    if x <= 0:
        return -math.inf
    return math.log(x)


def _finish(name, raw, valid, note, asymptotic=False):
    if math.isnan(raw):
        return BoundValue(name, raw, False, note, asymptotic)
    clamped = raw < 0
    return BoundValue(name, 0.0 if clamped else raw, valid, note, asymptotic, clamped)


def zero_rate_distortion(m: int) -> float:
    """Distortion of the no-communication estimate X_i / m."""
    return (m - 1) / m ** 2


def cutset_lower(m: int, D: float) -> BoundValue:
    note = "D > 0; zero for D >= (m-1)/m^2"
    if D <= 0:
        return BoundValue("cutset_lower", math.inf, False, note)
    if D >= zero_rate_distortion(m):
        return BoundValue("cutset_lower", 0.0, True, note)
    return _finish("cutset_lower", 0.5 * _log2((m - 1) / (m * m * D)), True, note)


def two_node_exact(a1: float, a2: float, rho: float, P1: float, P2: float, D: float) -> BoundValue:
    """Network rate distortion function of two nodes computing a1 X1 + a2 X2."""
    note = "D < min(a1^2 (1-rho^2) P1, a2^2 (1-rho^2) P2)"
    if D <= 0:
        return BoundValue("two_node_exact", math.inf, False, note)
    resid = 1.0 - rho * rho
    limit = min(a1 * a1 * resid * P1, a2 * a2 * resid * P2)
    raw = 0.5 * _log2(a1 * a2 * resid * math.sqrt(P1 * P2) / D)
    return _finish("two_node_exact", raw, D < limit, note)


def min_rounds(m: int, D: float) -> BoundValue:
    """Rounds any protocol needs for D < 1/m^3; no claim above that."""
    note = "claim only for D < 1/m^3"
    if 0 < D < 1.0 / m ** 3:
        return BoundValue("min_rounds", float(2 * m - 3), True, note)
    return BoundValue("min_rounds", 0.0, False, note)


def star_upper(m: int, D: float) -> BoundValue:
    note = "D < (m-1)/m^2"
    if D <= 0:
        return BoundValue("star_upper", math.inf, False, note)
    raw = (m - 1) / m * _log2(2 * (m - 1) ** 2 / (m ** 3 * D))
    return _finish("star_upper", raw, D < zero_rate_distortion(m), note)


def star_distortion_parameter(m: int, D: float) -> float:
    """d = d1 = m^3 D / (2 (m-1)^2), the choice behind star_upper."""
    return m ** 3 * D / (2 * (m - 1) ** 2)


def tree_cutset_lower(m: int, D: float) -> BoundValue:
    note = "tree topology, D < 1/m^2"
    if D <= 0:
        return BoundValue("tree_cutset_lower", math.inf, False, note)
    raw = (m - 1) / (2 * m) * _log2(1.0 / (2 * m ** 3 * D * D))
    return _finish("tree_cutset_lower", raw, D < 1.0 / m ** 2, note)


def ws_min_rounds(m: int, D: float) -> BoundValue:
    note = "0 < D < (m-1)/m^2"
    if D <= 0:
        return BoundValue("ws_min_rounds", math.inf, False, note)
    raw = m / 2 * _log2(1.0 / (math.sqrt(D) + 1.0 / m))
    return _finish("ws_min_rounds", raw, D < zero_rate_distortion(m), note)


def ws_lower(m: int, D: float) -> BoundValue:
    note = "0 < D < (m-1)/m^2"
    if D <= 0:
        return BoundValue("ws_lower", math.inf, False, note)
    raw = 0.5 * _log2(1.0 / (math.sqrt(D) + 1.0 / m)) * _log2(1.0 / (4 * m * D))
    return _finish("ws_lower", raw, D < zero_rate_distortion(m), note)


def gws_min_rounds(m: int, D: float) -> BoundValue:
    note = "connected network, D > 0"
    if D <= 0:
        return BoundValue("gws_min_rounds", math.inf, False, note)
    raw = (m - 1) / 2 * _ln((m - 1) / (m * D))
    return _finish("gws_min_rounds", raw, True, note)


def gws_lower(m: int, D: float) -> BoundValue:
    note = "D < 1/(4m)"
    if D <= 0:
        return BoundValue("gws_lower", math.inf, False, note)
    raw = (m - 1) / (2 * m) * _ln((m - 1) / (m * D)) * _log2(1.0 / (4 * m * D))
    return _finish("gws_lower", raw, D < 1.0 / (4 * m), note)


def gws_upper_parameters(m: int, D: float, lambda2: float) -> tuple[float, float]:
    """(T, d) = ((1/gap) ln(2/D), m^2 gap D / ln(2/D)) used by gws_upper."""
    gap = 1.0 - lambda2
    return math.log(2.0 / D) / gap, m * m * gap * D / math.log(2.0 / D)


def gws_upper(m: int, D: float, lambda2: float) -> BoundValue:
    """Gossip upper bound; holds for m beyond an unquantified m(D)."""
    note = "asymptotic in m; needs 0 < D < (m-1)/m^2, lambda2 < 1, log argument > 1"
    gap = 1.0 - lambda2
    if D <= 0 or gap <= 0:
        return BoundValue("gws_upper", math.inf, False, note, asymptotic=True)
    L = math.log(2.0 / D)
    arg = L / (m * m * gap * D)
    raw = L / (m * gap) * _log2(arg)
    valid = D < zero_rate_distortion(m) and arg > 1.0
    return _finish("gws_upper", raw, valid, note, asymptotic=True)


def gws_upper_tight_regime(m: int, D: float) -> int:
    """1 when D >= 1/(m log2 m) (slowly decreasing distortion), else 2."""
    return 1 if D >= 1.0 / (m * math.log2(m)) else 2


def gws_upper_tight(m: int, D: float, lambda2: float) -> BoundValue:
    note = "asymptotic in m; regime by D vs 1/(m log2 m)"
    gap = 1.0 - lambda2
    if D <= 0 or gap <= 0 or m < 3:
        return BoundValue("gws_upper_tight", math.inf, False, note, asymptotic=True)
    if gws_upper_tight_regime(m, D) == 1:
        arg = math.log(m) / (2 * m * m * gap * D)
        raw = math.log(3.0 / D) / (m * gap) * _log2(arg)
    else:
        arg = 4.0 / (m * m * gap * D)
        raw = math.log(8.0 / D) / (m * gap) * _log2(arg)
    valid = D < zero_rate_distortion(m) and arg > 1.0
    return _finish("gws_upper_tight", raw, valid, note, asymptotic=True)


def gossip_distortion_upper(m: int, T: int, d: float, lambda2: float) -> float:
    """Upper bound on the mean gossip distortion after T rounds.

    Returns inf when u = d / (2m(1-d)) reaches the gap 1 - lambda2.
    """
    u = d / (2 * m * (1.0 - d))
    gap = 1.0 - lambda2
    if u >= gap:
        return math.inf
    grow = (1.0 + u) ** T
    return ((grow - 1.0) / m ** 2
            + u / (gap + u) * grow / m
            + u / (gap - u) / m
            + (lambda2 + u) ** T)


def time_share(distortions, rates, zero_rate_distortion: float) -> np.ndarray:
    """Lower convex envelope of (D, R) points together with (D0, 0).

    Evaluated back on the input distortions; points at or beyond D0 get 0.
    """
    D = np.asarray(distortions, dtype=float)
    R = np.asarray(rates, dtype=float)
    if D.size == 0:
        return R.copy()
    inside = D < zero_rate_distortion
    pts = sorted(set(zip(D[inside].tolist(), R[inside].tolist())) | {(float(zero_rate_distortion), 0.0)})
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point if it lies on or above the chord
            if (y2 - y1) * (p[0] - x1) >= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    hx = np.array([h[0] for h in hull])
    hy = np.array([h[1] for h in hull])
    env = np.interp(D, hx, hy)
    env = np.where(D >= zero_rate_distortion, 0.0, env)
    return np.minimum(env, R)


ALL_BOUNDS = ("cutset_lower", "min_rounds", "star_upper", "tree_cutset_lower", "ws_min_rounds",
              "ws_lower", "gws_min_rounds", "gws_lower", "gws_upper", "gws_upper_tight")


def evaluate(name: str, m: int, D: float, lambda2: float | None = None) -> BoundValue:
    fn = globals().get(name)
    if name not in ALL_BOUNDS or fn is None:
        raise KeyError(f"unknown bound {name!r}")
    if name.startswith("gws_upper"):
        if lambda2 is None:
            raise ValueError(f"{name} needs lambda2")
        return fn(m, D, lambda2)
    return fn(m, D)
