"""Distributed power and rate control for the pair network.

Two stages of local iteration, then a final rate pick. Stage 1 is a
synchronous power game: each pair maximizes a sigmoid reward on its own SINR
minus a linear power price, seeing the other pairs only through the
aggregate interference at its receiver. Stage 2 walks the surviving powers
onto the rate-table thresholds: each active pair rescales its power so its
SINR lands on the threshold of the best rate it currently clears. Step 3
reads the final rates off the table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .config import SystemParams
from .link_abstraction import RateTable, select_mode
from .network_opt import sinr_in_all
from .radio_env import Topology, total_noise_power
from .rng import substream

__all__ = [
    "DprcParams",
    "DprcState",
    "sigmoid_utility",
    "best_response_power",
    "stage1",
    "stage2",
    "run_dprc",
]


@dataclass(frozen=True)
class DprcParams:
    """Utility shaping and iteration depth.

    The sigmoid midpoint beta is placed where a reward of 1/2 is earned at
    the smallest SINR considered useful (gamma_sig); the price alpha_price
    is charged per mW.
    """

    a: float = 1.0
    alpha_price: float = 1e-3
    gamma_sig: float = 1.001
    loop_num: int = 30

    def __post_init__(self):
        if self.a * self.gamma_sig <= 1.0:
            raise ValueError("need a * gamma_sig > 1 for the sigmoid midpoint")
        if self.alpha_price <= 0:
            raise ValueError("alpha_price must be positive")
        if self.loop_num < 1:
            raise ValueError("loop_num must be at least 1")

    @property
    def beta(self) -> float:
        """Sigmoid midpoint (linear SINR units)."""
        return self.gamma_sig - math.log(self.a * self.gamma_sig - 1.0) / self.a


@dataclass
class DprcState:
    """Final powers and selected rate indices (0 = silent), plus optional
    per-round (stage, iteration, powers, sinr, rate index) snapshots."""

    p: np.ndarray
    r: np.ndarray
    history: list[tuple[int, int, np.ndarray, np.ndarray, np.ndarray]] = field(
        default_factory=list
    )


def sigmoid_utility(sinr, p, params: DprcParams):
    """Reward-minus-price utility: expit(a * (sinr - beta)) - alpha * p."""
    return expit(params.a * (np.asarray(sinr, float) - params.beta)) \
        - params.alpha_price * np.asarray(p, float)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    """Argmax of a unimodal f on [lo, hi] by golden-section search."""
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
    return 0.5 * (lo + hi)


def best_response_power(ieff: float, params: DprcParams, p_t: float) -> float:
    """Utility-maximizing power for one pair whose SINR at power p is
    p / ieff (ieff = interference-plus-noise over own gain, mW).

    The utility rises only on the sigmoid's steep section; its stationary
    points satisfy sg * (1 - sg) = alpha * ieff / a in the sigmoid value sg,
    so the search bracket [inflection below midpoint, p_t] contains a single
    interior maximum. A pair whose price slope exceeds the sigmoid's peak
    slope (alpha * ieff >= a / 4), or whose best utility does not beat the
    zero-power floor, shuts off.
    """
    if ieff <= 0:
        raise ValueError("ieff must be positive")
    if p_t <= 0:
        raise ValueError("p_t must be positive")
    a, alpha = params.a, params.alpha_price
    if alpha * ieff >= a / 4.0:
        return 0.0

    def util(p: float) -> float:
        return float(sigmoid_utility(p / ieff, p, params))

    # lower stationary point (local minimum): sigmoid value below 1/2
    sg_lo = 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * alpha * ieff / a))
    p_lo = ieff * (params.beta + math.log(sg_lo / (1.0 - sg_lo)) / a)
    lo = min(max(p_lo, 0.0), p_t)
    cand = _golden_max(util, lo, p_t, tol=1e-9 * p_t)
    best_p, best_u = max(
        ((cand, util(cand)), (p_t, util(p_t))), key=lambda t: t[1]
    )
    # drop rule: silence unless transmitting beats the zero-power floor
    if best_u <= util(0.0):
        return 0.0
    return best_p


def _effective_interference(p: np.ndarray, topo: Topology, noise_mw: float):
    """Per-pair (interference + noise) / own gain, the ieff of the game."""
    received = topo.rho @ p
    own = np.diagonal(topo.rho)
    interference = received - p * own
    return (interference + noise_mw) / own


def stage1(
    topo: Topology,
    params: SystemParams,
    dprc: DprcParams,
    rng: np.random.Generator,
    *,
    trace: list | None = None,
) -> np.ndarray:
    """Synchronous best-response power game from a random start
    p_i(0) = u_i * P_T. Returns the power vector after loop_num rounds."""
    p_t = params.p_t_mw
    noise_mw = total_noise_power(params)
    p = rng.uniform(0.0, 1.0, size=topo.k) * p_t
    for it in range(dprc.loop_num):
        ieff = _effective_interference(p, topo, noise_mw)
        p = np.array(
            [best_response_power(ieff[i], dprc, p_t) for i in range(topo.k)]
        )
        if trace is not None:
            sinr = sinr_in_all(p, topo, noise_mw)
            trace.append((1, it, p.copy(), sinr, np.zeros(topo.k, dtype=int)))
    return p


def _rate_indices(sinr: np.ndarray, thresholds_linear: np.ndarray) -> np.ndarray:
    """Highest threshold index cleared by each SINR; 0 means none."""
    return np.searchsorted(thresholds_linear, sinr, side="right")


def stage2(
    p0: np.ndarray,
    topo: Topology,
    thresholds_linear: np.ndarray,
    params: SystemParams,
    *,
    loop_num: int = 30,
    literal_update: bool = False,
    trace: list | None = None,
) -> DprcState:
    """Threshold tracking: every round, each pair picks the best rate its
    SINR clears and rescales power to sit on that rate's threshold.

    Pairs clearing no threshold keep their power untouched; powers stay in
    [0, P_T]. literal_update applies the rescale in the opposite direction
    (power grows whenever SINR exceeds the threshold), kept only for study.
    """
    thresholds_linear = np.asarray(thresholds_linear, dtype=float)
    if thresholds_linear.ndim != 1 or np.any(np.diff(thresholds_linear) <= 0):
        raise ValueError("thresholds must be strictly ascending")
    noise_mw = total_noise_power(params)
    p = np.asarray(p0, dtype=float).copy()
    r = np.zeros(topo.k, dtype=int)
    hist: list = trace if trace is not None else []
    for it in range(loop_num):
        sinr = sinr_in_all(p, topo, noise_mw)
        r = _rate_indices(sinr, thresholds_linear)
        active = (r > 0) & (p > 0)
        target = np.where(active, thresholds_linear[np.maximum(r - 1, 0)], 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(active, target / np.maximum(sinr, 1e-300), 1.0)
        if literal_update:
            ratio = np.where(active, 1.0 / ratio, 1.0)
        p = np.clip(p * ratio, 0.0, params.p_t_mw)
        if trace is not None:
            hist.append((2, it, p.copy(), sinr_in_all(p, topo, noise_mw), r.copy()))
    sinr = sinr_in_all(p, topo, noise_mw)
    r = _rate_indices(sinr, thresholds_linear)
    return DprcState(p=p, r=r, history=hist)


def run_dprc(
    topo: Topology,
    table: RateTable,
    params: SystemParams,
    dprc: DprcParams,
    rng: np.random.Generator | None = None,
    *,
    literal_update: bool = False,
    trace: bool = False,
) -> tuple[DprcState, float]:
    """Full algorithm: power game, threshold tracking against the table's
    thresholds, then the final per-pair mode pick. Returns the final state
    and the resulting sum throughput (bits/s)."""
    rng = rng if rng is not None else substream(0, "dprc")
    rows: list | None = [] if trace else None
    p1 = stage1(topo, params, dprc, rng, trace=rows)
    state = stage2(
        p1, topo, table.thresholds_linear, params,
        loop_num=dprc.loop_num, literal_update=literal_update, trace=rows,
    )
    # step 3: the reported rates are select_mode at the final powers; stage2's
    # closing rate indices are the same lookup, so state.r already matches
    noise_mw = total_noise_power(params)
    sinr = sinr_in_all(state.p, topo, noise_mw)
    total = float(sum(select_mode(float(s), table).rate_bps for s in sinr))
    return state, total
