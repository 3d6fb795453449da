"""Network-level SINR, the sum-throughput objective, and its centralized
maximization with a real-coded genetic algorithm.

Power allocations are plain float arrays (mW, one entry per pair). The
objective is piecewise constant: each pair's rate is a table lookup on its
input SINR, so gradients are useless and a population search is the
appropriate tool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemParams
from .link_abstraction import RateTable
from .radio_env import Topology, total_noise_power
from .rng import substream

__all__ = [
    "sinr_in",
    "sinr_in_all",
    "sum_throughput",
    "GaParams",
    "maximize_sum_throughput",
    "loss_ratio",
]


def sinr_in_all(p, topo: Topology, noise_mw: float) -> np.ndarray:
    """Input SINR of every pair (or batch of allocations) at once.

    p may be (K,) or (B, K); the result matches. noise_mw is the total
    receiver noise power over all subcarriers.
    """
    p = np.asarray(p, dtype=float)
    own = np.diagonal(topo.rho)
    received = p @ topo.rho.T          # (..., j) = sum_i p_i * rho[j, i]
    interference = received - p * own
    return p * own / (interference + noise_mw)


def sinr_in(j: int, p, topo: Topology, sigma2_n: float, ns: int) -> float:
    """Input SINR of pair j: own received power over the other pairs'
    aggregate interference plus total noise ns * sigma2_n."""
    p = np.asarray(p, dtype=float)
    if p.shape != (topo.k,):
        raise ValueError("power allocation must have one entry per pair")
    return float(sinr_in_all(p, topo, ns * sigma2_n)[j])


def sum_throughput(
    p, topo: Topology, table: RateTable, params: SystemParams
) -> float:
    """Network sum rate (bits/s) with every pair running its best table mode
    at the SINR produced by allocation p."""
    sinr = sinr_in_all(p, topo, total_noise_power(params))
    return float(table.rate_for_sinr(sinr).sum())


def loss_ratio(t_wo: float, t_w: float) -> float:
    """Fraction of throughput lost relative to the impairment-free value
    t_wo; NaN when the reference itself is zero."""
    if t_wo <= 0:
        return float("nan")
    return (t_wo - t_w) / t_wo


@dataclass(frozen=True)
class GaParams:
    """Genetic-algorithm configuration. population defaults to 4 * K and
    mutation_rate to 1 / K at run time."""

    population: int | None = None
    generations: int = 100
    crossover_rate: float = 0.8
    mutation_rate: float | None = None
    mutation_sigma_frac: float = 0.1   # mutation std as a fraction of P_T
    mutation_reset_frac: float = 0.8   # share of mutations that redraw the gene
    elitism: int = 2
    seed: int = 0
    log_domain: bool = False

    def __post_init__(self):
        if self.elitism < 1:
            raise ValueError("elitism must be at least 1")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must be a probability")
        if not 0.0 <= self.mutation_reset_frac <= 1.0:
            raise ValueError("mutation_reset_frac must be a probability")


# log-domain floor: 60 dB below P_T stands in for "off" when searching in dB
_LOG_FLOOR_FRAC = 1e-6


def _corner_allocations(k: int, p_t: float) -> np.ndarray:
    corners = np.zeros((k + 2, k))
    corners[0] = p_t
    corners[2:] = p_t * np.eye(k)
    return corners


def maximize_sum_throughput(
    topo: Topology,
    table: RateTable,
    ga: GaParams,
    params: SystemParams,
    *,
    extra_seeds: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Search per-pair powers in [0, P_T] for the maximum sum throughput.

    Tournament selection (size 2), blend crossover, mixed Gaussian-step and
    uniform-redraw mutation, elitism. The initial population contains the
    K+2 corner allocations
    (all-on, all-off, each pair alone at P_T) plus any extra_seeds rows, so
    with elitism the result never falls below the best of those baselines.
    Returns (best allocation, its sum throughput).
    """
    k = topo.k
    p_t = params.p_t_mw
    pop_size = ga.population if ga.population is not None else 4 * k
    mut_rate = ga.mutation_rate if ga.mutation_rate is not None else 1.0 / k
    rng = substream(ga.seed, "ga")
    noise_mw = total_noise_power(params)

    def fitness(pop: np.ndarray) -> np.ndarray:
        sinr = sinr_in_all(pop, topo, noise_mw)
        return table.rate_for_sinr(sinr).sum(axis=-1)

    seeds = _corner_allocations(k, p_t)
    if extra_seeds is not None:
        extra = np.atleast_2d(np.asarray(extra_seeds, dtype=float))
        seeds = np.vstack([seeds, np.clip(extra, 0.0, p_t)])
    pop_size = max(pop_size, len(seeds) + ga.elitism)
    pop = rng.uniform(0.0, p_t, size=(pop_size, k))
    pop[: len(seeds)] = seeds

    if ga.log_domain:
        floor = p_t * _LOG_FLOOR_FRAC
        to_search = lambda p: np.log(np.maximum(p, floor))
        from_search = lambda x: np.where(x <= np.log(floor), 0.0, np.exp(x))
        lo, hi = np.log(floor), np.log(p_t)
    else:
        to_search = from_search = lambda p: p
        lo, hi = 0.0, p_t

    genes = to_search(pop)
    mut_sigma = ga.mutation_sigma_frac * (hi - lo) if ga.log_domain \
        else ga.mutation_sigma_frac * p_t

    fit = fitness(from_search(genes))
    best_idx = int(np.argmax(fit))
    best_p = from_search(genes[best_idx]).copy()
    best_fit = float(fit[best_idx])

    for _ in range(ga.generations):
        # tournament selection, two random entrants per parent slot
        a = rng.integers(0, pop_size, size=pop_size)
        b = rng.integers(0, pop_size, size=pop_size)
        parents = genes[np.where(fit[a] >= fit[b], a, b)]

        # blend crossover on consecutive parent pairs
        children = parents.copy()
        for i in range(0, pop_size - 1, 2):
            if rng.random() < ga.crossover_rate:
                lo_g = np.minimum(parents[i], parents[i + 1])
                hi_g = np.maximum(parents[i], parents[i + 1])
                span = hi_g - lo_g
                low = lo_g - 0.5 * span
                width = 2.0 * span
                children[i] = low + width * rng.random(k)
                children[i + 1] = low + width * rng.random(k)

        # mutation: a Gaussian step refines, a uniform redraw escapes the
        # collapsed-population basin that small steps cannot leave
        mask = rng.random(size=(pop_size, k)) < mut_rate
        stepped = children + rng.normal(0.0, mut_sigma, size=(pop_size, k))
        redrawn = rng.uniform(lo, hi, size=(pop_size, k))
        use_redraw = rng.random(size=(pop_size, k)) < ga.mutation_reset_frac
        children = np.where(mask, np.where(use_redraw, redrawn, stepped), children)
        children = np.clip(children, lo, hi)

        # elitism: best of the current generation survive unchanged
        elite_idx = np.argsort(fit)[-ga.elitism:]
        children[: ga.elitism] = genes[elite_idx]

        genes = children
        fit = fitness(from_search(genes))
        gen_best = int(np.argmax(fit))
        if fit[gen_best] > best_fit:
            best_fit = float(fit[gen_best])
            best_p = from_search(genes[gen_best]).copy()

    return best_p, best_fit
