"""Semi-analytic BER of an MMSE-detected spatial-multiplexing link, and the
SINR-threshold rate tables built on top of it.

The link is abstracted per subcarrier: unit-variance Rayleigh channel
entries, transmit power split evenly over the active streams, a
training-based channel estimate whose error variance tracks the operating
SINR, linear MMSE detection, and a Gaussian model for each post-detection
decision statistic. Bit error rates are averaged over channel draws and,
when enabled, over the residual-frequency-offset distribution with
Gauss-Hermite quadrature. A rate table is the set of (streams, bits/symbol)
modes that meet the BER target, each with the smallest SINR grid point at
which it does.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .config import SystemParams, db_to_linear
from .impairment_model import RFO_EPS_LIMIT, rfo_std, sinr_after_rfo, sinr_baseband
from .rng import complex_normal, substream

__all__ = [
    "ModScheme",
    "make_mod_scheme",
    "ImpairmentFlags",
    "EstimatedChannel",
    "training_length",
    "perturb_channel",
    "mmse_weights",
    "conditional_ber",
    "ber_over_channels",
    "ber_with_rfo",
    "ber_end_to_end",
    "RateEntry",
    "RateTable",
    "LinkOutcome",
    "build_rate_table",
    "select_mode",
]

# supported bits/symbol -> mean-energy normalizer of the square grid
_D_BY_U = {1: 1, 2: 2, 4: 10, 6: 42}

DEFAULT_NOISE_MODEL = "row"    # post-detection variance model, see conditional_ber
DEFAULT_AXIS_MODEL = "exact"   # per-axis error model, see conditional_ber


def _q(x):
    """Gaussian tail probability."""
    return 0.5 * erfc(x / math.sqrt(2.0))


def _gray(i: int) -> int:
    return i ^ (i >> 1)


@dataclass(frozen=True, eq=False)
class ModScheme:
    """Gray-labeled square constellation with unit mean symbol energy.

    points is indexed by bit label. re_index/im_index map a label to its
    level index on each axis; re_gray/im_gray give the per-level axis bits.
    """

    u: int
    d: int
    points: np.ndarray
    re_levels: np.ndarray
    im_levels: np.ndarray
    re_index: np.ndarray
    im_index: np.ndarray
    re_gray: np.ndarray
    im_gray: np.ndarray

    @property
    def half_step(self) -> float:
        """Half the distance between adjacent axis levels."""
        return 1.0 / math.sqrt(self.d)

    @property
    def has_im_axis(self) -> bool:
        return len(self.im_levels) > 1


@lru_cache(maxsize=None)
def make_mod_scheme(u: int) -> ModScheme:
    """Build the scheme for u bits per symbol (1, 2, 4 or 6)."""
    if u not in _D_BY_U:
        raise ValueError(f"unsupported bits/symbol: {u}")
    d = _D_BY_U[u]
    if u == 1:
        re_levels = np.array([-1.0, 1.0])
        im_levels = np.array([0.0])
        im_bits = 0
    else:
        side = 1 << (u // 2)
        re_levels = (2.0 * np.arange(side) - (side - 1)) / math.sqrt(d)
        im_levels = re_levels.copy()
        im_bits = u // 2
    n_pts = 1 << u
    points = np.zeros(n_pts, dtype=complex)
    re_index = np.zeros(n_pts, dtype=np.int64)
    im_index = np.zeros(n_pts, dtype=np.int64)
    for ir in range(len(re_levels)):
        for ii in range(len(im_levels)):
            label = (_gray(ir) << im_bits) | _gray(ii)
            points[label] = re_levels[ir] + 1j * im_levels[ii]
            re_index[label] = ir
            im_index[label] = ii
    re_gray = np.array([_gray(i) for i in range(len(re_levels))], dtype=np.int64)
    im_gray = np.array([_gray(i) for i in range(len(im_levels))], dtype=np.int64)
    return ModScheme(
        u=u, d=d, points=points,
        re_levels=re_levels, im_levels=im_levels,
        re_index=re_index, im_index=im_index,
        re_gray=re_gray, im_gray=im_gray,
    )


@dataclass(frozen=True)
class ImpairmentFlags:
    """Which transceiver impairments are active in the BER chain."""

    phase_noise: bool = True
    rfo: bool = True
    channel_est: bool = True

    @classmethod
    def none(cls) -> "ImpairmentFlags":
        return cls(phase_noise=False, rfo=False, channel_est=False)

    @classmethod
    def all(cls) -> "ImpairmentFlags":
        return cls(phase_noise=True, rfo=True, channel_est=True)

    def label(self) -> str:
        parts = []
        if self.phase_noise:
            parts.append("pn")
        if self.rfo:
            parts.append("rfo")
        if self.channel_est:
            parts.append("ce")
        return "+".join(parts) if parts else "none"


def training_length(m: int) -> int:
    """Training symbols spent on channel estimation: the smallest power of
    two that is at least the stream count."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return 1 << (m - 1).bit_length()


@dataclass(frozen=True)
class EstimatedChannel:
    h_hat: np.ndarray
    err_var: float   # per-entry error variance of the normalized estimate


def perturb_channel(
    h: np.ndarray, sinr_rfo: float, rng: np.random.Generator
) -> EstimatedChannel:
    """Training-based estimate of h: additive complex Gaussian error whose
    per-entry variance is 1 / (training_length * sinr), scaled by sqrt(M) to
    live on the same (unnormalized) scale as h."""
    if sinr_rfo <= 0:
        raise ValueError("sinr_rfo must be positive")
    h = np.asarray(h)
    m = h.shape[-1]
    err_var = 1.0 / (training_length(m) * sinr_rfo)
    noise = complex_normal(rng, h.shape) * math.sqrt(err_var)
    return EstimatedChannel(h_hat=h + math.sqrt(m) * noise, err_var=err_var)


def mmse_weights(h_hat: np.ndarray, sinr_rfo) -> np.ndarray:
    """Linear MMSE detector rows for the channel estimate:
    W = H^H (H H^H + (1/sinr) I)^-1. Supports stacked (..., N, M) inputs and
    a per-batch sinr array."""
    h_hat = np.asarray(h_hat)
    n = h_hat.shape[-2]
    nu = 1.0 / np.asarray(sinr_rfo, dtype=float)
    gram = h_hat @ np.swapaxes(h_hat.conj(), -1, -2)
    idx = np.arange(n)
    gram[..., idx, idx] += nu[..., None] if nu.ndim else nu
    solved = np.linalg.solve(gram, h_hat)       # (..., N, M) = A^-1 H
    return np.swapaxes(solved.conj(), -1, -2)   # (..., M, N)


# ---------------------------------------------------------------------------
# conditional BER given one channel draw


def _axis_errors_exact(mean, sig, level_idx, levels, gray, half_step):
    """Expected bit flips on one axis: Gaussian probability of every decision
    region, weighted by the Gray distance from the transmitted level."""
    bounds = levels[:-1] + half_step                    # region edges
    tail = _q((bounds - mean[..., None]) / sig[..., None])   # P(stat > edge)
    ones = np.ones(mean.shape + (1,))
    zeros = np.zeros(mean.shape + (1,))
    upper = np.concatenate([ones, tail], axis=-1)
    lower = np.concatenate([tail, zeros], axis=-1)
    region_p = upper - lower                            # (..., L)
    flips = np.bitwise_xor(gray[level_idx], gray)
    flips = _POPCOUNT[flips].astype(float)
    return region_p @ flips


def _axis_errors_neighbor(mean, sig, level_idx, levels, half_step):
    """Nearest-neighbor union bound on one axis: tail probability past each
    adjacent decision edge (one term for edge levels, two for interior)."""
    lvl = levels[level_idx]
    p = np.zeros_like(mean)
    if level_idx < len(levels) - 1:
        p = p + _q((lvl + half_step - mean) / sig)
    if level_idx > 0:
        p = p + _q((mean - (lvl - half_step)) / sig)
    return p


def _ber_given_stats(s_diag, sigma2, mod: ModScheme, axis_model: str):
    """Average BER over streams given the post-detection diagonal gains
    (..., M) and total interference-plus-noise variances (..., M)."""
    sig = np.sqrt(np.maximum(sigma2, 0.0) / 2.0)
    sig = np.maximum(sig, 1e-300)
    acc = np.zeros(s_diag.shape, dtype=float)
    for label, z in enumerate(mod.points):
        mean = s_diag * z
        ir = int(mod.re_index[label])
        if axis_model == "exact":
            acc += _axis_errors_exact(
                mean.real, sig, ir, mod.re_levels, mod.re_gray, mod.half_step
            )
        else:
            acc += _axis_errors_neighbor(
                mean.real, sig, ir, mod.re_levels, mod.half_step
            )
        if mod.has_im_axis:
            ii = int(mod.im_index[label])
            if axis_model == "exact":
                acc += _axis_errors_exact(
                    mean.imag, sig, ii, mod.im_levels, mod.im_gray, mod.half_step
                )
            else:
                acc += _axis_errors_neighbor(
                    mean.imag, sig, ii, mod.im_levels, mod.half_step
                )
    per_stream = acc / (len(mod.points) * mod.u)
    return per_stream.mean(axis=-1)


def _detection_stats(h, h_hat, sinr_rfo, noise_model: str):
    """Post-detection diagonal gains and decision-statistic variances for the
    power-normalized link (signal scaled by 1/sqrt(M), noise 1/sinr)."""
    m = h.shape[-1]
    scale = 1.0 / math.sqrt(m)
    g = h * scale
    g_hat = h_hat * scale
    w = mmse_weights(g_hat, sinr_rfo)
    s = w @ g
    idx = np.arange(m)
    s_diag = s[..., idx, idx]
    nu = 1.0 / np.asarray(sinr_rfo, dtype=float)
    if noise_model == "row":
        inter = np.sum(np.abs(s) ** 2, axis=-1) - np.abs(s_diag) ** 2
        w_energy = np.sum(np.abs(w) ** 2, axis=-1)
        sigma2 = inter + w_energy * (nu[..., None] if nu.ndim else nu)
    elif noise_model == "diag":
        diag_pow = np.abs(s_diag) ** 2
        inter = diag_pow.sum(axis=-1, keepdims=True) - diag_pow
        sigma2 = inter + (nu[..., None] if nu.ndim else nu)
    else:
        raise ValueError(f"unknown noise_model: {noise_model!r}")
    return s_diag, sigma2


def _ber_batch(h, h_hat, sinr_rfo, mod, noise_model, axis_model):
    s_diag, sigma2 = _detection_stats(h, h_hat, sinr_rfo, noise_model)
    return _ber_given_stats(s_diag, sigma2, mod, axis_model)


def conditional_ber(
    h: np.ndarray,
    h_hat: np.ndarray,
    sinr_rfo: float,
    mod: ModScheme,
    *,
    noise_model: str = DEFAULT_NOISE_MODEL,
    axis_model: str = DEFAULT_AXIS_MODEL,
) -> float:
    """BER of one channel draw under the Gaussian decision-statistic model.

    noise_model "row" uses the off-diagonal interference of the detected
    stream plus the detector-row-scaled noise; "diag" sums the other streams'
    diagonal gains with an unscaled noise term. axis_model "exact" integrates
    every decision region; "neighbor" keeps only adjacent-region terms.
    """
    if sinr_rfo <= 0:
        raise ValueError("sinr_rfo must be positive")
    h = np.asarray(h)
    h_hat = np.asarray(h_hat)
    if h.shape != h_hat.shape:
        raise ValueError("h and h_hat must have the same shape")
    out = _ber_batch(h[None], h_hat[None], sinr_rfo, mod, noise_model, axis_model)
    return float(out[0])


# ---------------------------------------------------------------------------
# channel-averaged BER

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def _draw_channel_set(m, n, n_draws, rng):
    h = complex_normal(rng, (n_draws, n, m))
    e_raw = complex_normal(rng, (n_draws, n, m))
    return h, e_raw


def _gh_nodes(quad_order: int):
    nodes, weights = np.polynomial.hermite.hermgauss(quad_order)
    return nodes, weights / math.sqrt(math.pi)


def _pb_per_draw(
    sinr_b, h, e_raw, mod, *,
    rfo, imperfect_ce, n_sub, quad_order, noise_model, axis_model,
):
    """Residual-offset-averaged BER per channel draw, (n_draws,)."""
    m = h.shape[-1]
    mt = training_length(m)
    if rfo:
        nodes, weights = _gh_nodes(quad_order)
        sigma = rfo_std(sinr_b, n_sub)
        eps = np.clip(math.sqrt(2.0) * sigma * nodes, -RFO_EPS_LIMIT, RFO_EPS_LIMIT)
        sinr_nodes = sinr_after_rfo(np.full_like(eps, sinr_b), eps)
    else:
        sinr_nodes = np.array([sinr_b])
        weights = np.array([1.0])
    pb = np.zeros(h.shape[0])
    for w_node, s_node in zip(weights, sinr_nodes):
        if imperfect_ce:
            err_std = math.sqrt(m / (mt * s_node))
            h_hat = h + err_std * e_raw
        else:
            h_hat = h
        pb += w_node * _ber_batch(h, h_hat, s_node, mod, noise_model, axis_model)
    return pb


def ber_over_channels(
    sinr_rfo: float,
    m: int,
    n: int,
    mod: ModScheme,
    n_draws: int,
    rng: np.random.Generator,
    *,
    imperfect_ce: bool = True,
    noise_model: str = DEFAULT_NOISE_MODEL,
    axis_model: str = DEFAULT_AXIS_MODEL,
) -> tuple[float, float]:
    """Mean conditional BER over independent Rayleigh draws (and estimate
    draws when imperfect_ce). Returns (mean, standard error)."""
    if sinr_rfo <= 0:
        raise ValueError("sinr_rfo must be positive")
    h, e_raw = _draw_channel_set(m, n, n_draws, rng)
    pb = _pb_per_draw(
        sinr_rfo, h, e_raw, mod,
        rfo=False, imperfect_ce=imperfect_ce, n_sub=0, quad_order=0,
        noise_model=noise_model, axis_model=axis_model,
    )
    se = pb.std(ddof=1) / math.sqrt(n_draws) if n_draws > 1 else 0.0
    return float(pb.mean()), float(se)


def ber_with_rfo(
    sinr_b: float,
    m: int,
    n: int,
    mod: ModScheme,
    quad_order: int = 15,
    n_draws: int = 2000,
    rng: np.random.Generator | None = None,
    *,
    n_sub: int = 64,
    imperfect_ce: bool = True,
    noise_model: str = DEFAULT_NOISE_MODEL,
    axis_model: str = DEFAULT_AXIS_MODEL,
) -> tuple[float, float]:
    """BER averaged over the residual-offset distribution (Gauss-Hermite over
    the Gaussian offset) and over channel draws. Returns (mean, stderr);
    the stderr reflects channel-draw averaging of the offset-averaged values."""
    if sinr_b <= 0:
        raise ValueError("sinr_b must be positive")
    rng = rng if rng is not None else substream(0, "ber-with-rfo")
    h, e_raw = _draw_channel_set(m, n, n_draws, rng)
    pb = _pb_per_draw(
        sinr_b, h, e_raw, mod,
        rfo=True, imperfect_ce=imperfect_ce, n_sub=n_sub, quad_order=quad_order,
        noise_model=noise_model, axis_model=axis_model,
    )
    se = pb.std(ddof=1) / math.sqrt(n_draws) if n_draws > 1 else 0.0
    return float(pb.mean()), float(se)


def ber_end_to_end(
    sinr_in: float,
    m: int,
    n: int,
    mod: ModScheme,
    flags: ImpairmentFlags,
    params: SystemParams,
    n_draws: int = 2000,
    rng: np.random.Generator | None = None,
    quad_order: int = 15,
    *,
    noise_model: str = DEFAULT_NOISE_MODEL,
    axis_model: str = DEFAULT_AXIS_MODEL,
) -> tuple[float, float]:
    """Full chain from wideband input SINR to BER with the selected
    impairments: phase-noise ICI compresses the SINR, the residual offset is
    averaged out, and the channel estimate degrades with the operating SINR.

    At zero input SINR the decision statistic carries no signal, so the BER
    is exactly one half for every Gray-labeled scheme.
    """
    if sinr_in < 0:
        raise ValueError("sinr_in must be non-negative")
    if m > n:
        raise ValueError("stream count cannot exceed receive antennas")
    if sinr_in == 0:
        return 0.5, 0.0
    rng = rng if rng is not None else substream(0, "ber-end-to-end")
    sinr_b = sinr_baseband(sinr_in, params.f_ici) if flags.phase_noise else sinr_in
    h, e_raw = _draw_channel_set(m, n, n_draws, rng)
    pb = _pb_per_draw(
        sinr_b, h, e_raw, mod,
        rfo=flags.rfo, imperfect_ce=flags.channel_est,
        n_sub=params.ns, quad_order=quad_order,
        noise_model=noise_model, axis_model=axis_model,
    )
    se = pb.std(ddof=1) / math.sqrt(n_draws) if n_draws > 1 else 0.0
    return float(pb.mean()), float(se)


# ---------------------------------------------------------------------------
# rate tables


@dataclass(frozen=True)
class RateEntry:
    rate_bps: float
    m: int
    u: int
    threshold_db: float


@dataclass(eq=False)
class RateTable:
    """Modes that meet the BER target, ordered by ascending threshold with
    strictly ascending rates (dominated modes removed). Treat as immutable."""

    n_rx: int
    impaired: bool
    grid_step_db: float
    entries: tuple[RateEntry, ...]
    flags_label: str = ""
    build_info: dict | None = None

    @cached_property
    def thresholds_linear(self) -> np.ndarray:
        return db_to_linear(np.array([e.threshold_db for e in self.entries]))

    @cached_property
    def rates_bps(self) -> np.ndarray:
        return np.array([e.rate_bps for e in self.entries])

    @cached_property
    def _rates_with_zero(self) -> np.ndarray:
        return np.concatenate([[0.0], self.rates_bps])

    def rate_for_sinr(self, sinr_in) -> np.ndarray:
        """Best achievable rate (bps) at each input SINR; 0 below the lowest
        threshold. Thresholds are inclusive lower bounds."""
        idx = np.searchsorted(self.thresholds_linear, np.asarray(sinr_in), side="right")
        return self._rates_with_zero[idx]

    def to_dict(self) -> dict:
        doc = {
            "version": 1,
            "n_rx": self.n_rx,
            "impaired": self.impaired,
            "flags": self.flags_label,
            "grid_step_db": self.grid_step_db,
            "entries": [
                {
                    "rate_bps": e.rate_bps,
                    "m": e.m,
                    "u": e.u,
                    "threshold_db": e.threshold_db,
                }
                for e in self.entries
            ],
        }
        if self.build_info is not None:
            doc["build"] = self.build_info
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RateTable":
        if doc.get("version") != 1:
            raise ValueError("unsupported rate table version")
        entries = tuple(
            RateEntry(
                rate_bps=float(e["rate_bps"]),
                m=int(e["m"]),
                u=int(e["u"]),
                threshold_db=float(e["threshold_db"]),
            )
            for e in doc["entries"]
        )
        return cls(
            n_rx=int(doc["n_rx"]),
            impaired=bool(doc["impaired"]),
            grid_step_db=float(doc["grid_step_db"]),
            entries=entries,
            flags_label=doc.get("flags", ""),
            build_info=doc.get("build"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RateTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class LinkOutcome:
    """Mode selected for one pair at its achieved input SINR."""

    m: int
    u: int
    rate_bps: float
    sinr_in: float
    feasible: bool


def select_mode(sinr_in: float, table: RateTable) -> LinkOutcome:
    """Highest-rate entry whose threshold does not exceed sinr_in; an
    all-zero outcome when even the lowest mode is out of reach."""
    idx = int(np.searchsorted(table.thresholds_linear, sinr_in, side="right"))
    if idx == 0:
        return LinkOutcome(m=0, u=0, rate_bps=0.0, sinr_in=float(sinr_in), feasible=False)
    e = table.entries[idx - 1]
    return LinkOutcome(m=e.m, u=e.u, rate_bps=e.rate_bps, sinr_in=float(sinr_in), feasible=True)


def _coerce_flags(flags) -> ImpairmentFlags:
    if isinstance(flags, ImpairmentFlags):
        return flags
    return ImpairmentFlags.all() if flags else ImpairmentFlags.none()


def _pareto_front(cands: list[RateEntry]) -> tuple[RateEntry, ...]:
    """Keep, from highest rate down, every mode whose threshold strictly
    undercuts all higher-rate survivors; result ascends in both columns."""
    best_thr: dict[float, RateEntry] = {}
    for e in cands:
        kept = best_thr.get(e.rate_bps)
        if kept is None or e.threshold_db < kept.threshold_db:
            best_thr[e.rate_bps] = e
    ordered = sorted(best_thr.values(), key=lambda e: e.rate_bps, reverse=True)
    front: list[RateEntry] = []
    thr_seen = math.inf
    for e in ordered:
        if e.threshold_db < thr_seen:
            front.append(e)
            thr_seen = e.threshold_db
    return tuple(reversed(front))


def build_rate_table(
    n_rx: int,
    flags,
    params: SystemParams,
    *,
    grid_step_db: float = 0.1,
    sinr_range_db: tuple[float, float] = (-5.0, 45.0),
    n_draws: int = 2000,
    quad_order: int = 15,
    seed: int = 0,
    noise_model: str = DEFAULT_NOISE_MODEL,
    axis_model: str = DEFAULT_AXIS_MODEL,
) -> RateTable:
    """Scan every (m <= n_rx, u) mode for the lowest SINR grid point meeting
    the BER target and keep the Pareto frontier.

    One channel/estimate draw set per stream count is reused across the whole
    grid (common random numbers), which makes the averaged BER smooth and
    monotone in SINR so the first passing grid point is found by bisection.
    Modes that fail the target everywhere on the grid are omitted.
    """
    flags = _coerce_flags(flags)
    lo_db, hi_db = sinr_range_db
    n_grid = int(round((hi_db - lo_db) / grid_step_db)) + 1
    grid_db = np.round(lo_db + grid_step_db * np.arange(n_grid), 9)
    gamma = params.gamma_ber

    cands: list[RateEntry] = []
    for m in range(1, n_rx + 1):
        rng = substream(seed, f"rate-table-n{n_rx}-m{m}-{flags.label()}")
        h, e_raw = _draw_channel_set(m, n_rx, n_draws, rng)
        for u in sorted(_D_BY_U):
            mod = make_mod_scheme(u)
            cache: dict[int, float] = {}

            def mean_ber(j: int) -> float:
                if j not in cache:
                    s_in = db_to_linear(grid_db[j])
                    s_b = sinr_baseband(s_in, params.f_ici) if flags.phase_noise else s_in
                    pb = _pb_per_draw(
                        s_b, h, e_raw, mod,
                        rfo=flags.rfo, imperfect_ce=flags.channel_est,
                        n_sub=params.ns, quad_order=quad_order,
                        noise_model=noise_model, axis_model=axis_model,
                    )
                    cache[j] = float(pb.mean())
                return cache[j]

            if mean_ber(n_grid - 1) > gamma:
                continue
            if mean_ber(0) <= gamma:
                first_pass = 0
            else:
                lo_i, hi_i = 0, n_grid - 1   # fail at lo_i, pass at hi_i
                while hi_i - lo_i > 1:
                    mid = (lo_i + hi_i) // 2
                    if mean_ber(mid) <= gamma:
                        hi_i = mid
                    else:
                        lo_i = mid
                first_pass = hi_i
            cands.append(
                RateEntry(
                    rate_bps=params.r_base_bps * m * u,
                    m=m,
                    u=u,
                    threshold_db=float(grid_db[first_pass]),
                )
            )

    return RateTable(
        n_rx=n_rx,
        impaired=flags != ImpairmentFlags.none(),
        grid_step_db=grid_step_db,
        entries=_pareto_front(cands),
        flags_label=flags.label(),
        build_info={
            "seed": seed,
            "n_draws": n_draws,
            "sinr_lo_db": lo_db,
            "sinr_hi_db": hi_db,
            "quad_order": quad_order,
        },
    )
