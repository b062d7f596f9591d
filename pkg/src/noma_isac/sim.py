"""Monte-Carlo engine for the two-period uplink with radar superposition.

Trials are grouped into fixed-size blocks. Every block draws from its own
generator, seeded from ``(seed, family, point, block)``, and returns
integer counters, so a sweep gives the same numbers whatever the number of
worker processes.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as _stats

from .analytic import SYMBOL_ENERGY
from .channel import ChannelRealization, radar_channel, sample_comm_channels
from .constellation import default_constellation, nearest_indices
from .errors import DomainError, SingularChannelError

__all__ = [
    "FramePair",
    "ReceivedPair",
    "BerStats",
    "OutageStats",
    "wilson_interval",
    "draw_frame_pair",
    "simulate_pair",
    "zf_receive",
    "jml_receive",
    "run_ber",
    "run_outage",
    "conditional_ber_mc",
    "block_rng",
    "DEFAULT_BLOCK_SIZE",
]

log = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 10_000
MIN_TRIALS = 10_000
SINGULAR_COND = 1e12
RECEIVERS = ("zf", "jml")

# stream families, so BER, outage and conditional runs never share draws
_FAMILY_BER = 0
_FAMILY_OUTAGE = 1
_FAMILY_CONDITIONAL = 2

_JML_CHUNK = 4096


def block_rng(seed, family, point, block):
    """Independent generator for one trial block."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(family), int(point), int(block)))
    return np.random.default_rng(ss)


def wilson_interval(k, n, confidence=0.95):
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        return (0.0, 1.0)
    ci = _stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))


# ---------------------------------------------------------------------------
# Single-trial API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FramePair:
    """Two-period transmission of both UEs plus the radar symbol.

    ``index[k]`` is the 0-based combined-constellation index of UE ``k+1``,
    ``x[k, t]`` its unit-energy symbol in period ``t``.
    """

    index: np.ndarray
    bits: np.ndarray
    x: np.ndarray
    s_r: complex

    @property
    def combined(self):
        return self.x[:, 0] + self.x[:, 1]


@dataclass(frozen=True)
class ReceivedPair:
    y1: np.ndarray
    y2: np.ndarray

    @property
    def combined(self):
        return self.y1 + self.y2


def draw_frame_pair(rng, constellation=None, index=None):
    """Uniform random labels for both UEs and a unit-modulus radar symbol."""
    c = constellation or default_constellation()
    if index is None:
        index = rng.integers(0, len(c), size=2)
    index = np.asarray(index, dtype=int)
    s_r = np.exp(2j * np.pi * rng.random())
    x = np.stack([c.t1[index], c.t2[index]], axis=1)
    return FramePair(index=index, bits=c.bits[index].copy(), x=x, s_r=complex(s_r))


def _as_matrix(H):
    return H.H if isinstance(H, ChannelRealization) else np.asarray(H)


def simulate_pair(rng, params, constellation, H, g, frame=None, g_second=None):
    """Received vectors for one symbol pair.

    The radar echo is added in the first period and subtracted in the
    second. ``g_second`` gives a different echo coefficient for the second
    period (Doppler drift); by default both periods see ``g``.
    """
    H = _as_matrix(H)
    M = H.shape[0]
    if frame is None:
        frame = draw_frame_pair(rng, constellation)
    g2 = g if g_second is None else g_second
    amp = np.sqrt(np.array(params.powers))
    sr = math.sqrt(params.P_r) * frame.s_r
    sigma = math.sqrt(params.noise_var / 2.0)
    n1 = sigma * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
    n2 = sigma * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
    y1 = H @ (amp * frame.x[:, 0]) + sr * g.vector(M) + n1
    y2 = H @ (amp * frame.x[:, 1]) - sr * g2.vector(M) + n2
    return ReceivedPair(y1=y1, y2=y2)


def _zf_core(G, r, powers, constellation):
    # G: (..., 2, 2) Gram matrices, r: (..., 2) matched-filter outputs
    xhat = np.linalg.solve(G, r[..., None])[..., 0]
    det = np.empty(xhat.shape, dtype=int)
    for k in range(2):
        if powers[k] > 0:
            det[..., k] = nearest_indices(constellation, xhat[..., k] / math.sqrt(powers[k]))
        else:
            det[..., k] = 0
    return det


def zf_receive(y, H, params, constellation=None):
    """Zero-forcing detection of both UEs from the combined vector.

    Returns 1-based detected indices and the post-ZF noise powers
    ``2 sigma^2 [(H^H H)^-1]_kk / P_k``.
    """
    c = constellation or default_constellation()
    H = _as_matrix(H)
    if np.linalg.cond(H) > SINGULAR_COND:
        raise SingularChannelError("channel matrix is numerically rank deficient")
    G = H.conj().T @ H
    det = _zf_core(G, H.conj().T @ y, params.powers, c)
    ginv = np.real(np.diag(np.linalg.inv(G)))
    with np.errstate(divide="ignore", invalid="ignore"):
        pn = 2.0 * params.noise_var * ginv / np.array(params.powers)
    return tuple(int(i) + 1 for i in det), tuple(float(v) for v in pn)


def _jml_core(G, r, powers, constellation):
    """Joint ML over all 16 x 16 hypotheses, vectorised over leading axis.

    Uses ``||y - H z||^2 = ||y||^2 - 2 Re(z^H r) + z^H G z`` and drops the
    constant. Flattened ``argmin`` over ``a * 16 + b`` gives the
    lexicographic tie-break.
    """
    s = constellation.points
    q = len(s)
    p1, p2 = math.sqrt(powers[0]), math.sqrt(powers[1])
    e = np.abs(s) ** 2
    cross = np.conj(s)[:, None] * s[None, :]
    n = r.shape[0]
    out = np.empty((n, 2), dtype=int)
    for lo in range(0, n, _JML_CHUNK):
        sl = slice(lo, lo + _JML_CHUNK)
        g11 = G[sl, 0, 0].real
        g22 = G[sl, 1, 1].real
        g12 = G[sl, 0, 1]
        ta = powers[0] * g11[:, None] * e[None, :] - 2.0 * p1 * np.real(np.conj(s)[None, :] * r[sl, 0, None])
        tb = powers[1] * g22[:, None] * e[None, :] - 2.0 * p2 * np.real(np.conj(s)[None, :] * r[sl, 1, None])
        cc = 2.0 * p1 * p2 * g12
        metric = ta[:, :, None] + tb[:, None, :]
        metric += cc.real[:, None, None] * cross.real[None] - cc.imag[:, None, None] * cross.imag[None]
        flat = np.argmin(metric.reshape(len(g11), q * q), axis=1)
        out[sl, 0] = flat // q
        out[sl, 1] = flat % q
    return out


def jml_receive(y, H, params, constellation=None):
    """Jointly detected 1-based index pair minimising the Euclidean metric."""
    c = constellation or default_constellation()
    H = _as_matrix(H)
    G = (H.conj().T @ H)[None]
    r = (H.conj().T @ y)[None]
    a, b = _jml_core(G, r, params.powers, c)[0]
    return int(a) + 1, int(b) + 1


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BerStats:
    receiver: str
    ue: int
    bit_errors: int
    bits_total: int
    singular_resamples: int = 0

    @property
    def ber(self):
        return self.bit_errors / self.bits_total if self.bits_total else math.nan

    @property
    def ci(self):
        return wilson_interval(self.bit_errors, self.bits_total)

    @property
    def ci_half_width(self):
        lo, hi = self.ci
        return 0.5 * (hi - lo)


@dataclass(frozen=True)
class OutageStats:
    """Outage counts; ``ue == 0`` is the mean over both UEs."""

    receiver: str
    ue: int
    C: float
    outage_events: int
    trials: int

    @property
    def probability(self):
        return self.outage_events / self.trials if self.trials else math.nan

    @property
    def ci(self):
        return wilson_interval(self.outage_events, self.trials)

    @property
    def ci_half_width(self):
        lo, hi = self.ci
        return 0.5 * (hi - lo)


# ---------------------------------------------------------------------------
# Block workers
# ---------------------------------------------------------------------------

def _block_sizes(trials, block_size):
    full, rest = divmod(trials, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _block_params(params, rng, distance_mode):
    if distance_mode == "fixed":
        return params
    if distance_mode == "randomized":
        d1 = rng.uniform(30.0, 80.0)
        return dataclasses.replace(params, d1=d1, d2=1.2 * d1)
    raise DomainError(f"unknown distance mode {distance_mode!r}")


def _draw_channels(rng, params, n):
    """Channels with numerically singular draws replaced; returns (H, resamples)."""
    H = sample_comm_channels(rng, params, n)
    resamples = 0
    while True:
        sv = np.linalg.svd(H, compute_uv=False)
        bad = sv[:, 0] > SINGULAR_COND * sv[:, -1]
        if not bad.any():
            return H, resamples
        resamples += int(bad.sum())
        log.warning("resampling %d numerically singular channel draws", int(bad.sum()))
        H[bad] = sample_comm_channels(rng, params, int(bad.sum()))


def _radar_terms(params, n, trial_offset, drift):
    """Echo coefficients of both periods for ``n`` consecutive symbol pairs.

    ``mu`` advances once per pair, so both periods share one coefficient;
    in drift mode it advances every period instead.
    """
    g = radar_channel(params, 0)
    base = g.g_prime * np.exp(-2j * np.pi * g.Theta)
    step = 2j * np.pi * g.f_d * params.T
    pair = trial_offset + np.arange(n, dtype=float)
    if not drift:
        g1 = base * np.exp(step * pair)
        return g1, g1
    return base * np.exp(step * 2.0 * pair), base * np.exp(step * (2.0 * pair + 1.0))


def _ber_block(task):
    params, constellation, seed, point, block, n, trial_offset, receivers, distance_mode, drift = task
    rng = block_rng(seed, _FAMILY_BER, point, block)
    params = _block_params(params, rng, distance_mode)
    c = constellation
    M = params.M

    H, resamples = _draw_channels(rng, params, n)
    idx = rng.integers(0, len(c), size=(n, 2))
    s_r = np.exp(2j * np.pi * rng.random(n))
    sigma = math.sqrt(params.noise_var / 2.0)
    noise = sigma * (rng.standard_normal((2, n, M)) + 1j * rng.standard_normal((2, n, M)))

    amp = np.sqrt(np.array(params.powers))
    x1 = c.t1[idx] * amp
    x2 = c.t2[idx] * amp
    g1, g2 = _radar_terms(params, n, trial_offset, drift)
    radar = math.sqrt(params.P_r) * s_r
    y1 = np.einsum("nmk,nk->nm", H, x1) + (radar * g1)[:, None] + noise[0]
    y2 = np.einsum("nmk,nk->nm", H, x2) - (radar * g2)[:, None] + noise[1]
    y = y1 + y2

    Hh = np.conj(np.swapaxes(H, 1, 2))
    G = Hh @ H
    r = np.einsum("nkm,nm->nk", Hh, y)

    counts = {}
    tx_bits = c.bits[idx]
    for rx in receivers:
        if rx == "zf":
            det = _zf_core(G, r, params.powers, c)
        elif rx == "jml":
            det = _jml_core(G, r, params.powers, c)
        else:
            raise DomainError(f"unknown receiver {rx!r}")
        errs = np.sum(c.bits[det] != tx_bits, axis=2)
        counts[rx] = (int(errs[:, 0].sum()), int(errs[:, 1].sum()))
    return counts, resamples


def _outage_block(task):
    params, seed, point, block, n, C_list, distance_mode = task
    rng = block_rng(seed, _FAMILY_OUTAGE, point, block)
    params = _block_params(params, rng, distance_mode)
    H, _ = _draw_channels(rng, params, n)
    Hh = np.conj(np.swapaxes(H, 1, 2))
    G = Hh @ H
    ginv = np.real(np.diagonal(np.linalg.inv(G), axis1=1, axis2=2))
    norms = np.real(np.diagonal(G, axis1=1, axis2=2))
    p = np.array(params.powers) * SYMBOL_ENERGY
    den = 2.0 * params.noise_var
    with np.errstate(divide="ignore"):
        snr_zf = p / (ginv * den)
        snr_jml = p * norms / den
    rate_zf = np.log2(1.0 + snr_zf)
    rate_jml = np.log2(1.0 + snr_jml)
    out = {}
    for C in C_list:
        out[C] = {
            "zf": tuple(int(v) for v in np.sum(rate_zf < C, axis=0)),
            "jml": tuple(int(v) for v in np.sum(rate_jml < C, axis=0)),
        }
    return out


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def run_ber(params, trials, seed, receivers=RECEIVERS, workers=1, point=0,
            block_size=DEFAULT_BLOCK_SIZE, distance_mode="fixed", drift=False,
            constellation=None):
    """Monte-Carlo BER of every receiver and UE at one operating point.

    Parameters
    ----------
    params : SystemParams
    trials : int
        Number of symbol pairs; each gives 4 bits per UE.
    seed : int
        Root seed. Together with ``point`` it fixes every draw.
    workers : int
        Process count. Results do not depend on it.

    Returns
    -------
    dict
        ``{(receiver, ue): BerStats}``.
    """
    if trials < MIN_TRIALS:
        raise DomainError(f"need at least {MIN_TRIALS} trials, got {trials}")
    c = constellation or default_constellation()
    sizes = _block_sizes(trials, block_size)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    tasks = [
        (params, c, seed, point, b, n, int(off), tuple(receivers), distance_mode, drift)
        for b, (n, off) in enumerate(zip(sizes, offsets))
    ]
    results = _map(_ber_block, tasks, workers)
    resamples = sum(r[1] for r in results)
    out = {}
    for rx in receivers:
        for ue in (1, 2):
            errors = sum(r[0][rx][ue - 1] for r in results)
            out[(rx, ue)] = BerStats(rx, ue, errors, 4 * trials, resamples)
    return out


def run_outage(params, C_list, trials, seed, workers=1, point=0,
               block_size=DEFAULT_BLOCK_SIZE * 10, distance_mode="fixed"):
    """Monte-Carlo outage of both receivers for every rate threshold.

    Rates use the ensemble symbol energy ``|x'|^2 = 2``. Returns
    ``{(receiver, ue, C): OutageStats}`` with ``ue = 0`` for the mean over
    the two UEs.
    """
    if any(C < 0 for C in C_list):
        raise DomainError("rate thresholds must be >= 0")
    C_list = tuple(C_list)
    sizes = _block_sizes(trials, block_size)
    tasks = [(params, seed, point, b, n, C_list, distance_mode) for b, n in enumerate(sizes)]
    results = _map(_outage_block, tasks, workers)
    out = {}
    for C in C_list:
        for rx in RECEIVERS:
            per_ue = [sum(r[C][rx][k] for r in results) for k in range(2)]
            for ue in (1, 2):
                out[(rx, ue, C)] = OutageStats(rx, ue, C, per_ue[ue - 1], trials)
            out[(rx, 0, C)] = OutageStats(rx, 0, C, sum(per_ue), 2 * trials)
    return out


def conditional_ber_mc(P_N, draws, seed, constellation=None, bit=1, chunk=1_000_000):
    """Bit error count for nearest-symbol detection in CN(0, P_N) noise.

    Transmitted symbols are uniform over the ``bit = 0`` half of the
    alphabet. Returns ``(errors, draws)``.
    """
    if not P_N > 0:
        raise DomainError("noise power must be positive")
    c = constellation or default_constellation()
    col = c.bits[:, bit - 1]
    correct = np.flatnonzero(col == 0)
    sigma = math.sqrt(P_N / 2.0)
    errors = 0
    for b, lo in enumerate(range(0, draws, chunk)):
        n = min(chunk, draws - lo)
        rng = block_rng(seed, _FAMILY_CONDITIONAL, 0, b)
        tx = correct[rng.integers(0, len(correct), size=n)]
        z = c.points[tx] + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        errors += int(np.count_nonzero(col[nearest_indices(c, z)] != 0))
    return errors, draws
