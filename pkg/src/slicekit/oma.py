"""Closed-form KPIs for orthogonal slicing (OMA).

Every T_int-th slot is reserved for the intermittent user; the broadband
user transmits its coded frames in the remaining slots only, so the two
users never interfere.  The broadband frame succeeds when at least K of its
N coded slots survive erasure; the intermittent packet's fate is governed
purely by its queue (capacity Q, oldest discarded on overflow) and the
erasure probability eps2 of its own link.

Latency is counted in slots from the packet's arrival slot to the slot that
carries its transmission; a packet arriving in a reserved slot with an empty
queue is sent immediately (latency 0).
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import njit
from .core import AccessConfig, DiscretePmf, Scheme, TrafficModel, binomial_pmf, binomial_tail
from .queues import departure_step, oma_post_tx_matrix, steady_state

__all__ = [
    "broadband_success_oma",
    "broadband_throughput_oma",
    "generation_prob_oma",
    "tx_opportunity_index",
    "lr_kpis_oma",
    "paoi_kpis_oma",
    "oma_delay_pmf",
    "oma_interarrival_pmf",
]

_TAIL_RESIDUAL = 1e-9
_MAX_CYCLES = 100_000


def broadband_success_oma(K: int, N: int, eps1: float) -> float:
    """Probability that at least K of N coded slots survive erasure."""

    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    return binomial_tail(K, N, 1.0 - eps1)


def broadband_throughput_oma(K: int, N: int, T_int: int, eps1: float) -> float:
    """Broadband goodput in source packets per slot.

    The broadband user owns a (T_int - 1)/T_int share of the slots and each
    decoded frame delivers K source packets over N coded slots.
    """

    if T_int < 1:
        raise ValueError(f"T_int must be >= 1, got {T_int}")
    share = (T_int - 1) / T_int
    return broadband_success_oma(K, N, eps1) * share * K / N


def generation_prob_oma(g, ell: int, n: int, alpha: float, T_int: int) -> float:
    """Probability of the arrival-count vector g over the first ell windows.

    Window 1 runs from the slot after the packet's arrival (slot n of the
    period) to the next transmission opportunity and holds T_int - n slots;
    every later window holds T_int slots.
    """

    if not 1 <= n <= T_int:
        raise ValueError(f"n must be in [1, T_int], got {n}")
    if not 1 <= ell <= len(g):
        raise ValueError(f"ell must be in [1, len(g)], got {ell}")
    p = binomial_pmf(g[0], T_int - n, alpha)
    for i in range(1, ell):
        p *= binomial_pmf(g[i], T_int, alpha)
    return p


def tx_opportunity_index(g, q: int, Q: int):
    """Which transmission opportunity (1-based) carries the tagged packet.

    The packet arrives with q packets already queued (finding a full queue
    displaces the oldest, so at most Q - 1 remain ahead of it).  g[i-1]
    arrivals land in window i before opportunity i; each arrival to a full
    queue discards the oldest packet -- which is the tagged packet itself
    once nothing is ahead of it.  Returns the opportunity index, or None if
    the packet is discarded before it can be sent.
    """

    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    if not 0 <= q <= Q:
        raise ValueError(f"q must be in [0, Q], got {q}")
    ahead = min(q, Q - 1)
    behind = 0
    for i, gi in enumerate(g, start=1):
        for _ in range(int(gi)):
            if ahead + 1 + behind == Q:
                if ahead == 0:
                    return None
                ahead -= 1
            behind += 1
        if ahead == 0:
            return i
        ahead -= 1
    raise ValueError("g covers too few windows to resolve the packet")


@njit(cache=True)
def _oma_lr_kernel(T, Q, alpha, eps2, pi_post):  # pragma: no cover - jitted
    masses = np.zeros(Q * T)
    dropped = 0.0
    erased = 0.0
    occ = pi_post.copy()  # occupancy at the end of slot n-1
    occ_next = np.zeros(Q + 1)
    dp = np.zeros((Q + 1, Q + 1))
    ndp = np.zeros((Q + 1, Q + 1))
    for n in range(1, T + 1):
        for q in range(Q + 1):
            w0 = occ[q] / T
            if w0 == 0.0:
                continue
            a0 = min(q, Q - 1)
            dp[:, :] = 0.0
            dp[a0, 0] = 1.0
            for ell in range(1, a0 + 2):
                L = T - n if ell == 1 else T
                for _ in range(L):
                    ndp[:, :] = 0.0
                    for a in range(Q):
                        for b in range(Q - a):
                            p = dp[a, b]
                            if p == 0.0:
                                continue
                            ndp[a, b] += p * (1.0 - alpha)
                            if a + 1 + b == Q:
                                if a > 0:
                                    ndp[a - 1, b + 1] += p * alpha
                                else:
                                    dropped += w0 * p * alpha
                            else:
                                ndp[a, b + 1] += p * alpha
                    dp[:, :] = ndp
                # transmission opportunity: rows with a == 0 send the packet
                tx = 0.0
                for b in range(Q):
                    tx += dp[0, b]
                t = ell * T - n
                masses[t] += w0 * tx * (1.0 - eps2)
                erased += w0 * tx * eps2
                for a in range(Q):
                    for b in range(Q - a):
                        dp[a, b] = dp[a + 1, b] if a + 1 <= Q else 0.0
                for b in range(Q + 1):
                    dp[Q, b] = 0.0
        # one more slot of arrivals for the next value of n
        for j in range(Q + 1):
            occ_next[j] = occ[j] * (1.0 - alpha)
        for j in range(Q + 1):
            occ_next[min(j + 1, Q)] += occ[j] * alpha
        occ[:] = occ_next
    return masses, dropped, erased


def lr_kpis_oma(cfg: AccessConfig, tm: TrafficModel) -> tuple[DiscretePmf, float]:
    """Unconditional latency PMF and delivery probability for OMA.

    The PMF's masses sum to p_s2; the defect carries the probability that a
    packet is displaced from the queue or erased on its own link.  Support
    lies on {0, ..., Q*T_int - 1}: a packet found q' packets ahead departs at
    opportunity ell <= q' + 1, giving latency ell*T_int - n for an arrival in
    slot n of the period.
    """

    if cfg.scheme is not Scheme.OMA:
        raise ValueError("lr_kpis_oma requires an OMA configuration")
    T, Q = cfg.T_int, cfg.Q
    pi_post = departure_step(steady_state(oma_post_tx_matrix(T, tm.alpha, Q)))
    masses, dropped, erased = _oma_lr_kernel(
        T, Q, tm.alpha, tm.eps2, np.ascontiguousarray(pi_post.probs)
    )
    p_s2 = float(masses.sum())
    latency = DiscretePmf(offset=0, masses=masses, defect=1.0 - p_s2)
    return latency, p_s2


def oma_delay_pmf(T_int: int, alpha: float) -> DiscretePmf:
    """Delay of a delivered packet for a single-packet queue (Q = 1).

    With preemption by fresh arrivals the packet sent at an opportunity is
    the newest one, so the delay is t slots with probability proportional to
    alpha (1-alpha)^t, truncated to t < T_int.  Valid for any T_int >= 1.
    """

    if T_int < 1:
        raise ValueError(f"T_int must be >= 1, got {T_int}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be positive for delay statistics")
    t = np.arange(T_int, dtype=np.float64)
    masses = alpha * (1.0 - alpha) ** t
    masses /= masses.sum()
    return DiscretePmf(offset=0, masses=masses)


def oma_interarrival_pmf(T_int: int, alpha: float, eps2: float) -> DiscretePmf:
    """Time between consecutive deliveries (Q = 1), in slots.

    Each opportunity delivers independently with probability
    xi = (1 - (1-alpha)^T_int)(1 - eps2), so the interarrival time is
    T_int times a geometric variable.  The tail is truncated once the
    residual drops below 1e-9 (or after 10**5 cycles).
    """

    if T_int < 1:
        raise ValueError(f"T_int must be >= 1, got {T_int}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be positive for interarrival statistics")
    xi = (1.0 - (1.0 - alpha) ** T_int) * (1.0 - eps2)
    if xi >= 1.0:
        k_max = 1
    else:
        k_max = min(_MAX_CYCLES, max(1, math.ceil(math.log(_TAIL_RESIDUAL) / math.log(1.0 - xi))))
    masses = np.zeros(k_max * T_int)
    k = np.arange(1, k_max + 1, dtype=np.float64)
    masses[(np.arange(k_max)) * T_int] = (1.0 - xi) ** (k - 1.0) * xi
    defect = max(0.0, 1.0 - float(masses.sum()))
    return DiscretePmf(offset=T_int, masses=masses, defect=defect)


def paoi_kpis_oma(
    cfg: AccessConfig, tm: TrafficModel
) -> tuple[DiscretePmf, DiscretePmf, DiscretePmf]:
    """Delay, interarrival and peak-age PMFs for OMA with Q = 1.

    Peak age decomposes as the interarrival time plus the delay of the
    previous delivered packet, and the two terms are independent because
    they are driven by disjoint slots.
    """

    if cfg.scheme is not Scheme.OMA:
        raise ValueError("paoi_kpis_oma requires an OMA configuration")
    if cfg.Q != 1:
        raise ValueError("peak-age analysis requires Q = 1")
    T = cfg.T_int
    delay = oma_delay_pmf(T, tm.alpha)
    inter = oma_interarrival_pmf(T, tm.alpha, tm.eps2)
    paoi_masses = np.zeros(len(inter.masses) + T - 1)
    for k in range(len(inter.masses) // T):
        z_mass = inter.masses[k * T]
        if z_mass == 0.0:
            continue
        paoi_masses[k * T : k * T + T] += z_mass * delay.masses
    defect = max(0.0, 1.0 - float(paoi_masses.sum()))
    paoi = DiscretePmf(offset=T, masses=paoi_masses, defect=defect)
    return delay, inter, paoi
