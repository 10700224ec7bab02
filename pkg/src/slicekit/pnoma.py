"""Closed-form KPIs for shared-access slicing (partial and full NOMA).

Each broadband frame spans N slots: the first N - M are reserved for the
broadband user, the last M are also open to the intermittent user, which
sends its queue head in every shared ("mixed") slot.  The broadband user
transmits in every slot of its frame, so a mixed slot carrying an
intermittent packet is always a collision: the broadband slot is lost, and
the intermittent packet can only be recovered retroactively -- once the
frame accumulates K cleanly received slots, interference cancellation
recovers every stored packet whose own link did not erase it.  Full NOMA is
the M = N special case and shares every code path.

Latency for the intermittent user therefore decomposes into the wait for a
transmission opportunity plus the wait for the enclosing frame to decode;
a frame that never reaches K clean slots loses the packets it collided
with.  All laws here are computed by exact joint recursions over
(queue occupancy, clean-slot count) rather than by the factorized
approximations sometimes used for this model; `independence_approximation_report`
quantifies the gap between the two routes.

Analysis assumes the destructive-collision channel; the capture-mode
simulator is the empirical counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .core import (
    AccessConfig,
    DiscretePmf,
    QueueDistribution,
    Scheme,
    TrafficModel,
    binomial_pmf,
    binomial_pmf_vector,
    binomial_tail,
    multinomial_pmf,
)
from .queues import compose_frame_matrix, pnoma_phase_matrices, slot_distribution, steady_state

__all__ = [
    "EmptyingState",
    "tx_count_pmf",
    "broadband_success_lr",
    "generation_prob_pnoma",
    "queue_evolution",
    "drop_probability",
    "collision_count_pmf",
    "decode_latency_pmf",
    "lr_kpis_pnoma",
    "activity_and_decode_probs",
    "broadband_success_paoi",
    "first_decode_pmf",
    "event_and_delay_pmfs",
    "interarrival_pmf",
    "paoi_pmf_pnoma",
    "paoi_packet_success",
    "independence_approximation_report",
]

_TAIL_RESIDUAL = 1e-9
_MAX_FRAMES = 100_000


@dataclass(frozen=True)
class EmptyingState:
    """Free queue spots and cumulative evictions, one entry per frame."""

    free: tuple[int, ...]
    evicted: tuple[int, ...]


def _require_shared(cfg: AccessConfig) -> None:
    if cfg.scheme is Scheme.OMA:
        raise ValueError("this analysis applies to NOMA/PNOMA configurations only")


def _frame_start_distribution(cfg: AccessConfig, tm: TrafficModel) -> QueueDistribution:
    res, mix = pnoma_phase_matrices(tm.alpha, cfg.Q)
    return steady_state(compose_frame_matrix(res, mix, cfg.N, cfg.M))


# ---------------------------------------------------------------------------
# LR-oriented operations


def tx_count_pmf(d: int, piNM: QueueDistribution, alpha: float, M: int, Q: int) -> DiscretePmf:
    """PMF of the number of intermittent transmissions in the first d mixed slots.

    Starting from the occupancy law `piNM` at the beginning of the mixed
    phase, every mixed slot first admits a Bernoulli(alpha) arrival (capped
    at Q, displacing the oldest packet) and then serves the queue head if
    present.  The joint (occupancy, count) recursion is exact; the count
    saturates at d.
    """

    if not 0 <= d <= M:
        raise ValueError(f"d must be in [0, M], got {d}")
    joint = np.zeros((Q + 1, d + 1))
    joint[:, 0] = piNM.probs
    for slot in range(d):
        nxt = np.zeros_like(joint)
        for o in range(Q + 1):
            for c in range(slot + 1):
                p = joint[o, c]
                if p == 0.0:
                    continue
                for arr, pa in ((0, 1.0 - alpha), (1, alpha)):
                    w = p * pa
                    if w == 0.0:
                        continue
                    o2 = min(o + arr, Q)
                    if o2 > 0:
                        nxt[o2 - 1, c + 1] += w
                    else:
                        nxt[0, c] += w
        joint = nxt
    return DiscretePmf(offset=0, masses=joint.sum(axis=0))


def _tx_count_printed(d: int, piNM: QueueDistribution, alpha: float, M: int, Q: int) -> np.ndarray:
    """Factorized tx-count law (backlog and arrivals treated independently)."""

    out = np.zeros(d + 1)
    probs = piNM.probs
    for n in range(d):
        out[n] = sum(probs[q] * binomial_pmf(n - q, d, alpha) for q in range(min(Q, n) + 1))
    if d >= 0:
        out[d] = sum(probs[q] * binomial_tail(d - q, d, alpha) for q in range(Q + 1))
    return out


def broadband_success_lr(
    K: int, N: int, M: int, eps1: float, tx_pmf: DiscretePmf
) -> tuple[float, float]:
    """Broadband decode probability and throughput under mixed-slot collisions.

    Each intermittent transmission destroys one of the frame's N slots, so
    with r2 collisions the frame decodes when at least K of the remaining
    N - r2 slots survive erasure.
    """

    if not 1 <= K <= N or not 1 <= M <= N:
        raise ValueError("need 1 <= K <= N and 1 <= M <= N")
    p = 0.0
    for r2 in range(min(M, N - K) + 1):
        p += tx_pmf.prob(r2) * binomial_tail(K, N - r2, 1.0 - eps1)
    return p, K * p / N


def _generation_windows(ell: int, d: int, n: int, N: int, M: int) -> list[int]:
    """Window lengths (reserved, mixed alternating) for the generation vector."""

    base_res = max(N - M - n + 1, 0)
    if ell == 1:
        return [base_res, d - max(n - N + M, 1)]
    w = [base_res, M + 1 - max(n - N + M, 1)]
    for _ in range(ell - 2):
        w += [N - M, M]
    w += [N - M, d - 1]
    return w


def generation_prob_pnoma(
    g, ell: int, d: int, n: int, alpha: float, N: int, M: int
) -> float:
    """Probability of an arrival-count vector over the opportunity windows.

    Odd entries of g count arrivals during reserved phases, even entries
    during mixed phases, from the tagged packet's own frame up to the
    transmission opportunity at mixed slot d of frame ell.  Entries outside
    the admissible window bounds get probability 0.
    """

    if not 1 <= n <= N:
        raise ValueError(f"n must be in [1, N], got {n}")
    if not 1 <= d <= M:
        raise ValueError(f"d must be in [1, M], got {d}")
    if ell < 1 or len(g) != 2 * ell:
        raise ValueError("g must hold exactly 2*ell window counts")
    windows = _generation_windows(ell, d, n, N, M)
    if any(w < 0 for w in windows):
        raise ValueError("the opportunity precedes the packet's arrival")
    p = 1.0
    for gi, w in zip(g, windows):
        if not 0 <= gi <= w:
            return 0.0
        p *= binomial_pmf(gi, w, alpha)
    return p


def queue_evolution(g, q: int, Q: int, N: int, M: int):
    """Replay the queue over the windows of g and locate the tagged packet's slot.

    The tagged packet joins a queue of q packets (displacing the oldest if
    full) and the window counts of g are placed canonically -- one arrival
    per slot, as early in each window as possible, with each mixed slot
    processing its arrival before serving the head.  Returns the per-frame
    emptying state together with the transmission opportunity (d, ell), or
    the string "dropped" if a later arrival displaces the tagged packet.
    """

    if not 0 <= q <= Q:
        raise ValueError(f"q must be in [0, Q], got {q}")
    if len(g) < 2 or len(g) % 2:
        raise ValueError("g must hold an even number of window counts")
    queue: list[str] = ["o"] * q
    if len(queue) == Q:
        queue.pop(0)
    queue.append("X")
    free: list[int] = []
    evicted: list[int] = []
    evictions = 0
    tx = None
    tagged_gone = False
    for frame in range(1, len(g) // 2 + 1):
        g_res, g_mix = int(g[2 * frame - 2]), int(g[2 * frame - 1])
        for _ in range(g_res):
            if len(queue) == Q:
                tagged_gone = queue.pop(0) == "X"
                evictions += 1
            queue.append("o")
            if tagged_gone:
                break
        if not tagged_gone:
            for slot in range(1, M + 1):
                if g_mix > 0:
                    g_mix -= 1
                    if len(queue) == Q:
                        tagged_gone = queue.pop(0) == "X"
                        evictions += 1
                    queue.append("o")
                    if tagged_gone:
                        break
                if queue:
                    if queue.pop(0) == "X":
                        tx = (slot, frame)
                        break
        free.append(Q - len(queue))
        evicted.append(evictions)
        if tagged_gone:
            return EmptyingState(tuple(free), tuple(evicted)), "dropped"
        if tx is not None:
            return EmptyingState(tuple(free), tuple(evicted)), tx
    raise ValueError("g covers too few frames to resolve the tagged packet")


def drop_probability(n: int, cfg: AccessConfig, tm: TrafficModel) -> float:
    """Probability that a packet generated in slot n is displaced before sending."""

    _require_shared(cfg)
    if not 1 <= n <= cfg.N:
        raise ValueError(f"n must be in [1, N], got {n}")
    N, M, Q, alpha = cfg.N, cfg.M, cfg.Q, tm.alpha
    NM = N - M
    pi0 = _frame_start_distribution(cfg, tm)
    occ = slot_distribution(cfg, pi0, n - 1, alpha).probs
    # ahead/behind walk over slots n..end; only the queue matters here
    dp = np.zeros((Q, Q))
    for o in range(Q + 1):
        dp[min(o, Q - 1), 0] += occ[o]
    dropped = 0.0
    resolved = 0.0
    s = n
    # slot n: the tagged packet's own arrival; a mixed slot then serves
    if s > NM and Q >= 1:
        resolved += dp[0, :].sum()
        dp[0, :] = 0.0
        dp[:-1, :] = dp[1:, :]
        dp[-1, :] = 0.0
    for _ in range((Q + 2) * N):
        if dp.sum() < 1e-15:
            break
        s += 1
        phase = (s - 1) % N + 1
        ndp = np.zeros_like(dp)
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
                        dropped += p * alpha
                else:
                    ndp[a, b + 1] += p * alpha
        dp = ndp
        if phase > NM:
            resolved += dp[0, :].sum()
            dp[0, :] = 0.0
            dp[:-1, :] = dp[1:, :]
            dp[-1, :] = 0.0
    assert dp.sum() < 1e-12
    return dropped


def collision_count_pmf(
    c: int,
    d: int,
    piNM: QueueDistribution,
    pi_at_slot: QueueDistribution,
    alpha: float,
    Q: int,
) -> float:
    """P[c of the first d-1 mixed slots carried a transmission | slot d starts empty].

    The numerator is the exact joint (occupancy, count) recursion from
    `piNM`; the denominator is the empty-queue mass of `pi_at_slot`, the
    occupancy law after mixed slot d-1.
    """

    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not 0 <= c < d:
        return 0.0
    joint = np.zeros((Q + 1, d))
    joint[:, 0] = piNM.probs
    for _ in range(d - 1):
        nxt = np.zeros_like(joint)
        for o in range(Q + 1):
            for cc in range(d):
                p = joint[o, cc]
                if p == 0.0:
                    continue
                for arr, pa in ((0, 1.0 - alpha), (1, alpha)):
                    w = p * pa
                    if w == 0.0:
                        continue
                    o2 = min(o + arr, Q)
                    if o2 > 0:
                        nxt[o2 - 1, min(cc + 1, d - 1)] += w
                    else:
                        nxt[0, cc] += w
        joint = nxt
    denom = pi_at_slot.probs[0]
    if denom <= 0.0:
        raise ValueError("conditioning on an empty queue with zero probability")
    return float(joint[0, c]) / denom


def _collision_count_printed(
    c: int, d: int, piNM: QueueDistribution, pi_at_slot: QueueDistribution, alpha: float, Q: int
) -> float:
    if not 0 <= c < d:
        return 0.0
    s = sum(piNM.probs[q] * binomial_pmf(c - q, d - 1, alpha) for q in range(min(Q, c) + 1))
    return s / pi_at_slot.probs[0]


# ---------------------------------------------------------------------------
# exact latency machinery


@njit(cache=True)
def _decode_wait_tables(N, M, K, Q, alpha, eps1):  # pragma: no cover - jitted
    """Backward recursion for the decode wait after a collided transmission.

    U[j, o, r, delta] = P[frame reaches K clean slots exactly at mixed slot
    j + delta | after mixed slot j the queue holds o packets and r < K clean
    slots are in].  lost[j, o, r] is the mass that never decodes.
    """

    beta = 1.0 - alpha
    c1 = 1.0 - eps1
    U = np.zeros((M + 1, Q + 1, K, M + 1))
    lost = np.zeros((M + 1, Q + 1, K))
    lost[M, :, :] = 1.0
    for j in range(M - 1, 0, -1):
        for o in range(Q + 1):
            for r in range(K):
                acc_lost = 0.0
                for arr in range(2):
                    pa = alpha if arr == 1 else beta
                    if pa == 0.0:
                        continue
                    o2 = min(o + arr, Q)
                    if o2 > 0:
                        # collision in slot j+1: no decode progress
                        for delta in range(1, M - j):
                            U[j, o, r, delta + 1] += pa * U[j + 1, o2 - 1, r, delta]
                        acc_lost += pa * lost[j + 1, o2 - 1, r]
                    else:
                        if r + 1 == K:
                            U[j, o, r, 1] += pa * c1
                        else:
                            for delta in range(1, M - j):
                                U[j, o, r, delta + 1] += pa * c1 * U[j + 1, 0, r + 1, delta]
                            acc_lost += pa * c1 * lost[j + 1, 0, r + 1]
                        for delta in range(1, M - j):
                            U[j, o, r, delta + 1] += pa * (1.0 - c1) * U[j + 1, 0, r, delta]
                        acc_lost += pa * (1.0 - c1) * lost[j + 1, 0, r]
                lost[j, o, r] = acc_lost
    return U, lost


@njit(cache=True)
def _pnoma_lr_kernel(N, M, K, Q, alpha, eps1, eps2, pi0, rho):  # pragma: no cover - jitted
    NM = N - M
    beta = 1.0 - alpha
    c1 = 1.0 - eps1
    c2 = 1.0 - eps2

    # ---- joint (occupancy, clean-count) law over one stationary frame
    JA = np.zeros((N + 1, Q + 1, K + 1))
    for o in range(Q + 1):
        JA[0, o, 0] = pi0[o]
    for s in range(1, N + 1):
        for o in range(Q + 1):
            for r in range(K + 1):
                p = JA[s - 1, o, r]
                if p == 0.0:
                    continue
                for arr in range(2):
                    pa = p * (alpha if arr == 1 else beta)
                    if pa == 0.0:
                        continue
                    o2 = min(o + arr, Q)
                    if s <= NM:
                        r2 = r + 1 if r < K else K
                        JA[s, o2, r2] += pa * c1
                        JA[s, o2, r] += pa * (1.0 - c1)
                    else:
                        if o2 > 0:
                            JA[s, o2 - 1, r] += pa
                        else:
                            r2 = r + 1 if r < K else K
                            JA[s, 0, r2] += pa * c1
                            JA[s, 0, r] += pa * (1.0 - c1)
    p_s1_joint = JA[N, :, K].sum()

    U, lostU = _decode_wait_tables(N, M, K, Q, alpha, eps1)

    ell_max = Q + 2
    LT = ell_max * N + M + 2
    masses = np.zeros(LT)
    drops = np.zeros(N + 1)
    erased = 0.0
    lost = 0.0
    leftover = 0.0

    pb = np.zeros((Q, Q, K + 1))
    pb2 = np.zeros((Q, Q))
    npb = np.zeros((Q, Q, K + 1))
    npb2 = np.zeros((Q, Q))

    for n in range(1, N + 1):
        pb[:, :, :] = 0.0
        for o in range(Q + 1):
            for r in range(K + 1):
                w = JA[n - 1, o, r]
                if w > 0.0:
                    pb[min(o, Q - 1), 0, r] += w

        # walk from the arrival slot; ell tracks the frame of the opportunity
        for s_abs in range(n, ell_max * N + 1):
            phase = (s_abs - 1) % N + 1
            ell = (s_abs - 1) // N + 1
            in_frame1 = ell == 1
            if s_abs > n:
                # arrival step (the tagged packet itself arrived at slot n)
                if in_frame1:
                    npb[:, :, :] = 0.0
                    for a in range(Q):
                        for b in range(Q - a):
                            for r in range(K + 1):
                                p = pb[a, b, r]
                                if p == 0.0:
                                    continue
                                npb[a, b, r] += p * beta
                                if a + 1 + b == Q:
                                    if a > 0:
                                        npb[a - 1, b + 1, r] += p * alpha
                                    else:
                                        drops[n] += p * alpha
                                else:
                                    npb[a, b + 1, r] += p * alpha
                    pb[:, :, :] = npb
                else:
                    npb2[:, :] = 0.0
                    for a in range(Q):
                        for b in range(Q - a):
                            p = pb2[a, b]
                            if p == 0.0:
                                continue
                            npb2[a, b] += p * beta
                            if a + 1 + b == Q:
                                if a > 0:
                                    npb2[a - 1, b + 1] += p * alpha
                                else:
                                    drops[n] += p * alpha
                            else:
                                npb2[a, b + 1] += p * alpha
                    pb2[:, :] = npb2
            if phase <= NM:
                if in_frame1 and s_abs >= n:
                    # reserved slot: broadband progresses cleanly
                    npb[:, :, :] = 0.0
                    for a in range(Q):
                        for b in range(Q - a):
                            for r in range(K + 1):
                                p = pb[a, b, r]
                                if p == 0.0:
                                    continue
                                r2 = r + 1 if r < K else K
                                npb[a, b, r2] += p * c1
                                npb[a, b, r] += p * (1.0 - c1)
                    pb[:, :, :] = npb
            else:
                d = phase - NM
                omega = s_abs - n
                if in_frame1:
                    # service: the head transmits (collision for the frame)
                    for b in range(Q):
                        for r in range(K + 1):
                            w = pb[0, b, r]
                            if w == 0.0:
                                continue
                            if r >= K:
                                masses[omega] += w * c2
                                erased += w * eps2
                            else:
                                tot = 0.0
                                for delta in range(1, M - d + 1):
                                    u = U[d, b, r, delta]
                                    if u > 0.0:
                                        masses[omega + delta] += w * u * c2
                                        tot += u
                                erased += w * tot * eps2
                                lost += w * lostU[d, b, r]
                    pb[0, :, :] = 0.0
                    for a in range(Q - 1):
                        pb[a, :, :] = pb[a + 1, :, :]
                    pb[Q - 1, :, :] = 0.0
                else:
                    for b in range(Q):
                        w0 = pb2[0, b]
                        if w0 == 0.0:
                            continue
                        for r in range(K + 1):
                            w = w0 * rho[r]
                            if w == 0.0:
                                continue
                            if r >= K:
                                masses[omega] += w * c2
                                erased += w * eps2
                            else:
                                tot = 0.0
                                for delta in range(1, M - d + 1):
                                    u = U[d, b, r, delta]
                                    if u > 0.0:
                                        masses[omega + delta] += w * u * c2
                                        tot += u
                                erased += w * tot * eps2
                                lost += w * lostU[d, b, r]
                    pb2[0, :] = 0.0
                    for a in range(Q - 1):
                        pb2[a, :] = pb2[a + 1, :]
                    pb2[Q - 1, :] = 0.0
            if in_frame1 and phase == N:
                # frame boundary: the broadband frame resets, fold r away
                pb2[:, :] = 0.0
                for a in range(Q):
                    for b in range(Q - a):
                        acc = 0.0
                        for r in range(K + 1):
                            acc += pb[a, b, r]
                        pb2[a, b] = acc
                pb[:, :, :] = 0.0
        leftover += pb2.sum() + pb.sum()
    return masses, drops, erased, lost, leftover, p_s1_joint


def _phase_a_success(cfg: AccessConfig, tm: TrafficModel) -> float:
    """Broadband decode probability from the joint slot walk (dual route)."""

    _require_shared(cfg)
    pi0 = _frame_start_distribution(cfg, tm)
    rho = _capped_binomial(cfg.N - cfg.M, 1.0 - tm.eps1, cfg.K)
    out = _pnoma_lr_kernel(
        cfg.N, cfg.M, cfg.K, cfg.Q, tm.alpha, tm.eps1, tm.eps2,
        np.ascontiguousarray(pi0.probs), rho,
    )
    return float(out[5])


def _capped_binomial(n: int, p: float, cap: int) -> np.ndarray:
    """Bin(n, p) PMF with all mass at >= cap lumped into index cap."""

    full = binomial_pmf_vector(n, p)
    out = np.zeros(cap + 1)
    if len(full) <= cap:
        out[: len(full)] = full
    else:
        out[:cap] = full[:cap]
        out[cap] = full[cap:].sum()
    return out


def lr_kpis_pnoma(
    cfg: AccessConfig, tm: TrafficModel
) -> tuple[DiscretePmf, float, float, float]:
    """Latency PMF, packet delivery probability, and broadband KPIs.

    The latency law is the exact aggregate over generation slot, queue
    state, transmission opportunity, and decode wait; its masses sum to
    p_s2 and the defect collects queue displacement, own-link erasure, and
    frames that never decode.  p_s1 uses the transmission-count route; the
    joint-walk route is exposed separately for cross-checking.
    """

    _require_shared(cfg)
    N, M, K, Q = cfg.N, cfg.M, cfg.K, cfg.Q
    pi0 = _frame_start_distribution(cfg, tm)
    piNM = slot_distribution(cfg, pi0, N - M, tm.alpha)
    p_s1, s1 = broadband_success_lr(K, N, M, tm.eps1, tx_count_pmf(M, piNM, tm.alpha, M, Q))
    rho = _capped_binomial(N - M, 1.0 - tm.eps1, K)
    masses, drops, erased, lost, leftover, _ = _pnoma_lr_kernel(
        N, M, K, Q, tm.alpha, tm.eps1, tm.eps2, np.ascontiguousarray(pi0.probs), rho
    )
    if leftover / N > 1e-10:
        raise RuntimeError("latency walk left unresolved probability mass")
    masses = masses / N
    nz = np.nonzero(masses)[0]
    masses = masses[: nz[-1] + 1] if len(nz) else masses[:1]
    p_s2 = float(masses.sum())
    latency = DiscretePmf(offset=0, masses=masses, defect=1.0 - p_s2)
    return latency, p_s2, p_s1, s1


def decode_latency_pmf(
    g, d: int, q: int, n: int, cfg: AccessConfig, tm: TrafficModel
) -> DiscretePmf:
    """Decode-wait PMF for a packet sent at mixed slot d under conditions (g, q, n).

    The packet must transmit at (d, ell) per `queue_evolution`; mass at
    delta is the probability that the enclosing frame decodes at mixed slot
    d + delta and the packet's own link survives, with delta = 0 when the
    frame already holds K clean slots at transmission time.  The defect
    collects own-link erasures and frames that never decode.
    """

    _require_shared(cfg)
    N, M, K, Q = cfg.N, cfg.M, cfg.K, cfg.Q
    NM = N - M
    _, tx = queue_evolution(g, q, Q, N, M)
    if tx == "dropped":
        raise ValueError("the tagged packet is dropped under g; no transmission slot")
    d_tx, ell = tx
    if d_tx != d:
        raise ValueError(f"g implies transmission at mixed slot {d_tx}, not {d}")
    alpha, eps1, eps2 = tm.alpha, tm.eps1, tm.eps2
    c1 = 1.0 - eps1

    # clean-count law at the transmission slot
    if ell == 1:
        # joint law of (occupancy, cleans) after slot n-1, conditioned on q
        joint = _joint_after_slot(cfg, tm, n - 1)
        row = joint[q]
        if row.sum() <= 0.0:
            raise ValueError("queue state q has zero probability at slot n")
        r_pmf = row / row.sum()
        # slots n..tx within frame 1: reserved slots advance the count,
        # mixed slots collide while the tagged packet is queued
        reserved_left = max(NM - n + 1, 0)
        extra = binomial_pmf_vector(reserved_left, c1)
        r_pmf = np.convolve(r_pmf, extra)
    else:
        r_pmf = binomial_pmf_vector(NM, c1)
    r_cap = np.zeros(K + 1)
    if len(r_pmf) <= K:
        r_cap[: len(r_pmf)] = r_pmf
    else:
        r_cap[:K] = r_pmf[:K]
        r_cap[K] = r_pmf[K:].sum()

    # queue left behind the tagged packet at transmission
    behind = _behind_at_tx(g, q, Q, M)

    U, lostU = _decode_wait_tables(N, M, K, Q, alpha, eps1)
    masses = np.zeros(M - d + 1)
    masses[0] = r_cap[K] * (1.0 - eps2)
    lost = 0.0
    for r in range(K):
        w = r_cap[r]
        if w == 0.0:
            continue
        for delta in range(1, M - d + 1):
            masses[delta] += w * U[d, behind, r, delta] * (1.0 - eps2)
        lost += w * lostU[d, behind, r]
    return DiscretePmf(offset=0, masses=masses, defect=1.0 - float(masses.sum()))


def _joint_after_slot(cfg: AccessConfig, tm: TrafficModel, s: int) -> np.ndarray:
    """Joint (occupancy, capped clean-count) law after slot s of a frame."""

    N, M, K, Q = cfg.N, cfg.M, cfg.K, cfg.Q
    NM = N - M
    alpha, c1 = tm.alpha, 1.0 - tm.eps1
    pi0 = _frame_start_distribution(cfg, tm)
    J = np.zeros((Q + 1, K + 1))
    J[:, 0] = pi0.probs
    for slot in range(1, s + 1):
        nxt = np.zeros_like(J)
        for o in range(Q + 1):
            for r in range(K + 1):
                p = J[o, r]
                if p == 0.0:
                    continue
                for arr, pa in ((0, 1.0 - alpha), (1, alpha)):
                    w = p * pa
                    if w == 0.0:
                        continue
                    o2 = min(o + arr, Q)
                    if slot <= NM:
                        nxt[o2, min(r + 1, K)] += w * c1
                        nxt[o2, r] += w * (1.0 - c1)
                    elif o2 > 0:
                        nxt[o2 - 1, r] += w
                    else:
                        nxt[0, min(r + 1, K)] += w * c1
                        nxt[0, r] += w * (1.0 - c1)
        J = nxt
    return J


def _behind_at_tx(g, q: int, Q: int, M: int) -> int:
    """Packets left in the queue when the tagged one transmits (replay)."""

    queue = ["o"] * q
    if len(queue) == Q:
        queue.pop(0)
    queue.append("X")
    for frame in range(1, len(g) // 2 + 1):
        g_res, g_mix = int(g[2 * frame - 2]), int(g[2 * frame - 1])
        for _ in range(g_res):
            if len(queue) == Q:
                queue.pop(0)
            queue.append("o")
        for _ in range(1, M + 1):
            if g_mix > 0:
                g_mix -= 1
                if len(queue) == Q:
                    queue.pop(0)
                queue.append("o")
            if queue:
                if queue.pop(0) == "X":
                    return len(queue)
    raise ValueError("g covers too few frames to resolve the tagged packet")


# ---------------------------------------------------------------------------
# PAoI-oriented operations (Q = 1)


def activity_and_decode_probs(
    m: int, alpha: float, eps1: float, eps2: float, N: int, M: int
) -> tuple[float, float, float]:
    """Per-mixed-slot activity and single-slot decode probabilities.

    The first mixed slot carries the newest packet from its own slot plus
    the whole reserved phase, so it is active with probability
    1 - (1-alpha)^(N-M+1); later mixed slots are active with probability
    alpha.  p1 is the chance of cleanly receiving the broadband slot, p2 of
    receiving the intermittent packet.
    """

    if not 1 <= m <= M:
        raise ValueError(f"m must be in [1, M], got {m}")
    p_a = 1.0 - (1.0 - alpha) ** (N - M + 1) if m == 1 else alpha
    return p_a, (1.0 - eps1) * (1.0 - p_a), p_a * (1.0 - eps2)


def broadband_success_paoi(n: int, cfg: AccessConfig, tm: TrafficModel) -> tuple[float, float]:
    """P[frame decoded within its first n slots] and the frame throughput.

    With a single-packet queue the intermittent user's activity is
    independent across mixed slots, so the clean-slot count is an exact
    convolution of the reserved binomial, the first mixed slot's Bernoulli,
    and a binomial over the remaining mixed slots.
    """

    _require_shared(cfg)
    if cfg.Q != 1:
        raise ValueError("peak-age analysis requires Q = 1")
    N, M, K = cfg.N, cfg.M, cfg.K
    if not 1 <= n <= N:
        raise ValueError(f"n must be in [1, N], got {n}")

    def _upto(nn: int) -> float:
        NM = N - M
        pmf = binomial_pmf_vector(min(nn, NM), 1.0 - tm.eps1)
        if nn > NM:
            _, p11, _ = activity_and_decode_probs(1, tm.alpha, tm.eps1, tm.eps2, N, M)
            _, p1M, _ = activity_and_decode_probs(M, tm.alpha, tm.eps1, tm.eps2, N, M) \
                if M > 1 else (0.0, 0.0, 0.0)
            pmf = np.convolve(pmf, np.array([1.0 - p11, p11]))
            rest = min(nn - NM, M) - 1
            if rest > 0:
                pmf = np.convolve(pmf, binomial_pmf_vector(rest, p1M))
        return float(pmf[K:].sum()) if len(pmf) > K else 0.0

    p_n = _upto(n)
    p_N = p_n if n == N else _upto(N)
    return p_n, K * p_N / N


@njit(cache=True)
def _paoi_frame_kernel(N, M, K, alpha, eps1, eps2, r0):  # pragma: no cover - jitted
    """One-frame event law for the single-packet queue under shared access.

    Tracks the joint law of (clean-slot count r < K, generation slot of the
    freshest interference-stored packet whose own link survived) through the
    mixed phase, plus decoded states with/without a delivery so far.
    Returns per-slot event probabilities, first-event probabilities, joint
    delay laws, the no-event mass, and the expected packets delivered.
    """

    NM = N - M
    beta = 1.0 - alpha
    c1 = 1.0 - eps1
    c2 = 1.0 - eps2
    pre = np.zeros((K, N + 1))
    ep = np.zeros((K, N + 1))
    post_no = 0.0
    post_had = 0.0
    for r in range(len(r0)):
        if r < K:
            pre[r, 0] = r0[r]
        else:
            post_no += r0[r]
    first_ev = np.zeros(M)
    e_ev = np.zeros(M)
    EG = np.zeros((M, N))
    ET = np.zeros((M, M))
    delivered = 0.0

    npre = np.zeros((K, N + 1))
    nep = np.zeros((K, N + 1))
    for m in range(1, M + 1):
        p_a = 1.0 - beta ** (NM + 1) if m == 1 else alpha
        ina = 1.0 - p_a
        npre[:, :] = 0.0
        nep[:, :] = 0.0
        n_post_no = 0.0
        n_post_had = 0.0
        # --- pre-decode states
        for r in range(K):
            for phi in range(N + 1):
                p = pre[r, phi]
                e = ep[r, phi]
                if p == 0.0 and e == 0.0:
                    continue
                # slot carries no intermittent packet: broadband may progress
                wclean = ina * c1
                if r + 1 == K:
                    if phi > 0:
                        w = p * wclean
                        G = NM + m - phi
                        tx_slot = phi if phi > NM + 1 else NM + 1
                        T = NM + m - tx_slot
                        EG[m - 1, G] += w
                        ET[m - 1, T] += w
                        first_ev[m - 1] += w
                        n_post_had += w
                    else:
                        n_post_no += p * wclean
                    delivered += e * wclean
                else:
                    npre[r + 1, phi] += p * wclean
                    nep[r + 1, phi] += e * wclean
                npre[r, phi] += p * ina * (1.0 - c1)
                nep[r, phi] += e * ina * (1.0 - c1)
                # slot carries an intermittent packet: collision, store it
                if m == 1:
                    for w_off in range(NM + 1):
                        aw = alpha * beta**w_off
                        if aw == 0.0:
                            break
                        gen = NM + 1 - w_off
                        npre[r, gen] += p * aw * c2
                        nep[r, gen] += (e + p) * aw * c2
                        npre[r, phi] += p * aw * eps2
                        nep[r, phi] += e * aw * eps2
                else:
                    gen = NM + m
                    npre[r, gen] += p * alpha * c2
                    nep[r, gen] += (e + p) * alpha * c2
                    npre[r, phi] += p * alpha * eps2
                    nep[r, phi] += e * alpha * eps2
        # --- decoded states: every transmission is clean, delivery is direct
        if m == 1:
            for w_off in range(NM + 1):
                aw = alpha * beta**w_off
                gen_delay = w_off
                ev_first = post_no * aw * c2
                ev_later = post_had * aw * c2
                if ev_first > 0.0 or ev_later > 0.0:
                    EG[m - 1, gen_delay] += ev_first + ev_later
                    ET[m - 1, 0] += ev_first + ev_later
                    first_ev[m - 1] += ev_first
        else:
            ev_first = post_no * alpha * c2
            ev_later = post_had * alpha * c2
            if ev_first > 0.0 or ev_later > 0.0:
                EG[m - 1, 0] += ev_first + ev_later
                ET[m - 1, 0] += ev_first + ev_later
                first_ev[m - 1] += ev_first
        delivered += (post_no + post_had) * p_a * c2
        n_post_had += post_had + post_no * p_a * c2
        n_post_no += post_no * (1.0 - p_a * c2)
        e_ev[m - 1] = first_ev[m - 1] + post_had * p_a * c2
        tmp = pre
        pre = npre
        npre = tmp
        tmp = ep
        ep = nep
        nep = tmp
        post_no = n_post_no
        post_had = n_post_had
    p_empty = pre.sum() + post_no
    return first_ev, e_ev, EG, ET, p_empty, delivered


def _paoi_frame_law(cfg: AccessConfig, tm: TrafficModel):
    _require_shared(cfg)
    if cfg.Q != 1:
        raise ValueError("peak-age analysis requires Q = 1")
    N, M, K = cfg.N, cfg.M, cfg.K
    r0 = binomial_pmf_vector(N - M, 1.0 - tm.eps1)
    return _paoi_frame_kernel(N, M, K, tm.alpha, tm.eps1, tm.eps2,
                              np.ascontiguousarray(r0))


def first_decode_pmf(cfg: AccessConfig, tm: TrafficModel) -> tuple[np.ndarray, float]:
    """First-delivery-slot masses p_F(f), f in 1..M, and their complement.

    The scalar returned alongside is 1 - sum(p_F): the probability that a
    frame produces no delivery at all.  That complement is sometimes read as
    a success probability; `paoi_packet_success` gives the actual
    per-packet delivery rate.
    """

    first_ev, _, _, _, _, _ = _paoi_frame_law(cfg, tm)
    return first_ev.copy(), float(1.0 - first_ev.sum())


def paoi_packet_success(cfg: AccessConfig, tm: TrafficModel) -> float:
    """Fraction of generated packets eventually delivered (Q = 1)."""

    if tm.alpha <= 0.0:
        raise ValueError("alpha must be positive for packet accounting")
    _, _, _, _, _, delivered = _paoi_frame_law(cfg, tm)
    return float(delivered) / (tm.alpha * cfg.N)


def event_and_delay_pmfs(
    d: int, cfg: AccessConfig, tm: TrafficModel
) -> tuple[float, float, DiscretePmf]:
    """Event-location weight, first-event share, and delivery-wait PMF at slot d.

    Returns (p_D, p_H, p_T): the probability that a randomly chosen delivery
    event falls in mixed slot d, the probability that an event at d is the
    frame's first, and the PMF of the wait from transmission to delivery for
    packets delivered at d (0 except for interference-stored packets
    recovered when the frame decodes).
    """

    if not 1 <= d <= cfg.M:
        raise ValueError(f"d must be in [1, M], got {d}")
    first_ev, e_ev, _, ET, _, _ = _paoi_frame_law(cfg, tm)
    total = e_ev.sum()
    if total <= 0.0:
        raise ValueError("no delivery events occur under this configuration")
    p_d = float(e_ev[d - 1]) / float(total)
    if e_ev[d - 1] <= 0.0:
        return 0.0, 0.0, DiscretePmf(offset=0, masses=np.array([0.0]), defect=1.0)
    p_h = float(first_ev[d - 1] / e_ev[d - 1])
    masses = ET[d - 1] / e_ev[d - 1]
    nz = np.nonzero(masses)[0]
    masses = masses[: nz[-1] + 1] if len(nz) else masses[:1]
    return p_d, p_h, DiscretePmf(offset=0, masses=masses,
                                 defect=max(0.0, 1.0 - float(masses.sum())))


def interarrival_pmf(i: int, cfg: AccessConfig, tm: TrafficModel) -> DiscretePmf:
    """Time between a delivery at mixed slot i and the next delivery.

    After a delivery the frame is decoded, so later slots of the same frame
    deliver independently with probability alpha*(1 - eps2) each; otherwise
    the gap spans e empty frames plus the first-delivery slot of a later
    frame.  Truncated once the residual drops below 1e-9 (or at 10**5
    frames); the truncated tail is reported as the defect.
    """

    if not 1 <= i <= cfg.M:
        raise ValueError(f"i must be in [1, M], got {i}")
    N, M = cfg.N, cfg.M
    first_ev, _, _, _, p_empty, _ = _paoi_frame_law(cfg, tm)
    p_first_total = float(first_ev.sum())
    if p_first_total <= 1e-15:
        raise ValueError("no delivery events occur under this configuration")
    pi_slot = tm.alpha * (1.0 - tm.eps2)
    cross_base = (1.0 - pi_slot) ** (M - i)
    if cross_base > 0.0 and p_empty < 1.0:
        e_max = int(math.ceil(math.log(_TAIL_RESIDUAL / cross_base)
                              / math.log(p_empty))) if p_empty > 0.0 else 0
        e_max = min(max(e_max, 0), _MAX_FRAMES)
    else:
        e_max = 0
    masses = np.zeros((e_max + 1) * N + M)
    for z in range(1, M - i + 1):
        masses[z - 1] = (1.0 - pi_slot) ** (z - 1) * pi_slot
    for e in range(e_max + 1):
        w = cross_base * p_empty**e
        if w < 1e-18:
            break
        for f in range(1, M + 1):
            z = (e + 1) * N + f - i
            masses[z - 1] += w * first_ev[f - 1]
    total = float(masses.sum())
    nz = np.nonzero(masses)[0]
    masses = masses[: nz[-1] + 1] if len(nz) else masses[:1]
    return DiscretePmf(offset=1, masses=masses, defect=max(0.0, 1.0 - total))


def paoi_pmf_pnoma(cfg: AccessConfig, tm: TrafficModel) -> DiscretePmf:
    """Peak-age PMF for the intermittent user under shared access (Q = 1).

    A peak equals the previous delivered packet's age at delivery plus the
    gap to the next delivery; both are conditioned on the previous event's
    slot and combined over the stationary event-location law.
    """

    _, e_ev, EG, _, _, _ = _paoi_frame_law(cfg, tm)
    total = e_ev.sum()
    if total <= 0.0:
        raise ValueError("no delivery events occur under this configuration")
    parts: list[np.ndarray] = []
    for d in range(1, cfg.M + 1):
        if e_ev[d - 1] <= 0.0:
            continue
        w = e_ev[d - 1] / total
        g_pmf = EG[d - 1] / e_ev[d - 1]
        z = interarrival_pmf(d, cfg, tm)
        parts.append(w * np.convolve(g_pmf, z.masses))
    if not parts:
        raise ValueError("no delivery events occur under this configuration")
    size = max(len(p) for p in parts)
    masses = np.zeros(size)
    for p in parts:
        masses[: len(p)] += p
    nz = np.nonzero(masses)[0]
    masses = masses[: nz[-1] + 1] if len(nz) else masses[:1]
    return DiscretePmf(offset=1, masses=masses, defect=max(0.0, 1.0 - float(masses.sum())))


# ---------------------------------------------------------------------------
# factorized-formula comparison


def _mult0(counts, n, ps) -> float:
    """Multinomial PMF that returns 0 for out-of-range count combinations."""

    if n < 0 or any(c < 0 for c in counts) or sum(counts) > n:
        return 0.0
    return multinomial_pmf(counts, n, ps)


def _first_decode_printed(cfg: AccessConfig, tm: TrafficModel) -> np.ndarray:
    """First-delivery masses from the factorized per-slot product formulas.

    These treat the broadband clean-slot count and the intermittent
    transmission pattern across mixed slots as independent multinomial
    draws; the exact law tracks them jointly.
    """

    N, M, K = cfg.N, cfg.M, cfg.K
    NM = N - M
    alpha, eps1, eps2 = tm.alpha, tm.eps1, tm.eps2
    pa1, p11, p21 = activity_and_decode_probs(1, alpha, eps1, eps2, N, M)
    out = np.zeros(M)
    out[0] = pa1 * (1.0 - eps2) * binomial_tail(K, NM, 1.0 - eps1)
    if M == 1:
        return out
    _, p1m, p2m = activity_and_decode_probs(2, alpha, eps1, eps2, N, M)
    ps = [p1m, p2m]
    for f in range(2, M + 1):
        # slot f carries an intermittent packet
        acc_a = 0.0
        for r1 in range(max(K - f + 1, 0), NM + 1):
            b = binomial_pmf(r1, NM, 1.0 - eps1)
            if b == 0.0:
                continue
            term = p11 * _mult0([K - r1 - 1, 0], f - 2, ps)
            term += (1.0 - p21) * sum(
                _mult0([r2, 0], f - 2, ps) for r2 in range(max(K - r1, 0), f - 1)
            )
            acc_a += b * term
        # slot f is quiet: the frame itself must decode there
        acc_n = 0.0
        for r1 in range(max(K - f + 1, 0), min(NM, K - 1) + 1):
            b = binomial_pmf(r1, NM, 1.0 - eps1)
            if b == 0.0:
                continue
            term = p11 * sum(
                _mult0([K - r1 - 2, r2], f - 2, ps) for r2 in range(1, f - K + r1 + 1)
            )
            term += p21 * sum(
                _mult0([K - r1 - 1, r2], f - 2, ps) for r2 in range(0, f - K + r1)
            )
            term += (1.0 - p21) * (1.0 - p11) * sum(
                _mult0([K - r1 - 1, r2], f - 2, ps) for r2 in range(1, f - K + r1)
            )
            acc_n += b * term
        out[f - 1] = p2m * acc_a + p1m * acc_n
    return out


def _event_location_printed(cfg: AccessConfig, tm: TrafficModel) -> np.ndarray:
    """Event-location weights from the factorized formula.

    Mixes first events with post-decode deliveries assuming the expected
    count of later deliveries factorizes, normalized by the no-delivery
    complement of the first-event masses.
    """

    printed_f = _first_decode_printed(cfg, tm)
    comp = 1.0 - printed_f.sum()
    out = np.zeros(cfg.M)
    for d in range(1, cfg.M + 1):
        _, _, p2d = activity_and_decode_probs(d, tm.alpha, tm.eps1, tm.eps2, cfg.N, cfg.M)
        later = sum(printed_f[f - 1] * p2d for f in range(1, d))
        out[d - 1] = (later + printed_f[d - 1]) / comp if comp > 0.0 else np.inf
    return out


def independence_approximation_report(cfg: AccessConfig, tm: TrafficModel) -> dict[str, float]:
    """Maximum deviation between the exact laws and their factorized variants.

    The factorized formulas treat the queue backlog and later arrivals as
    independent (and, on the peak-age side, mixed slots as exchangeable and
    frame gaps as geometric without the reserved phase); this report
    quantifies how far each of them sits from the exact joint recursions
    for the given configuration.  Larger values mean the factorized variant
    is a worse stand-in; the exact routes are always the ones exposed by
    the public functions.
    """

    _require_shared(cfg)
    N, M, Q = cfg.N, cfg.M, cfg.Q
    report: dict[str, float] = {}
    pi0 = _frame_start_distribution(cfg, tm)
    piNM = slot_distribution(cfg, pi0, N - M, tm.alpha)

    dev = 0.0
    for d in range(1, M + 1):
        exact = tx_count_pmf(d, piNM, tm.alpha, M, Q).masses
        printed = _tx_count_printed(d, piNM, tm.alpha, M, Q)
        dev = max(dev, float(np.max(np.abs(exact - printed))))
    report["tx_count_pmf"] = dev

    dev = 0.0
    for d in range(2, M + 1):
        pi_at = slot_distribution(cfg, pi0, N - M + d - 1, tm.alpha)
        if pi_at.probs[0] <= 0.0:
            continue
        for c in range(d):
            dev = max(dev, abs(
                collision_count_pmf(c, d, piNM, pi_at, tm.alpha, Q)
                - _collision_count_printed(c, d, piNM, pi_at, tm.alpha, Q)
            ))
    report["collision_count_pmf"] = dev

    if cfg.Q == 1 and tm.alpha > 0.0:
        first_ev, e_ev, _, _, _, _ = _paoi_frame_law(cfg, tm)
        report["first_decode_pmf"] = float(
            np.max(np.abs(first_ev - _first_decode_printed(cfg, tm)))
        )
        total = float(e_ev.sum())
        if total > 0.0:
            exact_d = e_ev / total
            report["event_location_pmf"] = float(
                np.max(np.abs(exact_d - _event_location_printed(cfg, tm)))
            )
            pi_slot = tm.alpha * (1.0 - tm.eps2)
            dev = 0.0
            for i in range(1, M + 1):
                exact_last = (1.0 - pi_slot) ** (M - i)
                printed_last = (1.0 - (1.0 - tm.alpha) * (1.0 - tm.eps2)) ** (M - i)
                dev = max(dev, abs(exact_last - printed_last))
            report["last_in_frame_prob"] = dev
            # gap law: the factorized variant scrambles the empty-frame
            # weights and omits the reserved phase from the cross-frame gap
            sum_f = float(first_ev.sum())
            dev = 0.0
            for i in range(1, M + 1):
                if e_ev[i - 1] <= 0.0:
                    continue
                z = interarrival_pmf(i, cfg, tm)
                size = len(z.masses) + N + M
                printed_z = np.zeros(size)
                p_last = (1.0 - (1.0 - tm.alpha) * (1.0 - tm.eps2)) ** (M - i)
                geom_norm = 1.0 - (1.0 - pi_slot) ** (M - i)
                if geom_norm > 0.0:
                    for zz in range(1, M - i):
                        printed_z[zz - 1] = (
                            (1.0 - pi_slot) ** (zz - 1) * pi_slot / geom_norm
                        ) * (1.0 - p_last)
                for e in range(1000):
                    w = sum_f**e * (1.0 - sum_f) * p_last
                    if w < 1e-15:
                        break
                    for f in range(1, M + 1):
                        zz = e * N + (M - i) + f
                        if 1 <= zz <= size:
                            printed_z[zz - 1] += w * first_ev[f - 1]
                exact_z = np.zeros(size)
                exact_z[: len(z.masses)] = z.masses
                dev = max(dev, 0.5 * float(np.abs(exact_z - printed_z).sum()))
            report["interarrival_pmf"] = dev
    return report
