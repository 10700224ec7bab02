"""Markov models of the intermittent user's queue.

The queue holds at most Q packets.  Within a slot the order of operations is
fixed throughout the package: a possible arrival is folded in first (when the
queue is full the *oldest* packet is discarded to make room), then -- if the
slot offers a transmission opportunity -- the head of the queue is sent and
leaves.  A packet can therefore be sent in its own arrival slot.

Two samplings of the occupancy process are used:

* :func:`oma_post_tx_matrix` steps from one OMA transmission slot to the
  next, sampling occupancy *after the arrival phase but before the
  departure* of that slot.  Its stationary vector followed by one
  :func:`departure_step` gives the occupancy right after a transmission
  opportunity completes, which is what :func:`slot_distribution` propagates
  forward through the T_int - 1 exclusive broadband slots.
* :func:`pnoma_phase_matrices` gives per-slot transition matrices for the
  reserved phase (arrivals only) and the mixed phase (arrival, then the head
  departs) of a PNOMA frame; :func:`compose_frame_matrix` chains them into a
  frame-to-frame transition whose stationary vector is the occupancy at
  frame boundaries.
"""

from __future__ import annotations

import numpy as np

from .core import AccessConfig, QueueDistribution, Scheme, binomial_pmf, binomial_tail

__all__ = [
    "oma_post_tx_matrix",
    "pnoma_phase_matrices",
    "compose_frame_matrix",
    "steady_state",
    "slot_distribution",
    "departure_step",
]

_ROW_TOL = 1e-10


def _check_stochastic(P: np.ndarray, name: str) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {P.shape}")
    if np.any(P < -1e-12):
        raise ValueError(f"{name} has negative entries")
    rows = P.sum(axis=1)
    if np.any(np.abs(rows - 1.0) > _ROW_TOL):
        raise ValueError(f"{name} rows must sum to 1 within {_ROW_TOL}")
    return P


def oma_post_tx_matrix(T_int: int, alpha: float, Q: int) -> np.ndarray:
    """Occupancy transition between consecutive OMA transmission slots.

    State i is the occupancy at a transmission slot once that slot's arrival
    has been folded in (the departure has not happened yet).  One step is:
    the head departs (i -> max(i - 1, 0)), then T_int slots of Bernoulli(alpha)
    arrivals accumulate with discard-oldest saturation at Q, which caps the
    count but never lowers it.  Hence

        P[i, j] = Bin(j - max(i-1, 0); T_int, alpha)   for max(i-1, 0) <= j < Q
        P[i, Q] = P[Bin(T_int, alpha) >= Q - max(i-1, 0)]

    and P[i, j] = 0 below max(i-1, 0).  With alpha = 0 this collapses to a
    deterministic step down: P[i -> max(i-1, 0)] = 1.
    """

    if T_int < 1:
        raise ValueError(f"T_int must be >= 1, got {T_int}")
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    P = np.zeros((Q + 1, Q + 1))
    for i in range(Q + 1):
        base = max(i - 1, 0)
        for j in range(base, Q):
            P[i, j] = binomial_pmf(j - base, T_int, alpha)
        P[i, Q] = binomial_tail(Q - base, T_int, alpha)
    return P


def pnoma_phase_matrices(alpha: float, Q: int) -> tuple[np.ndarray, np.ndarray]:
    """Single-slot occupancy transitions for the two phases of a PNOMA frame.

    Reserved slot (no transmission opportunity): the occupancy rises by one
    with probability alpha and saturates at Q, where a new arrival merely
    replaces the oldest packet.  Mixed slot: the arrival is folded in first,
    then the head departs, so an empty queue stays empty (an arriving packet
    is sent within the same slot) and a full queue always drops to Q - 1.
    Returns ``(reserved, mixed)``, each of shape (Q+1, Q+1).
    """

    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    res = np.zeros((Q + 1, Q + 1))
    mix = np.zeros((Q + 1, Q + 1))
    for i in range(Q + 1):
        if i < Q:
            res[i, i] += 1.0 - alpha
            res[i, i + 1] += alpha
        else:
            res[i, i] = 1.0
        after = [min(i + 1, Q), i]  # occupancy after arrival: (with, without)
        for occ, p in zip(after, (alpha, 1.0 - alpha)):
            mix[i, max(occ - 1, 0)] += p
    return res, mix


def compose_frame_matrix(res: np.ndarray, mix: np.ndarray, N: int, M: int) -> np.ndarray:
    """Frame-boundary occupancy transition: (N - M) reserved slots, M mixed."""

    res = _check_stochastic(res, "reserved matrix")
    mix = _check_stochastic(mix, "mixed matrix")
    if res.shape != mix.shape:
        raise ValueError(f"matrix shapes differ: {res.shape} vs {mix.shape}")
    if not 1 <= M <= N:
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    return np.linalg.matrix_power(res, N - M) @ np.linalg.matrix_power(mix, M)


def steady_state(P: np.ndarray) -> QueueDistribution:
    """Stationary distribution of an ergodic chain by direct linear solve.

    Solves pi (P - I) = 0 with the normalisation sum(pi) = 1 replacing one
    equation.  A chain with more than one recurrent class leaves the system
    singular (or yields a vector that fails the fixed-point check) and raises
    ``ValueError("non-ergodic chain")``.
    """

    P = _check_stochastic(P, "transition matrix")
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise ValueError("non-ergodic chain") from None
    if np.any(pi < -1e-9) or np.max(np.abs(pi @ P - pi)) > 1e-10:
        raise ValueError("non-ergodic chain")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return QueueDistribution(pi)


def departure_step(dist) -> QueueDistribution:
    """Push a distribution through one head-of-line departure: i -> max(i-1, 0)."""

    probs = dist.probs if isinstance(dist, QueueDistribution) else np.asarray(dist, float)
    out = np.zeros_like(probs)
    out[0] = probs[0] + probs[1] if len(probs) > 1 else probs[0]
    out[1:-1] = probs[2:]
    return QueueDistribution(out)


def slot_distribution(cfg: AccessConfig, pi0, n: int, alpha: float) -> QueueDistribution:
    """Occupancy distribution n slots into a service period.

    For OMA, ``pi0`` is the occupancy right after a transmission opportunity
    completes and the next n slots (0 <= n <= T_int) carry arrivals only, so
    the result is a capped binomial convolution.  At n = T_int the arrival
    phase of the next transmission slot is included: applying
    :func:`departure_step` to the result reproduces the post-departure
    distribution, closing the cycle.

    For PNOMA/NOMA, ``pi0`` is the occupancy at a frame boundary and the
    first min(n, N - M) slots are reserved, the rest mixed (0 <= n <= N).
    """

    probs = pi0.probs if isinstance(pi0, QueueDistribution) else np.asarray(pi0, float)
    Q = len(probs) - 1
    if cfg.scheme is Scheme.OMA:
        period = cfg.T_int
    else:
        period = cfg.N
    if not 0 <= n <= period:
        raise ValueError(f"n must be in [0, {period}], got {n}")
    if n == 0:
        return QueueDistribution(probs)
    if cfg.scheme is Scheme.OMA:
        out = np.zeros(Q + 1)
        for s in range(Q + 1):
            if probs[s] == 0.0:
                continue
            for j in range(s, Q):
                out[j] += probs[s] * binomial_pmf(j - s, n, alpha)
            out[Q] += probs[s] * binomial_tail(Q - s, n, alpha)
        return QueueDistribution(out)
    res, mix = pnoma_phase_matrices(alpha, Q)
    n_res = min(n, cfg.N - cfg.M)
    n_mix = n - n_res
    vec = probs @ np.linalg.matrix_power(res, n_res)
    if n_mix:
        vec = vec @ np.linalg.matrix_power(mix, n_mix)
    return QueueDistribution(vec)
