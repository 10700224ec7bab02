"""Core types and numeric primitives shared by the analytic and simulation code.

The package models a slotted uplink shared by two users:

* a *broadband* user that always has data and protects each frame of K source
  packets with a rate-K/N erasure code (any K of the N coded slots decode the
  frame), and
* an *intermittent* user that generates small packets as a Bernoulli process,
  keeps at most Q of them (newest kept, oldest dropped), and sends each packet
  once at its next transmission opportunity.

Three access schemes are supported: OMA (the intermittent user owns every
T_int-th slot exclusively), NOMA (all N slots of a frame are shared), and
PNOMA (only the last M slots of each frame are shared).

Probability mass functions over a discrete quantity (latency, peak age) are
represented by :class:`DiscretePmf`, which carries an explicit *defect*: the
probability that the quantity is infinite (e.g. a packet that is never
delivered).  Percentiles are computed on the completed distribution, so a
defect above 1-q makes the q-percentile unattainable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Scheme",
    "AccessConfig",
    "TrafficModel",
    "DiscretePmf",
    "QueueDistribution",
    "binomial_pmf",
    "multinomial_pmf",
    "pmf_percentile",
]

# Above this n the binomial/multinomial coefficients switch from exact integer
# arithmetic to log-gamma evaluation.
_EXACT_MAX_N = 64

# Tolerances used by the validating containers.
_MASS_TOL = 1e-9
_QDIST_TOL = 1e-10
_NEG_CLIP = -1e-12


class Scheme(enum.Enum):
    """Access scheme for the intermittent user."""

    OMA = "oma"
    NOMA = "noma"
    PNOMA = "pnoma"


@dataclass(frozen=True)
class AccessConfig:
    """A complete medium-access configuration.

    Parameters
    ----------
    scheme : Scheme
        Access scheme.
    K : int
        Number of source packets per broadband frame (1 <= K <= N).
    N : int
        Number of coded slots per broadband frame.
    T_int : int or None
        OMA only: period of the slots reserved for the intermittent user.
        Must be >= 2 so the broadband user keeps at least one slot per period.
    M : int or None
        PNOMA only: number of shared slots at the end of each frame
        (1 <= M <= N).  For NOMA it is forced to N; for OMA it must be unset.
    Q : int
        Intermittent queue capacity (>= 1).
    """

    scheme: Scheme
    K: int
    N: int
    T_int: int | None = None
    M: int | None = None
    Q: int = 1

    def __post_init__(self):
        if not isinstance(self.scheme, Scheme):
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (1 <= self.K <= self.N):
            raise ValueError(f"K must satisfy 1 <= K <= N, got K={self.K}, N={self.N}")
        if self.Q < 1:
            raise ValueError(f"Q must be >= 1, got {self.Q}")
        if self.scheme is Scheme.OMA:
            if self.T_int is None or self.T_int < 2:
                raise ValueError("OMA requires T_int >= 2")
            if self.M is not None:
                raise ValueError("M is not meaningful for OMA")
        else:
            if self.T_int is not None:
                raise ValueError("T_int is only meaningful for OMA")
            if self.scheme is Scheme.NOMA:
                if self.M is None:
                    object.__setattr__(self, "M", self.N)
                elif self.M != self.N:
                    raise ValueError("NOMA shares every slot, so M must equal N")
            else:  # PNOMA
                if self.M is None or not (1 <= self.M <= self.N):
                    raise ValueError("PNOMA requires 1 <= M <= N")


@dataclass(frozen=True)
class TrafficModel:
    """Arrival rate and erasure probabilities.

    alpha is the per-slot packet generation probability of the intermittent
    user; eps1/eps2 are the erasure probabilities of the broadband and
    intermittent links.  eps < 1 is required because an always-erased link
    makes every derived distribution degenerate.
    """

    alpha: float
    eps1: float
    eps2: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        for name in ("eps1", "eps2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")


def _as_readonly(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DiscretePmf:
    """PMF over consecutive integers ``offset, offset+1, ...`` plus a defect.

    ``masses[i]`` is the probability of the value ``offset + i``; ``defect``
    is the probability that the quantity never materialises (treated as mass
    at +infinity by :func:`pmf_percentile`).  Entries in [-1e-12, 0) are
    clipped to zero; more negative entries are rejected.  The total mass
    (sum + defect) must be 1 within 1e-9 -- small truncation residue from a
    tail cut-off is tolerated inside that budget.
    """

    offset: int
    masses: np.ndarray
    defect: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=np.float64).copy()
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a non-empty 1-D array")
        if np.any(m < _NEG_CLIP):
            raise ValueError(f"negative mass below {_NEG_CLIP} in PMF")
        np.clip(m, 0.0, None, out=m)
        if not -1e-12 <= self.defect <= 1.0 + 1e-12:
            raise ValueError(f"defect must be a probability, got {self.defect}")
        object.__setattr__(self, "defect", float(min(max(self.defect, 0.0), 1.0)))
        total = float(m.sum()) + self.defect
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"PMF mass + defect = {total!r}, expected 1 within {_MASS_TOL}")
        m.flags.writeable = False
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def support_max(self) -> int:
        return self.offset + len(self.masses) - 1

    def mean(self) -> float:
        """Mean of the finite part (conditional means need /(1-defect))."""
        t = np.arange(self.offset, self.offset + len(self.masses), dtype=np.float64)
        return float(np.dot(t, self.masses))

    def prob(self, value: int) -> float:
        i = value - self.offset
        if 0 <= i < len(self.masses):
            return float(self.masses[i])
        return 0.0


@dataclass(frozen=True)
class QueueDistribution:
    """Distribution over queue occupancies 0..Q (length Q+1, sums to one)."""

    probs: np.ndarray = field()

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64).copy()
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probs must be a 1-D array of length Q+1 >= 1")
        if np.any(p < _NEG_CLIP):
            raise ValueError("negative probability in queue distribution")
        np.clip(p, 0.0, None, out=p)
        if abs(float(p.sum()) - 1.0) > _QDIST_TOL:
            raise ValueError(f"queue distribution sums to {p.sum()!r}, expected 1 within {_QDIST_TOL}")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def capacity(self) -> int:
        return len(self.probs) - 1


# ---------------------------------------------------------------------------
# combinatorics
# ---------------------------------------------------------------------------


def binomial_pmf(k: int, n: int, p: float) -> float:
    """P[Bin(n, p) = k]; zero outside 0 <= k <= n.

    Uses exact integer binomial coefficients for n <= 64 and a log-gamma
    evaluation above, so tails stay accurate for large n.  The edge cases
    p = 0 and p = 1 are handled exactly for every n.
    """

    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if k < 0 or k > n:
        return 0.0
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == n else 0.0
    if n <= _EXACT_MAX_N:
        return math.comb(n, k) * p**k * (1.0 - p) ** (n - k)
    log_pmf = (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )
    return math.exp(log_pmf)


def binomial_tail(k: int, n: int, p: float) -> float:
    """P[Bin(n, p) >= k].  Complement-summed when k is past the mean."""

    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    if k > p * n:
        return math.fsum(binomial_pmf(j, n, p) for j in range(k, n + 1))
    return 1.0 - math.fsum(binomial_pmf(j, n, p) for j in range(0, k))


def binomial_pmf_vector(n: int, p: float) -> np.ndarray:
    """The full Bin(n, p) PMF as an array of length n + 1."""

    return np.array([binomial_pmf(k, n, p) for k in range(n + 1)])


def multinomial_pmf(counts, n: int, ps) -> float:
    """Multinomial probability with an implicit residual category.

    ``counts[i]`` slots land in category i (with probability ``ps[i]``); the
    remaining ``n - sum(counts)`` slots form a residual category with
    probability ``1 - sum(ps)``.  A negative residual count gives 0; a
    probability vector summing above 1 (beyond 1e-12) is rejected.
    """

    counts = [int(c) for c in counts]
    ps = [float(p) for p in ps]
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if len(counts) != len(ps):
        raise ValueError("counts and ps must have the same length")
    if any(p < 0.0 for p in ps):
        raise ValueError("probabilities must be non-negative")
    total_p = math.fsum(ps)
    if total_p > 1.0 + 1e-12:
        raise ValueError(f"probabilities sum to {total_p} > 1")
    if any(c < 0 for c in counts):
        return 0.0
    rest = n - sum(counts)
    if rest < 0:
        return 0.0
    p_rest = max(0.0, 1.0 - total_p)
    all_counts = counts + [rest]
    all_ps = ps + [p_rest]
    for c, p in zip(all_counts, all_ps):
        if c > 0 and p == 0.0:
            return 0.0
    if n <= _EXACT_MAX_N:
        coeff = math.factorial(n)
        for c in all_counts:
            coeff //= math.factorial(c)
        out = float(coeff)
        for c, p in zip(all_counts, all_ps):
            out *= p**c
        return out
    log_pmf = math.lgamma(n + 1)
    for c, p in zip(all_counts, all_ps):
        log_pmf -= math.lgamma(c + 1)
        if c > 0:
            log_pmf += c * math.log(p)
    return math.exp(log_pmf)


def pmf_percentile(pmf: DiscretePmf, q: float) -> int | None:
    """Smallest n with P[X <= n] > q, or None when the defect makes q unreachable.

    The comparison is strict, so a point mass at x gives percentile x for
    every q < 1.  When the finite mass never exceeds q (because mass q' >= 1-q
    sits at infinity), the percentile is unattainable and None is returned.
    """

    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must be in [0, 1), got {q}")
    # A CDF step equal to q within 1e-12 counts as "not exceeding", so the
    # strict definition is stable against the rounding direction of cumsum.
    thresh = q + 1e-12
    cdf = np.cumsum(pmf.masses)
    total = cdf[-1] if len(cdf) else 0.0
    if total <= thresh:
        return None
    idx = int(np.searchsorted(cdf, thresh, side="right"))
    return pmf.offset + idx
