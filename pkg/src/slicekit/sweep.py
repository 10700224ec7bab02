"""Configuration sweeps and the throughput-constrained timeliness optimizer.

Enumerates scheme configurations over a bounded grid, evaluates their
analytic KPIs, reduces (throughput, timeliness) clouds to Pareto frontiers,
and solves "minimize the timeliness percentile subject to a broadband
throughput floor".  Also provides the dedicated-channel Geo/Geo/1 baseline
that a slicing scheme has to beat.

Sweeps use analytics only: the simulator is reserved for validation and for
capture-channel studies, while a sweep over thousands of configurations must
be fast and exact.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AccessConfig,
    Scheme,
    TrafficModel,
    binomial_tail,
    DiscretePmf,
    pmf_percentile,
)
from .oma import (
    broadband_success_oma,
    broadband_throughput_oma,
    lr_kpis_oma,
    paoi_kpis_oma,
)
from .pnoma import (
    broadband_success_paoi,
    lr_kpis_pnoma,
    paoi_packet_success,
    paoi_pmf_pnoma,
)

_S1_QUANTUM = 1e-12  # throughputs closer than this are considered tied


class Kpi(enum.Enum):
    """Timeliness objective: 90th percentile of latency or of peak age."""

    LR90 = "lr90"
    PAOI90 = "paoi90"


@dataclass(frozen=True)
class SweepBounds:
    """Grid limits for :func:`enumerate_configs`.

    Defaults follow the evaluation grid: coding parameters K in 2..64 with
    N capped at ``n_max`` (``None`` means 2K per source-block size), sharing
    period in 2..64, and a single queue capacity.  ``q_values`` lists the
    queue capacities to sweep.
    """

    k_min: int = 2
    k_max: int = 64
    t_min: int = 2
    t_max: int = 64
    q_values: tuple = (1,)
    n_max: int | None = None

    def __post_init__(self):
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValueError("empty source-block range")
        if self.t_min < 2 or self.t_max < self.t_min:
            raise ValueError("empty sharing-period range")
        if len(self.q_values) == 0 or any(q < 1 for q in self.q_values):
            raise ValueError("empty queue-capacity set")
        if self.n_max is not None and self.n_max < self.k_min:
            raise ValueError("empty frame-length range")


@dataclass(frozen=True)
class KpiReport:
    """Analytic KPIs of one configuration.

    ``tau2`` is the q-quantile of the chosen timeliness metric in slots, or
    ``None`` when the delivered mass never exceeds q (the target is
    unattainable at this configuration).
    """

    s1: float
    p_s1: float
    p_s2: float
    tau2: int | None
    kpi: Kpi
    q: float


@dataclass(frozen=True)
class ParetoPoint:
    """A (throughput, timeliness) point attached to its configuration."""

    config: AccessConfig
    s1: float
    tau2: int

    def __post_init__(self):
        if self.tau2 is None or not math.isfinite(self.tau2):
            raise ValueError("frontier points need a finite timeliness")
        if not math.isfinite(self.s1):
            raise ValueError("frontier points need a finite throughput")


def enumerate_configs(scheme, bounds: SweepBounds | None = None):
    """Lazily yield every valid configuration of ``scheme`` in ``bounds``.

    The redundancy cap keeps the grid finite: N runs from K to 2K (or to the
    explicit ``n_max``).  For partial sharing the shared tail is limited to
    the redundancy budget, M <= N - K, so a frame can survive even when every
    shared slot collides; the full-sharing corner M = N is enumerated as its
    own scheme.
    """
    scheme = scheme if isinstance(scheme, Scheme) else Scheme(scheme)
    b = bounds if bounds is not None else SweepBounds()
    for K in range(b.k_min, b.k_max + 1):
        n_hi = 2 * K if b.n_max is None else b.n_max
        for N in range(K, n_hi + 1):
            if scheme is Scheme.OMA:
                for T in range(b.t_min, b.t_max + 1):
                    for Q in b.q_values:
                        yield AccessConfig(scheme=scheme, K=K, N=N, T_int=T, Q=Q)
            elif scheme is Scheme.NOMA:
                for Q in b.q_values:
                    yield AccessConfig(scheme=scheme, K=K, N=N, Q=Q)
            else:
                for M in range(1, N - K + 1):
                    for Q in b.q_values:
                        yield AccessConfig(scheme=scheme, K=K, N=N, M=M, Q=Q)


def evaluate_config(
    cfg: AccessConfig, tm: TrafficModel, kpi: Kpi, q: float = 0.9
) -> KpiReport:
    """Analytic KPI report for one configuration.

    For the LR objective the latency law is exact for any queue capacity;
    the peak-age objective requires a single-packet queue.
    """
    if not isinstance(kpi, Kpi):
        raise ValueError("kpi must be a Kpi")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if kpi is Kpi.LR90:
        if cfg.scheme is Scheme.OMA:
            latency, p_s2 = lr_kpis_oma(cfg, tm)
            p_s1 = broadband_success_oma(cfg.K, cfg.N, tm.eps1)
            s1 = broadband_throughput_oma(cfg.K, cfg.N, cfg.T_int, tm.eps1)
        else:
            latency, p_s2, p_s1, s1 = lr_kpis_pnoma(cfg, tm)
        tau = pmf_percentile(latency, q)
    else:
        if cfg.scheme is Scheme.OMA:
            _, _, paoi = paoi_kpis_oma(cfg, tm)
            _, p_s2 = lr_kpis_oma(cfg, tm)
            p_s1 = broadband_success_oma(cfg.K, cfg.N, tm.eps1)
            s1 = broadband_throughput_oma(cfg.K, cfg.N, cfg.T_int, tm.eps1)
        else:
            p_s2 = paoi_packet_success(cfg, tm)
            p_s1, s1 = broadband_success_paoi(cfg.N, cfg, tm)
            if p_s2 <= 0.0:
                # no delivery path exists (e.g. zero redundancy, where any
                # collision kills the frame and the packet with it)
                return KpiReport(s1=s1, p_s1=p_s1, p_s2=0.0, tau2=None, kpi=kpi, q=q)
            paoi = paoi_pmf_pnoma(cfg, tm)
        tau = pmf_percentile(paoi, q)
    return KpiReport(s1=s1, p_s1=p_s1, p_s2=p_s2, tau2=tau, kpi=kpi, q=q)


def _quantize(s1: float) -> int:
    return int(round(s1 / _S1_QUANTUM))


def pareto_frontier(points) -> list[ParetoPoint]:
    """Non-dominated subset of ``points``, sorted by throughput ascending.

    A point is dominated when another point is strictly better in both
    coordinates (higher throughput and lower timeliness); throughput
    comparisons treat values within 1e-12 as tied.
    """
    pts = list(points)
    for p in pts:
        if not isinstance(p, ParetoPoint):
            raise ValueError("points must be ParetoPoint instances")
    groups: dict[int, list[ParetoPoint]] = {}
    for p in pts:
        groups.setdefault(_quantize(p.s1), []).append(p)
    survivors = []
    best_tau = math.inf  # lowest timeliness among strictly higher throughputs
    for s1q in sorted(groups, reverse=True):
        group = groups[s1q]
        survivors.extend(p for p in group if p.tau2 <= best_tau)
        best_tau = min(best_tau, min(p.tau2 for p in group))
    survivors.sort(key=lambda p: (_quantize(p.s1), p.tau2))
    return survivors


def _tie_key(cfg: AccessConfig, s1: float, tau: int):
    """Optimizer ordering: lowest timeliness, then highest throughput, then
    smaller N, smaller K; remaining ties resolved by queue size and the
    scheme's free knob so the choice is deterministic."""
    knob = cfg.T_int if cfg.scheme is Scheme.OMA else cfg.M
    return (tau, -_quantize(s1), cfg.N, cfg.K, cfg.Q, knob)


def optimize_config(
    scheme,
    tm: TrafficModel,
    s_min: float,
    kpi: Kpi,
    bounds: SweepBounds | None = None,
    q: float = 0.9,
) -> tuple[AccessConfig, KpiReport]:
    """Best configuration: minimal timeliness percentile with s1 >= s_min.

    Equivalent to brute force over :func:`enumerate_configs` (configurations
    are skipped only via the exact collision-free throughput upper bound
    K/N * P[Binomial(N, 1-eps1) >= K], which no amount of sharing can beat).
    Raises ``ValueError("no feasible config")`` when the floor is
    unattainable on the grid.
    """
    scheme = scheme if isinstance(scheme, Scheme) else Scheme(scheme)
    if not 0.0 <= s_min < 1.0:
        raise ValueError("s_min must lie in [0, 1)")
    if not isinstance(kpi, Kpi):
        raise ValueError("kpi must be a Kpi")
    if bounds is None:
        bounds = SweepBounds(q_values=(1, 4) if kpi is Kpi.LR90 else (1,))
    if kpi is Kpi.PAOI90:
        qv = tuple(v for v in bounds.q_values if v == 1)
        if not qv:
            raise ValueError("the peak-age objective requires queue capacity 1")
        bounds = SweepBounds(
            k_min=bounds.k_min,
            k_max=bounds.k_max,
            t_min=bounds.t_min,
            t_max=bounds.t_max,
            q_values=qv,
            n_max=bounds.n_max,
        )

    tol = _S1_QUANTUM
    best_key = None
    best: tuple[AccessConfig, KpiReport] | None = None
    shared_cache: dict[tuple, float] = {}
    oma_cache: dict[tuple, KpiReport] = {}
    for cfg in enumerate_configs(scheme, bounds):
        ceiling = cfg.K / cfg.N * binomial_tail(cfg.K, cfg.N, 1.0 - tm.eps1)
        if cfg.scheme is Scheme.OMA:
            ceiling *= (cfg.T_int - 1) / cfg.T_int
        if ceiling < s_min - tol:
            continue
        if cfg.scheme is Scheme.OMA:
            # the intermittent KPIs depend only on the sharing period and
            # queue size, so evaluate each (T, Q) once
            key = (cfg.T_int, cfg.Q)
            if key not in oma_cache:
                oma_cache[key] = evaluate_config(cfg, tm, kpi, q)
            cached = oma_cache[key]
            s1 = broadband_throughput_oma(cfg.K, cfg.N, cfg.T_int, tm.eps1)
            report = KpiReport(
                s1=s1,
                p_s1=broadband_success_oma(cfg.K, cfg.N, tm.eps1),
                p_s2=cached.p_s2,
                tau2=cached.tau2,
                kpi=kpi,
                q=q,
            )
        else:
            report = evaluate_config(cfg, tm, kpi, q)
        if report.s1 < s_min - tol or report.tau2 is None:
            continue
        key = _tie_key(cfg, report.s1, report.tau2)
        if best_key is None or key < best_key:
            best_key = key
            best = (cfg, report)
    if best is None:
        raise ValueError("no feasible config")
    return best


def geo_geo1_paoi_baseline(
    alpha: float,
    eps2: float,
    q: float,
    slots: int = 10_000_000,
    seed: int = 20240613,
) -> int:
    """q-percentile of peak age for a dedicated-channel FCFS queue.

    The baseline user sends every queued packet until received: Bernoulli
    arrivals, geometric service with success 1-eps2, infinite FCFS queue.
    No closed form is used; the queue is replayed for ``slots`` slots with a
    fixed seed (delivery recursion D_i = max(A_i, D_{i-1}) + S_i, peak age
    D_i - A_{i-1}).
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if not 0.0 <= eps2 < 1.0:
        raise ValueError("service never succeeds at eps2 >= 1")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha >= 1.0 - eps2:
        raise ValueError("unstable: need alpha < 1 - eps2")
    rng = np.random.default_rng(seed)
    arrivals = np.flatnonzero(rng.random(slots) < alpha).astype(np.int64)
    if len(arrivals) < 3:
        raise ValueError("too few arrivals to estimate a percentile")
    service = rng.geometric(1.0 - eps2, size=len(arrivals)).astype(np.int64)
    finish = np.cumsum(service)
    # D_i = cumS_i + max_{j<=i} (A_j - cumS_{j-1}), vectorized recursion
    slack = arrivals - np.concatenate(([0], finish[:-1]))
    departures = finish + np.maximum.accumulate(slack)
    peaks = departures[1:] - arrivals[:-1]
    w = max(10, len(peaks) // 100)
    if len(peaks) > 3 * w:
        peaks = peaks[w:-w]
    counts = np.bincount(peaks)
    pmf = DiscretePmf(offset=0, masses=counts / counts.sum())
    tau = pmf_percentile(pmf, q)
    assert tau is not None  # no defect: every sample is finite
    return tau
