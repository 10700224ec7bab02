"""slicekit: throughput/latency/age analysis of a sliced two-user uplink.

The public API is re-exported from the submodules:

* :mod:`slicekit.core` -- shared types and numeric primitives
* :mod:`slicekit.queues` -- Markov models of the intermittent queue
* :mod:`slicekit.oma` -- closed-form KPIs for orthogonal slicing
* :mod:`slicekit.pnoma` -- KPIs for (partial) non-orthogonal slicing
* :mod:`slicekit.simulate` -- slot-level event simulator
* :mod:`slicekit.sweep` -- design-space enumeration and Pareto optimisation
* :mod:`slicekit.cli` -- command-line front end
"""

from .core import (
    AccessConfig,
    DiscretePmf,
    QueueDistribution,
    Scheme,
    TrafficModel,
    binomial_pmf,
    multinomial_pmf,
    pmf_percentile,
)
from .oma import lr_kpis_oma, paoi_kpis_oma
from .pnoma import (
    independence_approximation_report,
    lr_kpis_pnoma,
    paoi_packet_success,
    paoi_pmf_pnoma,
)
from .simulate import (
    CaptureChannel,
    ChannelMode,
    EmpiricalKpis,
    SimRun,
    empirical_kpis_summary,
    run_simulation,
)
from .sweep import (
    Kpi,
    KpiReport,
    ParetoPoint,
    SweepBounds,
    enumerate_configs,
    evaluate_config,
    geo_geo1_paoi_baseline,
    optimize_config,
    pareto_frontier,
)

__version__ = "0.1.0"

__all__ = [
    "AccessConfig",
    "DiscretePmf",
    "QueueDistribution",
    "Scheme",
    "TrafficModel",
    "binomial_pmf",
    "multinomial_pmf",
    "pmf_percentile",
    "lr_kpis_oma",
    "paoi_kpis_oma",
    "lr_kpis_pnoma",
    "paoi_pmf_pnoma",
    "paoi_packet_success",
    "independence_approximation_report",
    "CaptureChannel",
    "ChannelMode",
    "EmpiricalKpis",
    "SimRun",
    "empirical_kpis_summary",
    "run_simulation",
    "Kpi",
    "KpiReport",
    "ParetoPoint",
    "SweepBounds",
    "enumerate_configs",
    "evaluate_config",
    "geo_geo1_paoi_baseline",
    "optimize_config",
    "pareto_frontier",
    "__version__",
]
