"""Command-line front door.

Four subcommands — ``analyze``, ``simulate``, ``sweep``, ``optimize`` — read
a flat ``key = value`` config file plus command-line overrides, run the
analytic or Monte Carlo machinery, and write plot-ready CSV files.  All
floats are printed with 12 significant digits and rows are emitted in a
canonical order, so outputs are byte-identical across repeated runs.

Exit codes: 0 success, 2 config error (unknown key, type mismatch, or a
constraint violation, with the offending key named), 3 infeasible
optimization, 4 I/O error.
"""

import argparse
import os
import sys
from dataclasses import dataclass

from .core import AccessConfig, DiscretePmf, Scheme, TrafficModel, pmf_percentile
from .simulate import CaptureChannel, ChannelMode, SimRun, run_simulation
from .sweep import (
    Kpi,
    SweepBounds,
    enumerate_configs,
    evaluate_config,
    optimize_config,
    pareto_frontier,
    ParetoPoint,
)


class ConfigError(Exception):
    """Bad configuration content; maps to exit code 2."""


@dataclass(frozen=True)
class RunSpec:
    """One CLI invocation: command, input config, output directory,
    key=value overrides (applied over the file, last one wins)."""

    command: str
    config: str | None
    output: str
    overrides: tuple

    def __post_init__(self):
        if self.command not in ("analyze", "simulate", "sweep", "optimize"):
            raise ConfigError(f"unknown command {self.command!r}")


_INT_KEYS = {
    "K",
    "N",
    "T_int",
    "M",
    "Q",
    "sim.slots",
    "sim.seed",
    "sweep.k_min",
    "sweep.k_max",
    "sweep.t_min",
    "sweep.t_max",
    "sweep.n_max",
}
_FLOAT_KEYS = {"alpha", "eps1", "eps2", "channel.gamma_db", "smin"}
_STR_KEYS = {"scheme", "channel.mode", "kpi"}
_LIST_KEYS = {"sweep.q_values"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _LIST_KEYS


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key not in _ALL_KEYS:
        raise ConfigError(f"unknown key {key!r}")
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _LIST_KEYS:
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"type mismatch for key {key!r}: {raw!r}") from None
    return raw


def _read_config_file(path: str) -> dict:
    settings = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = line.split("=", 1)
            key = key.strip()
            settings[key] = _parse_value(key, raw)
    return settings


def _merge_settings(spec: RunSpec) -> dict:
    settings = _read_config_file(spec.config) if spec.config else {}
    for pair in spec.overrides:
        if "=" not in pair:
            raise ConfigError(f"override must be key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        settings[key] = _parse_value(key, raw)
    return settings


def _wrap_constraint(exc: ValueError) -> ConfigError:
    return ConfigError(str(exc))


def _build_config(settings: dict) -> AccessConfig:
    for key in ("scheme", "K", "N"):
        if key not in settings:
            raise ConfigError(f"missing key {key!r}")
    try:
        return AccessConfig(
            scheme=settings["scheme"],
            K=settings["K"],
            N=settings["N"],
            T_int=settings.get("T_int"),
            M=settings.get("M"),
            Q=settings.get("Q", 1),
        )
    except ValueError as exc:
        raise _wrap_constraint(exc) from None


def _build_traffic(settings: dict) -> TrafficModel:
    for key in ("alpha", "eps1", "eps2"):
        if key not in settings:
            raise ConfigError(f"missing key {key!r}")
    try:
        return TrafficModel(
            alpha=settings["alpha"], eps1=settings["eps1"], eps2=settings["eps2"]
        )
    except ValueError as exc:
        raise _wrap_constraint(exc) from None


def _build_channel(settings: dict, tm: TrafficModel) -> CaptureChannel:
    mode = settings.get("channel.mode", "collision")
    if mode == "collision":
        return CaptureChannel.collision()
    if mode != "capture":
        raise ConfigError(f"channel.mode must be collision or capture, got {mode!r}")
    if "channel.gamma_db" not in settings:
        raise ConfigError("missing key 'channel.gamma_db' (required in capture mode)")
    gamma = 10.0 ** (settings["channel.gamma_db"] / 10.0)
    try:
        return CaptureChannel.capture_from_erasures(gamma, tm.eps1, tm.eps2)
    except ValueError as exc:
        raise ConfigError(f"channel.gamma_db/eps: {exc}") from None


def _build_run(settings: dict) -> SimRun:
    try:
        return SimRun(
            slots=settings.get("sim.slots", 1_000_000),
            seed=settings.get("sim.seed", 12345),
        )
    except ValueError as exc:
        raise ConfigError(f"sim.slots/sim.seed: {exc}") from None


def _build_bounds(settings: dict, kpi: Kpi) -> SweepBounds:
    kw = {}
    for field, key in (
        ("k_min", "sweep.k_min"),
        ("k_max", "sweep.k_max"),
        ("t_min", "sweep.t_min"),
        ("t_max", "sweep.t_max"),
        ("q_values", "sweep.q_values"),
        ("n_max", "sweep.n_max"),
    ):
        if key in settings:
            kw[field] = settings[key]
    if "q_values" not in kw:
        kw["q_values"] = (1, 4) if kpi is Kpi.LR90 else (1,)
    try:
        return SweepBounds(**kw)
    except ValueError as exc:
        raise ConfigError(f"sweep bounds: {exc}") from None


def _build_kpi(settings: dict) -> Kpi:
    raw = settings.get("kpi", "lr90")
    try:
        return Kpi(raw)
    except ValueError:
        raise ConfigError(f"kpi must be lr90 or paoi90, got {raw!r}") from None


def parse_runspec(argv) -> RunSpec:
    """Parse command-line arguments into a validated RunSpec.

    The config file is read here so that unknown keys, type mismatches, and
    constraint violations surface at parse time with exit code 2.
    """
    parser = argparse.ArgumentParser(
        prog="slicekit",
        description="Uplink slicing KPIs: analytic laws, simulation, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config value (repeatable)",
        )

    p_analyze = sub.add_parser("analyze", help="exact KPI laws of one config")
    add_common(p_analyze)

    p_sim = sub.add_parser("simulate", help="Monte Carlo run of one config")
    add_common(p_sim)
    p_sim.add_argument("--slots", type=int, help="simulated slots")
    p_sim.add_argument("--seed", type=int, help="RNG seed")

    for name, help_text in (
        ("sweep", "evaluate a config grid and mark the Pareto frontier"),
        ("optimize", "best config under a broadband throughput floor"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        p.add_argument("--scheme", choices=["oma", "noma", "pnoma"])
        p.add_argument("--kpi", choices=["lr90", "paoi90"])
        p.add_argument("--alpha", type=float)
        p.add_argument("--eps1", type=float)
        p.add_argument("--eps2", type=float)
        if name == "optimize":
            p.add_argument("--smin", type=float, help="broadband throughput floor")

    ns = parser.parse_args(argv)
    overrides = list(ns.set)
    for flag, key in (
        ("slots", "sim.slots"),
        ("seed", "sim.seed"),
        ("scheme", "scheme"),
        ("kpi", "kpi"),
        ("alpha", "alpha"),
        ("eps1", "eps1"),
        ("eps2", "eps2"),
        ("smin", "smin"),
    ):
        value = getattr(ns, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")

    spec = RunSpec(
        command=ns.command,
        config=ns.config,
        output=ns.out,
        overrides=tuple(overrides),
    )
    if spec.config is not None and not os.path.exists(spec.config):
        raise OSError(f"config file not found: {spec.config}")
    _merge_settings(spec)  # surfaces unknown keys / type mismatches now
    return spec


def _fmt(value) -> str:
    if value is None:
        return "unattainable"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _write_csv(path: str, header: list, rows: list):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_pmf(path: str, pmf: DiscretePmf):
    rows = [(t + pmf.offset, float(m)) for t, m in enumerate(pmf.masses)]
    _write_csv(path, ["t", "mass"], rows)


def _config_cells(cfg: AccessConfig) -> list:
    return [
        cfg.scheme.value,
        cfg.K,
        cfg.N,
        cfg.T_int if cfg.T_int is not None else "",
        cfg.M if cfg.M is not None else "",
        cfg.Q,
    ]


def _cmd_analyze(settings: dict, out: str) -> int:
    cfg = _build_config(settings)
    tm = _build_traffic(settings)
    lr = evaluate_config(cfg, tm, Kpi.LR90)
    rows = [["lr90", lr.s1, lr.p_s1, lr.p_s2, lr.tau2]]
    if cfg.scheme is Scheme.OMA:
        from .oma import lr_kpis_oma

        latency, _ = lr_kpis_oma(cfg, tm)
    else:
        from .pnoma import lr_kpis_pnoma

        latency, _, _, _ = lr_kpis_pnoma(cfg, tm)
    _write_pmf(os.path.join(out, "latency_pmf.csv"), latency)
    if cfg.Q == 1:
        paoi_rep = evaluate_config(cfg, tm, Kpi.PAOI90)
        rows.append(["paoi90", paoi_rep.s1, paoi_rep.p_s1, paoi_rep.p_s2, paoi_rep.tau2])
        if paoi_rep.p_s2 > 0.0:
            if cfg.scheme is Scheme.OMA:
                from .oma import paoi_kpis_oma

                _, _, paoi = paoi_kpis_oma(cfg, tm)
            else:
                from .pnoma import paoi_pmf_pnoma

                paoi = paoi_pmf_pnoma(cfg, tm)
            _write_pmf(os.path.join(out, "paoi_pmf.csv"), paoi)
    _write_csv(os.path.join(out, "kpis.csv"), ["kpi", "s1", "p_s1", "p_s2", "tau2"], rows)
    print(f"wrote {os.path.join(out, 'kpis.csv')}")
    return 0


def _cmd_simulate(settings: dict, out: str) -> int:
    cfg = _build_config(settings)
    tm = _build_traffic(settings)
    channel = _build_channel(settings, tm)
    run = _build_run(settings)
    kpis = run_simulation(cfg, tm, channel, run)
    l90 = pmf_percentile(kpis.latency_hist, 0.9) if kpis.n_packets > 0 else ""
    d90 = pmf_percentile(kpis.paoi_hist, 0.9) if kpis.n_events > 0 else ""
    header = [
        "s1_hat",
        "s1_se",
        "p_s1_hat",
        "p_s1_se",
        "p_s2_hat",
        "p_s2_se",
        "latency_defect",
        "l90",
        "d90",
        "n_frames",
        "n_packets",
        "n_events",
    ]
    row = [
        kpis.s1_hat,
        kpis.s1_se,
        kpis.p_s1_hat,
        kpis.p_s1_se,
        kpis.p_s2_hat,
        kpis.p_s2_se,
        kpis.latency_hist.defect,
        l90,
        d90,
        kpis.n_frames,
        kpis.n_packets,
        kpis.n_events,
    ]
    path = os.path.join(out, "simulate.csv")
    _write_csv(path, header, [row])
    print(f"wrote {path}")
    return 0


def _sweep_row(cfg: AccessConfig, tm: TrafficModel, kpi: Kpi):
    """(row cells, chosen-kpi report or None) for one grid point.

    Only the requested KPI's percentile column is filled; the other stays
    empty so a sweep never pays for a law the caller did not ask about.
    """
    if kpi is Kpi.PAOI90 and cfg.Q != 1:
        rep = evaluate_config(cfg, tm, Kpi.LR90)
        chosen = None
    else:
        rep = evaluate_config(cfg, tm, kpi)
        chosen = rep
    l90 = rep.tau2 if kpi is Kpi.LR90 else ""
    d90 = rep.tau2 if chosen is not None and kpi is Kpi.PAOI90 else ""
    cells = _config_cells(cfg) + [rep.s1, rep.p_s1, rep.p_s2, l90, d90]
    return cells, chosen


def _cmd_sweep(settings: dict, out: str) -> int:
    if "scheme" not in settings:
        raise ConfigError("missing key 'scheme'")
    tm = _build_traffic(settings)
    kpi = _build_kpi(settings)
    bounds = _build_bounds(settings, kpi)
    scheme = Scheme(settings["scheme"])
    rows = []
    points = []
    for cfg in enumerate_configs(scheme, bounds):
        cells, chosen = _sweep_row(cfg, tm, kpi)
        rows.append(cells)
        if chosen is not None and chosen.tau2 is not None:
            points.append(
                (len(rows) - 1, ParetoPoint(config=cfg, s1=chosen.s1, tau2=chosen.tau2))
            )
    front_ids = {id(p) for p in pareto_frontier([p for _, p in points])}
    on_front = {idx for idx, p in points if id(p) in front_ids}
    for idx, row in enumerate(rows):
        row.append(idx in on_front)
    header = [
        "scheme",
        "K",
        "N",
        "T_int",
        "M",
        "Q",
        "s1",
        "p_s1",
        "p_s2",
        "l90",
        "d90",
        "on_frontier",
    ]
    path = os.path.join(out, "sweep.csv")
    _write_csv(path, header, rows)
    print(f"wrote {path} ({len(rows)} configs)")
    return 0


def _cmd_optimize(settings: dict, out: str) -> int:
    if "scheme" not in settings:
        raise ConfigError("missing key 'scheme'")
    if "smin" not in settings:
        raise ConfigError("missing key 'smin'")
    tm = _build_traffic(settings)
    kpi = _build_kpi(settings)
    bounds = _build_bounds(settings, kpi)
    try:
        cfg, report = optimize_config(
            Scheme(settings["scheme"]), tm, settings["smin"], kpi, bounds
        )
    except ValueError as exc:
        if "no feasible config" in str(exc):
            print(f"infeasible: {exc}", file=sys.stderr)
            return 3
        raise _wrap_constraint(exc) from None
    l90 = report.tau2 if kpi is Kpi.LR90 else ""
    d90 = report.tau2 if kpi is Kpi.PAOI90 else ""
    if kpi is Kpi.LR90 and cfg.Q == 1:
        d90 = evaluate_config(cfg, tm, Kpi.PAOI90).tau2
    if kpi is Kpi.PAOI90:
        l90 = evaluate_config(cfg, tm, Kpi.LR90).tau2
    header = ["scheme", "K", "N", "T_int", "M", "Q", "s1", "p_s1", "p_s2", "l90", "d90"]
    row = _config_cells(cfg) + [report.s1, report.p_s1, report.p_s2, l90, d90]
    path = os.path.join(out, "optimize.csv")
    _write_csv(path, header, [row])
    print(f"wrote {path}")
    return 0


def execute(spec: RunSpec) -> int:
    """Run a validated RunSpec; returns the process exit code."""
    settings = _merge_settings(spec)
    os.makedirs(spec.output, exist_ok=True)
    if spec.command == "analyze":
        return _cmd_analyze(settings, spec.output)
    if spec.command == "simulate":
        return _cmd_simulate(settings, spec.output)
    if spec.command == "sweep":
        return _cmd_sweep(settings, spec.output)
    return _cmd_optimize(settings, spec.output)


def main(argv=None) -> int:
    try:
        spec = parse_runspec(argv)
        return execute(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main(None))
