"""Slot-level Monte Carlo simulator for the two-user uplink.

Replays the exact system dynamics — Bernoulli arrivals into the drop-oldest
queue, the slot schedule of each access scheme, coded-frame reception for the
broadband user, and retroactive interference cancellation for intermittent
packets that were hit by a collision — and aggregates empirical KPIs that are
directly comparable with the analytic routines in :mod:`slicekit.oma` and
:mod:`slicekit.pnoma`.

Two channel models are supported:

* ``COLLISION`` — concurrent transmissions always destroy each other; a solo
  transmission survives its own erasure channel.
* ``CAPTURE`` — per-slot Rayleigh fading with an SINR threshold; the stronger
  user can be captured and (optionally) cancelled so the weaker one is
  recovered in the same slot.

Both modes consume the *same* three uniform random streams (arrivals, user-1
channel, user-2 channel) positionally, one draw per stream per slot.  A
collision-mode erasure corresponds exactly to the event "fading SNR below the
threshold" in capture mode when the mean SNR is calibrated with
:func:`calibrate_mean_snr`, so runs with equal seeds are coupled sample paths
and capture can only add decoded packets, never remove them.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .core import AccessConfig, DiscretePmf, Scheme, TrafficModel, pmf_percentile

_CHUNK = 1 << 21


class ChannelMode(enum.Enum):
    """Physical-layer resolution rule for concurrent transmissions."""

    COLLISION = "collision"
    CAPTURE = "capture"


class SlotOutcome(enum.Enum):
    """Per-user result of one slot, for users that transmitted in it."""

    DECODED = "decoded"
    ERASED = "erased"
    COLLIDED = "collided"


@dataclass(frozen=True)
class CaptureChannel:
    """Channel model shared by both users.

    ``gamma`` is the linear SINR decoding threshold.  ``mean_snr_1`` and
    ``mean_snr_2`` are the mean received SNRs of the broadband and the
    intermittent user (Rayleigh fading => exponentially distributed SNR) and
    are only used in ``CAPTURE`` mode.  ``sic`` enables successive
    interference cancellation at the receiver; without it each user must
    clear the threshold while treating the other as noise, and collided
    intermittent packets cannot be recovered retroactively either.
    """

    mode: ChannelMode
    gamma: float = 1.0
    mean_snr_1: float = 1.0
    mean_snr_2: float = 1.0
    sic: bool = True

    def __post_init__(self):
        if not isinstance(self.mode, ChannelMode):
            raise ValueError("mode must be a ChannelMode")
        if not (self.gamma > 0.0) or not math.isfinite(self.gamma):
            raise ValueError("gamma must be a positive finite linear threshold")
        if self.mode is ChannelMode.CAPTURE:
            for snr in (self.mean_snr_1, self.mean_snr_2):
                if not (snr > 0.0) or not math.isfinite(snr):
                    raise ValueError("mean SNRs must be positive in capture mode")

    @classmethod
    def collision(cls) -> "CaptureChannel":
        """The baseline destructive-collision channel."""
        return cls(mode=ChannelMode.COLLISION)

    @classmethod
    def capture_from_erasures(
        cls, gamma: float, eps1: float, eps2: float, sic: bool = True
    ) -> "CaptureChannel":
        """Capture channel whose solo-slot outage rates match (eps1, eps2).

        Mean SNRs are set with :func:`calibrate_mean_snr`, so a run in this
        channel is slot-for-slot coupled with a collision-mode run at the
        same seed and erasure rates.
        """
        return cls(
            mode=ChannelMode.CAPTURE,
            gamma=gamma,
            mean_snr_1=calibrate_mean_snr(eps1, gamma),
            mean_snr_2=calibrate_mean_snr(eps2, gamma),
            sic=sic,
        )


@dataclass(frozen=True)
class SimRun:
    """Length, seed and warm-up of one simulation run.

    ``warmup`` slots at the start are excluded from every estimate; ``None``
    picks a default of ten frame/period lengths.  The run must be strictly
    longer than the warm-up.
    """

    slots: int
    seed: int
    warmup: int | None = None

    def __post_init__(self):
        if self.slots < 1:
            raise ValueError("slots must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 bits")
        if self.warmup is not None:
            if self.warmup < 0:
                raise ValueError("warmup must be >= 0")
            if self.slots <= self.warmup:
                raise ValueError("slots must exceed warmup")


@dataclass(frozen=True)
class EmpiricalKpis:
    """Point estimates with standard errors, plus empirical distributions.

    ``latency_hist`` masses sum to the delivered fraction of tracked packets
    and its ``defect`` is the observed loss fraction, mirroring the analytic
    latency law.  ``paoi_hist`` is normalized over recorded age peaks.
    """

    s1_hat: float
    s1_se: float
    p_s1_hat: float
    p_s1_se: float
    p_s2_hat: float
    p_s2_se: float
    latency_hist: DiscretePmf
    paoi_hist: DiscretePmf
    n_frames: int
    n_packets: int
    n_events: int


@dataclass(frozen=True)
class SimEvents:
    """Raw per-event arrays from a run with ``collect_events=True``.

    All slot indices are absolute (0-based).  ``event_slots`` /
    ``event_gens`` describe age-reset events (one per delivery slot, keyed
    to the freshest delivered generation); ``delivery_slots`` /
    ``delivery_gens`` list every delivered packet; ``decoded_frames`` holds
    the indices of broadband frames that reached the decoding threshold;
    ``drops_by_phase`` / ``gens_by_phase`` count queue-overflow drops and
    arrivals of tracked packets by arrival phase within the frame or period.
    """

    event_slots: np.ndarray
    event_gens: np.ndarray
    delivery_slots: np.ndarray
    delivery_gens: np.ndarray
    decoded_frames: np.ndarray
    drops_by_phase: np.ndarray
    gens_by_phase: np.ndarray


def calibrate_mean_snr(eps: float, gamma: float) -> float:
    """Mean SNR that gives a solo-slot outage probability of ``eps``.

    With Rayleigh fading the received SNR is exponential, so
    P[SNR < gamma] = 1 - exp(-gamma/mean) = eps  =>  mean = -gamma/ln(1-eps).
    """
    if not (gamma > 0.0) or not math.isfinite(gamma):
        raise ValueError("gamma must be a positive finite linear threshold")
    if eps == 0.0:
        raise ValueError("eps=0 needs an infinite SNR; calibration undefined")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    return -gamma / math.log1p(-eps)


def resolve_slot(
    active1: bool,
    active2: bool,
    snr1: float,
    snr2: float,
    channel: CaptureChannel,
) -> tuple[SlotOutcome | None, SlotOutcome | None]:
    """Resolve one slot given the users' activity and fading draws.

    Returns the per-user outcome, ``None`` for a silent user.  This is the
    reference decision rule; the batched simulation kernel implements the
    same logic.  In collision mode the fading draw is still compared against
    the threshold for a solo transmission (the calibrated-erasure coupling),
    while two concurrent transmissions always collide.
    """
    if not active1 and not active2:
        return (None, None)
    if channel.mode is ChannelMode.COLLISION:
        if active1 and active2:
            return (SlotOutcome.COLLIDED, SlotOutcome.COLLIDED)
        if active1:
            out = SlotOutcome.DECODED if snr1 >= channel.gamma else SlotOutcome.ERASED
            return (out, None)
        out = SlotOutcome.DECODED if snr2 >= channel.gamma else SlotOutcome.ERASED
        return (None, out)

    g = channel.gamma
    if active1 and not active2:
        return (SlotOutcome.DECODED if snr1 >= g else SlotOutcome.ERASED, None)
    if active2 and not active1:
        return (None, SlotOutcome.DECODED if snr2 >= g else SlotOutcome.ERASED)

    sinr1 = snr1 / (1.0 + snr2)
    sinr2 = snr2 / (1.0 + snr1)
    if not channel.sic:
        out1 = SlotOutcome.DECODED if sinr1 >= g else SlotOutcome.COLLIDED
        out2 = SlotOutcome.DECODED if sinr2 >= g else SlotOutcome.COLLIDED
        return (out1, out2)
    if sinr1 >= g:
        out2 = SlotOutcome.DECODED if snr2 >= g else SlotOutcome.ERASED
        return (SlotOutcome.DECODED, out2)
    if sinr2 >= g:
        out1 = SlotOutcome.DECODED if snr1 >= g else SlotOutcome.ERASED
        return (out1, SlotOutcome.DECODED)
    return (SlotOutcome.COLLIDED, SlotOutcome.COLLIDED)


# --- state vector layout for the slot kernel -------------------------------
_QLEN = 0  # packets currently queued
_CLEAN = 1  # coded slots received so far in the current frame
_DECODED = 2  # current frame already decoded (0/1)
_NPEND = 3  # stored collided packets awaiting the frame decode
_HAVEPREV = 4  # an age-reset event has happened (0/1)
_TPREV = 5  # slot of the previous age-reset event
_GPREV = 6  # generation of the freshest packet in that event
_FRAMES = 7  # frames counted in the measurement window
_FRAMES_OK = 8  # counted frames that decoded
_GEN = 9  # tracked packets generated
_DELIV = 10  # tracked packets delivered
_LOST = 11  # tracked packets lost
_EVENTS = 12  # age peaks recorded
_PAOI_OVF = 13  # age peaks beyond the histogram cap
_BBSENT = 14  # coded slots sent in the current frame (time-shared schedule)
_FRAME_START = 15  # absolute slot where the current frame started
_FIRST_START = 16  # start of the first counted frame (-1 until set)
_LAST_END = 17  # end (exclusive) of the last counted frame
_NEV = 18  # fill level of the event buffers
_NDELIV = 19  # fill level of the delivery buffers
_NDECF = 20  # fill level of the decoded-frame buffer
_LAT_OVF = 21  # latency samples beyond the histogram cap (must stay 0)
_FRAME_IDX = 22  # index of the current frame
_STATE_LEN = 23


@njit(cache=True)
def _sim_chunk(
    base,
    m,
    arr_u,
    u1,
    u2,
    shared,
    N,
    M,
    K,
    Q,
    T,
    alpha,
    eps1,
    eps2,
    capture,
    gamma,
    mu1,
    mu2,
    sic,
    warmup,
    track_end,
    state,
    queue,
    pend_g,
    pend_ok,
    slot_deliv,
    lat_hist,
    paoi_hist,
    drops_phase,
    gens_phase,
    collect,
    ev_slots,
    ev_gens,
    deliv_slots,
    deliv_gens,
    dec_frames,
):
    lat_cap = lat_hist.shape[0]
    paoi_cap = paoi_hist.shape[0]
    for i in range(m):
        s = base + i
        # --- schedule position -------------------------------------------
        if shared == 1:
            fpos = s % N
            if fpos == 0:
                state[_CLEAN] = 0
                state[_DECODED] = 0
                state[_NPEND] = 0
                state[_FRAME_START] = s
                state[_FRAME_IDX] = s // N
            own2 = 0
            mixed = 1 if fpos >= N - M else 0
            phase = fpos
        else:
            own2 = 1 if (s % T) == T - 1 else 0
            mixed = 0
            phase = s % T

        # --- arrival (before any service this slot) ----------------------
        if arr_u[i] < alpha:
            tracked = 1 if (warmup <= s < track_end) else 0
            if tracked == 1:
                state[_GEN] += 1
                gens_phase[phase] += 1
            if state[_QLEN] == Q:
                old = queue[0]
                for j in range(Q - 1):
                    queue[j] = queue[j + 1]
                state[_QLEN] -= 1
                if warmup <= old < track_end:
                    state[_LOST] += 1
                    if shared == 1:
                        drops_phase[old % N] += 1
                    else:
                        drops_phase[old % T] += 1
            queue[state[_QLEN]] = s
            state[_QLEN] += 1

        # --- channel draws (consumed positionally every slot) ------------
        if capture == 1:
            snr1 = -mu1 * math.log1p(-u1[i])
            snr2 = -mu2 * math.log1p(-u2[i])
            ok1 = 1 if snr1 >= gamma else 0
            ok2 = 1 if snr2 >= gamma else 0
        else:
            snr1 = 0.0
            snr2 = 0.0
            ok1 = 1 if u1[i] >= eps1 else 0
            ok2 = 1 if u2[i] >= eps2 else 0

        ndel = 0  # deliveries this slot; gens in slot_deliv[:ndel]

        if shared == 1:
            tx2 = 0
            g2 = -1
            if mixed == 1 and state[_QLEN] > 0:
                tx2 = 1
                g2 = queue[0]
                for j in range(state[_QLEN] - 1):
                    queue[j] = queue[j + 1]
                state[_QLEN] -= 1

            bb_clean = 0
            if tx2 == 1:
                if state[_DECODED] == 1:
                    # frame already decoded => its remaining coded slots are
                    # known and cancelled; the packet rides a clean channel
                    if ok2 == 1:
                        slot_deliv[ndel] = g2
                        ndel += 1
                    elif warmup <= g2 < track_end:
                        state[_LOST] += 1
                elif capture == 0:
                    # destructive collision; store for retroactive recovery
                    pend_g[state[_NPEND]] = g2
                    pend_ok[state[_NPEND]] = ok2
                    state[_NPEND] += 1
                else:
                    sinr1 = snr1 / (1.0 + snr2)
                    sinr2 = snr2 / (1.0 + snr1)
                    if sic == 1:
                        if sinr1 >= gamma:
                            bb_clean = 1
                            if ok2 == 1:
                                slot_deliv[ndel] = g2
                                ndel += 1
                            elif warmup <= g2 < track_end:
                                state[_LOST] += 1
                        elif sinr2 >= gamma:
                            slot_deliv[ndel] = g2
                            ndel += 1
                            bb_clean = ok1
                        else:
                            pend_g[state[_NPEND]] = g2
                            pend_ok[state[_NPEND]] = ok2
                            state[_NPEND] += 1
                    else:
                        bb_clean = 1 if sinr1 >= gamma else 0
                        if sinr2 >= gamma:
                            slot_deliv[ndel] = g2
                            ndel += 1
                        elif warmup <= g2 < track_end:
                            state[_LOST] += 1
            else:
                bb_clean = ok1

            if bb_clean == 1 and state[_DECODED] == 0:
                state[_CLEAN] += 1
                if state[_CLEAN] >= K:
                    state[_DECODED] = 1
                    if collect == 1:
                        dec_frames[state[_NDECF]] = state[_FRAME_IDX]
                        state[_NDECF] += 1
                    for j in range(state[_NPEND]):
                        if pend_ok[j] == 1:
                            slot_deliv[ndel] = pend_g[j]
                            ndel += 1
                        elif warmup <= pend_g[j] < track_end:
                            state[_LOST] += 1
                    state[_NPEND] = 0

            if fpos == N - 1:
                if state[_DECODED] == 0:
                    for j in range(state[_NPEND]):
                        if warmup <= pend_g[j] < track_end:
                            state[_LOST] += 1
                    state[_NPEND] = 0
                if state[_FRAME_START] >= warmup:
                    state[_FRAMES] += 1
                    state[_FRAMES_OK] += state[_DECODED]
                    if state[_FIRST_START] < 0:
                        state[_FIRST_START] = state[_FRAME_START]
                    state[_LAST_END] = s + 1
        else:
            # time-shared schedule: the intermittent user owns its slot alone
            if own2 == 1:
                if state[_QLEN] > 0:
                    g2 = queue[0]
                    for j in range(state[_QLEN] - 1):
                        queue[j] = queue[j + 1]
                    state[_QLEN] -= 1
                    if ok2 == 1:
                        slot_deliv[ndel] = g2
                        ndel += 1
                    elif warmup <= g2 < track_end:
                        state[_LOST] += 1
            else:
                if state[_BBSENT] == 0:
                    state[_FRAME_START] = s
                state[_CLEAN] += ok1
                state[_BBSENT] += 1
                if state[_BBSENT] == N:
                    decoded = 1 if state[_CLEAN] >= K else 0
                    if collect == 1 and decoded == 1:
                        dec_frames[state[_NDECF]] = state[_FRAME_IDX]
                        state[_NDECF] += 1
                    if state[_FRAME_START] >= warmup:
                        state[_FRAMES] += 1
                        state[_FRAMES_OK] += decoded
                        if state[_FIRST_START] < 0:
                            state[_FIRST_START] = state[_FRAME_START]
                        state[_LAST_END] = s + 1
                    state[_FRAME_IDX] += 1
                    state[_BBSENT] = 0
                    state[_CLEAN] = 0

        # --- deliveries and the age-reset event of this slot --------------
        if ndel > 0:
            g_fresh = slot_deliv[0]
            for j in range(ndel):
                g = slot_deliv[j]
                if g > g_fresh:
                    g_fresh = g
                if warmup <= g < track_end:
                    state[_DELIV] += 1
                    lat = s - g
                    if lat < lat_cap:
                        lat_hist[lat] += 1
                    else:
                        state[_LAT_OVF] += 1
                if collect == 1:
                    deliv_slots[state[_NDELIV]] = s
                    deliv_gens[state[_NDELIV]] = g
                    state[_NDELIV] += 1
            if s >= warmup and state[_HAVEPREV] == 1:
                peak = s - state[_GPREV]
                if peak < paoi_cap:
                    paoi_hist[peak] += 1
                    state[_EVENTS] += 1
                else:
                    state[_PAOI_OVF] += 1
            state[_HAVEPREV] = 1
            state[_TPREV] = s
            state[_GPREV] = g_fresh
            if collect == 1:
                ev_slots[state[_NEV]] = s
                ev_gens[state[_NEV]] = g_fresh
                state[_NEV] += 1


def _run_params(cfg: AccessConfig, run: SimRun) -> tuple[int, int, int]:
    """Resolve (warmup, track_end, period) for a run."""
    period = cfg.T_int if cfg.scheme is Scheme.OMA else cfg.N
    warmup = run.warmup
    if warmup is None:
        warmup = 10 * cfg.N * max(period, 1)
    drain = 4 * (cfg.Q + 2) * max(cfg.N, period)
    track_end = run.slots - drain
    if run.slots <= warmup:
        raise ValueError("slots must exceed warmup")
    return warmup, track_end, period


def run_simulation(
    cfg: AccessConfig,
    tm: TrafficModel,
    channel: CaptureChannel,
    run: SimRun,
    collect_events: bool = False,
    log_path: str | None = None,
) -> EmpiricalKpis | tuple[EmpiricalKpis, SimEvents]:
    """Simulate ``run.slots`` slots and return empirical KPIs.

    The output is a pure function of the arguments: three independent
    uniform streams are derived from ``run.seed`` (arrivals, user-1 channel,
    user-2 channel) and consumed one draw per stream per slot.  Packets
    generated inside the measurement window (after warm-up, with a drain
    margin before the end so every tracked packet resolves in-run) feed the
    latency histogram and the delivery estimates; age peaks are recorded at
    every delivery inside the window.

    With ``collect_events=True`` the raw event arrays are returned as well.
    ``log_path`` writes one ``slot,event,user,latency`` line per delivery
    and per decoded frame (a debugging aid, off by default).
    """
    if not isinstance(cfg, AccessConfig):
        raise ValueError("cfg must be an AccessConfig")
    if not isinstance(tm, TrafficModel):
        raise ValueError("tm must be a TrafficModel")
    if not isinstance(channel, CaptureChannel):
        raise ValueError("channel must be a CaptureChannel")
    if not isinstance(run, SimRun):
        raise ValueError("run must be a SimRun")
    warmup, track_end, period = _run_params(cfg, run)

    shared = 0 if cfg.scheme is Scheme.OMA else 1
    N, K, Q = cfg.N, cfg.K, cfg.Q
    M = cfg.M if shared else 0
    T = cfg.T_int if shared == 0 else 1
    capture = 1 if channel.mode is ChannelMode.CAPTURE else 0
    collect = 1 if (collect_events or log_path is not None) else 0

    lat_cap = (Q + 2) * max(N, period) * 8 + 64
    paoi_cap = 1 << 17
    state = np.zeros(_STATE_LEN, dtype=np.int64)
    state[_FIRST_START] = -1
    queue = np.zeros(max(Q, 1), dtype=np.int64)
    pend_g = np.zeros(N + 2, dtype=np.int64)
    pend_ok = np.zeros(N + 2, dtype=np.uint8)
    slot_deliv = np.zeros(N + 2, dtype=np.int64)
    lat_hist = np.zeros(lat_cap, dtype=np.int64)
    paoi_hist = np.zeros(paoi_cap, dtype=np.int64)
    drops_phase = np.zeros(max(N, period), dtype=np.int64)
    gens_phase = np.zeros(max(N, period), dtype=np.int64)
    if collect:
        ev_slots = np.zeros(run.slots + 1, dtype=np.int64)
        ev_gens = np.zeros(run.slots + 1, dtype=np.int64)
        deliv_slots = np.zeros(run.slots + 1, dtype=np.int64)
        deliv_gens = np.zeros(run.slots + 1, dtype=np.int64)
        dec_frames = np.zeros(run.slots // N + 2, dtype=np.int64)
    else:
        ev_slots = np.zeros(1, dtype=np.int64)
        ev_gens = np.zeros(1, dtype=np.int64)
        deliv_slots = np.zeros(1, dtype=np.int64)
        deliv_gens = np.zeros(1, dtype=np.int64)
        dec_frames = np.zeros(1, dtype=np.int64)

    streams = [
        np.random.Generator(np.random.PCG64(s))
        for s in np.random.SeedSequence(run.seed).spawn(3)
    ]
    for base in range(0, run.slots, _CHUNK):
        m = min(_CHUNK, run.slots - base)
        _sim_chunk(
            base,
            m,
            streams[0].random(m),
            streams[1].random(m),
            streams[2].random(m),
            shared,
            N,
            M,
            K,
            Q,
            T,
            tm.alpha,
            tm.eps1,
            tm.eps2,
            capture,
            channel.gamma,
            channel.mean_snr_1,
            channel.mean_snr_2,
            1 if channel.sic else 0,
            warmup,
            track_end,
            state,
            queue,
            pend_g,
            pend_ok,
            slot_deliv,
            lat_hist,
            paoi_hist,
            drops_phase,
            gens_phase,
            collect,
            ev_slots,
            ev_gens,
            deliv_slots,
            deliv_gens,
            dec_frames,
        )

    n_gen = int(state[_GEN])
    n_deliv = int(state[_DELIV])
    n_lost = int(state[_LOST])
    if n_deliv + n_lost != n_gen:
        raise RuntimeError(
            f"accounting leak: {n_deliv} delivered + {n_lost} lost != {n_gen} generated"
        )
    if state[_LAT_OVF] != 0:
        raise RuntimeError("latency histogram overflow; resolution bound violated")

    if n_gen > 0:
        p2 = n_deliv / n_gen
        p2_se = math.sqrt(p2 * (1.0 - p2) / n_gen)
        last = int(np.max(np.nonzero(lat_hist)[0])) if n_deliv > 0 else 0
        lat_masses = lat_hist[: last + 1] / n_gen
        defect = n_lost / n_gen
        latency = DiscretePmf(offset=0, masses=lat_masses, defect=defect)
    else:
        p2, p2_se = 0.0, 0.0
        latency = DiscretePmf(offset=0, masses=np.zeros(1), defect=1.0)

    n_events = int(state[_EVENTS])
    n_ovf = int(state[_PAOI_OVF])
    if n_events > 0:
        last = int(np.max(np.nonzero(paoi_hist)[0]))
        first = int(np.min(np.nonzero(paoi_hist)[0]))
        masses = paoi_hist[first : last + 1] / (n_events + n_ovf)
        paoi = DiscretePmf(
            offset=first, masses=masses, defect=n_ovf / (n_events + n_ovf)
        )
    else:
        paoi = DiscretePmf(offset=0, masses=np.zeros(1), defect=1.0)

    n_frames = int(state[_FRAMES])
    if n_frames > 0:
        p1 = int(state[_FRAMES_OK]) / n_frames
        p1_se = math.sqrt(p1 * (1.0 - p1) / n_frames)
        window = int(state[_LAST_END]) - int(state[_FIRST_START])
        rate = K * n_frames / window
        s1 = rate * p1
        s1_se = rate * p1_se
    else:
        p1, p1_se, s1, s1_se = 0.0, 0.0, 0.0, 0.0

    kpis = EmpiricalKpis(
        s1_hat=s1,
        s1_se=s1_se,
        p_s1_hat=p1,
        p_s1_se=p1_se,
        p_s2_hat=p2,
        p_s2_se=p2_se,
        latency_hist=latency,
        paoi_hist=paoi,
        n_frames=n_frames,
        n_packets=n_gen,
        n_events=n_events,
    )
    if not collect:
        return kpis

    events = SimEvents(
        event_slots=ev_slots[: int(state[_NEV])].copy(),
        event_gens=ev_gens[: int(state[_NEV])].copy(),
        delivery_slots=deliv_slots[: int(state[_NDELIV])].copy(),
        delivery_gens=deliv_gens[: int(state[_NDELIV])].copy(),
        decoded_frames=dec_frames[: int(state[_NDECF])].copy(),
        drops_by_phase=drops_phase.copy(),
        gens_by_phase=gens_phase.copy(),
    )
    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            for slot, gen in zip(events.delivery_slots, events.delivery_gens):
                fh.write(f"{slot},delivery,2,{slot - gen}\n")
            for idx in events.decoded_frames:
                fh.write(f"{idx},frame_decoded,1,\n")
    if collect_events:
        return kpis, events
    return kpis


def empirical_kpis_summary(
    kpis: EmpiricalKpis, q: float
) -> tuple[int | None, int | None]:
    """The q-th latency and age percentiles of a run, ``None`` if unattainable.

    A percentile is unattainable when the observed loss fraction already
    exceeds ``1 - q``.  Raises if the underlying histogram is empty.
    """
    if not isinstance(kpis, EmpiricalKpis):
        raise ValueError("kpis must be an EmpiricalKpis")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if kpis.n_packets == 0:
        raise ValueError("empty latency histogram: no tracked packets")
    if kpis.n_events == 0:
        raise ValueError("empty age histogram: no delivery events")
    return (
        pmf_percentile(kpis.latency_hist, q),
        pmf_percentile(kpis.paoi_hist, q),
    )
