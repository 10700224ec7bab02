"""Simulator tests: reference slot resolution, calibration, determinism,
channel-mode coupling, and agreement with the exact analytic KPIs."""

import math

import numpy as np
import pytest

from slicekit.core import (
    AccessConfig,
    DiscretePmf,
    TrafficModel,
    binomial_tail,
    pmf_percentile,
)
from slicekit.oma import (
    broadband_success_oma,
    broadband_throughput_oma,
    lr_kpis_oma,
    paoi_kpis_oma,
)
from slicekit.pnoma import (
    drop_probability,
    first_decode_pmf,
    interarrival_pmf,
    lr_kpis_pnoma,
    paoi_packet_success,
    paoi_pmf_pnoma,
)
from slicekit.simulate import (
    CaptureChannel,
    ChannelMode,
    EmpiricalKpis,
    SimRun,
    SlotOutcome,
    calibrate_mean_snr,
    empirical_kpis_summary,
    resolve_slot,
    run_simulation,
)

GAMMA = 10**0.5  # 5 dB


def conditional_tv(a: DiscretePmf, b: DiscretePmf) -> float:
    """Total variation between two pmfs after conditioning on delivery."""
    lo = min(a.offset, b.offset)
    hi = max(a.support_max, b.support_max)
    av = np.zeros(hi - lo + 1)
    bv = np.zeros(hi - lo + 1)
    av[a.offset - lo : a.offset - lo + len(a.masses)] = a.masses / a.masses.sum()
    bv[b.offset - lo : b.offset - lo + len(b.masses)] = b.masses / b.masses.sum()
    return 0.5 * float(np.abs(av - bv).sum())


TINY_CFG = AccessConfig(scheme="pnoma", K=2, N=4, M=2, Q=1)
TINY_TM = TrafficModel(alpha=0.3, eps1=0.1, eps2=0.05)
T2_TM = TrafficModel(alpha=0.01, eps1=0.1, eps2=0.05)


@pytest.fixture(scope="module")
def tiny_run():
    """Collected 4e6-slot run on a small shared config with busy traffic."""
    kpis, events = run_simulation(
        TINY_CFG,
        TINY_TM,
        CaptureChannel.collision(),
        SimRun(slots=4_000_000, seed=90210, warmup=200),
        collect_events=True,
    )
    return kpis, events


@pytest.fixture(scope="module")
def oma_lr_run():
    cfg = AccessConfig(scheme="oma", K=64, N=77, T_int=13, Q=4)
    return run_simulation(
        cfg, T2_TM, CaptureChannel.collision(), SimRun(slots=10_000_000, seed=2024)
    )


@pytest.fixture(scope="module")
def pnoma_lr_run():
    cfg = AccessConfig(scheme="pnoma", K=20, N=26, M=3, Q=4)
    return run_simulation(
        cfg, T2_TM, CaptureChannel.collision(), SimRun(slots=10_000_000, seed=77)
    )


class TestCalibrateMeanSnr:
    def test_unit_threshold_at_one_over_e_survival(self):
        assert calibrate_mean_snr(1.0 - math.exp(-1.0), 1.0) == pytest.approx(
            1.0, rel=1e-12
        )

    def test_five_db_low_outage_value(self):
        mean = calibrate_mean_snr(0.05, GAMMA)
        assert mean == pytest.approx(-GAMMA / math.log(0.95), rel=1e-12)
        assert abs(mean - 61.66) < 0.02

    def test_harsh_channel_needs_tiny_mean(self):
        assert calibrate_mean_snr(1.0 - 1e-12, 2.0) < 0.1

    def test_monotone_decreasing_in_eps(self):
        vals = [calibrate_mean_snr(e, 1.0) for e in (0.01, 0.1, 0.5, 0.9)]
        assert all(x > y for x, y in zip(vals, vals[1:]))

    def test_zero_eps_rejected(self):
        with pytest.raises(ValueError, match="infinite"):
            calibrate_mean_snr(0.0, 1.0)

    def test_bounds(self):
        with pytest.raises(ValueError):
            calibrate_mean_snr(1.0, 1.0)
        with pytest.raises(ValueError):
            calibrate_mean_snr(-0.1, 1.0)
        with pytest.raises(ValueError):
            calibrate_mean_snr(0.5, 0.0)


class TestResolveSlot:
    def test_collision_both_active_destroys_both(self):
        ch = CaptureChannel.collision()
        assert resolve_slot(True, True, 100.0, 100.0, ch) == (
            SlotOutcome.COLLIDED,
            SlotOutcome.COLLIDED,
        )

    def test_collision_solo_threshold(self):
        ch = CaptureChannel.collision()
        assert resolve_slot(True, False, 1.5, 0.0, ch) == (SlotOutcome.DECODED, None)
        assert resolve_slot(True, False, 0.5, 0.0, ch) == (SlotOutcome.ERASED, None)
        assert resolve_slot(False, True, 0.0, 1.5, ch) == (None, SlotOutcome.DECODED)

    def test_silent_slot(self):
        ch = CaptureChannel.collision()
        assert resolve_slot(False, False, 1.0, 1.0, ch) == (None, None)

    def test_capture_strong_user_then_sic_fails_weak(self):
        ch = CaptureChannel(mode=ChannelMode.CAPTURE, gamma=GAMMA)
        out = resolve_slot(True, True, 10 * GAMMA, 0.1 * GAMMA, ch)
        assert out == (SlotOutcome.DECODED, SlotOutcome.ERASED)

    def test_capture_strong_user_then_sic_recovers_weak(self):
        ch = CaptureChannel(mode=ChannelMode.CAPTURE, gamma=2.0)
        out = resolve_slot(True, True, 100.0, 3.0, ch)
        assert out == (SlotOutcome.DECODED, SlotOutcome.DECODED)

    def test_capture_weak_broadband_recovered_after_sic(self):
        ch = CaptureChannel(mode=ChannelMode.CAPTURE, gamma=2.0)
        out = resolve_slot(True, True, 3.0, 100.0, ch)
        assert out == (SlotOutcome.DECODED, SlotOutcome.DECODED)

    def test_capture_neither_clears_threshold(self):
        ch = CaptureChannel(mode=ChannelMode.CAPTURE, gamma=2.0)
        out = resolve_slot(True, True, 1.0, 1.0, ch)
        assert out == (SlotOutcome.COLLIDED, SlotOutcome.COLLIDED)

    def test_capture_without_sic_cannot_recover_weak(self):
        ch = CaptureChannel(mode=ChannelMode.CAPTURE, gamma=2.0, sic=False)
        out = resolve_slot(True, True, 100.0, 3.0, ch)
        assert out == (SlotOutcome.DECODED, SlotOutcome.COLLIDED)

    def test_capture_solo_is_plain_threshold(self):
        ch = CaptureChannel(mode=ChannelMode.CAPTURE, gamma=2.0)
        assert resolve_slot(False, True, 0.0, 2.5, ch) == (None, SlotOutcome.DECODED)
        assert resolve_slot(False, True, 0.0, 1.5, ch) == (None, SlotOutcome.ERASED)


class TestValidation:
    def test_sim_run_bounds(self):
        with pytest.raises(ValueError):
            SimRun(slots=0, seed=1)
        with pytest.raises(ValueError):
            SimRun(slots=100, seed=1, warmup=-1)
        with pytest.raises(ValueError):
            SimRun(slots=100, seed=1, warmup=100)
        with pytest.raises(ValueError):
            SimRun(slots=100, seed=-1)

    def test_channel_bounds(self):
        with pytest.raises(ValueError):
            CaptureChannel(mode=ChannelMode.COLLISION, gamma=0.0)
        with pytest.raises(ValueError):
            CaptureChannel(mode=ChannelMode.CAPTURE, gamma=1.0, mean_snr_1=0.0)
        with pytest.raises(ValueError):
            CaptureChannel(mode="collision", gamma=1.0)

    def test_capture_from_erasures_calibrates_both_links(self):
        ch = CaptureChannel.capture_from_erasures(GAMMA, 0.1, 0.05)
        assert ch.mean_snr_1 == pytest.approx(calibrate_mean_snr(0.1, GAMMA))
        assert ch.mean_snr_2 == pytest.approx(calibrate_mean_snr(0.05, GAMMA))
        assert ch.sic

    def test_default_warmup_must_fit(self):
        with pytest.raises(ValueError, match="warmup"):
            run_simulation(
                TINY_CFG, TINY_TM, CaptureChannel.collision(), SimRun(slots=100, seed=1)
            )


class TestDeterminism:
    def test_same_seed_bit_identical(self):
        run = SimRun(slots=300_000, seed=1234, warmup=200)
        a = run_simulation(TINY_CFG, TINY_TM, CaptureChannel.collision(), run)
        b = run_simulation(TINY_CFG, TINY_TM, CaptureChannel.collision(), run)
        assert a.p_s1_hat == b.p_s1_hat
        assert a.p_s2_hat == b.p_s2_hat
        assert a.s1_hat == b.s1_hat
        assert np.array_equal(a.latency_hist.masses, b.latency_hist.masses)
        assert np.array_equal(a.paoi_hist.masses, b.paoi_hist.masses)
        assert a.n_frames == b.n_frames and a.n_events == b.n_events

    def test_different_seed_differs(self):
        a = run_simulation(
            TINY_CFG, TINY_TM, CaptureChannel.collision(), SimRun(300_000, 1, 200)
        )
        b = run_simulation(
            TINY_CFG, TINY_TM, CaptureChannel.collision(), SimRun(300_000, 2, 200)
        )
        assert a.p_s2_hat != b.p_s2_hat

    def test_noma_equals_pnoma_with_all_slots_shared(self):
        noma = AccessConfig(scheme="noma", K=2, N=4, Q=1)
        pnoma = AccessConfig(scheme="pnoma", K=2, N=4, M=4, Q=1)
        run = SimRun(slots=300_000, seed=5, warmup=200)
        a = run_simulation(noma, TINY_TM, CaptureChannel.collision(), run)
        b = run_simulation(pnoma, TINY_TM, CaptureChannel.collision(), run)
        assert a.p_s1_hat == b.p_s1_hat
        assert np.array_equal(a.latency_hist.masses, b.latency_hist.masses)


class TestAccounting:
    def test_histogram_mass_conservation(self, tiny_run):
        kpis, _ = tiny_run
        lat = kpis.latency_hist
        assert lat.masses.sum() + lat.defect == pytest.approx(1.0, abs=1e-12)
        assert lat.masses.sum() == pytest.approx(kpis.p_s2_hat, abs=1e-12)
        paoi = kpis.paoi_hist
        assert paoi.masses.sum() + paoi.defect == pytest.approx(1.0, abs=1e-12)

    def test_all_generated_packets_resolve(self, tiny_run):
        kpis, events = tiny_run
        # every tracked arrival is either a delivery or a loss; the run
        # itself raises on a leak, so just sanity-check the totals
        assert kpis.n_packets > 0
        assert int(events.gens_by_phase.sum()) == kpis.n_packets

    def test_delivery_latencies_nonnegative(self, tiny_run):
        _, events = tiny_run
        lats = events.delivery_slots - events.delivery_gens
        assert (lats >= 0).all()
        assert (lats == 0).any()  # same-slot service exists at Q=1

    def test_decoded_frames_strictly_increasing(self, tiny_run):
        _, events = tiny_run
        assert (np.diff(events.decoded_frames) > 0).all()


class TestPaoiSampleIdentity:
    def test_every_peak_is_interarrival_plus_ending_latency(self, tiny_run):
        kpis, events = tiny_run
        s, g = events.event_slots, events.event_gens
        peaks = s[1:] - g[:-1]
        identity = (s[1:] - s[:-1]) + (s[:-1] - g[:-1])
        assert np.array_equal(peaks, identity)
        # reconstruct the recorded histogram from the raw events
        mask = s[1:] >= 200  # the run's explicit warmup
        vals, counts = np.unique(peaks[mask], return_counts=True)
        hist = np.zeros(int(vals.max()) + 1, dtype=np.int64)
        hist[vals] = counts
        total = counts.sum()
        assert total == kpis.n_events
        rebuilt = hist[kpis.paoi_hist.offset :] / total
        np.testing.assert_allclose(
            rebuilt[: len(kpis.paoi_hist.masses)], kpis.paoi_hist.masses, atol=1e-15
        )


class TestAgainstAnalytics:
    def test_tiny_latency_distribution(self, tiny_run):
        kpis, _ = tiny_run
        masses, p_s2, p_s1, _ = lr_kpis_pnoma(TINY_CFG, TINY_TM)
        assert abs(kpis.p_s2_hat - p_s2) < 3 * kpis.p_s2_se
        assert abs(kpis.p_s1_hat - p_s1) < 3 * kpis.p_s1_se
        assert conditional_tv(kpis.latency_hist, masses) < 0.02

    def test_tiny_paoi_distribution(self, tiny_run):
        kpis, _ = tiny_run
        ana = paoi_pmf_pnoma(TINY_CFG, TINY_TM)
        assert conditional_tv(kpis.paoi_hist, ana) < 0.02
        ps = paoi_packet_success(TINY_CFG, TINY_TM)
        assert abs(kpis.p_s2_hat - ps) < 3 * kpis.p_s2_se

    def test_tiny_drop_probability_by_phase(self, tiny_run):
        _, events = tiny_run
        for n in range(1, TINY_CFG.N + 1):
            gens = int(events.gens_by_phase[n - 1])
            drops = int(events.drops_by_phase[n - 1])
            ana = drop_probability(n, TINY_CFG, TINY_TM)
            se = math.sqrt(max(ana * (1 - ana), 1e-12) / gens)
            assert abs(drops / gens - ana) < 3.5 * se + 1e-9

    def test_tiny_first_decode_location(self, tiny_run):
        _, events = tiny_run
        N, M = TINY_CFG.N, TINY_CFG.M
        s = events.event_slots
        frames = s // N
        first_mask = np.ones(len(s), dtype=bool)
        first_mask[1:] = frames[1:] != frames[:-1]
        lo = 200 // N + 1
        sel = first_mask & (frames >= lo) & (s < s[-1] - 4 * N)
        d_emp = (s[sel] % N) - (N - M) + 1
        n_frames = int(frames[-1]) - lo - 4
        first_ev, _ = first_decode_pmf(TINY_CFG, TINY_TM)
        for d in range(1, M + 1):
            hat = float((d_emp == d).sum()) / n_frames
            se = math.sqrt(first_ev[d - 1] * (1 - first_ev[d - 1]) / n_frames)
            assert abs(hat - first_ev[d - 1]) < 4 * se

    def test_tiny_interarrival_from_first_mixed_slot(self, tiny_run):
        _, events = tiny_run
        N, M = TINY_CFG.N, TINY_CFG.M
        s = events.event_slots
        start_idx = (s[:-1] % N) - (N - M) + 1
        gaps = np.diff(s)
        sel = start_idx == 1
        ana = interarrival_pmf(1, TINY_CFG, TINY_TM)
        vals, counts = np.unique(gaps[sel], return_counts=True)
        emp = np.zeros(int(vals.max()) + 1)
        emp[vals] = counts / counts.sum()
        emp_pmf = DiscretePmf(offset=1, masses=emp[1:], defect=0.0)
        assert conditional_tv(emp_pmf, ana) < 0.02

    def test_oma_table_latency_distribution(self, oma_lr_run):
        cfg = AccessConfig(scheme="oma", K=64, N=77, T_int=13, Q=4)
        masses, p_s2 = lr_kpis_oma(cfg, T2_TM)
        assert conditional_tv(oma_lr_run.latency_hist, masses) < 0.02
        assert abs(oma_lr_run.p_s2_hat - p_s2) < 3 * oma_lr_run.p_s2_se
        p1 = broadband_success_oma(64, 77, 0.1)
        s1 = broadband_throughput_oma(64, 77, 13, 0.1)
        assert abs(oma_lr_run.p_s1_hat - p1) < 3 * oma_lr_run.p_s1_se
        assert abs(oma_lr_run.s1_hat - s1) < 3 * oma_lr_run.s1_se + 1e-3

    def test_pnoma_table_latency_distribution(self, pnoma_lr_run):
        cfg = AccessConfig(scheme="pnoma", K=20, N=26, M=3, Q=4)
        masses, p_s2, p_s1, s1 = lr_kpis_pnoma(cfg, T2_TM)
        assert conditional_tv(pnoma_lr_run.latency_hist, masses) < 0.02
        assert abs(pnoma_lr_run.p_s2_hat - p_s2) < 3 * pnoma_lr_run.p_s2_se
        assert abs(pnoma_lr_run.p_s1_hat - p_s1) < 3 * pnoma_lr_run.p_s1_se

    def test_pnoma_table_paoi_percentile(self):
        cfg = AccessConfig(scheme="pnoma", K=22, N=29, M=5, Q=1)
        kpis = run_simulation(
            cfg, T2_TM, CaptureChannel.collision(), SimRun(slots=10_000_000, seed=31)
        )
        ana = paoi_pmf_pnoma(cfg, T2_TM)
        _, d90 = empirical_kpis_summary(kpis, 0.9)
        assert abs(d90 - pmf_percentile(ana, 0.9)) <= 2

    def test_oma_table_paoi_percentile(self):
        cfg = AccessConfig(scheme="oma", K=64, N=77, T_int=13, Q=1)
        kpis = run_simulation(
            cfg, T2_TM, CaptureChannel.collision(), SimRun(slots=10_000_000, seed=5)
        )
        _, _, paoi = paoi_kpis_oma(cfg, T2_TM)
        _, d90 = empirical_kpis_summary(kpis, 0.9)
        assert abs(d90 - pmf_percentile(paoi, 0.9)) <= 2

    def test_idle_intermittent_user_leaves_broadband_clean(self):
        tm0 = TrafficModel(alpha=0.0, eps1=0.1, eps2=0.05)
        for cfg in (
            AccessConfig(scheme="pnoma", K=20, N=26, M=3, Q=4),
            AccessConfig(scheme="oma", K=20, N=26, T_int=13, Q=1),
        ):
            kpis = run_simulation(
                cfg, tm0, CaptureChannel.collision(), SimRun(slots=2_000_000, seed=7)
            )
            expect = binomial_tail(20, 26, 0.9)
            assert kpis.n_packets == 0
            assert abs(kpis.p_s1_hat - expect) < 3 * kpis.p_s1_se


class TestChannelCoupling:
    def test_capture_delivers_superset_of_collision(self):
        run = SimRun(slots=500_000, seed=42, warmup=200)
        _, col = run_simulation(
            TINY_CFG, TINY_TM, CaptureChannel.collision(), run, collect_events=True
        )
        cap_ch = CaptureChannel.capture_from_erasures(GAMMA, TINY_TM.eps1, TINY_TM.eps2)
        kc, cap = run_simulation(TINY_CFG, TINY_TM, cap_ch, run, collect_events=True)
        assert set(col.delivery_gens.tolist()) <= set(cap.delivery_gens.tolist())
        assert set(col.decoded_frames.tolist()) <= set(cap.decoded_frames.tolist())

    def test_capture_never_hurts_the_estimates(self):
        run = SimRun(slots=500_000, seed=42, warmup=200)
        kc = run_simulation(TINY_CFG, TINY_TM, CaptureChannel.collision(), run)
        kp = run_simulation(
            TINY_CFG,
            TINY_TM,
            CaptureChannel.capture_from_erasures(GAMMA, TINY_TM.eps1, TINY_TM.eps2),
            run,
        )
        assert kp.p_s2_hat >= kc.p_s2_hat
        assert kp.p_s1_hat >= kc.p_s1_hat

    def test_oma_calibrated_capture_matches_collision_exactly(self):
        # no slot is ever shared, so the coupled runs are bit-identical
        cfg = AccessConfig(scheme="oma", K=3, N=5, T_int=4, Q=2)
        run = SimRun(slots=400_000, seed=9, warmup=200)
        a = run_simulation(cfg, TINY_TM, CaptureChannel.collision(), run)
        b = run_simulation(
            cfg,
            TINY_TM,
            CaptureChannel.capture_from_erasures(GAMMA, TINY_TM.eps1, TINY_TM.eps2),
            run,
        )
        assert a.p_s1_hat == b.p_s1_hat
        assert a.p_s2_hat == b.p_s2_hat
        assert np.array_equal(a.latency_hist.masses, b.latency_hist.masses)
        assert np.array_equal(a.paoi_hist.masses, b.paoi_hist.masses)


class TestSummary:
    def _kpis_with(self, latency, paoi, n_packets=10, n_events=10):
        return EmpiricalKpis(
            s1_hat=0.5,
            s1_se=0.0,
            p_s1_hat=0.9,
            p_s1_se=0.0,
            p_s2_hat=0.9,
            p_s2_se=0.0,
            latency_hist=latency,
            paoi_hist=paoi,
            n_frames=1,
            n_packets=n_packets,
            n_events=n_events,
        )

    def test_point_mass_percentile(self):
        point = DiscretePmf(offset=5, masses=np.array([1.0]))
        kpis = self._kpis_with(point, point)
        assert empirical_kpis_summary(kpis, 0.9) == (5, 5)

    def test_defect_above_tail_is_unattainable(self):
        lossy = DiscretePmf(offset=0, masses=np.array([0.85]), defect=0.15)
        point = DiscretePmf(offset=5, masses=np.array([1.0]))
        kpis = self._kpis_with(lossy, point)
        l90, d90 = empirical_kpis_summary(kpis, 0.9)
        assert l90 is None
        assert d90 == 5

    def test_empty_histograms_rejected(self):
        point = DiscretePmf(offset=5, masses=np.array([1.0]))
        with pytest.raises(ValueError, match="empty"):
            empirical_kpis_summary(self._kpis_with(point, point, n_packets=0), 0.9)
        with pytest.raises(ValueError, match="empty"):
            empirical_kpis_summary(self._kpis_with(point, point, n_events=0), 0.9)
        with pytest.raises(ValueError):
            empirical_kpis_summary(self._kpis_with(point, point), 1.0)

    def test_matches_pmf_percentile_on_a_run(self, tiny_run):
        kpis, _ = tiny_run
        l90, d90 = empirical_kpis_summary(kpis, 0.9)
        assert l90 == pmf_percentile(kpis.latency_hist, 0.9)
        assert d90 == pmf_percentile(kpis.paoi_hist, 0.9)


class TestSampleLog:
    def test_log_lines_match_event_buffers(self, tmp_path):
        path = tmp_path / "samples.log"
        kpis, events = run_simulation(
            TINY_CFG,
            TINY_TM,
            CaptureChannel.collision(),
            SimRun(slots=50_000, seed=3, warmup=200),
            collect_events=True,
            log_path=str(path),
        )
        lines = path.read_text().strip().splitlines()
        deliveries = [ln for ln in lines if ",delivery,2," in ln]
        frames = [ln for ln in lines if ",frame_decoded,1," in ln]
        assert len(deliveries) == len(events.delivery_slots)
        assert len(frames) == len(events.decoded_frames)
        slot, kind, user, lat = deliveries[0].split(",")
        assert kind == "delivery" and user == "2"
        assert int(slot) - int(lat) == events.delivery_gens[0]
