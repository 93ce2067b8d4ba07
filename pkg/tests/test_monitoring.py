"""Monitoring modes, run-length alarm semantics, and overhead accounting."""

import math

import numpy as np
import pytest

from lcmsim.kpi import sgcs
from lcmsim.monitoring import (
    DriftAlarm,
    MonitoringConfig,
    MonitoringMode,
    MonitoringReport,
    MonitoringSession,
    ThresholdWatch,
    dequantize_metric,
    evaluation_slots,
    monitoring_overhead,
    precoder_report_bits,
    quantize_metric,
    report_overhead_bits,
    schedule_ground_truth,
)

GAMMA = 0.8
ABOVE = 0.9
BELOW = 0.5


def window_scan_oracle(values, gamma, n):
    """Flag and alarm decisions derived directly from windows.

    The flag at position i is set iff the n most recent values,
    ending at i, are all below gamma. The alarm at position i fires
    iff those n values are below gamma and the value just before the
    window (if any) is not, so each maximal below-run of length
    r >= n contributes exactly one alarm.
    """
    below = [v < gamma for v in values]
    flags, alarms = [], []
    for i in range(len(values)):
        window_bad = i >= n - 1 and all(below[i - n + 1 : i + 1])
        fresh = i - n < 0 or not below[i - n]
        flags.append(1 if window_bad else 0)
        alarms.append(window_bad and fresh)
    return flags, alarms


def run_type1(values, gamma=GAMMA, n=3):
    cfg = MonitoringConfig(mode=MonitoringMode.TYPE1, threshold_gamma=gamma, n_consec=n)
    session = MonitoringSession(cfg)
    flags, alarms = [], []
    for slot, value in enumerate(values):
        report, alarm = session.evaluate_type1(slot, value)
        flags.append(report.perf_bad)
        alarms.append(alarm is not None)
    return flags, alarms


class TestType1:
    def test_all_good_no_flag_no_alarm(self):
        flags, alarms = run_type1([ABOVE, ABOVE, ABOVE])
        assert flags == [0, 0, 0]
        assert alarms == [False, False, False]

    def test_three_bad_flags_third_and_alarms_once(self):
        flags, alarms = run_type1([BELOW, BELOW, BELOW])
        assert flags == [0, 0, 1]
        assert alarms == [False, False, True]

    def test_reset_in_the_middle_suppresses_flag(self):
        flags, alarms = run_type1([BELOW, BELOW, ABOVE, BELOW])
        assert flags == [0, 0, 0, 0]
        assert not any(alarms)

    def test_flag_stays_level_while_breach_continues(self):
        flags, alarms = run_type1([BELOW] * 6, n=3)
        assert flags == [0, 0, 1, 1, 1, 1]
        assert alarms == [False, False, True, False, False, False]

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_exhaustive_patterns_match_window_scan_oracle(self, n):
        # Every above/below pattern of length 8.
        for pattern in range(256):
            values = [BELOW if (pattern >> i) & 1 else ABOVE for i in range(8)]
            flags, alarms = run_type1(values, n=n)
            want_flags, want_alarms = window_scan_oracle(values, GAMMA, n)
            assert flags == want_flags, (pattern, n)
            assert alarms == want_alarms, (pattern, n)

    def test_acknowledge_restarts_episode(self):
        cfg = MonitoringConfig(mode=MonitoringMode.TYPE1, threshold_gamma=GAMMA, n_consec=2)
        session = MonitoringSession(cfg)
        _, first = session.evaluate_type1(0, BELOW)
        _, second = session.evaluate_type1(1, BELOW)
        assert first is None and second is not None
        session.acknowledge()
        _, third = session.evaluate_type1(2, BELOW)
        assert third is None
        _, fourth = session.evaluate_type1(3, BELOW)
        assert fourth is not None

    def test_reset_between_consecutive_alarms(self):
        rng = np.random.default_rng(11)
        cfg = MonitoringConfig(mode=MonitoringMode.TYPE1, threshold_gamma=GAMMA, n_consec=2)
        session = MonitoringSession(cfg)
        alarm_slots, reset_slots = [], []
        for slot in range(400):
            value = float(rng.uniform(0.0, 1.0))
            _, alarm = session.evaluate_type1(slot, value)
            if value >= GAMMA:
                reset_slots.append(slot)
            if alarm is not None:
                alarm_slots.append(slot)
        assert len(alarm_slots) >= 2
        for earlier, later in zip(alarm_slots, alarm_slots[1:]):
            assert any(earlier < r < later for r in reset_slots)

    def test_out_of_range_value_rejected(self):
        session = MonitoringSession(MonitoringConfig())
        with pytest.raises(ValueError):
            session.evaluate_type1(0, 1.5)

    def test_alarm_carries_slot_source_and_value(self):
        flags, _ = run_type1([BELOW, BELOW, BELOW], n=3)
        session = MonitoringSession(MonitoringConfig(n_consec=1))
        _, alarm = session.evaluate_type1(7, 0.25)
        assert alarm == DriftAlarm(slot_index=7, source="kpi_threshold", value=0.25)
        assert flags[-1] == 1


class TestType2:
    def test_identical_precoders_metric_one_no_alarm(self):
        session = MonitoringSession(MonitoringConfig(mode=MonitoringMode.TYPE2))
        w = np.array([1, 1j, -1, -1j]) / 2.0
        report, value, alarm = session.evaluate_type2(0, w, w)
        assert value == pytest.approx(1.0, abs=1e-12)
        assert alarm is None
        assert np.array_equal(report.predicted, w)
        assert np.array_equal(report.ground_truth, w)

    def test_gnb_metric_matches_direct_recomputation(self):
        rng = np.random.default_rng(3)
        session = MonitoringSession(MonitoringConfig(mode=MonitoringMode.TYPE2))
        for slot in range(50):
            a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
            b = rng.standard_normal(16) + 1j * rng.standard_normal(16)
            a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
            _, value, _ = session.evaluate_type2(slot, a, b)
            assert value == pytest.approx(sgcs(a, b), abs=1e-12)

    def test_dimension_mismatch_rejected(self):
        session = MonitoringSession(MonitoringConfig(mode=MonitoringMode.TYPE2))
        with pytest.raises(ValueError):
            session.evaluate_type2(0, np.ones(4) / 2.0, np.ones(8) / np.sqrt(8))

    def test_alarm_rule_applies_to_gnb_side_value(self):
        session = MonitoringSession(MonitoringConfig(mode=MonitoringMode.TYPE2, n_consec=1))
        w = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)
        orthogonal = np.array([0.0, 1.0, 0.0, 0.0], dtype=complex)
        _, value, alarm = session.evaluate_type2(4, w, orthogonal)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert alarm is not None and alarm.slot_index == 4


class TestType3:
    def test_boundary_codes(self):
        assert quantize_metric(1.0, 8) == 255
        assert quantize_metric(0.0, 8) == 0

    def test_dequantization_error_bound(self):
        rng = np.random.default_rng(5)
        values = rng.uniform(0.0, 1.0, size=10_000)
        for value in values:
            code = quantize_metric(float(value), 8)
            assert abs(dequantize_metric(code, 8) - value) <= 1.0 / 510.0 + 1e-15

    def test_round_trip_report_fields(self):
        session = MonitoringSession(MonitoringConfig(mode=MonitoringMode.TYPE3, quant_bits=8))
        report, dequantized, _ = session.evaluate_type3(2, 0.5)
        assert report.quantized_sgcs_code == quantize_metric(0.5, 8)
        assert dequantized == pytest.approx(report.quantized_sgcs_code / 255)
        assert report.overhead_bits == 8

    def test_value_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError):
            quantize_metric(-0.01, 8)
        with pytest.raises(ValueError):
            quantize_metric(1.01, 8)

    def test_agrees_with_type1_away_from_threshold(self):
        """Quantization can only change decisions within a step of gamma."""
        rng = np.random.default_rng(9)
        bits = 4
        step = 1.0 / ((1 << bits) - 1)
        values = rng.uniform(0.0, 1.0, size=500)
        cfg1 = MonitoringConfig(mode=MonitoringMode.TYPE1, threshold_gamma=GAMMA, n_consec=2)
        cfg3 = MonitoringConfig(mode=MonitoringMode.TYPE3, threshold_gamma=GAMMA, n_consec=2, quant_bits=bits)
        s1, s3 = MonitoringSession(cfg1), MonitoringSession(cfg3)
        for slot, value in enumerate(values):
            value = float(value)
            _, alarm1 = s1.evaluate_type1(slot, value)
            _, _, alarm3 = s3.evaluate_type3(slot, value)
            below1 = value < GAMMA
            below3 = dequantize_metric(quantize_metric(value, bits), bits) < GAMMA
            if below1 != below3:
                assert abs(value - GAMMA) <= step
            if (alarm1 is None) != (alarm3 is None):
                # A divergent alarm needs at least one near-threshold value.
                assert any(abs(float(v) - GAMMA) <= step for v in values[: slot + 1])


class TestOverhead:
    def test_per_report_ordering_for_32_antennas(self):
        t1 = report_overhead_bits(MonitoringMode.TYPE1, 32)
        t2 = report_overhead_bits(MonitoringMode.TYPE2, 32)
        t3 = report_overhead_bits(MonitoringMode.TYPE3, 32, quant_bits=8)
        assert t2 > t3 > t1
        assert t1 == 1
        assert t2 == 2 * 32 * 2 * 64
        assert t3 == 8

    def test_precoder_report_bits(self):
        assert precoder_report_bits(32) == 32 * 2 * 64

    def test_monitoring_off_sentinel(self):
        cfg = MonitoringConfig(eval_period_slots=math.inf)
        total, fraction = monitoring_overhead(1000, cfg, num_antennas=32)
        assert total == 0
        assert fraction == 0.0

    def test_type1_hundred_evaluations_hundred_bits(self):
        cfg = MonitoringConfig(mode=MonitoringMode.TYPE1, eval_period_slots=20)
        total, fraction = monitoring_overhead(2000, cfg, num_antennas=32)
        assert total == 100
        assert fraction == pytest.approx(100 / 2000)

    def test_halving_period_doubles_evaluations(self):
        slow = MonitoringConfig(eval_period_slots=20)
        fast = MonitoringConfig(eval_period_slots=10)
        n_slow = len(evaluation_slots(2000, slow))
        n_fast = len(evaluation_slots(2000, fast))
        assert n_fast == 2 * n_slow

    def test_warmup_excludes_early_slots(self):
        cfg = MonitoringConfig(eval_period_slots=10)
        slots = evaluation_slots(45, cfg, warmup_slots=11)
        assert slots == [20, 30, 40]


class TestConfigAndSchema:
    def test_schedule_ground_truth(self):
        assert schedule_ground_truth(10, MonitoringConfig(gt_slot_offset=0)) == 10
        assert schedule_ground_truth(10, MonitoringConfig(gt_slot_offset=2)) == 12

    def test_negative_offset_rejected(self):
        with pytest.raises(ValueError):
            MonitoringConfig(gt_slot_offset=-1).validate()

    def test_gamma_bounds(self):
        with pytest.raises(ValueError):
            MonitoringConfig(threshold_gamma=0.0).validate()
        with pytest.raises(ValueError):
            MonitoringConfig(threshold_gamma=1.0).validate()

    def test_quant_bits_bounds(self):
        with pytest.raises(ValueError):
            MonitoringConfig(quant_bits=0).validate()
        with pytest.raises(ValueError):
            MonitoringConfig(quant_bits=17).validate()

    def test_report_schema_mismatch_detected(self):
        bad = MonitoringReport(slot_index=0, mode=MonitoringMode.TYPE1, overhead_bits=1)
        with pytest.raises(ValueError):
            bad.validate()
        overhead_wrong = MonitoringReport(
            slot_index=0, mode=MonitoringMode.TYPE1, overhead_bits=2, perf_bad=0
        )
        with pytest.raises(ValueError):
            overhead_wrong.validate()

    def test_watch_breach_above_mode(self):
        watch = ThresholdWatch(0.25, 2, breach="above")
        assert watch.observe(0.3) == (False, False)
        assert watch.observe(0.3) == (True, True)
        assert watch.observe(0.1) == (False, False)
