"""UE-assisted model monitoring.

Three report formats with different air-interface cost: a 1-bit
performance flag computed at the UE, a full report of predicted and
ground-truth precoders compared at the gNB, and a quantized metric
value compared at the gNB. All three feed the same run-length drift
detector: a counter that increments while the monitored value breaches
the threshold and raises a single alarm per breach episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .kpi import sgcs

BITS_PER_REAL = 64


class MonitoringMode(str, Enum):
    TYPE1 = "Type1"
    TYPE2 = "Type2"
    TYPE3 = "Type3"


@dataclass(frozen=True)
class MonitoringConfig:
    """Knobs for one monitoring session.

    eval_period_slots may be math.inf, the sentinel for monitoring
    switched off. gt_slot_offset is the lag between the slot a
    prediction applies to and the slot whose measurement serves as
    ground truth for it.
    """

    mode: MonitoringMode = MonitoringMode.TYPE1
    threshold_gamma: float = 0.8
    n_consec: int = 3
    quant_bits: int = 8
    gt_slot_offset: int = 0
    eval_period_slots: float = 40

    def validate(self) -> None:
        if not 0.0 < self.threshold_gamma < 1.0:
            raise ValueError("threshold_gamma must lie in (0, 1)")
        if self.n_consec < 1:
            raise ValueError("n_consec must be a positive integer")
        if not 1 <= self.quant_bits <= 16:
            raise ValueError("quant_bits must lie in [1, 16]")
        if self.gt_slot_offset < 0:
            raise ValueError("gt_slot_offset must be non-negative")
        if not math.isinf(self.eval_period_slots):
            if self.eval_period_slots != int(self.eval_period_slots) or self.eval_period_slots < 1:
                raise ValueError("eval_period_slots must be a positive integer or inf")


@dataclass(frozen=True)
class MonitoringReport:
    """One over-the-air monitoring record.

    Exactly the fields of the active mode are populated; validate()
    enforces that schema and the overhead accounting.
    """

    slot_index: int
    mode: MonitoringMode
    overhead_bits: int
    perf_bad: int | None = None
    predicted: np.ndarray | None = None
    ground_truth: np.ndarray | None = None
    quantized_sgcs_code: int | None = None

    def validate(self) -> None:
        if self.mode is MonitoringMode.TYPE1:
            ok = (
                self.perf_bad in (0, 1)
                and self.predicted is None
                and self.ground_truth is None
                and self.quantized_sgcs_code is None
                and self.overhead_bits == 1
            )
        elif self.mode is MonitoringMode.TYPE2:
            ok = (
                self.perf_bad is None
                and self.predicted is not None
                and self.ground_truth is not None
                and self.quantized_sgcs_code is None
                and self.overhead_bits
                == precoder_report_bits(len(self.predicted)) + precoder_report_bits(len(self.ground_truth))
            )
        else:
            ok = (
                self.perf_bad is None
                and self.predicted is None
                and self.ground_truth is None
                and self.quantized_sgcs_code is not None
                and self.overhead_bits >= 1
            )
        if not ok:
            raise ValueError(f"report fields inconsistent with mode {self.mode.value}")


@dataclass(frozen=True)
class DriftAlarm:
    slot_index: int
    source: str
    value: float


def precoder_report_bits(num_antennas: int) -> int:
    """Cost of one unquantized precoder: two 64-bit reals per entry."""
    return num_antennas * 2 * BITS_PER_REAL


def report_overhead_bits(mode: MonitoringMode, num_antennas: int, quant_bits: int = 8) -> int:
    if mode is MonitoringMode.TYPE1:
        return 1
    if mode is MonitoringMode.TYPE2:
        return 2 * precoder_report_bits(num_antennas)
    return quant_bits


def schedule_ground_truth(prediction_slot: int, cfg: MonitoringConfig) -> int:
    """Slot whose measurement is the reference for a prediction."""
    return prediction_slot + cfg.gt_slot_offset


def quantize_metric(value: float, bits: int) -> int:
    """Uniform code over [0, 1]: code = round(value * (2^bits - 1))."""
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"metric value {value!r} outside [0, 1]")
    return int(round(value * ((1 << bits) - 1)))


def dequantize_metric(code: int, bits: int) -> float:
    levels = (1 << bits) - 1
    if not 0 <= code <= levels:
        raise ValueError(f"code {code} outside [0, {levels}]")
    return code / levels


class ThresholdWatch:
    """Run-length breach counter with rising-edge alarm semantics.

    The counter increments on each breached observation and resets to
    zero on a clean one. The flag is level-triggered (counter >= n),
    the alarm fires only on the transition n-1 -> n, and acknowledge()
    zeroes the counter so a recovery episode starts fresh.
    """

    def __init__(self, threshold: float, n_consec: int, breach: str = "below") -> None:
        if n_consec < 1:
            raise ValueError("n_consec must be a positive integer")
        if breach not in ("below", "above"):
            raise ValueError("breach must be 'below' or 'above'")
        self.threshold = float(threshold)
        self.n_consec = int(n_consec)
        self.breach = breach
        self.count = 0

    def observe(self, value: float) -> tuple[bool, bool]:
        """Returns (flag, rising_edge) for one observation."""
        if self.breach == "below":
            breached = value < self.threshold
        else:
            breached = value > self.threshold
        self.count = self.count + 1 if breached else 0
        flag = self.count >= self.n_consec
        rising = self.count == self.n_consec
        return flag, rising

    def acknowledge(self) -> None:
        self.count = 0


@dataclass
class MonitoringSession:
    """Mutable per-functionality monitoring state.

    Owns the run-length watch for whichever mode the config selects;
    the controller calls acknowledge() whenever it executes an action
    so the episode counter restarts.
    """

    cfg: MonitoringConfig
    watch: ThresholdWatch = field(init=False)

    def __post_init__(self) -> None:
        self.cfg.validate()
        self.watch = ThresholdWatch(self.cfg.threshold_gamma, self.cfg.n_consec)

    def acknowledge(self) -> None:
        self.watch.acknowledge()

    def _alarm(self, slot_index: int, value: float, rising: bool) -> DriftAlarm | None:
        if not rising:
            return None
        return DriftAlarm(slot_index=slot_index, source="kpi_threshold", value=float(value))

    def evaluate_type1(self, slot_index: int, sgcs_value: float) -> tuple[MonitoringReport, DriftAlarm | None]:
        """UE-side comparison; only a 1-bit flag crosses the air interface."""
        if not 0.0 <= sgcs_value <= 1.0:
            raise ValueError(f"sgcs value {sgcs_value!r} outside [0, 1]")
        flag, rising = self.watch.observe(sgcs_value)
        report = MonitoringReport(
            slot_index=slot_index,
            mode=MonitoringMode.TYPE1,
            overhead_bits=1,
            perf_bad=int(flag),
        )
        report.validate()
        return report, self._alarm(slot_index, sgcs_value, rising)

    def evaluate_type2(
        self, slot_index: int, predicted: np.ndarray, ground_truth: np.ndarray
    ) -> tuple[MonitoringReport, float, DriftAlarm | None]:
        """UE reports both precoders; the gNB computes the metric itself."""
        value = sgcs(predicted, ground_truth)
        flag, rising = self.watch.observe(value)
        del flag
        report = MonitoringReport(
            slot_index=slot_index,
            mode=MonitoringMode.TYPE2,
            overhead_bits=precoder_report_bits(len(predicted)) + precoder_report_bits(len(ground_truth)),
            predicted=np.array(predicted, dtype=np.complex128),
            ground_truth=np.array(ground_truth, dtype=np.complex128),
        )
        report.validate()
        return report, value, self._alarm(slot_index, value, rising)

    def evaluate_type3(self, slot_index: int, sgcs_value: float) -> tuple[MonitoringReport, float, DriftAlarm | None]:
        """UE sends the quantized metric; the gNB thresholds the dequantized value."""
        code = quantize_metric(sgcs_value, self.cfg.quant_bits)
        dequantized = dequantize_metric(code, self.cfg.quant_bits)
        flag, rising = self.watch.observe(dequantized)
        del flag
        report = MonitoringReport(
            slot_index=slot_index,
            mode=MonitoringMode.TYPE3,
            overhead_bits=self.cfg.quant_bits,
            quantized_sgcs_code=code,
        )
        report.validate()
        return report, dequantized, self._alarm(slot_index, dequantized, rising)

    def evaluate(
        self,
        slot_index: int,
        *,
        sgcs_value: float | None = None,
        predicted: np.ndarray | None = None,
        ground_truth: np.ndarray | None = None,
    ) -> tuple[MonitoringReport, float, DriftAlarm | None]:
        """Mode dispatch used by the simulation loop.

        Always returns the gNB-visible metric value alongside the
        report so callers can log what the detector actually saw.
        """
        if self.cfg.mode is MonitoringMode.TYPE2:
            if predicted is None or ground_truth is None:
                raise ValueError("Type2 monitoring needs predicted and ground_truth precoders")
            return self.evaluate_type2(slot_index, predicted, ground_truth)
        if sgcs_value is None:
            raise ValueError(f"{self.cfg.mode.value} monitoring needs sgcs_value")
        if self.cfg.mode is MonitoringMode.TYPE1:
            report, alarm = self.evaluate_type1(slot_index, sgcs_value)
            return report, sgcs_value, alarm
        return self.evaluate_type3(slot_index, sgcs_value)


def evaluation_slots(num_slots: int, cfg: MonitoringConfig, warmup_slots: int = 0) -> list[int]:
    """Slots on which monitoring runs: multiples of the period, past warmup."""
    if math.isinf(cfg.eval_period_slots):
        return []
    period = int(cfg.eval_period_slots)
    return [t for t in range(num_slots) if t % period == 0 and t >= warmup_slots]


def monitoring_overhead(num_slots: int, cfg: MonitoringConfig, num_antennas: int, warmup_slots: int = 0) -> tuple[int, float]:
    """Total report bits over a run and the fraction of slots carrying them."""
    slots = evaluation_slots(num_slots, cfg, warmup_slots)
    per_report = report_overhead_bits(cfg.mode, num_antennas, cfg.quant_bits)
    if num_slots <= 0:
        return 0, 0.0
    return per_report * len(slots), len(slots) / num_slots
