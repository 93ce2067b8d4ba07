"""Slot-driven closed-loop simulation.

Each slot: the environment advances, the UE measures, the active model
predicts (or the legacy codebook path reports while in fallback), the
gNB applies the precoder that targeted this slot, and on evaluation
slots monitoring runs, may raise an alarm, and the management loop
decides and executes an action. Fully deterministic given the config.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .channel import CsiMeasurement, dft_codebook, generate_trace, measure_csi
from .config import ScenarioConfig
from .controller import (
    ActionKind,
    ControlEvent,
    DecisionInputs,
    EventKind,
    ExecutionContext,
    InferenceAgent,
    LoopState,
    decide,
    decide_reactivation,
    execute,
    legacy_csi_report,
    transition,
)
from .kpi import (
    derive_input_descriptor,
    descriptor_divergence,
    misalignment_divergence,
    nmse,
    sgcs,
)
from .models import (
    ModelPackage,
    PredictorConfig,
    fit_adaptation_delta,
    predict_csi,
    train_predictor,
)
from .monitoring import MonitoringSession, evaluation_slots
from .registry import ModelRegistry

__all__ = [
    "EventLogRecord",
    "MetricsRow",
    "RunResult",
    "METRICS_HEADER",
    "run_scenario",
    "write_metrics",
    "write_events",
    "simulation_warmup",
]

METRICS_HEADER = (
    "slot,sgcs,nmse,loop_state,active_model_id,active_model_version,"
    "perf_bad,action,descriptor_divergence,monitor_overhead_bits"
)

@dataclass(frozen=True)
class EventLogRecord:
    """One append-only audit line: slot, source module, kind, payload."""

    slot: int
    source: str
    kind: str
    payload: tuple[tuple[str, str], ...] = ()

    def format(self) -> str:
        parts = [f"slot={self.slot}", f"source={self.source}", f"kind={self.kind}"]
        for key, value in self.payload:
            parts.append(f"{key}={_sanitize(value)}")
        return " ".join(parts)


def _sanitize(value: str) -> str:
    return "_".join(str(value).split())


@dataclass
class MetricsRow:
    """One CSV row; empty strings mark fields without a value this slot."""

    slot: int
    sgcs: str = ""
    nmse: str = ""
    loop_state: str = ""
    active_model_id: str = ""
    active_model_version: str = ""
    perf_bad: str = ""
    action: str = ""
    descriptor_divergence: str = ""
    monitor_overhead_bits: str = ""

    def format(self) -> str:
        return ",".join(
            [
                str(self.slot),
                self.sgcs,
                self.nmse,
                self.loop_state,
                self.active_model_id,
                self.active_model_version,
                self.perf_bad,
                self.action,
                self.descriptor_divergence,
                self.monitor_overhead_bits,
            ]
        )


@dataclass
class RunResult:
    rows: list[MetricsRow]
    events: list[EventLogRecord]
    summary: dict

    def metrics_text(self) -> str:
        lines = [METRICS_HEADER]
        lines.extend(row.format() for row in self.rows)
        return "\n".join(lines) + "\n"

    def events_text(self) -> str:
        return "".join(event.format() + "\n" for event in self.events)


def simulation_warmup(config: ScenarioConfig) -> int:
    """First slot eligible for monitoring: the prediction pipeline must
    be full and a whole descriptor window must exist."""
    pipeline = config.predictor_order - 1 + config.predictor_horizon
    return max(pipeline, config.policy.descriptor_window_slots)


def _pretrain_models(config: ScenarioConfig, trace, registry: ModelRegistry) -> list[ModelPackage]:
    """Train and store one predictor per pretrain window.

    Windows are slices of the run trace, measured through the same
    per-slot noise streams the run itself will see, so the stored input
    descriptors genuinely describe the slots their regime occupies.
    """
    packages = []
    pcfg = PredictorConfig(config.predictor_order, config.predictor_horizon)
    for spec in config.pretrain:
        history = [
            measure_csi(trace.true_precoders[t], float(trace.snr_db[t]), t, config.seed)
            for t in range(spec.start_slot, spec.end_slot)
        ]
        package = train_predictor(
            history,
            pcfg,
            codebook=trace.beam_codebook,
            beam_powers=trace.per_beam_power[spec.start_slot : spec.end_slot],
        )
        registry.store(package, stored_at_slot=0)
        packages.append(package)
    return packages


class _Loop:
    """Mutable state of one scenario run."""

    def __init__(self, config: ScenarioConfig, registry_root: str):
        config.validate()
        self.config = config
        self.codebook = dft_codebook(config.num_antennas)
        self.trace = generate_trace(
            config.regime_schedule,
            config.num_slots,
            config.num_antennas,
            self.codebook,
            config.seed,
        )
        for start, snr_db in config.snr_overrides:
            self.trace.snr_db[start:] = snr_db
        self.registry = ModelRegistry(registry_root)
        self.agent = InferenceAgent()
        self.session = MonitoringSession(config.monitoring)
        self.policy = config.policy
        self.tag = f"csi-pred-h{config.predictor_horizon}"
        self.state = LoopState.STABLE
        self.events: list[EventLogRecord] = []
        self.rows: list[MetricsRow] = []
        self.measurements: list[CsiMeasurement] = []
        self.applied: list[tuple[np.ndarray, str] | None] = []
        self.pending: dict[int, np.ndarray] = {}
        self.pending_legacy: dict[int, int] = {}
        # Adaptation deltas draw on the same recent-history budget as a
        # retrain; the short descriptor window excites too few directions
        # for a stable correction fit.
        pair_window = max(
            self.policy.min_train_samples, 4 * self.policy.descriptor_window_slots
        )
        self.pairs: deque = deque(maxlen=pair_window)
        self.eval_counter = 0
        self.last_action_kind: ActionKind | None = None
        self.last_action_eval: int | None = None
        self.good_streak = 0
        self.alarm_count = 0
        self.action_counts: dict[str, int] = {}
        self.eval_set = set(
            evaluation_slots(config.num_slots, config.monitoring, simulation_warmup(config))
        )

    # -- logging helpers --------------------------------------------

    def log(self, slot: int, source: str, kind: str, **payload: str) -> None:
        self.events.append(
            EventLogRecord(slot=slot, source=source, kind=kind, payload=tuple(payload.items()))
        )

    def log_transition(self, slot: int, event: ControlEvent) -> None:
        before = self.state
        self.state = transition(self.state, event)
        if self.state is not before:
            self.log(
                slot,
                "controller",
                "StateTransition",
                frm=before.value,
                to=self.state.value,
                on=event.kind.value,
            )

    # -- capabilities handed to execute() ---------------------------

    def _retrain(self) -> ModelPackage:
        window = max(self.policy.min_train_samples, 4 * self.policy.descriptor_window_slots)
        history = self.measurements[-window:]
        beam_powers = self.trace.per_beam_power[[m.slot_index for m in history]]
        return train_predictor(
            history,
            PredictorConfig(self.config.predictor_order, self.config.predictor_horizon),
            codebook=self.codebook,
            beam_powers=beam_powers,
        )

    def _fit_delta(self, base: ModelPackage, rank: int):
        return fit_adaptation_delta(base, list(self.pairs), rank)

    def context(self) -> ExecutionContext:
        return ExecutionContext(
            registry=self.registry,
            agent=self.agent,
            functionality_tag=self.tag,
            retrain=self._retrain,
            fit_delta=self._fit_delta,
            delta_rank=self.policy.delta_rank,
        )

    # -- per-slot stages ---------------------------------------------

    def measure(self, slot: int) -> CsiMeasurement:
        m = measure_csi(
            self.trace.true_precoders[slot],
            float(self.trace.snr_db[slot]),
            slot,
            self.config.seed,
        )
        self.measurements.append(m)
        return m

    def report(self, slot: int, measurement: CsiMeasurement) -> None:
        """Exactly one of the two reporting routes runs per slot."""
        horizon = self.config.predictor_horizon
        if self.agent.fallback:
            pmi = legacy_csi_report(measurement.measured_precoder, self.codebook)
            self.pending_legacy[slot + horizon] = pmi
        elif (
            self.agent.active_model is not None
            and len(self.measurements) >= self.config.predictor_order
        ):
            prediction = predict_csi(
                self.agent.active_model, self.measurements[-self.config.predictor_order :]
            )
            self.pending[slot + horizon] = prediction

    def apply(self, slot: int, measurement: CsiMeasurement, row: MetricsRow) -> None:
        entry = None
        if slot in self.pending:
            entry = (self.pending.pop(slot), "model")
        elif slot in self.pending_legacy:
            pmi = self.pending_legacy.pop(slot)
            entry = (self.codebook[:, pmi], "legacy")
        self.applied.append(entry)
        if entry is None:
            return
        vector, kind = entry
        truth = self.trace.true_precoders[slot]
        row.sgcs = repr(sgcs(vector, truth))
        row.nmse = repr(nmse(vector, truth))
        if kind == "model":
            self.pairs.append((vector, measurement.measured_precoder))

    def current_descriptor(self, slot: int):
        width = min(self.policy.descriptor_window_slots, slot + 1)
        window = self.measurements[slot - width + 1 : slot + 1]
        beam_powers = self.trace.per_beam_power[slot - width + 1 : slot + 1]
        return derive_input_descriptor(window, self.codebook, beam_powers)

    def acknowledge_action(self, action_kind: ActionKind) -> None:
        self.session.acknowledge()
        self.good_streak = 0
        self.last_action_kind = action_kind
        self.last_action_eval = self.eval_counter
        name = action_kind.value
        self.action_counts[name] = self.action_counts.get(name, 0) + 1

    def handle_follow_up(self, slot: int, follow: ControlEvent | None) -> None:
        if follow is None:
            return
        if follow.kind is EventKind.MODEL_ACTIVATED:
            self.log(slot, "controller", "ModelActivated", target=follow.detail)
            self.pairs.clear()
        elif follow.kind is EventKind.ACTION_FAILED:
            self.log(
                slot,
                "controller",
                "ActionFailed",
                action=follow.action_kind.value,
                reason=follow.detail,
            )
        self.log_transition(slot, follow)

    def run_decision(self, slot: int, divergence: float, misalignment: float, descriptor) -> str:
        active = self.agent.active_model.descriptor
        evals_since = (
            self.eval_counter - self.last_action_eval
            if self.last_action_eval is not None
            else 10**9
        )
        inputs = DecisionInputs(
            slot_index=slot,
            current_descriptor=descriptor,
            active_descriptor=active.input_descriptor,
            divergence=divergence,
            misalignment=misalignment,
            mean_snr_db=descriptor.mean_snr_db,
            active_model_id=active.model_id,
            active_model_version=active.model_version,
            buffered_samples=len(self.measurements),
            last_action_kind=self.last_action_kind,
            evals_since_last_action=evals_since,
        )
        action = decide(inputs, self.policy, self.registry)
        self.log(slot, "controller", "ActionIssued", action=action.kind.value,
                 **{k: str(v) for k, v in sorted(action.rationale.items())})
        self.log_transition(
            slot, ControlEvent(EventKind.ACTION_ISSUED, slot, action_kind=action.kind)
        )
        follow = execute(action, self.context(), slot)
        if action.kind is ActionKind.FALLBACK:
            self.pending.clear()
        self.handle_follow_up(slot, follow)
        self.acknowledge_action(action.kind)
        return action.kind.value

    def try_reactivate(self, slot: int, descriptor) -> str:
        action = decide_reactivation(descriptor, self.policy, self.registry, slot)
        if action is None:
            return ""
        self.log(slot, "controller", "ActionIssued", action=action.kind.value,
                 **{k: str(v) for k, v in sorted(action.rationale.items())})
        self.log_transition(
            slot, ControlEvent(EventKind.ACTION_ISSUED, slot, action_kind=action.kind)
        )
        follow = execute(action, self.context(), slot)
        self.handle_follow_up(slot, follow)
        self.acknowledge_action(action.kind)
        return action.kind.value

    def monitor(self, slot: int, row: MetricsRow) -> None:
        descriptor = self.current_descriptor(slot)
        self.eval_counter += 1

        if self.agent.fallback:
            row.action = self.try_reactivate(slot, descriptor)
            return

        offset = self.config.monitoring.gt_slot_offset
        target = slot - offset
        entry = self.applied[target] if 0 <= target < len(self.applied) else None
        if entry is None or entry[1] != "model":
            return
        predicted = entry[0]
        ground_truth = self.measurements[target].measured_precoder
        ue_value = sgcs(predicted, ground_truth)
        report, gnb_value, alarm = self.session.evaluate(
            slot, sgcs_value=ue_value, predicted=predicted, ground_truth=ground_truth
        )
        if report.perf_bad is not None:
            perf_bad = report.perf_bad
        else:
            perf_bad = int(gnb_value < self.config.monitoring.threshold_gamma)
        row.perf_bad = str(perf_bad)
        row.monitor_overhead_bits = str(report.overhead_bits)
        self.log(
            slot,
            "monitor",
            "MonitoringReport",
            mode=report.mode.value,
            value=repr(float(gnb_value)),
            perf_bad=str(perf_bad),
            overhead_bits=str(report.overhead_bits),
        )

        active_desc = self.agent.active_model.descriptor.input_descriptor
        divergence = descriptor_divergence(descriptor, active_desc)
        misalignment = misalignment_divergence(descriptor, active_desc)
        row.descriptor_divergence = repr(divergence)

        if gnb_value >= self.config.monitoring.threshold_gamma:
            self.good_streak += 1
            if self.state is LoopState.RECOVERING and self.good_streak >= self.policy.n_recover:
                self.log(slot, "monitor", "KpiRecovered", streak=str(self.good_streak))
                self.log_transition(slot, ControlEvent(EventKind.KPI_RECOVERED, slot))
                self.good_streak = 0
        else:
            self.good_streak = 0

        if alarm is not None:
            self.alarm_count += 1
            self.log(
                slot,
                "monitor",
                "DriftAlarm",
                detector=alarm.source,
                value=repr(alarm.value),
            )
            self.log_transition(
                slot, ControlEvent(EventKind.DRIFT_ALARM, slot, source=alarm.source)
            )
            if self.state is LoopState.DEGRADED:
                row.action = self.run_decision(slot, divergence, misalignment, descriptor)

    def run(self) -> RunResult:
        packages = _pretrain_models(self.config, self.trace, self.registry)
        for package in packages:
            desc = package.descriptor
            self.log(
                0,
                "registry",
                "ModelStored",
                model_id=desc.model_id,
                version=str(desc.model_version),
                tag=desc.functionality_tag,
            )
        first = packages[0]
        self.registry.activate(first.descriptor.model_id, first.descriptor.model_version)
        self.agent.activate(first)
        self.log(
            0,
            "controller",
            "ModelActivated",
            target=f"{first.descriptor.model_id}:v{first.descriptor.model_version}",
        )

        for slot in range(self.config.num_slots):
            row = MetricsRow(slot=slot)
            measurement = self.measure(slot)
            self.report(slot, measurement)
            self.apply(slot, measurement, row)
            if slot in self.eval_set:
                self.monitor(slot, row)
            row.loop_state = self.state.value
            if self.agent.active_model is not None:
                row.active_model_id = self.agent.active_model.descriptor.model_id
                row.active_model_version = str(
                    self.agent.active_model.descriptor.model_version
                )
            self.rows.append(row)

        achieved = [float(r.sgcs) for r in self.rows if r.sgcs]
        overhead = sum(int(r.monitor_overhead_bits) for r in self.rows if r.monitor_overhead_bits)
        summary = {
            "final_state": self.state.value,
            "slots": self.config.num_slots,
            "alarms": self.alarm_count,
            "actions": dict(sorted(self.action_counts.items())),
            "mean_sgcs": float(np.mean(achieved)) if achieved else float("nan"),
            "monitor_overhead_bits": overhead,
            "evaluations": self.eval_counter,
        }
        return RunResult(rows=self.rows, events=self.events, summary=summary)


def run_scenario(config: ScenarioConfig, registry_root: str) -> RunResult:
    """Execute one scenario; the registry directory must be fresh."""
    return _Loop(config, registry_root).run()


def write_metrics(result: RunResult, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(result.metrics_text())


def write_events(result: RunResult, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(result.events_text())
