"""Air-interface KPIs and input-distribution descriptors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import CsiMeasurement


def sgcs(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Squared generalized cosine similarity between two precoders.

    |<p, t>|^2 / (|p|^2 |t|^2), invariant to global phase and scale of
    either argument. Range [0, 1].
    """
    p = np.asarray(predicted).ravel()
    t = np.asarray(truth).ravel()
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    pn = np.vdot(p, p).real
    tn = np.vdot(t, t).real
    if pn < 1e-300 or tn < 1e-300:
        raise ValueError("sgcs undefined for zero vectors")
    return float(abs(np.vdot(p, t)) ** 2 / (pn * tn))


def nmse(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Normalized mean squared error |p - t|^2 / |t|^2."""
    p = np.asarray(predicted).ravel()
    t = np.asarray(truth).ravel()
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    tn = np.vdot(t, t).real
    if tn < 1e-300:
        raise ValueError("nmse undefined for zero reference")
    d = p - t
    return float(np.vdot(d, d).real / tn)


@dataclass(frozen=True)
class BeamKpiConfig:
    """Top-K beam accuracy window: K predicted vs M measured best beams
    over the N most recent intervals."""

    top_k: int
    top_m: int
    window_n: int

    def validate(self, num_beams: int) -> None:
        for name, v in (("top_k", self.top_k), ("top_m", self.top_m)):
            if not 1 <= v <= num_beams:
                raise ValueError(f"{name}={v} outside [1, {num_beams}]")
        if self.window_n < 1:
            raise ValueError("window_n must be positive")


def _top_indices(values: np.ndarray, count: int) -> np.ndarray:
    # Stable sort on negated values: ties resolve to the lowest index.
    return np.argsort(-np.asarray(values), kind="stable")[:count]


def beam_topk_accuracy(
    history: Sequence[tuple[np.ndarray, np.ndarray]], cfg: BeamKpiConfig
) -> float:
    """Fraction of recent intervals whose top-K predicted beams overlap
    the top-M measured beams.

    ``history`` holds (predicted_powers, measured_powers) pairs, oldest
    first; only the last ``window_n`` count.
    """
    if not history:
        raise ValueError("empty history")
    num_beams = len(history[0][0])
    cfg.validate(num_beams)
    recent = history[-cfg.window_n:]
    hits = 0
    for predicted, measured in recent:
        pred_top = set(_top_indices(predicted, cfg.top_k).tolist())
        meas_top = set(_top_indices(measured, cfg.top_m).tolist())
        if pred_top & meas_top:
            hits += 1
    return hits / len(recent)


@dataclass(frozen=True)
class KpiSample:
    """One monitored KPI value."""

    slot_index: int
    kind: str
    value: float
    model_id: str = ""
    model_version: int = 0


@dataclass
class InputDescriptor:
    """Summary of the input distribution a model was trained on (or is
    currently seeing): beam-power profile, Doppler estimate, mean SNR."""

    mean_beam_power: np.ndarray
    doppler_estimate: float
    mean_snr_db: float
    window_len: int

    def feature_tuple(self):
        return (
            tuple(float(x) for x in self.mean_beam_power),
            float(self.doppler_estimate),
            float(self.mean_snr_db),
        )


def derive_input_descriptor(
    measurements: Sequence[CsiMeasurement],
    codebook: np.ndarray,
    beam_powers: np.ndarray | None = None,
) -> InputDescriptor:
    """Build an InputDescriptor from a measurement window.

    ``beam_powers`` (one row per measurement) should be passed when beam
    sweep measurements exist; otherwise beam powers are taken from the
    measured precoders against ``codebook``.

    The Doppler estimate inverts the lag-1 precoder autocorrelation,
    arccos(mean |<m_t, m_{t+1}>|) / 2*pi. Additive measurement noise
    shrinks that inner product by 1/(1 + sigma^2), so each pair is
    rescaled by the noise powers implied by the reported SNRs before the
    arccos; this keeps the estimate about mobility rather than SNR.
    A single-sample window yields 0.
    """
    if not measurements:
        raise ValueError("empty measurement window")
    cb = np.asarray(codebook)
    if beam_powers is None:
        rows = [np.abs(cb.conj().T @ m.measured_precoder) ** 2 for m in measurements]
        beam_powers = np.stack(rows)
    else:
        beam_powers = np.asarray(beam_powers, dtype=np.float64)
        if beam_powers.shape[0] != len(measurements):
            raise ValueError("beam_powers rows must match the window length")

    mean_power = beam_powers.mean(axis=0)
    total = mean_power.sum()
    if total <= 0:
        raise ValueError("beam powers sum to zero")
    mean_power = mean_power / total

    if len(measurements) < 2:
        doppler = 0.0
    else:
        acc = 0.0
        for a, b in zip(measurements, measurements[1:]):
            inner = abs(np.vdot(a.measured_precoder, b.measured_precoder))
            debias = math.sqrt(_noise_gain(a.snr_db) * _noise_gain(b.snr_db))
            acc += inner * debias
        mean_inner = min(1.0, max(0.0, acc / (len(measurements) - 1)))
        doppler = math.acos(mean_inner) / (2 * math.pi)

    snr_vals = [m.snr_db for m in measurements]
    return InputDescriptor(
        mean_beam_power=mean_power,
        doppler_estimate=doppler,
        mean_snr_db=float(np.mean(snr_vals)),
        window_len=len(measurements),
    )


def _noise_gain(snr_db: float) -> float:
    if math.isinf(snr_db) and snr_db > 0:
        return 1.0
    return 1.0 + 10.0 ** (-snr_db / 10.0)


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def descriptor_divergence(a: InputDescriptor, b: InputDescriptor) -> float:
    """Distance between two descriptors.

    Jensen-Shannon divergence (natural log) of the beam distributions,
    plus |doppler delta|, plus |snr delta| / 30, all weighted equally.
    Zero iff the feature tuples coincide.
    """
    p = np.asarray(a.mean_beam_power, dtype=np.float64)
    q = np.asarray(b.mean_beam_power, dtype=np.float64)
    if p.size != q.size:
        raise ValueError("beam profiles have different codebook sizes")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)
    js = 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    js = max(0.0, js)

    snr_a, snr_b = a.mean_snr_db, b.mean_snr_db
    if math.isinf(snr_a) and math.isinf(snr_b):
        snr_term = 0.0
    else:
        snr_term = abs(snr_a - snr_b) / 30.0
    return js + abs(a.doppler_estimate - b.doppler_estimate) + snr_term


def misalignment_divergence(a: InputDescriptor, b: InputDescriptor) -> float:
    """Descriptor distance with the SNR term dropped.

    Used where SNR change is accounted for separately and only spatial or
    mobility drift should register.
    """
    p = np.asarray(a.mean_beam_power, dtype=np.float64)
    q = np.asarray(b.mean_beam_power, dtype=np.float64)
    if p.size != q.size:
        raise ValueError("beam profiles have different codebook sizes")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)
    js = max(0.0, 0.5 * _kl(p, m) + 0.5 * _kl(q, m))
    return js + abs(a.doppler_estimate - b.doppler_estimate)
