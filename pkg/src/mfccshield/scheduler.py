"""Latency-budgeted chunk scheduling for streaming perturbation.

Chunks arrive every ``chunk_ms``; chunk ``i`` is available once its last
sample is captured, at ``(i + 1) * chunk_ms``. One chunk is processed at a
time, and a chunk's latency is its wait for the engine plus its processing
time. The first-iteration overhead is a cold-start cost paid once per
stream; afterwards each iteration costs ``per_iter_ms``, re-estimated after
every chunk by an exponential moving average.

A chunk is granted the iterations that fit the latency budget, but never
more than one chunk period of work, so the engine keeps up with the input
and any backlog drains. Grants depend on the budget and the cost estimate
only, not on the current backlog: lowering the budget can never raise a
grant later in the stream.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .attack import AttackConfig, apply_noise, generate_noise
from .audio_io import AudioBuffer
from .errors import InvalidConfig
from .mfcc import MfccConfig

EMA_ALPHA = 0.3
# default cost model: measured phone-class timings for cold start and each iteration
DEFAULT_FIXED_MS = 302.0
DEFAULT_PER_ITER_MS = 42.0


@dataclass(frozen=True)
class LatencyProfile:
    name: str
    budget_ms: float
    chunk_ms: float = 200.0

    def __post_init__(self):
        if not self.budget_ms > 0:
            raise InvalidConfig("budget_ms", f"must be > 0, got {self.budget_ms}")
        if not self.chunk_ms > 0:
            raise InvalidConfig("chunk_ms", f"must be > 0, got {self.chunk_ms}")


PROFILES = {
    "telephone": LatencyProfile("telephone", 450.0),
    "messaging": LatencyProfile("messaging", 1000.0),
}


def get_profile(name: str, budget_ms: float | None = None, chunk_ms: float | None = None) -> LatencyProfile:
    if name in PROFILES:
        profile = PROFILES[name]
    elif budget_ms is not None:
        profile = LatencyProfile(name, budget_ms)
    else:
        raise InvalidConfig("profile", f"unknown profile {name!r}; choose {sorted(PROFILES)} or set a budget")
    if budget_ms is not None:
        profile = replace(profile, budget_ms=budget_ms)
    if chunk_ms is not None:
        profile = replace(profile, chunk_ms=chunk_ms)
    return profile


@dataclass
class ScheduleDecision:
    chunk_index: int
    iterations_granted: int
    deadline: float
    actual_ms: float = 0.0
    wait_ms: float = 0.0
    latency_ms: float = 0.0
    flagged: bool = False


def plan_iterations(profile_or_budget, per_iter_ms: float, fixed_ms: float = 0.0) -> tuple[int, bool]:
    """Largest ``k >= 1`` with ``fixed_ms + k * per_iter_ms <= budget``.

    Returns ``(k, budget_exceeded)``; when even one iteration misses the
    budget, ``(1, True)``.
    """
    budget = getattr(profile_or_budget, "budget_ms", profile_or_budget)
    if not per_iter_ms > 0:
        raise InvalidConfig("per_iter_ms", f"must be > 0, got {per_iter_ms}")
    # tolerance keeps exact fits like 1000 - 302 = 16.6 * 42 from rounding down
    k = math.floor((budget - fixed_ms) / per_iter_ms + 1e-9)
    if k < 1:
        return 1, True
    return k, False


def sustainable_iterations(chunk_ms: float, per_iter_ms: float) -> int:
    """Iterations that fit in one chunk period (at least one)."""
    return max(1, math.floor(chunk_ms / per_iter_ms + 1e-9))


class SimulatedClock:
    """Deterministic cost model: ``fixed_ms`` once, then ``per_iter_ms`` per iteration.

    ``slowdown`` maps chunk indices to cost multipliers.
    """

    def __init__(self, fixed_ms: float = DEFAULT_FIXED_MS, per_iter_ms: float = DEFAULT_PER_ITER_MS,
                 slowdown: dict[int, float] | None = None):
        self.fixed_ms = fixed_ms
        self.per_iter_ms = per_iter_ms
        self.slowdown = slowdown or {}

    def cost(self, chunk_index: int, iterations: int, cold: bool, measured_ms: list[float]) -> tuple[float, float]:
        scale = self.slowdown.get(chunk_index, 1.0)
        fixed = self.fixed_ms * scale if cold else 0.0
        return fixed + iterations * self.per_iter_ms * scale, self.per_iter_ms * scale


class WallClock:
    """Uses the engine's measured per-iteration times."""

    def cost(self, chunk_index: int, iterations: int, cold: bool, measured_ms: list[float]) -> tuple[float, float]:
        total = float(sum(measured_ms))
        # the cold first iteration carries setup cost; keep it out of the rate
        steady = measured_ms[1:] if cold and len(measured_ms) > 1 else measured_ms
        return total, float(sum(steady)) / max(1, len(steady))


@dataclass
class StreamResult:
    chunks: list[AudioBuffer] = field(default_factory=list)
    decisions: list[ScheduleDecision] = field(default_factory=list)
    error: Exception | None = None

    def concatenated(self) -> AudioBuffer | None:
        if not self.chunks:
            return None
        return AudioBuffer(np.concatenate([c.samples for c in self.chunks]), self.chunks[0].sample_rate)


def split_chunks(buffer: AudioBuffer, chunk_ms: float) -> list[AudioBuffer]:
    size = max(1, int(round(buffer.sample_rate * chunk_ms / 1000.0)))
    return [AudioBuffer(buffer.samples[i : i + size], buffer.sample_rate)
            for i in range(0, len(buffer), size)]


def process_stream(source: Iterable[AudioBuffer], profile: LatencyProfile,
                   mfcc_cfg: MfccConfig | None = None, attack_cfg: AttackConfig | None = None,
                   use_masking: bool | None = None, clock=None,
                   fixed_ms: float = DEFAULT_FIXED_MS, per_iter_ms: float = DEFAULT_PER_ITER_MS) -> StreamResult:
    """Perturb a chunk stream within ``profile``'s latency budget.

    ``attack_cfg.iterations`` caps the iterations granted per chunk. A
    generation error stops the stream; chunks and decisions made so far are
    kept and the error is stored on the result.
    """
    mfcc_cfg = mfcc_cfg or MfccConfig()
    attack_cfg = attack_cfg or AttackConfig()
    if use_masking is not None:
        attack_cfg = replace(attack_cfg, use_masking=use_masking)
    clock = clock or WallClock()
    result = StreamResult()
    engine_free = 0.0
    estimate = per_iter_ms
    cold = True

    for index, chunk in enumerate(source):
        arrival = (index + 1) * profile.chunk_ms
        start = max(arrival, engine_free)
        wait = start - arrival
        k, exceeded = plan_iterations(profile.budget_ms, estimate, fixed_ms if cold else 0.0)
        k = min(k, sustainable_iterations(profile.chunk_ms, estimate), attack_cfg.iterations)
        decision = ScheduleDecision(index, k, deadline=arrival + profile.budget_ms, wait_ms=wait)
        result.decisions.append(decision)

        t0 = time.perf_counter()
        try:
            noise = generate_noise(chunk, mfcc_cfg, replace(attack_cfg, iterations=k))
        except Exception as exc:  # noqa: BLE001 - recorded, stream stops
            decision.actual_ms = (time.perf_counter() - t0) * 1000.0
            decision.flagged = True
            result.error = exc
            break
        measured = list(noise.iteration_ms)
        if cold and measured:
            measured[0] += (time.perf_counter() - t0) * 1000.0 - sum(noise.iteration_ms)
        actual, observed_per_iter = clock.cost(index, k, cold, measured)
        result.chunks.append(apply_noise(chunk, noise))

        decision.actual_ms = actual
        engine_free = start + actual
        decision.latency_ms = engine_free - arrival
        decision.flagged = exceeded or decision.latency_ms > profile.budget_ms + 1e-9
        estimate = EMA_ALPHA * observed_per_iter + (1.0 - EMA_ALPHA) * estimate
        cold = False
    return result


DECISION_COLUMNS = ("chunk_index", "iterations_granted", "actual_ms", "flagged")


def write_decision_log(decisions: list[ScheduleDecision], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DECISION_COLUMNS)
        for d in decisions:
            writer.writerow([d.chunk_index, d.iterations_granted, f"{d.actual_ms:.3f}", int(d.flagged)])
