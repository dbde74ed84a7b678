"""End-to-end pipelines on the bundled stand-ins and simulated scenarios."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import add_noise
from .detector import DetectionEvent, RobustNsState, ThresholdSchedule, run_detector
from .ingest import SeriesTable, estimate_poisson_lfl_history
from .laws import Density, LflPair, constant_lfl
from .multistream import (
    IdentificationResult,
    MultiStreamState,
    StreamSet,
    enumerate_subsets,
    identify,
    run_multistream_detector,
)

FIRST_WAVE_LFL = constant_lfl(Density.poisson(1.0), Density.poisson(2.0))
FLIGHT_LFL = constant_lfl(Density.gaussian(0.0), Density.gaussian(0.5))


def single_detect(xs, lfl: LflPair, threshold: float, window=None) -> DetectionEvent:
    state = RobustNsState(lfl, ThresholdSchedule.constant(threshold))
    if window is not None:
        state.window = window
    return run_detector(list(xs), state)


@dataclass
class WaveResult:
    first: DetectionEvent
    first_day: int | None
    lfl_second: LflPair | None
    second: DetectionEvent | None
    second_day: int | None
    noisy: np.ndarray


def covid_waves(
    counts,
    noise_seed: int,
    first_threshold: float = math.log(1000),
    second_start: int = 100,
    second_threshold: float = math.log(1000),
) -> WaveResult:
    """First-wave onset with Pois(1)->Pois(2), then second wave from ``second_start``.

    The second-wave LFL is estimated from the noisy counts between the
    first-wave detection day and ``second_start - 1``, both inclusive.
    """
    noisy = add_noise(counts, Density.poisson(1.0), noise_seed)
    first = single_detect(noisy, FIRST_WAVE_LFL, first_threshold)
    if not first.stopped or first.stop_time >= second_start - 1:
        return WaveResult(first, first.stop_time, None, None, None, noisy)
    history = noisy[first.stop_time - 1 : second_start - 1]
    lfl2 = estimate_poisson_lfl_history(history)
    second = single_detect(noisy[second_start - 1 :], lfl2, second_threshold)
    day = None if not second.stopped else second_start - 1 + second.stop_time
    return WaveResult(first, first.stop_time, lfl2, second, day, noisy)


@dataclass
class MultiResult:
    event: DetectionEvent
    identification: IdentificationResult | None
    streamset: StreamSet
    threshold: float


def multi_detect(X, streamset: StreamSet, lfls, threshold: float, extra: int = 10) -> MultiResult:
    state = MultiStreamState(streamset, lfls, ThresholdSchedule.constant(threshold))
    ev = run_multistream_detector(X, state)
    ident = identify(X, ev.stop_time, streamset, lfls, extra) if ev.stopped else None
    return MultiResult(ev, ident, streamset, threshold)


def covid_state_onset(table: SeriesTable, noise_seed: int, alpha: float = 1 / 50, extra: int = 10) -> MultiResult:
    """Earliest-onset county: K=1 GLR over all counties, threshold log(|Theta|/alpha)."""
    X = add_noise(table.rows, Density.poisson(1.0), noise_seed)
    M = X.shape[1]
    ss = enumerate_subsets(M, 1)
    return multi_detect(X, ss, FIRST_WAVE_LFL, math.log(M / alpha), extra)


def flight_signals(distances: SeriesTable, pad: int = 10) -> np.ndarray:
    return distances.apply_flight_transform(pad).rows


@dataclass
class FlightRun:
    affected: tuple
    result: MultiResult

    @property
    def identified(self) -> tuple | None:
        r = self.result.identification
        return None if r is None else r.subset

    @property
    def exact(self) -> bool:
        return self.identified == self.affected

    @property
    def covers(self) -> bool:
        return self.identified is not None and set(self.affected) <= set(self.identified)


def flight_replication(
    signals: np.ndarray,
    seed: int,
    K: int = 3,
    alpha: float = 0.1,
    extra: int = 10,
    streamset: StreamSet | None = None,
) -> FlightRun:
    """Pick 1..K flights, add N(0,1) noise to every stream, detect and identify.

    Streams outside the chosen subset carry noise only.
    """
    rng = np.random.default_rng(seed)
    T, M = signals.shape
    size = int(rng.integers(1, K + 1))
    affected = tuple(sorted(int(b) for b in rng.choice(M, size, replace=False)))
    X = rng.standard_normal((T, M))
    X[:, list(affected)] += signals[:, list(affected)]
    ss = streamset or enumerate_subsets(M, K)
    return FlightRun(affected, multi_detect(X, ss, FLIGHT_LFL, math.log(len(ss) / alpha), extra))
