"""Linear-prediction adaptive packet sampling.

Each flow is inspected in epochs of m packets; only the first w packets of
an epoch are sampled.  After every epoch the malicious hit count of the
sampled window is compared with a linear extrapolation over the recent
(window size, hit count) history, and the next window size is grown or
shrunk accordingly, clamped to [w_min, w_max].
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Sequence, Tuple


class InsufficientHistoryError(ValueError):
    """Prediction requested with fewer than three recorded samples."""


@dataclass(frozen=True)
class SamplerConfig:
    m: int = 100
    w_min: int = 5
    w_max: int = 15
    history_len: int = 10
    w_init: int | None = None          # defaults to w_min
    equal_delta_growth: int = 5

    def __post_init__(self):
        w_init = self.initial_window
        if not (1 <= self.w_min <= w_init <= self.w_max <= self.m):
            raise ValueError(
                f"need 1 <= w_min <= w_init <= w_max <= m, got "
                f"w_min={self.w_min} w_init={w_init} "
                f"w_max={self.w_max} m={self.m}")
        if self.history_len < 3:
            raise ValueError("history_len must be >= 3")
        if self.equal_delta_growth < 1:
            raise ValueError("equal_delta_growth must be >= 1")

    @property
    def initial_window(self) -> int:
        return self.w_min if self.w_init is None else self.w_init


Sample = Tuple[int, int]   # (window size w_i, malicious count delta_i)


def predict_next(history: Sequence[Sample], delta_w: float) -> float:
    """Predicted malicious count for the latest window.

    ``history`` holds the n+1 samples (w_1, d_1) .. (w_{n+1}, d_{n+1});
    the prediction uses d_1..d_n only plus ``delta_w`` = w_{n+1} - w_n.
    Slope terms with w_{i+1} == w_i are skipped and the averaging divisor
    shrinks to the number of kept terms; if every term is skipped the sum
    contributes nothing.
    """
    if len(history) < 3:
        raise InsufficientHistoryError(
            f"need at least 3 samples, have {len(history)}")
    d_n = history[-2][1]
    slopes = []
    for (w_a, d_a), (w_b, d_b) in zip(history[:-2], history[1:-1]):
        if w_b != w_a:
            slopes.append((d_b - d_a) / (w_b - w_a))
    if not slopes:
        return float(d_n)
    return d_n + delta_w * (sum(slopes) / len(slopes))


def window_delta(history: Sequence[Sample], predicted: float, actual: float,
                 config: SamplerConfig) -> float:
    """Change to apply to the window size for the next sample."""
    w_n, d_n = history[-2]
    w_n1 = history[-1][0]
    dw = w_n1 - w_n
    if actual == d_n:
        # ratio undefined: grow on a flat window, otherwise back off
        if w_n1 == w_n:
            return float(config.equal_delta_growth)
        return -dw / 2.0
    if predicted == actual:
        return 0.0
    if dw == 0:
        # the ratio rule would freeze the window forever; force movement
        return float(config.equal_delta_growth)
    ratio = (predicted - d_n) / (actual - d_n)
    return -math.copysign(1.0, predicted - actual) * abs(ratio * dw)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def next_window(current_w: int, dw_next: float, config: SamplerConfig) -> int:
    w = _round_half_away(current_w + dw_next)
    return max(config.w_min, min(config.w_max, w))


@dataclass
class AdaptiveSampler:
    """Per-flow sampler state driving the adaptive window loop."""

    config: SamplerConfig = field(default_factory=SamplerConfig)
    history: Deque[Sample] = field(init=False)
    current_window: int = field(init=False)

    def __post_init__(self):
        self.history = deque(maxlen=self.config.history_len)
        self.current_window = self.config.initial_window

    def record_sample(self, w: int, delta: int) -> None:
        if not 0 <= delta <= w:
            raise ValueError(f"need 0 <= delta <= w, got delta={delta} w={w}")
        if not self.config.w_min <= w <= self.config.w_max:
            raise ValueError(f"window {w} outside "
                             f"[{self.config.w_min}, {self.config.w_max}]")
        self.history.append((w, delta))

    def step(self, delta_latest: int) -> int:
        """Record the completed window's hit count, return the next window."""
        self.record_sample(self.current_window, delta_latest)
        if len(self.history) < 3:
            self.current_window = self.config.initial_window
            return self.current_window
        hist = list(self.history)
        dw = hist[-1][0] - hist[-2][0]
        predicted = predict_next(hist, dw)
        dw_next = window_delta(hist, predicted, float(delta_latest),
                               self.config)
        self.current_window = next_window(self.current_window, dw_next,
                                          self.config)
        return self.current_window


@dataclass(frozen=True)
class TraceRow:
    step: int
    w: int
    delta: int
    predicted: float | None
    dw_next: float | None


def trace(config: SamplerConfig, deltas: Sequence[int]) -> list[TraceRow]:
    """Replay a sequence of per-window hit counts through the sampler,
    exposing the intermediate prediction and window adjustment.

    Hit counts larger than the current window are clamped to it.
    """
    sampler = AdaptiveSampler(config)
    rows = []
    for i, raw in enumerate(deltas):
        w = sampler.current_window
        delta = max(0, min(int(raw), w))
        sampler.record_sample(w, delta)
        if len(sampler.history) < 3:
            sampler.current_window = config.initial_window
            rows.append(TraceRow(i, w, delta, None, None))
            continue
        hist = list(sampler.history)
        dw = hist[-1][0] - hist[-2][0]
        predicted = predict_next(hist, dw)
        dw_next = window_delta(hist, predicted, float(delta), config)
        sampler.current_window = next_window(w, dw_next, config)
        rows.append(TraceRow(i, w, delta, predicted, dw_next))
    return rows
