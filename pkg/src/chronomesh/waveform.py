"""Aggregate received waveforms and their zero crossings.

Every transmitter contributes a scaled, shifted copy of one odd pulse. The
pulse is built from a half shape q that is strictly positive on the open
interval (-tau_nz, 0) with peak 1: the full pulse equals q before the
crossing, the odd reflection -q(-t) after it, and 0 at t = 0 and outside
the support. Receivers estimate the common transmit instant as the first
downward zero crossing of the summed waveform, found on a coarse grid and
polished by bisection.

The infinite-density limit of the aggregate is a deterministic waveform:
the pulse smoothed by the transmit-error law and averaged over the skew
population. It is odd about the target instant, which is why the crossing
estimator is consistent; limit_waveform evaluates it by quadrature so the
Monte-Carlo aggregates can be checked against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .clock import SkewPopulation
from .errors import DomainError, NumericsError

# Work cap per evaluation block: grid points times events.
_BLOCK_OPS = 8_000_000
_REFINE_TOL = 1e-12


@dataclass(frozen=True)
class Pulse:
    """Odd transmit pulse of support (-tau_nz, tau_nz) and peak amplitude a_max.

    half_shape is the positive lobe q on (-tau_nz, 0); it must be vectorized.
    full_form, when given, evaluates the whole odd pulse directly and must
    agree with the reflection construction; it exists so hot loops can skip
    the two-sided masking. sinusoidal marks the half-sine shape, for which
    aggregates collapse to prefix sums via the angle-sum identity.
    """

    half_shape: Callable[[np.ndarray], np.ndarray]
    tau_nz: float
    a_max: float = 1.0
    full_form: Callable[[np.ndarray], np.ndarray] | None = None
    sinusoidal: bool = False

    def __post_init__(self):
        if self.tau_nz <= 0.0:
            raise DomainError(f"pulse support must be positive, got {self.tau_nz}")
        if self.a_max <= 0.0:
            raise DomainError(f"peak amplitude must be positive, got {self.a_max}")

    def evaluate(self, t) -> np.ndarray | float:
        """Unit-amplitude pulse value p(t); multiply by a_max for the waveform."""
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        if self.full_form is not None:
            out = self.full_form(t_arr)
        else:
            out = np.zeros_like(t_arr)
            neg = (t_arr > -self.tau_nz) & (t_arr < 0.0)
            pos = (t_arr > 0.0) & (t_arr < self.tau_nz)
            if np.any(neg):
                out[neg] = self.half_shape(t_arr[neg])
            if np.any(pos):
                out[pos] = -self.half_shape(-t_arr[pos])
        return float(out[0]) if scalar else out


def sine_pulse(tau_nz: float, a_max: float = 1.0) -> Pulse:
    """Default pulse: half-sine lobes, p(t) = -sin(pi t / tau_nz) inside the support."""
    def half(t):
        return np.sin(np.pi * (-np.asarray(t)) / tau_nz)

    def full(t):
        t = np.asarray(t, dtype=float)
        return np.where(np.abs(t) < tau_nz, -np.sin(np.pi * t / tau_nz), 0.0)

    return Pulse(half_shape=half, tau_nz=tau_nz, a_max=a_max, full_form=full,
                 sinusoidal=True)


def default_tau_nz(sigma_bar: float, alpha_low: float) -> float:
    """Support wide enough that transmit errors stay deep inside the pulse."""
    if sigma_bar < 0.0 or alpha_low <= 0.0:
        raise DomainError("sigma_bar must be >= 0 and alpha_low > 0")
    if sigma_bar == 0.0:
        return 1.0
    return 100.0 * sigma_bar / alpha_low


@dataclass(frozen=True)
class TransmitEvent:
    """One node's contribution: when it fired, how strongly, and extra path delay."""

    fire_time: float
    amplitude_scale: float = 1.0
    extra_delay: float = 0.0


@dataclass(frozen=True)
class EventArray:
    """Column layout of transmit events for vectorized evaluation."""

    fire: np.ndarray
    scale: np.ndarray
    delay: np.ndarray

    def __post_init__(self):
        if not (self.fire.shape == self.scale.shape == self.delay.shape):
            raise DomainError("event columns must share one shape")
        if self.fire.ndim != 1 or self.fire.size == 0:
            raise DomainError("event arrays must be non-empty vectors")

    @staticmethod
    def build(fire, scale=None, delay=None) -> "EventArray":
        fire = np.asarray(fire, dtype=float)
        n = fire.size
        scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)
        delay = np.zeros(n) if delay is None else np.asarray(delay, dtype=float)
        return EventArray(fire=fire, scale=scale, delay=delay)

    @staticmethod
    def from_events(events: Sequence[TransmitEvent]) -> "EventArray":
        return EventArray.build(
            [e.fire_time for e in events],
            [e.amplitude_scale for e in events],
            [e.extra_delay for e in events],
        )

    @property
    def arrival(self) -> np.ndarray:
        return self.fire + self.delay

    @property
    def count(self) -> int:
        return self.fire.size


def _as_event_array(events) -> EventArray:
    if isinstance(events, EventArray):
        return events
    if isinstance(events, TransmitEvent):
        return EventArray.from_events([events])
    if len(events) == 0:
        raise DomainError("aggregate of zero events is undefined")
    return EventArray.from_events(list(events))


class AggregateEvaluator:
    """Reusable evaluator of one aggregate waveform.

    The generic path sums pulse copies in blocks. For the half-sine pulse
    the sum over in-support events factors through the angle-sum identity,
    so after one sort the waveform at any instant costs two binary searches
    into prefix sums; crossing searches reuse the same sorted state.
    """

    def __init__(self, events, pulse: Pulse):
        self.events = _as_event_array(events)
        self.pulse = pulse
        self._fast = pulse.sinusoidal
        if self._fast:
            order = np.argsort(self.events.arrival, kind="stable")
            self._arrivals = self.events.arrival[order]
            phase = np.pi * self._arrivals / pulse.tau_nz
            scale = self.events.scale[order]
            self._cos_prefix = np.concatenate(([0.0], np.cumsum(scale * np.cos(phase))))
            self._sin_prefix = np.concatenate(([0.0], np.cumsum(scale * np.sin(phase))))

    def _fast_eval(self, t_arr: np.ndarray) -> np.ndarray:
        tau = self.pulse.tau_nz
        lo = np.searchsorted(self._arrivals, t_arr - tau, side="right")
        hi = np.searchsorted(self._arrivals, t_arr + tau, side="left")
        cos_sum = self._cos_prefix[hi] - self._cos_prefix[lo]
        sin_sum = self._sin_prefix[hi] - self._sin_prefix[lo]
        angle = np.pi * t_arr / tau
        return -np.sin(angle) * cos_sum + np.cos(angle) * sin_sum

    def _generic_eval(self, t_arr: np.ndarray) -> np.ndarray:
        arrivals = self.events.arrival
        out = np.empty(t_arr.size)
        block = max(1, _BLOCK_OPS // max(self.events.count, 1))
        for start in range(0, t_arr.size, block):
            chunk = t_arr[start:start + block]
            shifted = chunk[:, None] - arrivals[None, :]
            out[start:start + block] = self.pulse.evaluate(shifted) @ self.events.scale
        return out

    def __call__(self, t) -> np.ndarray | float:
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        out = self._fast_eval(t_arr) if self._fast else self._generic_eval(t_arr)
        out = out * self.pulse.a_max
        return float(out[0]) if scalar else out


def evaluate_aggregate(events, pulse: Pulse, t) -> np.ndarray | float:
    """Summed waveform at time(s) t: sum_i a_max scale_i p(t - arrival_i)."""
    return AggregateEvaluator(events, pulse)(t)


def contributions(events, pulse: Pulse, t: float) -> np.ndarray:
    """Per-event waveform contributions at a single instant.

    Exposed so statistical checks can form standard errors of the mean
    amplitude without re-deriving the event layout.
    """
    ev = _as_event_array(events)
    return pulse.a_max * ev.scale * pulse.evaluate(float(t) - ev.arrival)


@dataclass(frozen=True)
class CrossingReport:
    """Outcome of a zero-crossing search on one aggregate waveform."""

    location: float | None       # refined crossing time; None if not usable
    max_amplitude: float         # sup of |aggregate| over the search grid
    gated: bool                  # amplitude never cleared the detection gate
    no_crossing: bool            # gate cleared but no downward sign change

    @property
    def ok(self) -> bool:
        return self.location is not None


def find_zero_crossing(events, pulse: Pulse, search_center: float,
                       gate: float = 0.0, grid_step: float | None = None) -> CrossingReport:
    """Locate the first downward zero crossing near the search centre.

    Scans (search_center - tau_nz, search_center + tau_nz) on a uniform grid
    (default step tau_nz / 1000) for the first positive-to-non-positive sign
    change, then bisects until the amplitude magnitude drops below 1e-12 or
    the bracket is narrower than 1e-12.
    """
    waveform = AggregateEvaluator(events, pulse)
    step = pulse.tau_nz / 1000.0 if grid_step is None else float(grid_step)
    if step <= 0.0:
        raise DomainError("grid_step must be positive")
    half_points = max(1, int(np.ceil(pulse.tau_nz / step)))
    grid = search_center + np.linspace(-pulse.tau_nz, pulse.tau_nz, 2 * half_points + 1)
    amps = waveform(grid)
    peak = float(np.max(np.abs(amps)))
    if peak < gate:
        return CrossingReport(location=None, max_amplitude=peak, gated=True, no_crossing=False)

    down = np.nonzero((amps[:-1] > 0.0) & (amps[1:] <= 0.0))[0]
    if down.size == 0:
        return CrossingReport(location=None, max_amplitude=peak, gated=False, no_crossing=True)
    lo, hi = grid[down[0]], grid[down[0] + 1]

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        a_mid = waveform(mid)
        if abs(a_mid) < _REFINE_TOL or (hi - lo) < _REFINE_TOL:
            return CrossingReport(location=float(mid), max_amplitude=peak,
                                  gated=False, no_crossing=False)
        if a_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return CrossingReport(location=float(0.5 * (lo + hi)), max_amplitude=peak,
                          gated=False, no_crossing=False)


@dataclass(frozen=True)
class LimitSpec:
    """Parameters of the infinite-density limit waveform.

    sigma_bar2 is the variance of the transmit error expressed in the node
    timescale; a node with skew s therefore fires with error variance
    sigma_bar2 / s^2 in reference time. mean_gain is the expected received
    gain, a pure amplitude factor.
    """

    pulse: Pulse
    tau0: float
    sigma_bar2: float
    population: SkewPopulation
    mean_gain: float = 1.0


def _smoothed_pulse(pulse: Pulse, x: float, sd: float, tol: float) -> tuple[float, float]:
    # E p(x - T) for T ~ N(0, sd^2): convolution against the Gaussian kernel.
    if sd <= 0.0:
        return float(pulse.evaluate(x)), 0.0
    norm = 1.0 / (sd * np.sqrt(2.0 * np.pi))

    def integrand(u: float) -> float:
        z = (x - u) / sd
        return pulse.evaluate(u) * norm * np.exp(-0.5 * z * z)

    value, err = quad(integrand, -pulse.tau_nz, pulse.tau_nz,
                      points=[0.0], limit=200, epsabs=tol, epsrel=1e-10)
    return value, err


def limit_waveform(spec: LimitSpec, t, tol: float = 1e-9) -> np.ndarray | float:
    """Limit waveform value(s) at t, exact to roughly 10 * tol.

    Raises NumericsError when the quadrature error estimates exceed the
    target, carrying the offending t and error estimate.
    """
    if spec.sigma_bar2 < 0.0:
        raise DomainError("sigma_bar2 must be non-negative")
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    pop = spec.population
    amp = spec.pulse.a_max * spec.mean_gain
    sigma_bar = float(np.sqrt(spec.sigma_bar2))

    out = np.empty(t_arr.size)
    for idx, ti in enumerate(t_arr):
        x = float(ti - spec.tau0)
        if pop.alpha_low == pop.alpha_up:
            value, err = _smoothed_pulse(spec.pulse, x, sigma_bar / pop.alpha_low, tol / 10.0)
        else:
            width = pop.alpha_up - pop.alpha_low

            def skew_weighted(s: float) -> float:
                weight = (1.0 / width if pop.density is None
                          else float(pop.density(np.array(s))))
                inner, _ = _smoothed_pulse(spec.pulse, x, sigma_bar / s, tol / 100.0)
                return weight * inner

            value, err = quad(skew_weighted, pop.alpha_low, pop.alpha_up,
                              limit=100, epsabs=tol, epsrel=1e-9)
        if err > 10.0 * tol:
            raise NumericsError("limit waveform quadrature did not converge",
                                {"t": float(ti), "error_estimate": float(err)})
        out[idx] = amp * value
    return float(out[0]) if scalar else out
