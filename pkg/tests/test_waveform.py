"""Waveform tests: pulse symmetry, crossing search, limit-waveform checks."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronomesh.clock import SkewPopulation
from chronomesh.errors import DomainError, NumericsError
from chronomesh.waveform import (
    EventArray,
    LimitSpec,
    Pulse,
    TransmitEvent,
    contributions,
    default_tau_nz,
    evaluate_aggregate,
    find_zero_crossing,
    limit_waveform,
    sine_pulse,
)


def masked_sine_pulse(tau_nz: float, a_max: float = 1.0) -> Pulse:
    # Same shape as sine_pulse but forced through the generic two-lobe path.
    return Pulse(half_shape=lambda t: np.sin(np.pi * (-np.asarray(t)) / tau_nz),
                 tau_nz=tau_nz, a_max=a_max)


def gaussian_events(n: int, tau0: float, sigma: float, rng, scale=None) -> EventArray:
    fires = tau0 + rng.normal(0.0, sigma, size=n)
    return EventArray.build(fires, np.full(n, 1.0 / n) if scale is None else scale)


class TestPulseShape:
    @given(t=st.floats(-5.0, 5.0))
    @settings(max_examples=300, deadline=None)
    def test_odd_symmetry_exact(self, t):
        pulse = masked_sine_pulse(1.3)
        assert pulse.evaluate(t) == -pulse.evaluate(-t)

    def test_zero_at_origin_and_outside_support(self):
        pulse = sine_pulse(0.7)
        assert pulse.evaluate(0.0) == 0.0
        assert pulse.evaluate(0.7) == 0.0
        assert pulse.evaluate(-0.7) == 0.0
        assert pulse.evaluate(5.0) == 0.0

    def test_positive_before_negative_after(self):
        pulse = sine_pulse(1.0)
        ts = np.linspace(-0.999, -1e-3, 100)
        assert np.all(pulse.evaluate(ts) > 0.0)
        assert np.all(pulse.evaluate(-ts) < 0.0)
        assert np.max(pulse.evaluate(ts)) <= 1.0

    def test_fast_and_generic_paths_agree(self):
        rng = np.random.default_rng(2)
        ev = gaussian_events(5000, 1.0, 0.1, rng)
        grid = np.linspace(-0.5, 2.5, 701)
        fast = evaluate_aggregate(ev, sine_pulse(1.0), grid)
        slow = evaluate_aggregate(ev, masked_sine_pulse(1.0), grid)
        assert np.max(np.abs(fast - slow)) < 1e-12

    def test_invalid_pulse_params(self):
        with pytest.raises(DomainError):
            sine_pulse(0.0)
        with pytest.raises(DomainError):
            sine_pulse(1.0, a_max=-1.0)

    def test_default_tau_nz(self):
        assert default_tau_nz(0.1, 0.5) == pytest.approx(20.0)
        assert default_tau_nz(0.0, 0.9) == 1.0
        with pytest.raises(DomainError):
            default_tau_nz(-0.1, 1.0)


class TestAggregate:
    def test_single_event_recovers_pulse(self):
        pulse = sine_pulse(1.0, a_max=2.0)
        ev = [TransmitEvent(fire_time=3.0, amplitude_scale=0.5, extra_delay=0.25)]
        ts = np.linspace(2.5, 4.0, 17)
        expected = 2.0 * 0.5 * pulse.evaluate(ts - 3.25)
        assert np.allclose(evaluate_aggregate(ev, pulse, ts), expected, atol=1e-15)

    def test_contributions_sum_to_aggregate(self):
        rng = np.random.default_rng(3)
        ev = gaussian_events(1000, 0.0, 0.05, rng)
        t = 0.037
        parts = contributions(ev, sine_pulse(1.0), t)
        assert parts.shape == (1000,)
        assert parts.sum() == pytest.approx(evaluate_aggregate(ev, sine_pulse(1.0), t),
                                            abs=1e-12)

    def test_empty_events_rejected(self):
        with pytest.raises(DomainError):
            evaluate_aggregate([], sine_pulse(1.0), 0.0)


class TestCrossingSearch:
    def test_identical_fires_cross_exactly_at_fire_time(self):
        ev = EventArray.build(np.full(100, 2.0), np.full(100, 0.01))
        report = find_zero_crossing(ev, sine_pulse(1.0), search_center=2.0)
        assert report.ok and not report.gated and not report.no_crossing
        assert report.location == pytest.approx(2.0, abs=1e-9)

    def test_against_dense_grid_oracle(self):
        # Independent first-crossing logic on a one-million-point grid.
        rng = np.random.default_rng(29)
        pulse = sine_pulse(1.0)
        ev = gaussian_events(1000, 0.0, 0.15, rng)
        report = find_zero_crossing(ev, pulse, search_center=0.0)
        dense = np.linspace(-1.0, 1.0, 1_000_001)
        amps = evaluate_aggregate(ev, pulse, dense)
        idx = np.nonzero((amps[:-1] > 0.0) & (amps[1:] <= 0.0))[0][0]
        assert report.ok
        assert abs(report.location - dense[idx]) < 2.0 * (dense[1] - dense[0])

    def test_refined_amplitude_is_tiny(self):
        rng = np.random.default_rng(31)
        pulse = sine_pulse(2.0)
        ev = gaussian_events(5000, 1.0, 0.2, rng)
        report = find_zero_crossing(ev, pulse, search_center=1.0)
        assert abs(evaluate_aggregate(ev, pulse, report.location)) < 1e-9

    def test_monte_carlo_crossing_tightens_with_density(self):
        pulse = sine_pulse(1.0)
        errors = {}
        for n in (100, 10_000):
            errs = []
            for seed in range(50):
                rng = np.random.default_rng(1000 + seed)
                ev = gaussian_events(n, 5.0, 0.1, rng)
                report = find_zero_crossing(ev, pulse, search_center=5.0,
                                            grid_step=pulse.tau_nz / 200)
                assert report.ok
                errs.append(abs(report.location - 5.0))
            errors[n] = np.median(errs)
        assert errors[10_000] < errors[100]

    def test_amplitude_polarity_beyond_three_standard_errors(self):
        rng = np.random.default_rng(37)
        pulse = sine_pulse(1.0)
        n = 100_000
        ev = gaussian_events(n, 0.0, 0.05, rng)
        for offset, sign in ((-0.2, 1.0), (0.2, -1.0)):
            parts = contributions(ev, pulse, offset) * n  # undo 1/n scaling
            se = parts.std() / np.sqrt(n)
            assert sign * parts.mean() > 3.0 * se

    def test_gate_blocks_weak_aggregates(self):
        ev = EventArray.build(np.array([0.0]), np.array([1e-6]))
        report = find_zero_crossing(ev, sine_pulse(1.0), 0.0, gate=0.01)
        assert report.gated and report.location is None and not report.no_crossing
        assert report.max_amplitude < 0.01

    def test_no_crossing_reported_separately(self):
        # All pulse mass after the window: the waveform never turns positive.
        ev = EventArray.build(np.array([10.0]))
        report = find_zero_crossing(ev, sine_pulse(1.0), 0.0)
        assert report.no_crossing and not report.gated and report.location is None

    def test_amplitude_rescaling_leaves_crossing_in_place(self):
        rng = np.random.default_rng(41)
        fires = 1.0 + rng.normal(0.0, 0.1, size=2000)
        pulse = sine_pulse(1.0)
        base = find_zero_crossing(EventArray.build(fires), pulse, 1.0)
        shrunk = find_zero_crossing(
            EventArray.build(fires, np.full(2000, 1e-3)), pulse, 1.0)
        assert base.ok and shrunk.ok
        assert shrunk.location == pytest.approx(base.location, abs=1e-9)


class TestLimitWaveform:
    def spec(self, population=None, sigma_bar2=0.01):
        return LimitSpec(
            pulse=sine_pulse(1.0),
            tau0=2.0,
            sigma_bar2=sigma_bar2,
            population=population or SkewPopulation(alpha_low=0.9, alpha_up=1.1),
        )

    def test_zero_at_target_and_odd_about_it(self):
        spec = self.spec()
        assert abs(limit_waveform(spec, 2.0)) < 1e-8
        offsets = np.linspace(0.05, 0.95, 7)
        left = limit_waveform(spec, 2.0 - offsets)
        right = limit_waveform(spec, 2.0 + offsets)
        assert np.max(np.abs(left + right)) < 1e-8

    def test_correct_polarity_each_side(self):
        spec = self.spec()
        assert limit_waveform(spec, 1.7) > 0.0
        assert limit_waveform(spec, 2.3) < 0.0

    def test_point_mass_population_matches_gaussian_closed_form(self):
        # With one skew value the limit is the half-sine convolved with one
        # Gaussian. Far from the support edges the truncation is negligible
        # and E[-sin(pi (x - sd Z))] = -sin(pi x) exp(-(pi sd)^2 / 2).
        spec = self.spec(population=SkewPopulation.point_mass(1.0))
        sd = np.sqrt(spec.sigma_bar2)
        damping = np.exp(-0.5 * (np.pi * sd) ** 2)
        for x in (-0.4, -0.1, 0.0, 0.2, 0.4):
            closed = -np.sin(np.pi * x) * damping
            assert limit_waveform(spec, spec.tau0 + x) == pytest.approx(closed, abs=1e-8)

    def test_monte_carlo_aggregate_converges_to_limit(self):
        spec = self.spec()
        rng = np.random.default_rng(53)
        n = 100_000
        alphas = rng.uniform(0.9, 1.1, size=n)
        fires = spec.tau0 + rng.normal(0.0, np.sqrt(spec.sigma_bar2) / alphas)
        ev = EventArray.build(fires, np.full(n, 1.0 / n))
        grid = spec.tau0 + np.linspace(-0.9, 0.9, 50)
        eta = limit_waveform(spec, grid)
        for t, target in zip(grid, eta):
            parts = contributions(ev, spec.pulse, t) * n
            se = parts.std() / np.sqrt(n)
            assert abs(parts.mean() - target) < 3.0 * se, t

    def test_smoothness_on_refining_grids(self):
        spec = self.spec(population=SkewPopulation.point_mass(1.0))
        slope_bound = np.pi / spec.pulse.tau_nz  # sup |d eta / dt| / a_max
        for points in (41, 81):
            grid = spec.tau0 + np.linspace(-1.0, 1.0, points)
            values = limit_waveform(spec, grid)
            max_jump = np.max(np.abs(np.diff(values)))
            assert max_jump <= slope_bound * (grid[1] - grid[0]) * 1.1

    def test_unreachable_tolerance_raises_numerics_error(self):
        with pytest.raises(NumericsError):
            limit_waveform(self.spec(), 1.8, tol=1e-16)
