import numpy as np
import pytest

from sivsim.defaults import G2_SEQUENCE
from sivsim.dynamics import EMISSION
from sivsim.pulses import gaussian_pulse, square_pulse
from sivsim.trajectories import (
    CHANNEL_CODES,
    GENERATE,
    REINITIALIZE,
    ClickStream,
    TrajectoryConfig,
    g2_histogram,
    g2_zero,
    g2_zero_stderr,
    gamma_t_sweep,
    master_equation_populations,
    run_trajectories,
    trajectory_mean_populations,
)


def sequence_config(n_trajectories, seed, repetitions=8, **device_overrides):
    seq = G2_SEQUENCE
    gen = gaussian_pulse(seq["gen_omega0"], seq["gen_mu"], seq["gen_sigma"],
                         n_sigma=3.0)
    reinit = square_pulse(seq["reinit_omega0"], seq["reinit_start"],
                          seq["reinit_stop"])
    return TrajectoryConfig(
        n_trajectories=n_trajectories, seed=seed,
        pulse_sequence=((gen, GENERATE), (reinit, REINITIALIZE)),
        period_ns=seq["period_ns"], repetitions=repetitions)


def synthetic_stream(times_by_traj, period_ns, repetitions):
    traj, t = [], []
    for tid, times in times_by_traj.items():
        traj.extend([tid] * len(times))
        t.extend(times)
    order = np.lexsort((t, traj))
    traj = np.asarray(traj, dtype=np.int64)[order]
    t = np.asarray(t, dtype=float)[order]
    n = len(t)
    return ClickStream(
        traj=traj, pulse=(t // period_ns).astype(np.int64), t=t,
        channel=np.full(n, CHANNEL_CODES[EMISSION], dtype=np.int8),
        freq=np.full(n, -1, dtype=np.int8),
        meta={"period_ns": period_ns, "repetitions": repetitions,
              "n_trajectories": len(times_by_traj), "pulses_per_period": 1,
              "seed": 0})


class TestConfigValidation:
    def test_invalid_counts(self):
        gen = gaussian_pulse(0.1, 40.0, 10.0, n_sigma=3.0)
        with pytest.raises(ValueError):
            TrajectoryConfig(n_trajectories=0, seed=1,
                             pulse_sequence=((gen, GENERATE),), period_ns=150.0)
        with pytest.raises(ValueError):
            TrajectoryConfig(n_trajectories=1, seed=1,
                             pulse_sequence=((gen, "pump"),), period_ns=150.0)

    def test_pulse_outside_period_rejected(self):
        gen = gaussian_pulse(0.1, 300.0, 10.0, n_sigma=3.0)
        with pytest.raises(ValueError):
            TrajectoryConfig(n_trajectories=1, seed=1,
                             pulse_sequence=((gen, GENERATE),), period_ns=150.0)


class TestRunTrajectories:
    def test_seed_determinism_byte_for_byte(self, device):
        cfg = sequence_config(50, seed=21, repetitions=4)
        a = run_trajectories(device, cfg)
        b = run_trajectories(device, cfg)
        assert np.array_equal(a.t, b.t)
        assert np.array_equal(a.traj, b.traj)
        assert np.array_equal(a.pulse, b.pulse)
        assert np.array_equal(a.channel, b.channel)

    def test_different_seeds_differ(self, device):
        a = run_trajectories(device, sequence_config(50, seed=1, repetitions=2))
        b = run_trajectories(device, sequence_config(50, seed=2, repetitions=2))
        assert not np.array_equal(a.t, b.t)

    def test_times_nondecreasing_within_trajectory(self, device):
        stream = run_trajectories(device, sequence_config(40, seed=3, repetitions=4))
        for tid in np.unique(stream.traj):
            times = stream.t[stream.traj == tid]
            assert np.all(np.diff(times) >= 0)

    def test_no_repopulation_at_zero_qubit_decay(self, device_no_qubit_decay):
        stream = run_trajectories(device_no_qubit_decay,
                                  sequence_config(400, seed=5, repetitions=6))
        em = stream.emissions()
        keys = em.traj * 10_000 + em.pulse
        assert len(np.unique(keys)) == len(keys)  # one emission per pulse window

    def test_mean_emission_matches_master_equation(self, device_no_qubit_decay):
        cfg = sequence_config(600, seed=9, repetitions=1)
        stream = run_trajectories(device_no_qubit_decay, cfg)
        p_hat = len(stream.emissions()) / 600.0
        # transfer into |down,0> read out after the generation pulse but
        # before the re-init pulse pumps it away
        pops = master_equation_populations(device_no_qubit_decay, cfg, [90.0])
        transfer = pops[0, 3]
        p_c = device_no_qubit_decay.cooperativity / (
            device_no_qubit_decay.cooperativity + 1)
        expected = p_c * transfer
        sigma = np.sqrt(expected * (1 - expected) / 600.0)
        assert abs(p_hat - expected) < 3 * sigma + 0.01

    def test_unraveling_matches_master_equation_populations(self, device):
        cfg = sequence_config(800, seed=13, repetitions=2)
        times = np.linspace(20.0, 290.0, 10)
        mc = trajectory_mean_populations(device, cfg, times)
        me = master_equation_populations(device, cfg, times)
        assert np.max(np.abs(mc - me)) < 4.0 / np.sqrt(800)

    def test_save_load_round_trip(self, device, tmp_path):
        stream = run_trajectories(device, sequence_config(20, seed=7, repetitions=2))
        path = tmp_path / "clicks.csv"
        stream.save(path)
        loaded = ClickStream.load(path)
        assert np.allclose(loaded.t, stream.t, atol=1e-6)
        assert np.array_equal(loaded.traj, stream.traj)
        assert np.array_equal(loaded.channel, stream.channel)
        assert loaded.meta["seed"] == stream.meta["seed"]


class TestG2Histogram:
    def test_single_click_per_pulse_gives_unit_side_peaks(self):
        # deterministic stream: one click per pulse at a fixed phase
        period, reps = 100.0, 12
        times_by_traj = {tid: 10.0 + period * np.arange(reps) for tid in range(5)}
        stream = synthetic_stream(times_by_traj, period, reps)
        hist = g2_histogram(stream, bin_width_ns=1.0)
        assert hist.g2_zero == 0.0
        # every corrected side peak equals the same per-pair area
        for k in (1, 2, 5):
            lo, hi = k * period - 50.0, k * period + 50.0
            mask = (hist.bin_centers >= lo) & (hist.bin_centers < hi)
            area = hist.counts[mask].sum() / (reps - k)
            assert area == pytest.approx(hist.normalization, rel=1e-9)

    def test_poisson_surrogate_normalizes_to_one(self):
        rng = np.random.default_rng(42)
        period, reps, n_traj, lam = 100.0, 20, 400, 0.8
        times_by_traj = {}
        for tid in range(n_traj):
            times = []
            for rep in range(reps):
                for _ in range(rng.poisson(lam)):
                    times.append(rep * period + rng.uniform(0.0, 1.0))
            times_by_traj[tid] = np.sort(times)
        stream = synthetic_stream(times_by_traj, period, reps)
        hist = g2_histogram(stream, bin_width_ns=1.0)
        value = g2_zero(hist, window_ns=50.0)
        assert value == pytest.approx(1.0, abs=0.05)

    def test_comb_histogram_hand_count(self):
        # two clicks per trajectory exactly one period apart
        period, reps = 100.0, 3
        times_by_traj = {0: np.array([5.0, 105.0])}
        stream = synthetic_stream(times_by_traj, period, reps)
        hist = g2_histogram(stream, bin_width_ns=1.0, max_tau_ns=250.0)
        # one ordered pair at +100 and one at -100
        plus = hist.counts[(hist.bin_centers > 99.0) & (hist.bin_centers < 101.0)]
        assert plus.sum() == 1
        minus = hist.counts[(hist.bin_centers > -101.0) & (hist.bin_centers < -99.0)]
        assert minus.sum() == 1

    def test_symmetry_under_tau_reflection(self, device):
        stream = run_trajectories(device, sequence_config(150, seed=31,
                                                          repetitions=6))
        hist = g2_histogram(stream, bin_width_ns=2.0)
        n = len(hist.counts)
        assert np.array_equal(hist.counts, hist.counts[::-1][:n])

    def test_empty_stream_rejected(self):
        empty = ClickStream(np.empty(0, np.int64), np.empty(0, np.int64),
                            np.empty(0), np.empty(0, np.int8),
                            np.empty(0, np.int8),
                            {"period_ns": 100.0, "repetitions": 4,
                             "n_trajectories": 0, "pulses_per_period": 1})
        with pytest.raises(ValueError):
            g2_histogram(empty)

    def test_window_validation(self):
        times_by_traj = {0: np.array([5.0, 105.0, 205.0])}
        stream = synthetic_stream(times_by_traj, 100.0, 3)
        hist = g2_histogram(stream, bin_width_ns=1.0)
        with pytest.raises(ValueError):
            g2_zero(hist, window_ns=150.0)


class TestGammaTSweep:
    def test_zero_point_and_monotonicity(self, device):
        cfg = sequence_config(250, seed=17, repetitions=8)
        points = gamma_t_sweep(device, [0.0, 5e-4, 5e-3], cfg)
        assert points[0].g2_zero < 1e-3
        values = [p.g2_zero for p in points]
        errs = [g2_zero_stderr(p.histogram) for p in points]
        for i in range(len(values) - 1):
            assert values[i + 1] - values[i] >= -2 * np.hypot(errs[i], errs[i + 1])

    def test_unsorted_values_rejected(self, device):
        cfg = sequence_config(10, seed=1, repetitions=2)
        with pytest.raises(ValueError):
            gamma_t_sweep(device, [1e-3, 0.0], cfg)

    def test_second_pulse_peak_present(self, device):
        cfg = sequence_config(250, seed=23, repetitions=8)
        points = gamma_t_sweep(device, [0.0, 5e-3], cfg)
        for point in points:
            hist = point.histogram
            period = hist.period_ns
            mask = (np.abs(hist.bin_centers) > period - 75.0) \
                & (np.abs(hist.bin_centers) < period + 75.0)
            assert hist.counts[mask].sum() > 0
