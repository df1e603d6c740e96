"""Quantum-jump Monte Carlo over the five-level system and photon correlations."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .dynamics import (
    EMISSION,
    LOSS,
    TWO_PI,
    BasisLabel,
    CqedParams,
    TimeGrid,
    build_system,
    evolve,
    pure_density,
)
from .pulses import PulseEnvelope

GENERATE = "generate"
REINITIALIZE = "reinitialize"

CHANNEL_CODES = {EMISSION: 0, LOSS: 1}
CHANNEL_NAMES = {0: EMISSION, 1: LOSS}
FREQ_NAMES = {-1: "", 0: "nu_down", 1: "nu_up"}
FREQ_CODES = {"": -1, "nu_down": 0, "nu_up": 1}


@dataclass(frozen=True)
class TrajectoryConfig:
    """Monte-Carlo run configuration.

    The pulse sequence spans one period of length ``period_ns`` and is
    replayed ``repetitions`` times per trajectory.  Envelope supports must
    lie inside [0, period_ns].
    """

    n_trajectories: int
    seed: int
    pulse_sequence: tuple[tuple[PulseEnvelope, str], ...]
    period_ns: float
    repetitions: int = 1
    resolution_ns: float = 0.01
    step_ns: float = 0.25

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.resolution_ns <= 0 or self.step_ns <= 0:
            raise ValueError("resolutions must be positive")
        if self.period_ns <= 0:
            raise ValueError("period must be positive")
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")
        if not self.pulse_sequence:
            raise ValueError("pulse sequence is empty")
        for pulse, role in self.pulse_sequence:
            if role not in (GENERATE, REINITIALIZE):
                raise ValueError(f"unknown pulse role {role!r}")
            lo, hi = pulse.support
            if lo < -self.step_ns or hi > self.period_ns + self.step_ns:
                raise ValueError("pulse support must lie within one period")

    @property
    def generation_starts(self) -> np.ndarray:
        starts = sorted(p.support[0] for p, role in self.pulse_sequence
                        if role == GENERATE)
        if not starts:
            raise ValueError("sequence contains no generation pulse")
        return np.asarray(starts)


@dataclass(frozen=True)
class ClickStream:
    """Timestamped jump records from a Monte-Carlo run."""

    traj: np.ndarray      # trajectory id
    pulse: np.ndarray     # generation-pulse index the record falls in
    t: np.ndarray         # ns
    channel: np.ndarray   # 0 = emission, 1 = loss
    freq: np.ndarray      # -1 = unlabeled, 0 = nu_down, 1 = nu_up
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for name in ("traj", "pulse", "channel", "freq"):
            if len(getattr(self, name)) != n:
                raise ValueError("record arrays must have matching lengths")

    def __len__(self) -> int:
        return len(self.t)

    def emissions(self) -> "ClickStream":
        mask = self.channel == CHANNEL_CODES[EMISSION]
        return ClickStream(self.traj[mask], self.pulse[mask], self.t[mask],
                           self.channel[mask], self.freq[mask], dict(self.meta))

    def emission_times_by_trajectory(self) -> dict[int, np.ndarray]:
        em = self.emissions()
        order = np.lexsort((em.t, em.traj))
        out: dict[int, np.ndarray] = {}
        traj = em.traj[order]
        times = em.t[order]
        for tid in np.unique(traj):
            out[int(tid)] = times[traj == tid]
        return out

    def save(self, path) -> None:
        """Write `traj,pulse,t_ns,channel,freq_label` lines plus a JSON sidecar."""
        path = Path(path)
        lines = ["traj,pulse,t_ns,channel,freq_label"]
        for i in range(len(self)):
            lines.append(f"{self.traj[i]},{self.pulse[i]},{self.t[i]:.6f},"
                         f"{CHANNEL_NAMES[int(self.channel[i])]},"
                         f"{FREQ_NAMES[int(self.freq[i])]}")
        path.write_text("\n".join(lines) + "\n")
        sidecar = {k: v for k, v in self.meta.items()}
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ClickStream":
        path = Path(path)
        rows = path.read_text().strip().splitlines()[1:]
        traj, pulse, t, channel, freq = [], [], [], [], []
        for row in rows:
            parts = row.split(",")
            traj.append(int(parts[0]))
            pulse.append(int(parts[1]))
            t.append(float(parts[2]))
            channel.append(CHANNEL_CODES[parts[3]])
            freq.append(FREQ_CODES[parts[4]])
        sidecar = path.with_suffix(path.suffix + ".json")
        meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        return cls(np.asarray(traj, dtype=np.int64), np.asarray(pulse, dtype=np.int64),
                   np.asarray(t, dtype=float), np.asarray(channel, dtype=np.int8),
                   np.asarray(freq, dtype=np.int8), meta)


@dataclass(frozen=True)
class _StepProp:
    """Exact propagator of one envelope step of the effective Hamiltonian."""

    u_full: np.ndarray
    eigvals: np.ndarray | None
    v: np.ndarray | None
    v_inv: np.ndarray | None
    generator: np.ndarray

    def partial(self, dt: float) -> np.ndarray:
        if self.v is not None:
            return (self.v * np.exp(self.eigvals * dt)) @ self.v_inv
        return expm(self.generator * dt)


class _JumpChannels:
    def __init__(self, collapses):
        active = [op for op in collapses if op.rate > 0]
        self.sources = np.array([op.source for op in active], dtype=np.int64)
        self.targets = np.array([op.target for op in active], dtype=np.int64)
        self.rates_angular = np.array([TWO_PI * op.rate for op in active])
        self.codes = np.array([CHANNEL_CODES[op.channel] for op in active],
                              dtype=np.int8)
        self.decay_diag = np.zeros(5)
        for op in active:
            self.decay_diag[op.source] += TWO_PI * op.rate


def _sum_envelopes(config: TrajectoryConfig, role: str):
    pulses = [p for p, r in config.pulse_sequence if r == role]

    def total(t):
        return sum((complex(p(t)) for p in pulses), 0.0 + 0.0j)

    return total


def _build_step_propagators(params: CqedParams, config: TrajectoryConfig,
                            ) -> tuple[list[_StepProp], _JumpChannels, np.ndarray]:
    gen_env = _sum_envelopes(config, GENERATE)
    reinit_env = _sum_envelopes(config, REINITIALIZE)
    system = build_system(params, gen_env, with_reinit=True, reinit_pulse=reinit_env)
    channels = _JumpChannels(system.collapses)

    n_steps = int(np.ceil(config.period_ns / config.step_ns))
    edges = np.linspace(0.0, config.period_ns, n_steps + 1)
    h_eff_static = system.h_static - 0.5j * np.diag(channels.decay_diag)
    k_gen = system.drives[0].coupling
    k_re = system.drives[1].coupling

    props: list[_StepProp] = []
    cache: dict[tuple[complex, complex], _StepProp] = {}
    for k in range(n_steps):
        t_mid = 0.5 * (edges[k] + edges[k + 1])
        zg = complex(gen_env(t_mid))
        zr = complex(reinit_env(t_mid))
        key = (zg, zr)
        prop = cache.get(key)
        if prop is None:
            h_eff = h_eff_static + zg * k_gen + np.conj(zg) * k_gen.conj().T \
                + zr * k_re + np.conj(zr) * k_re.conj().T
            gen = -1j * h_eff
            w, v = np.linalg.eig(gen)
            try:
                v_inv = np.linalg.inv(v)
                ok = np.linalg.cond(v) < 1e10 and np.max(np.abs(
                    (v * w) @ v_inv - gen)) < 1e-9 * max(np.max(np.abs(gen)), 1.0)
            except np.linalg.LinAlgError:
                ok = False
            h = edges[k + 1] - edges[k]
            if ok:
                prop = _StepProp((v * np.exp(w * h)) @ v_inv, w, v, v_inv, gen)
            else:
                prop = _StepProp(expm(gen * h), None, None, None, gen)
            cache[key] = prop
        props.append(prop)
    return props, channels, edges


def _resolve_step_jumps(psi0, prop, h, t_abs, thr, rng, channels, resolution,
                        records, pulse_index_fn, traj_id):
    """Walk one step that crossed the norm threshold; may contain several jumps.

    The squared norm decreases monotonically under the effective Hamiltonian,
    so bisection brackets each jump time to within ``resolution``.
    """
    remaining = h
    psi = psi0
    while True:
        lo, hi = 0.0, remaining
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            psi_mid = prop.partial(mid) @ psi
            if float(np.vdot(psi_mid, psi_mid).real) <= thr:
                hi = mid
            else:
                lo = mid
        psi_jump = prop.partial(hi) @ psi
        t_jump = t_abs + hi
        weights = channels.rates_angular * np.abs(psi_jump[channels.sources]) ** 2
        total = float(weights.sum())
        if total <= 0.0:
            # Norm loss without channel weight can only be round-off; keep going.
            idx = int(np.argmax(channels.rates_angular))
        else:
            idx = int(np.searchsorted(np.cumsum(weights) / total, rng.random(),
                                      side="right"))
            idx = min(idx, len(weights) - 1)
        records.append((traj_id, pulse_index_fn(t_jump), t_jump,
                        int(channels.codes[idx])))
        psi = np.zeros_like(psi0)
        psi[channels.targets[idx]] = 1.0
        thr = rng.random()
        t_abs = t_jump
        remaining = remaining - hi
        if remaining <= 0.0:
            return psi, thr
        psi_end = prop.partial(remaining) @ psi
        if float(np.vdot(psi_end, psi_end).real) > thr:
            return psi_end, thr


def _run_chunk(params, config, traj_ids, props, channels, edges,
               checkpoint_steps):
    n = len(traj_ids)
    rngs = [np.random.Generator(np.random.Philox(key=[config.seed, tid]))
            for tid in traj_ids]
    psi = np.zeros((n, 5), dtype=complex)
    psi[:, BasisLabel.UP_0] = 1.0
    thr = np.array([rng.random() for rng in rngs])
    records: list[list[tuple]] = [[] for _ in range(n)]

    starts = config.generation_starts
    ppp = len(starts)
    period = config.period_ns

    def pulse_index(t_abs):
        rep = min(int(t_abs // period), config.repetitions - 1)
        t_in = t_abs - rep * period
        pos = int(np.searchsorted(starts, t_in, side="right")) - 1
        return rep * ppp + max(pos, 0)

    pop_sums = (np.zeros((len(checkpoint_steps), 5)) if checkpoint_steps else None)
    checkpoint_lookup = {step: i for i, step in enumerate(checkpoint_steps or [])}

    n_steps = len(props)
    for rep in range(config.repetitions):
        t_rep = rep * period
        for k in range(n_steps):
            prop = props[k]
            prev = psi
            psi = prev @ prop.u_full.T
            norms = np.einsum("ij,ij->i", psi.conj(), psi).real
            crossed = np.flatnonzero(norms <= thr)
            for row in crossed:
                psi_row, thr_row = _resolve_step_jumps(
                    prev[row], prop, edges[k + 1] - edges[k], t_rep + edges[k],
                    thr[row], rngs[row], channels, config.resolution_ns,
                    records[row], pulse_index, int(traj_ids[row]))
                psi[row] = psi_row
                thr[row] = thr_row
            global_step = rep * n_steps + k + 1
            if pop_sums is not None and global_step in checkpoint_lookup:
                norms = np.einsum("ij,ij->i", psi.conj(), psi).real
                pops = (np.abs(psi) ** 2) / norms[:, None]
                pop_sums[checkpoint_lookup[global_step]] += pops.sum(axis=0)

    flat = [rec for rows in records for rec in rows]
    return flat, pop_sums


def _engine(params: CqedParams, config: TrajectoryConfig,
            checkpoint_times: Sequence[float] | None = None):
    props, channels, edges = _build_step_propagators(params, config)
    n_steps = len(props)

    checkpoint_steps: list[int] = []
    if checkpoint_times is not None:
        for t in checkpoint_times:
            step = int(round(t / config.step_ns))
            if step < 1 or step > n_steps * config.repetitions:
                raise ValueError(f"checkpoint {t} ns outside the simulated window")
            checkpoint_steps.append(step)

    n_threads = max(1, int(os.environ.get("SIVSIM_THREADS", "1")))
    ids = np.arange(config.n_trajectories, dtype=np.int64)
    if n_threads == 1 or config.n_trajectories < 2 * n_threads:
        chunks = [ids]
    else:
        chunks = np.array_split(ids, n_threads)

    results = []
    if len(chunks) == 1:
        results.append(_run_chunk(params, config, chunks[0], props, channels,
                                  edges, checkpoint_steps))
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [pool.submit(_run_chunk, params, config, chunk, props,
                                   channels, edges, checkpoint_steps)
                       for chunk in chunks]
            results = [f.result() for f in futures]

    flat = [rec for recs, _ in results for rec in recs]
    flat.sort(key=lambda r: (r[0], r[2]))
    traj = np.array([r[0] for r in flat], dtype=np.int64)
    pulse = np.array([r[1] for r in flat], dtype=np.int64)
    t = np.array([r[2] for r in flat], dtype=float)
    channel = np.array([r[3] for r in flat], dtype=np.int8)
    freq = np.full(len(flat), -1, dtype=np.int8)
    meta = {
        "seed": config.seed,
        "n_trajectories": config.n_trajectories,
        "repetitions": config.repetitions,
        "period_ns": config.period_ns,
        "pulses_per_period": len(config.generation_starts),
        "resolution_ns": config.resolution_ns,
        "step_ns": config.step_ns,
        "roles": [role for _, role in config.pulse_sequence],
    }
    stream = ClickStream(traj, pulse, t, channel, freq, meta)

    pops = None
    if checkpoint_times is not None:
        pops = sum(p for _, p in results if p is not None)
        pops = pops / config.n_trajectories
    return stream, pops


def run_trajectories(params: CqedParams, config: TrajectoryConfig) -> ClickStream:
    """Standard quantum-jump unraveling of the five-level master equation.

    Between jumps the state evolves under the non-Hermitian effective
    Hamiltonian via per-step matrix exponentials (exact for the sampled
    piecewise-constant envelopes); a jump fires when the squared norm crosses
    a per-segment uniform threshold, with the jump time bisected to
    ``resolution_ns`` and the channel drawn proportionally to
    <psi|L_i^dag L_i|psi>.  Trajectories use counter-based random streams
    keyed by (seed, trajectory id), so results do not depend on execution
    order or thread count.
    """
    stream, _ = _engine(params, config)
    return stream


def trajectory_mean_populations(params: CqedParams, config: TrajectoryConfig,
                                times: Sequence[float]) -> np.ndarray:
    """Monte-Carlo mean basis populations at the requested times (snapped to
    the step grid)."""
    _, pops = _engine(params, config, checkpoint_times=times)
    return pops


def master_equation_populations(params: CqedParams, config: TrajectoryConfig,
                                times: Sequence[float]) -> np.ndarray:
    """Master-equation mean populations for the same pulse sequence."""
    gen_env = _sum_envelopes(config, GENERATE)
    reinit_env = _sum_envelopes(config, REINITIALIZE)

    period = config.period_ns

    def wrapped(env):
        def call(t):
            rep = min(int(t // period), config.repetitions - 1)
            return env(t - rep * period)
        return call

    system = build_system(params, wrapped(gen_env), with_reinit=True,
                          reinit_pulse=wrapped(reinit_env))
    t_end = config.period_ns * config.repetitions
    snapped = np.array([config.step_ns * round(t / config.step_ns) for t in times])
    samples = max(int(np.ceil(t_end / config.step_ns)) + 1, 201)
    traj = evolve(system, pure_density(5, BasisLabel.UP_0),
                  TimeGrid(0.0, t_end, samples=samples))
    # evolve samples uniformly; read populations at the snapped times
    pops = np.stack([np.interp(snapped, traj.times, traj.states[:, i, i].real)
                     for i in range(5)], axis=1)
    return pops


@dataclass(frozen=True)
class CorrelationHistogram:
    """Signed-delay coincidence histogram of emission records.

    ``normalization`` is the mean side-peak area after correcting each peak
    for its pair multiplicity (a k-period delay has repetitions - k
    contributing window pairs per trajectory), so an uncorrelated stream
    normalizes to 1.
    """

    bin_centers: np.ndarray
    counts: np.ndarray
    normalization: float
    g2_zero: float
    period_ns: float
    repetitions: int
    window_ns: float

    def normalized(self) -> np.ndarray:
        if self.normalization <= 0:
            raise ValueError("histogram has no side-peak normalization")
        width = self.bin_centers[1] - self.bin_centers[0]
        return self.counts / (self.normalization / self.period_ns) / width


def g2_histogram(clicks: ClickStream, bin_width_ns: float = 1.0,
                 max_tau_ns: float | None = None) -> CorrelationHistogram:
    """Histogram of pairwise emission delays within each trajectory."""
    if len(clicks) == 0:
        raise ValueError("empty click stream")
    period = float(clicks.meta["period_ns"])
    reps = int(clicks.meta["repetitions"])
    if max_tau_ns is None:
        max_tau_ns = period * min(reps, 11)
    by_traj = clicks.emission_times_by_trajectory()
    if not by_traj:
        raise ValueError("click stream has no emission records")

    half_bins = int(np.ceil(max_tau_ns / bin_width_ns))
    pos_edges = np.linspace(0.0, max_tau_ns, half_bins + 1)
    pos_counts = np.zeros(half_bins)
    for times in by_traj.values():
        if times.size < 2:
            continue
        i, j = np.triu_indices(times.size, k=1)
        delays = times[j] - times[i]
        delays = delays[delays <= max_tau_ns]
        pos_counts += np.histogram(delays, bins=pos_edges)[0]
    # each ordered pair appears at +tau and -tau; mirroring keeps the
    # histogram exactly symmetric regardless of bin-edge collisions
    counts = np.concatenate([pos_counts[::-1], pos_counts])
    edges = np.concatenate([-pos_edges[::-1], pos_edges[1:]])
    centers = 0.5 * (edges[:-1] + edges[1:])
    window = 0.5 * period
    norm, g2 = _g2_from_counts(centers, counts, period, reps, window)
    return CorrelationHistogram(bin_centers=centers, counts=counts,
                                normalization=norm, g2_zero=g2,
                                period_ns=period, repetitions=reps,
                                window_ns=window)


def _peak_area(centers, counts, lo, hi):
    mask = (centers >= lo) & (centers < hi)
    return float(counts[mask].sum())


def _g2_from_counts(centers, counts, period, reps, window):
    max_tau = abs(centers).max() + (centers[1] - centers[0])
    k_max = min(10, reps - 1, int(max_tau / period))
    if k_max < 1:
        raise ValueError("no side peaks available within the histogram range")
    side_areas = []
    for k in range(1, k_max + 1):
        pos = _peak_area(centers, counts, k * period - 0.5 * period,
                         k * period + 0.5 * period)
        neg = _peak_area(centers, counts, -k * period - 0.5 * period,
                         -k * period + 0.5 * period)
        side_areas.append(0.5 * (pos + neg) / (reps - k))
    normalization = float(np.mean(side_areas))
    central = _peak_area(centers, counts, -window, window) / reps
    g2 = central / normalization if normalization > 0 else 0.0
    return normalization, float(g2)


def g2_zero(histogram: CorrelationHistogram, window_ns: float | None = None) -> float:
    """Central coincidence area over the mean (multiplicity-corrected)
    side-peak area."""
    window = histogram.window_ns if window_ns is None else window_ns
    if window > histogram.period_ns:
        raise ValueError("window must not exceed the pulse period")
    _, g2 = _g2_from_counts(histogram.bin_centers, histogram.counts,
                            histogram.period_ns, histogram.repetitions, window)
    return g2


def g2_zero_stderr(histogram: CorrelationHistogram,
                   window_ns: float | None = None) -> float:
    """Poisson-dominated standard error of g2_zero."""
    window = histogram.window_ns if window_ns is None else window_ns
    central = _peak_area(histogram.bin_centers, histogram.counts, -window, window)
    if histogram.normalization <= 0:
        return np.inf
    return float(np.sqrt(max(central, 1.0))
                 / (histogram.repetitions * histogram.normalization))


@dataclass(frozen=True)
class SweepPoint:
    gamma_t: float
    g2_zero: float
    histogram: CorrelationHistogram


def gamma_t_sweep(params: CqedParams, values: Sequence[float],
                  config: TrajectoryConfig, bin_width_ns: float = 1.0,
                  ) -> list[SweepPoint]:
    """g2(0) versus qubit decay rate, using common random numbers across
    points (same seed, same per-trajectory streams)."""
    values = list(values)
    if sorted(values) != values:
        raise ValueError("gamma_t values must be sorted ascending")
    points = []
    for value in values:
        p = replace(params, gamma_t=value)
        stream = run_trajectories(p, config)
        hist = g2_histogram(stream, bin_width_ns=bin_width_ns)
        points.append(SweepPoint(gamma_t=value, g2_zero=hist.g2_zero,
                                 histogram=hist))
    return points
