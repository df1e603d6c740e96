"""Source-level photon statistics: stream runs, loss budget, duty cycle,
coherent-source comparison, nuclear-spin correlations, thermal estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .trajectories import CHANNEL_CODES, ClickStream
from .dynamics import EMISSION

# exact SI values
PLANCK_J_S = 6.62607015e-34
BOLTZMANN_J_K = 1.380649e-23


# ---------------------------------------------------------------------------
# consecutive-photon stream statistics


@dataclass(frozen=True)
class StreamStats:
    """Histogram of maximal runs of consecutive detected photons."""

    run_counts: np.ndarray      # run_counts[n-1] = number of maximal runs of length n
    attempts: int
    successes: int
    rep_rate_khz: float | None = None
    duty_cycle: float | None = None

    @property
    def n_max(self) -> int:
        nonzero = np.flatnonzero(self.run_counts)
        return int(nonzero[-1] + 1) if nonzero.size else 0

    def count(self, n: int) -> int:
        if n < 1 or n > len(self.run_counts):
            return 0
        return int(self.run_counts[n - 1])


def _runs_from_bool(success: np.ndarray) -> np.ndarray:
    """Lengths of maximal runs of True values."""
    if success.size == 0:
        return np.empty(0, dtype=np.int64)
    padded = np.concatenate([[False], success, [False]])
    changes = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = changes[::2], changes[1::2]
    return stops - starts


def count_streams(clicks: ClickStream | None = None, *, eta: float | None = None,
                  attempts: int | None = None, seed: int | None = None,
                  rep_rate_khz: float | None = None,
                  duty_cycle: float | None = None,
                  eta_modulation: Mapping | None = None,
                  block_size: int = 10_000_000) -> StreamStats:
    """Count maximal runs of consecutive successes.

    Either ingest a ClickStream (success = at least one emission at a pulse
    index) or simulate Bernoulli attempts at efficiency ``eta``.  The
    optional ``eta_modulation`` applies a slow mean-reverting modulation
    eta(t) (keys: sigma, tau_attempts) that mimics spectral-diffusion-driven
    correlations between neighboring attempts.
    """
    if clicks is not None:
        if len(clicks) == 0:
            raise ValueError("empty click stream")
        n_pulses = int(clicks.meta["repetitions"]) * int(
            clicks.meta.get("pulses_per_period", 1))
        n_traj = int(clicks.meta["n_trajectories"])
        em = clicks.emissions()
        run_counts: dict[int, int] = {}
        successes = 0
        for tid in range(n_traj):
            mask = em.traj == tid
            success = np.zeros(n_pulses, dtype=bool)
            success[em.pulse[mask]] = True
            successes += int(success.sum())
            for length in _runs_from_bool(success):
                run_counts[int(length)] = run_counts.get(int(length), 0) + 1
        n_max = max(run_counts) if run_counts else 0
        hist = np.zeros(max(n_max, 1), dtype=np.int64)
        for length, count in run_counts.items():
            hist[length - 1] = count
        return StreamStats(hist, attempts=n_pulses * n_traj, successes=successes,
                           rep_rate_khz=rep_rate_khz, duty_cycle=duty_cycle)

    if eta is None or attempts is None:
        raise ValueError("need either a click stream or (eta, attempts)")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    if seed is None:
        raise ValueError("Bernoulli mode requires a seed")

    rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
    counts: dict[int, int] = {}
    successes = 0
    pending = 0  # open run continued across blocks
    if eta_modulation is not None:
        mod_sigma = float(eta_modulation.get("sigma", 0.0))
        mod_tau = float(eta_modulation.get("tau_attempts", 1.0))
        mod_state = 0.0
    done = 0
    while done < attempts:
        n = min(block_size, attempts - done)
        if eta_modulation is None:
            block = rng.random(n) < eta
        else:
            # AR(1) discretization of a mean-reverting modulation
            phi = math.exp(-1.0 / mod_tau)
            noise = rng.normal(0.0, mod_sigma * math.sqrt(1 - phi * phi), size=n)
            path = np.empty(n)
            x = mod_state
            for i in range(n):
                x = phi * x + noise[i]
                path[i] = x
            mod_state = x
            block = rng.random(n) < np.clip(eta * (1.0 + path), 0.0, 1.0)
        successes += int(block.sum())
        lengths = _runs_from_bool(block)
        if pending:
            if block[0]:
                lengths = lengths.copy()
                lengths[0] += pending
            else:
                counts[pending] = counts.get(pending, 0) + 1
            pending = 0
        if lengths.size and block[-1]:
            pending = int(lengths[-1])
            lengths = lengths[:-1]
        for length in lengths:
            counts[int(length)] = counts.get(int(length), 0) + 1
        done += n
    if pending:
        counts[pending] = counts.get(pending, 0) + 1
    n_max = max(counts) if counts else 0
    hist = np.zeros(max(n_max, 1), dtype=np.int64)
    for length, count in counts.items():
        hist[length - 1] = count
    return StreamStats(hist, attempts=attempts, successes=successes,
                       rep_rate_khz=rep_rate_khz, duty_cycle=duty_cycle)


# ---------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    value: float          # tau for "exp", eta for "geometric"
    sigma: float
    intercept: float


def fit_exponential_decay(xs: Sequence[float], ys: Sequence[float],
                          model: str = "exp",
                          sigmas: Sequence[float] | None = None) -> DecayFit:
    """Weighted log-linear least squares for y = A exp(-x/tau) or y = A eta^x.

    Default weights assume Poisson counts (sigma_y = sqrt(y)).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ValueError("need at least three points")
    if np.any(ys <= 0):
        raise ValueError("ys must be positive for a log-linear fit")
    if np.ptp(xs) == 0:
        raise ValueError("xs are degenerate")
    if model not in ("exp", "geometric"):
        raise ValueError(f"unknown model {model!r}")
    log_y = np.log(ys)
    if sigmas is None:
        sigma_log = 1.0 / np.sqrt(ys)
    else:
        sigmas = np.asarray(sigmas, dtype=float)
        sigma_log = sigmas / ys
    w = 1.0 / sigma_log**2
    sw = w.sum()
    x_mean = (w * xs).sum() / sw
    y_mean = (w * log_y).sum() / sw
    sxx = (w * (xs - x_mean) ** 2).sum()
    slope = (w * (xs - x_mean) * (log_y - y_mean)).sum() / sxx
    intercept = y_mean - slope * x_mean
    slope_sigma = np.sqrt(1.0 / sxx)
    if model == "exp":
        if slope >= 0:
            raise ValueError("data do not decay; cannot report a positive tau")
        tau = -1.0 / slope
        return DecayFit(value=float(tau), sigma=float(slope_sigma / slope**2),
                        intercept=float(math.exp(intercept)))
    eta = math.exp(slope)
    return DecayFit(value=float(eta), sigma=float(eta * slope_sigma),
                    intercept=float(math.exp(intercept)))


# ---------------------------------------------------------------------------
# loss budget / duty cycle / coherent-source gain


@dataclass(frozen=True)
class LossBudget:
    """Named efficiency factors, each a [low, high] interval in (0, 1]."""

    factors: dict

    def __post_init__(self):
        cleaned = {}
        for name, value in self.factors.items():
            pair = (value, value) if np.isscalar(value) else tuple(value)
            if len(pair) != 2 or not (0.0 < pair[0] <= pair[1] <= 1.0):
                raise ValueError(f"factor {name!r} must be an interval within (0, 1]")
            cleaned[name] = (float(pair[0]), float(pair[1]))
        object.__setattr__(self, "factors", cleaned)

    @classmethod
    def from_json(cls, text: str) -> "LossBudget":
        """Parse a JSON map of factor name to value or [low, high]."""
        import json
        return cls(json.loads(text))


DEVICE_LOSS_BUDGET = LossBudget({
    "initialization": (0.8, 1.0),
    "siv_to_waveguide": 0.62,
    "fiber_coupling": 0.7,
    "filter_setup": (0.5, 0.6),
    "fiber_network": 0.92,
    "detector": (0.85, 0.9),
})


def loss_budget_product(budget: LossBudget) -> tuple[float, float]:
    """Interval product of all factor ranges."""
    low, high = 1.0, 1.0
    for lo, hi in budget.factors.values():
        low *= lo
        high *= hi
    return low, high


def duty_cycle(rep_rate_khz: float, per_pulse_efficiency: float,
               click_rate_khz: float,
               downtime_fractions: Mapping[str, float] | None = None) -> float:
    """Fraction of wall-clock time the source is generating photons:
    click_rate / (rep_rate * per_pulse_efficiency)."""
    if rep_rate_khz <= 0 or click_rate_khz <= 0:
        raise ValueError("rates must be positive")
    if per_pulse_efficiency <= 0:
        raise ValueError("per-pulse efficiency must be positive")
    if downtime_fractions is not None:
        total = sum(downtime_fractions.values())
        if abs(total - 1.0) > 0.01:
            raise ValueError(f"down-time fractions sum to {total:.3f}, expected 1")
    return click_rate_khz / (rep_rate_khz * per_pulse_efficiency)


def wcs_gain(duty: float, g2zero: float) -> float:
    """Single-photon-rate gain over an infidelity-matched weak coherent
    source: duty / g2(0).  A two-photon-infidelity match requires the
    coherent source to run at P(1)_wcs = g2(0) * P(1)_sps, hence the ratio."""
    if g2zero < 0:
        raise ValueError("g2(0) must be >= 0")
    if g2zero == 0:
        return math.inf
    return duty / g2zero


# ---------------------------------------------------------------------------
# nuclear-spin frequency-labeled photon chain


@dataclass(frozen=True)
class NuclearChainConfig:
    p_flip: float
    n_photons: int
    seed: int
    initial_state: int = 0      # 0 = nuclear down, 1 = nuclear up

    def __post_init__(self):
        if not 0.0 <= self.p_flip <= 0.5:
            raise ValueError("p_flip must lie in [0, 0.5]")
        if self.n_photons < 1:
            raise ValueError("need at least one photon")
        if self.initial_state not in (0, 1):
            raise ValueError("initial_state must be 0 or 1")


def simulate_nuclear_chain(config: NuclearChainConfig,
                           electron_init_fidelity: float = 1.0,
                           filter_leakage: float = 0.0,
                           period_ns: float = 2469.0) -> ClickStream:
    """Two-state Markov chain over the nuclear spin with per-photon flips.

    Each emitted photon carries the frequency label of the current nuclear
    state, is mislabeled with probability ``filter_leakage`` (symmetric), and
    is dropped with probability 1 - electron_init_fidelity.
    """
    if not 0.0 <= electron_init_fidelity <= 1.0:
        raise ValueError("electron_init_fidelity must lie in [0, 1]")
    if not 0.0 <= filter_leakage <= 0.5:
        raise ValueError("filter_leakage must lie in [0, 0.5]")
    rng = np.random.Generator(np.random.Philox(key=[config.seed, 0]))
    n = config.n_photons
    flips = rng.random(n) < config.p_flip
    states = (config.initial_state + np.cumsum(flips)) % 2
    labels = states.copy()
    if filter_leakage > 0:
        wrong = rng.random(n) < filter_leakage
        labels = np.where(wrong, 1 - labels, labels)
    detected = (rng.random(n) < electron_init_fidelity
                if electron_init_fidelity < 1.0 else np.ones(n, dtype=bool))
    idx = np.flatnonzero(detected)
    return ClickStream(
        traj=np.zeros(idx.size, dtype=np.int64),
        pulse=idx.astype(np.int64),
        t=idx * period_ns,
        channel=np.full(idx.size, CHANNEL_CODES[EMISSION], dtype=np.int8),
        freq=labels[idx].astype(np.int8),
        meta={"seed": config.seed, "n_trajectories": 1,
              "repetitions": int(n), "period_ns": period_ns,
              "pulses_per_period": 1, "p_flip": config.p_flip},
    )


@dataclass(frozen=True)
class NuclearCorrelations:
    lags: np.ndarray
    g_same: np.ndarray          # same-frequency correlation vs photon-index lag
    g_cross: np.ndarray         # opposite-frequency correlation
    bunching_decay: DecayFit    # photons, from the g_same envelope
    antibunching_decay: DecayFit
    flip_probability_chain: float    # (1 - exp(-1/N)) / 2 from the chain model
    flip_probability_inverse: float  # 1 / N, the reciprocal-decay convention
    consecutive_same_to_cross: float


def nuclear_correlations(stream: ClickStream, max_lag: int | None = None,
                         ) -> NuclearCorrelations:
    """Frequency-label auto/cross correlations in photon-index lag.

    For a symmetric two-state chain the correlation envelope decays as
    (1-2p)^n, so the fitted decay constant N maps to p = (1-exp(-1/N))/2.
    The reciprocal convention p = 1/N is reported alongside.
    """
    em = stream.emissions()
    labels = em.freq[np.argsort(em.t)]
    if labels.size < 10:
        raise ValueError("stream too short for correlations")
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise ValueError("stream contains a single frequency label only")
    down = (labels == 0).astype(float)
    up = (labels == 1).astype(float)
    p_down = down.mean()
    p_up = up.mean()
    if max_lag is None:
        max_lag = min(labels.size // 4, 400)
    lags = np.arange(1, max_lag + 1)
    g_same = np.empty(lags.size)
    g_cross = np.empty(lags.size)
    for i, lag in enumerate(lags):
        a, b = down[:-lag], down[lag:]
        g_same[i] = (a * b).mean() / (p_down * p_down)
        g_cross[i] = (down[:-lag] * up[lag:]).mean() / (p_down * p_up)

    # fit the decaying envelopes |g - 1| while they stay clear of noise
    def fit_envelope(g):
        amp = np.abs(g - 1.0)
        usable = amp > 0.05 * amp[0]
        stop = int(np.argmin(usable)) if not usable.all() else amp.size
        sel = slice(0, max(stop, 5))
        # equal weights in log space: the envelope error is multiplicative
        return fit_exponential_decay(lags[sel], amp[sel], model="exp",
                                     sigmas=amp[sel])

    bunching = fit_envelope(g_same)
    antibunching = fit_envelope(g_cross)
    n_decay = bunching.value
    p_chain = 0.5 * (1.0 - math.exp(-1.0 / n_decay))
    same = float(np.count_nonzero(labels[:-1] == labels[1:]))
    cross = float(np.count_nonzero(labels[:-1] != labels[1:]))
    ratio = same / cross if cross else math.inf
    return NuclearCorrelations(lags=lags, g_same=g_same, g_cross=g_cross,
                               bunching_decay=bunching,
                               antibunching_decay=antibunching,
                               flip_probability_chain=p_chain,
                               flip_probability_inverse=1.0 / n_decay,
                               consecutive_same_to_cross=ratio)


def expected_same_to_cross_ratio(p_flip: float, leakage: float) -> float:
    """Consecutive same-label over cross-label probability for a symmetric
    chain with symmetric mislabeling."""
    agree = (1 - leakage) ** 2 + leakage**2
    disagree = 2 * leakage * (1 - leakage)
    p_same = (1 - p_flip) * agree + p_flip * disagree
    return p_same / (1.0 - p_same)


# ---------------------------------------------------------------------------
# hyperfine spectrum scan


def hyperfine_scan(splitting_mhz: float, filter_fwhm_mhz: float,
                   scan_mhz: Sequence[float],
                   populations: tuple[float, float] = (0.5, 0.5),
                   photon_fwhm_mhz: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """Detected rate versus pump detuning: two Lorentzians at +-splitting/2.

    Lorentzian convolution adds FWHMs, so each peak has width
    photon_fwhm + filter_fwhm.
    """
    if filter_fwhm_mhz <= 0:
        raise ValueError("filter width must be positive")
    scan = np.asarray(scan_mhz, dtype=float)
    width = photon_fwhm_mhz + filter_fwhm_mhz
    hwhm = width / 2.0

    def lorentzian(x, x0):
        return hwhm**2 / ((x - x0) ** 2 + hwhm**2)

    rate = populations[0] * lorentzian(scan, -splitting_mhz / 2.0) \
        + populations[1] * lorentzian(scan, +splitting_mhz / 2.0)
    return scan, rate


# ---------------------------------------------------------------------------
# elevated-temperature estimates


@dataclass(frozen=True)
class ThermalEstimate:
    temperature_k: float
    delta_gs_ghz: float
    t2_star_ns: float
    t1_ns: float
    photon_fwhm_ns: float
    upper_branch_population: float | None = None
    linewidth_increase: float | None = None
    population_decay_loss: float | None = None


def thermal_estimates(request: ThermalEstimate) -> ThermalEstimate:
    """Fill in the elevated-temperature degradation estimates.

    Upper-branch population is the two-level Boltzmann steady state
    x/(1+x) with x = exp(-h delta_gs / (kB T)).  Population decay loss is
    photon_fwhm / T1.  The linewidth increase convolves the transform-limited
    Gaussian photon spectrum with the Markovian dephasing Lorentzian of
    width 1/(pi T2*), using the standard Voigt-width approximation.
    """
    if request.temperature_k <= 0:
        raise ValueError("temperature must be positive")
    x = math.exp(-PLANCK_J_S * request.delta_gs_ghz * 1e9
                 / (BOLTZMANN_J_K * request.temperature_k))
    population = x / (1.0 + x)
    loss = request.photon_fwhm_ns / request.t1_ns
    # transform-limited Gaussian intensity FWHM tau <-> spectral FWHM 2 ln2/(pi tau)
    f_gauss = 2.0 * math.log(2.0) / (math.pi * request.photon_fwhm_ns)  # GHz
    f_lorentz = 1.0 / (math.pi * request.t2_star_ns)                    # GHz
    f_voigt = 0.5346 * f_lorentz + math.sqrt(0.2166 * f_lorentz**2 + f_gauss**2)
    increase = f_voigt / f_gauss - 1.0
    return ThermalEstimate(
        temperature_k=request.temperature_k, delta_gs_ghz=request.delta_gs_ghz,
        t2_star_ns=request.t2_star_ns, t1_ns=request.t1_ns,
        photon_fwhm_ns=request.photon_fwhm_ns,
        upper_branch_population=population,
        linewidth_increase=increase,
        population_decay_loss=loss,
    )
