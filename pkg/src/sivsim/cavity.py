"""Cavity efficiency algebra, reflection spectroscopy, and 1-D quasipotential design."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

OVER = "over"
UNDER = "under"
CRITICAL = "critical"


# ---------------------------------------------------------------------------
# efficiency algebra


def cooperativity(g: float, kappa_tot: float, gamma: float) -> float:
    """Dimensionless atom-cavity cooperativity 4 g^2 / (kappa_tot gamma)."""
    if kappa_tot <= 0 or gamma <= 0:
        raise ValueError("kappa_tot and gamma must be positive")
    return 4.0 * g**2 / (kappa_tot * gamma)


def source_efficiency(g: float, kappa_w: float, kappa_s: float, gamma: float,
                      ) -> tuple[float, float, float]:
    """(p_c, p_w, eta_s): cavity branching, waveguide branching, and their product.

    eta_s = 4 g^2 kappa_w / ((kappa_s + kappa_w)(4 g^2 + (kappa_s + kappa_w) gamma))
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if min(g, kappa_w, kappa_s) < 0:
        raise ValueError("rates must be >= 0")
    kappa_tot = kappa_w + kappa_s
    if kappa_tot == 0:
        return 0.0, 0.0, 0.0
    c = cooperativity(g, kappa_tot, gamma)
    p_c = c / (c + 1.0)
    p_w = kappa_w / kappa_tot
    eta_s = 4.0 * g**2 * kappa_w / (kappa_tot * (4.0 * g**2 + kappa_tot * gamma))
    return p_c, p_w, eta_s


def optimal_waveguide_rate(kappa_s: float, g: float, gamma: float) -> float:
    """Waveguide rate maximizing eta_s: sqrt(kappa_s (4 g^2 + kappa_s gamma) / gamma)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if kappa_s < 0 or g < 0:
        raise ValueError("rates must be >= 0")
    return float(np.sqrt(kappa_s * (4.0 * g**2 + kappa_s * gamma) / gamma))


# ---------------------------------------------------------------------------
# reflection spectroscopy


@dataclass(frozen=True)
class ReflectionSpectrum:
    """Intensity reflection versus probe frequency (ordinary GHz)."""

    omega: np.ndarray
    reflection: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        refl = np.asarray(self.reflection, dtype=float)
        if omega.shape != refl.shape or omega.ndim != 1:
            raise ValueError("omega and reflection must be matching 1-d arrays")
        if np.any(np.diff(omega) <= 0):
            raise ValueError("omega must be strictly increasing")
        if np.min(refl) < -1e-9 or np.max(refl) > 1.0 + 1e-9:
            raise ValueError("reflection values must lie in [0, 1]")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "reflection", refl)


def reflection_model(omega, g, kappa_tot, kappa_w, gamma, omega_c, omega_a):
    """R(omega) = |1 - 2 kappa_w / (2i(omega-omega_c) + kappa_tot
    + 4 g^2 / (2i(omega-omega_a) + gamma))|^2.

    Every term is a rate or detuning in the same (ordinary GHz) units, so the
    angular conversion cancels and the expression can be evaluated directly.
    """
    omega = np.asarray(omega, dtype=float)
    emitter = 4.0 * g**2 / (2j * (omega - omega_a) + gamma)
    denom = 2j * (omega - omega_c) + kappa_tot + emitter
    r_field = 1.0 - 2.0 * kappa_w / denom
    return np.abs(r_field) ** 2


def reflection_spectrum(g: float, kappa_w: float, kappa_s: float, gamma: float,
                        omega_c: float, omega_a: float,
                        omega: Sequence[float]) -> ReflectionSpectrum:
    omega = np.asarray(omega, dtype=float)
    if omega.size == 0:
        raise ValueError("frequency range is empty")
    refl = reflection_model(omega, g, kappa_w + kappa_s, kappa_w, gamma,
                            omega_c, omega_a)
    return ReflectionSpectrum(omega, np.clip(refl, 0.0, 1.0))


def bare_cavity_minimum(kappa_w: float, kappa_tot: float) -> float:
    """On-resonance reflection of the emitter-free cavity, (1 - 2 kappa_w/kappa_tot)^2."""
    r = 1.0 - 2.0 * kappa_w / kappa_tot
    return r * r


@dataclass(frozen=True)
class CqedFitResult:
    g: float
    kappa_tot: float
    kappa_w: float
    gamma: float
    omega_c: float
    omega_a: float
    sigma: dict = field(default_factory=dict)
    cooperativity: float = 0.0
    cooperativity_sigma: float = 0.0
    coupling: str = OVER
    residual_rms: float = 0.0

    @property
    def kappa_s(self) -> float:
        return self.kappa_tot - self.kappa_w


class FitError(RuntimeError):
    pass


_PARAM_NAMES = ("g", "kappa_tot", "kappa_w", "gamma", "omega_c", "omega_a")


def _fit_once(spectrum, x0, bounds):
    def residuals(x):
        g, kappa_tot, w_frac, gamma, omega_c, omega_a = x
        model = reflection_model(spectrum.omega, g, kappa_tot,
                                 w_frac * kappa_tot, gamma, omega_c, omega_a)
        return model - spectrum.reflection

    return least_squares(residuals, x0, bounds=bounds, method="trf",
                         x_scale="jac", max_nfev=4000)


def fit_cqed_params(spectrum: ReflectionSpectrum,
                    initial_guess: dict | None = None) -> CqedFitResult:
    """Least-squares fit of the reflection model under the overcoupled branch.

    The waveguide rate is parameterized as a fraction of kappa_tot bounded to
    [0.5, 1], which resolves the under/over ambiguity of the bare-cavity
    lineshape.  Five deterministically jittered starts are tried; the best
    residual wins, ties broken by the smaller parameter norm.
    """
    if initial_guess is None:
        initial_guess = {}
    omega = spectrum.omega
    span = omega[-1] - omega[0]
    if span <= 0:
        raise FitError("spectrum span is empty")
    guess = {
        "g": initial_guess.get("g", span / 50.0),
        "kappa_tot": initial_guess.get("kappa_tot", span / 3.0),
        "kappa_w": initial_guess.get("kappa_w"),
        "gamma": initial_guess.get("gamma", span / 2000.0),
        "omega_c": initial_guess.get("omega_c", float(omega[np.argmin(spectrum.reflection)])),
        "omega_a": initial_guess.get("omega_a", float(omega[np.argmin(spectrum.reflection)])),
    }
    if guess["kappa_w"] is None:
        guess["kappa_w"] = 0.75 * guess["kappa_tot"]
    w_frac0 = np.clip(guess["kappa_w"] / guess["kappa_tot"], 0.55, 0.98)
    x0_base = np.array([guess["g"], guess["kappa_tot"], w_frac0, guess["gamma"],
                        guess["omega_c"], guess["omega_a"]])
    lower = np.array([0.0, 1e-6, 0.5, 1e-9, omega[0] - span, omega[0] - span])
    upper = np.array([np.inf, np.inf, 1.0, np.inf, omega[-1] + span, omega[-1] + span])

    rng = np.random.default_rng(0)
    best = None
    for start in range(5):
        x0 = x0_base.copy()
        if start > 0:
            jitter = rng.uniform(0.7, 1.3, size=4)
            x0[0] *= jitter[0]
            x0[1] *= jitter[1]
            x0[3] *= jitter[2]
            x0[2] = np.clip(x0[2] * jitter[3], 0.51, 0.99)
        x0 = np.clip(x0, lower + 1e-12, upper - 1e-12)
        try:
            fit = _fit_once(spectrum, x0, (lower, upper))
        except Exception:
            continue
        if best is None or fit.cost < best.cost * (1 - 1e-12) or (
                abs(fit.cost - best.cost) <= 1e-12 * max(best.cost, 1.0)
                and np.linalg.norm(fit.x) < np.linalg.norm(best.x)):
            best = fit
    if best is None:
        raise FitError("all fit starts failed")

    g, kappa_tot, w_frac, gamma, omega_c, omega_a = best.x
    kappa_w = w_frac * kappa_tot
    m, n = best.jac.shape
    dof = max(m - n, 1)
    res_var = 2.0 * best.cost / dof
    try:
        cov = np.linalg.inv(best.jac.T @ best.jac) * res_var
    except np.linalg.LinAlgError:
        cov = np.full((n, n), np.nan)
    x_sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    # propagate (kappa_tot, w_frac) -> kappa_w and the cooperativity
    grad_kw = np.zeros(n)
    grad_kw[1] = w_frac
    grad_kw[2] = kappa_tot
    kappa_w_sigma = float(np.sqrt(max(grad_kw @ cov @ grad_kw, 0.0)))
    c_value = cooperativity(g, kappa_tot, gamma)
    grad_c = np.zeros(n)
    grad_c[0] = 8.0 * g / (kappa_tot * gamma)
    grad_c[1] = -c_value / kappa_tot
    grad_c[3] = -c_value / gamma
    c_sigma = float(np.sqrt(max(grad_c @ cov @ grad_c, 0.0)))

    sigma = {name: float(s) for name, s in zip(_PARAM_NAMES, x_sigma)}
    sigma["kappa_w"] = kappa_w_sigma
    kappa_s = kappa_tot - kappa_w
    if abs(kappa_w - kappa_s) <= 1e-9 * kappa_tot:
        coupling = CRITICAL
    else:
        coupling = OVER if kappa_w > kappa_s else UNDER
    rms = float(np.sqrt(2.0 * best.cost / m))
    return CqedFitResult(g=float(g), kappa_tot=float(kappa_tot),
                         kappa_w=float(kappa_w), gamma=float(gamma),
                         omega_c=float(omega_c), omega_a=float(omega_a),
                         sigma=sigma, cooperativity=float(c_value),
                         cooperativity_sigma=c_sigma, coupling=coupling,
                         residual_rms=rms)


@dataclass(frozen=True)
class CouplingEvidence:
    kind: str
    emitter_minimum: float
    cavity_minimum: float
    dips_below_cavity: bool
    detunings: np.ndarray
    dip_ratio: np.ndarray


def classify_coupling(fit: CqedFitResult, spectrum: ReflectionSpectrum | None = None,
                      ) -> CouplingEvidence:
    """Classify the cavity coupling and collect the spectroscopic evidence.

    Only an overcoupled cavity lets the emitter feature dip below the
    bare-cavity minimum; the returned curve scans the modeled emitter dip
    (normalized to the cavity dip) against emitter-cavity detuning.
    """
    kappa_s = fit.kappa_s
    if abs(fit.kappa_w - kappa_s) <= 1e-9 * fit.kappa_tot:
        kind = CRITICAL
    else:
        kind = OVER if fit.kappa_w > kappa_s else UNDER
    cavity_min = bare_cavity_minimum(fit.kappa_w, fit.kappa_tot)

    if spectrum is not None:
        near = np.abs(spectrum.omega - fit.omega_a) < 10.0 * max(fit.gamma, 1e-6) * (
            1.0 + fit.cooperativity)
        emitter_min = float(np.min(spectrum.reflection[near])) if np.any(near) \
            else float(np.min(spectrum.reflection))
    else:
        omega = np.linspace(fit.omega_a - 20 * fit.gamma * (1 + fit.cooperativity),
                            fit.omega_a + 20 * fit.gamma * (1 + fit.cooperativity), 4001)
        emitter_min = float(np.min(reflection_model(
            omega, fit.g, fit.kappa_tot, fit.kappa_w, fit.gamma, fit.omega_c,
            fit.omega_a)))

    detunings = np.linspace(-1.5 * fit.kappa_tot, 1.5 * fit.kappa_tot, 61)
    ratios = []
    for det in detunings:
        omega_a = fit.omega_c + det
        window = np.linspace(omega_a - 30 * fit.gamma * (1 + fit.cooperativity),
                             omega_a + 30 * fit.gamma * (1 + fit.cooperativity), 1201)
        with_emitter = np.min(reflection_model(window, fit.g, fit.kappa_tot,
                                               fit.kappa_w, fit.gamma,
                                               fit.omega_c, omega_a))
        bare = np.min(reflection_model(window, 0.0, fit.kappa_tot, fit.kappa_w,
                                       fit.gamma, fit.omega_c, omega_a))
        ratios.append(with_emitter / max(bare, 1e-12))
    return CouplingEvidence(kind=kind, emitter_minimum=emitter_min,
                            cavity_minimum=cavity_min,
                            dips_below_cavity=bool(emitter_min < cavity_min - 1e-12),
                            detunings=detunings, dip_ratio=np.asarray(ratios))


# ---------------------------------------------------------------------------
# quasipotential model


@dataclass(frozen=True)
class QuasipotentialProfile:
    """Piecewise-constant barrier landscape of an asymmetric 1-D cavity.

    Each segment is (height_thz, width_nm): the frequency detuning of the
    mode from the local band edge (positive = evanescent barrier, negative =
    guiding well) and the physical length of the region.  Exactly one
    contiguous negative-height well must be present.
    """

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.segments) < 3:
            raise ValueError("profile needs at least barrier-well-barrier segments")
        signs = [h < 0 for h, w in self.segments]
        for h, w in self.segments:
            if w <= 0:
                raise ValueError("segment widths must be positive")
        wells = []
        in_well = False
        for i, neg in enumerate(signs):
            if neg and not in_well:
                wells.append(i)
                in_well = True
            elif not neg:
                in_well = False
        if len(wells) != 1:
            raise ValueError("profile must contain exactly one contiguous well")
        if signs[0] or signs[-1]:
            raise ValueError("profile must start and end with barriers")

    @property
    def well_slice(self) -> slice:
        signs = [h < 0 for h, _ in self.segments]
        start = signs.index(True)
        stop = start
        while stop < len(signs) and signs[stop]:
            stop += 1
        return slice(start, stop)

    def to_json(self) -> str:
        return json.dumps([{"height_thz": h, "width_nm": w}
                           for h, w in self.segments], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "QuasipotentialProfile":
        data = json.loads(text)
        return cls(tuple((seg["height_thz"], seg["width_nm"]) for seg in data))


@dataclass(frozen=True)
class DesignScores:
    q_left: float
    q_right: float
    q_scat: float
    q_wvg: float
    q_total: float
    mode_volume: float
    mode_frequency_thz: float
    fitness: float | None = None


# Effective-mass-like constant of the frequency-to-wavevector mapping,
# alpha = MASS_CONSTANT * sqrt(detuning): calibrated so the reference
# symmetric profile (20 THz barriers, 6 x 250 nm cells, -25 THz x 2200 nm
# well) scores Q_wvg ~ 1e4.  Absolute Q and V are uncalibrated against any
# 3-D structure; only ratios and trends are meaningful.
MASS_CONSTANT = 6.0e-4           # 1 / (nm sqrt(THz))
BASE_FREQUENCY_THZ = 407.0       # optical carrier for Q = nu / linewidth
MODE_LENGTH_UNIT_NM = 307.0      # lambda/n for 737 nm light in diamond


class ModeSearchError(RuntimeError):
    pass


def _wavevector(energy: complex, height: float) -> complex:
    # propagating for energy above the local potential, evanescent below
    return MASS_CONSTANT * np.sqrt(np.asarray(energy - height, dtype=complex))


def _transfer_matrix(profile: QuasipotentialProfile, energy: complex) -> np.ndarray:
    """Transfer matrix relating forward/backward amplitudes across the stack,
    with free propagation (height 0) on both outer sides."""
    m = np.eye(2, dtype=complex)
    k_prev = _wavevector(energy, 0.0)
    for height, width in profile.segments:
        k = _wavevector(energy, height)
        # interface continuity of psi and psi'
        ratio = k_prev / k
        interface = 0.5 * np.array([[1 + ratio, 1 - ratio],
                                    [1 - ratio, 1 + ratio]], dtype=complex)
        phase = 1j * k * width
        prop = np.array([[np.exp(phase), 0.0], [0.0, np.exp(-phase)]], dtype=complex)
        m = prop @ interface @ m
        k_prev = k
    k_out = _wavevector(energy, 0.0)
    ratio = k_prev / k_out
    interface = 0.5 * np.array([[1 + ratio, 1 - ratio],
                                [1 - ratio, 1 + ratio]], dtype=complex)
    return interface @ m


def _m22(profile, energy):
    return _transfer_matrix(profile, energy)[1, 1]


def _find_resonance(profile: QuasipotentialProfile) -> complex:
    """Siegert resonance: complex detuning where the outgoing-only condition
    M22 = 0 holds.  Seeded from the lowest real-axis dip of |M22| and refined
    by Newton iteration in the complex plane."""
    top = min(h for h, _ in profile.segments if h > 0)
    grid = np.linspace(1e-4 * top, 0.999 * top, 1600)
    t22 = np.array([abs(_m22(profile, e)) for e in grid])
    interior = np.flatnonzero((t22[1:-1] < t22[:-2]) & (t22[1:-1] <= t22[2:])) + 1
    if interior.size == 0:
        raise ModeSearchError("no quasi-bound mode found in the search window")
    # keep clear dips, then take the lowest-energy (fundamental) one
    floor = np.median(t22)
    dips = [i for i in interior if t22[i] < 0.8 * floor]
    seed = grid[dips[0] if dips else interior[int(np.argmin(t22[interior]))]]

    z = complex(seed, -1e-6 * top)
    step = 1e-7 * top
    for _ in range(120):
        f0 = _m22(profile, z)
        if abs(f0) < 1e-13:
            break
        df = (_m22(profile, z + step) - _m22(profile, z - step)) / (2 * step)
        if df == 0:
            raise ModeSearchError("resonance search stalled (zero derivative)")
        dz = f0 / df
        z = z - dz
        if abs(dz) < 1e-13 * top:
            break
    if not (0.0 < z.real < top) or z.imag >= 0:
        raise ModeSearchError("no quasi-bound mode found in the search window")
    return z


def _mode_profile(profile: QuasipotentialProfile, energy: float,
                  samples_per_nm: float = 0.05):
    """Outgoing-boundary mode envelope |psi|^2 sampled across the stack."""
    # integrate left to right starting from a decaying/outgoing left tail
    k0 = _wavevector(energy, 0.0)
    amp = np.array([0.0 + 0.0j, 1.0 + 0.0j])  # leftward-only outside the stack
    k_prev = k0
    xs, psi2 = [], []
    x = 0.0
    for height, width in profile.segments:
        k = _wavevector(energy, height)
        ratio = k_prev / k
        interface = 0.5 * np.array([[1 + ratio, 1 - ratio],
                                    [1 - ratio, 1 + ratio]], dtype=complex)
        amp = interface @ amp
        n = max(int(width * samples_per_nm), 8)
        local_x = np.linspace(0.0, width, n, endpoint=False)
        psi = amp[0] * np.exp(1j * k * local_x) + amp[1] * np.exp(-1j * k * local_x)
        xs.append(x + local_x)
        psi2.append(np.abs(psi) ** 2)
        phase = 1j * k * width
        amp = np.array([amp[0] * np.exp(phase), amp[1] * np.exp(-phase)])
        k_prev = k
        x += width
    return np.concatenate(xs), np.concatenate(psi2)


def quasipotential_mode_solver(profile: QuasipotentialProfile,
                               q_scat: float = 5000.0) -> DesignScores:
    """Solve the quasi-bound mode of a piecewise-constant barrier landscape.

    Returns directional quality factors from the evanescent attenuation
    exp(-2 sum_i alpha_i w_i) of each mirror stack (alpha_i proportional to
    the square root of the barrier detuning), the width-derived total
    waveguide Q, and a mode-length analog of the mode volume.  The scattering
    Q is an exogenous input; the model only predicts mirror leakage.
    """
    z = _find_resonance(profile)
    e_res = z.real
    linewidth = -2.0 * z.imag
    q_wvg = BASE_FREQUENCY_THZ / linewidth

    well = profile.well_slice
    left = profile.segments[:well.start]
    right = profile.segments[well.stop:]

    def attenuation(segments):
        total = 0.0
        for height, width in segments:
            if height > e_res:
                alpha = MASS_CONSTANT * np.sqrt(height - e_res)
                total += 2.0 * alpha * width
        return np.exp(-total)

    t_left = attenuation(left)
    t_right = attenuation(right)
    t_sum = t_left + t_right
    if t_sum <= 0:
        raise ModeSearchError("mirror stacks are fully opaque at the mode energy")
    q_left = q_wvg * t_sum / t_left if t_left > 0 else np.inf
    q_right = q_wvg * t_sum / t_right if t_right > 0 else np.inf

    xs, psi2 = _mode_profile(profile, e_res)
    mode_length = np.trapezoid(psi2, xs) / np.max(psi2)
    volume = mode_length / MODE_LENGTH_UNIT_NM

    q_total = 1.0 / (1.0 / q_wvg + 1.0 / q_scat)
    return DesignScores(q_left=float(q_left), q_right=float(q_right),
                        q_scat=float(q_scat), q_wvg=float(q_wvg),
                        q_total=float(q_total), mode_volume=float(volume),
                        mode_frequency_thz=float(e_res))


def design_fitness(scores: DesignScores, wavelength_nm: float,
                   target_nm: float = 737.0) -> float:
    """Optimization figure of merit:

    sqrt((Q_scat/Q_wvg) (Q_left/Q_right) (Q Q_scat / V^2)
         exp(-(target - wavelength)^2 / 25))     with wavelengths in nm.
    """
    for name in ("q_left", "q_right", "q_scat", "q_wvg", "q_total"):
        if getattr(scores, name) <= 0:
            raise ValueError(f"{name} must be positive")
    if scores.mode_volume <= 0:
        raise ValueError("mode volume must be positive")
    penalty = np.exp(-((target_nm - wavelength_nm) ** 2) / 25.0)
    value = (scores.q_scat / scores.q_wvg) * (scores.q_left / scores.q_right) \
        * (scores.q_total * scores.q_scat / scores.mode_volume**2) * penalty
    return float(np.sqrt(value))


def effective_barrier_height(q_x1: float, n_mirror_cells: int) -> float:
    """Directional quality factor per mirror unit cell."""
    if n_mirror_cells < 1:
        raise ValueError("need at least one mirror cell")
    return q_x1 / n_mirror_cells


LATTICE_LEFT_NM = 272.0
LATTICE_RIGHT_NM = 250.0


def device_like_profile(left_height_thz: float = 40.0, left_cells: int = 7,
                        right_height_thz: float = 12.0, right_cells: int = 4,
                        well_depth_thz: float = -25.0,
                        well_width_nm: float = 2200.0) -> QuasipotentialProfile:
    """Canned asymmetric profile using the device lattice constants
    (272 nm cells on the strong left mirror, 250 nm on the weak right one)."""
    return QuasipotentialProfile((
        (left_height_thz, left_cells * LATTICE_LEFT_NM),
        (well_depth_thz, well_width_nm),
        (right_height_thz, right_cells * LATTICE_RIGHT_NM),
    ))


def symmetric_profile(height_thz: float = 20.0, cells: int = 6,
                      cell_nm: float = 250.0, well_depth_thz: float = -25.0,
                      well_width_nm: float = 2200.0) -> QuasipotentialProfile:
    return QuasipotentialProfile((
        (height_thz, cells * cell_nm),
        (well_depth_thz, well_width_nm),
        (height_thz, cells * cell_nm),
    ))


def load_profile(path) -> QuasipotentialProfile:
    return QuasipotentialProfile.from_json(Path(path).read_text())


def save_profile(profile: QuasipotentialProfile, path) -> None:
    Path(path).write_text(profile.to_json() + "\n")
