"""Experiment catalog: config-driven pipelines producing CSV data and manifests."""

from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.signal import find_peaks

from . import cavity, defaults, io, photostats, pulses, trajectories
from .dynamics import CqedParams

TOOL_VERSION = "sivsim 0.1.0"


class ConfigError(ValueError):
    pass


class ReportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    overrides: dict = field(default_factory=dict)
    seed: int | None = None
    out_dir: str | Path = "."


@dataclass(frozen=True)
class RunManifest:
    experiment: str
    config: dict
    seed: int | None
    tool_version: str
    duration_s: float
    outputs: list   # of {"name", "path", "sha256"}
    metrics: dict

    def save(self, path) -> None:
        payload = {
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "duration_s": self.duration_s,
            "outputs": self.outputs,
            "metrics": self.metrics,
        }
        io.atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        payload = json.loads(Path(path).read_text())
        return cls(experiment=payload["experiment"], config=payload["config"],
                   seed=payload.get("seed"), tool_version=payload["tool_version"],
                   duration_s=payload["duration_s"], outputs=payload["outputs"],
                   metrics=payload["metrics"])


def _device_config() -> dict:
    return dict(defaults.DEVICE)


def _params_from(cfg: Mapping) -> CqedParams:
    return CqedParams(**{k: cfg["device"][k] for k in defaults.DEVICE})


def _apply_overrides(base: dict, overrides: Mapping[str, object]) -> dict:
    resolved = copy.deepcopy(base)
    for dotted, value in overrides.items():
        node = resolved
        parts = dotted.split(".")
        for i, part in enumerate(parts):
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"unknown configuration key '{dotted}'"
                                  f" (failed at '{'.'.join(parts[:i + 1])}')")
            if i == len(parts) - 1:
                node[part] = value
            else:
                node = node[part]
    return resolved


# ---------------------------------------------------------------------------
# runners


def _run_photon_shape(cfg, out, seed):
    params = _params_from(cfg)
    if cfg["pulse"]["file"]:
        _, times, values = io.read_two_column(cfg["pulse"]["file"])
        pulse = pulses.tabulated_pulse(times, values)
    else:
        pulse = pulses.gaussian_pulse(cfg["pulse"]["omega0"], cfg["pulse"]["mu"],
                                      cfg["pulse"]["sigma"])
    waveform = pulses.simulate_photon(params, pulse)
    io.write_two_column(out / "control_pulse.txt", "t_ns omega_ghz",
                        pulse.times, pulse.values.real)
    io.write_two_column(out / "photon_waveform.txt", "t_ns flux_per_ns",
                        waveform.times, waveform.flux)
    report = pulses.verify_adiabaticity(params, pulse)
    metrics = {
        "fwhm_ns": waveform.fwhm(),
        "total_probability": waveform.total_probability,
        "max_excited_population": report.max_excited_population,
    }
    return {"control_pulse": out / "control_pulse.txt",
            "photon_waveform": out / "photon_waveform.txt"}, metrics


def _make_target(cfg):
    family = cfg["target"]["family"]
    if family == "exponential":
        return pulses.exponential_target(cfg["target"]["tau_ns"])
    if family == "gaussian":
        return pulses.gaussian_target(cfg["target"]["mu_ns"], cfg["target"]["sigma_ns"])
    if family == "ten-peak":
        return pulses.ten_peak_target(spacing=cfg["target"]["spacing_ns"],
                                      sigma=cfg["target"]["peak_sigma_ns"])
    raise ConfigError(f"unknown target family '{family}'")


def _run_pulse_invert(cfg, out, seed):
    params = _params_from(cfg)
    target = _make_target(cfg)
    result = pulses.invert_target_shape(target, params)
    achieved = pulses.simulate_photon(params, result.pulse)
    io.write_two_column(out / "target.txt", "t_ns relative_flux",
                        target.times, target.flux)
    io.write_two_column(out / "control_pulse.txt", "t_ns omega_ghz",
                        result.pulse.times, result.pulse.values.real)
    io.write_two_column(out / "achieved_waveform.txt", "t_ns flux_per_ns",
                        achieved.times, achieved.flux)
    metrics = {"rms_error": result.rms_error, "converged": result.converged}
    return {"target": out / "target.txt",
            "control_pulse": out / "control_pulse.txt",
            "achieved_waveform": out / "achieved_waveform.txt"}, metrics


def _sequence_from(cfg) -> trajectories.TrajectoryConfig:
    seq = cfg["sequence"]
    gen = pulses.gaussian_pulse(seq["gen_omega0"], seq["gen_mu"], seq["gen_sigma"],
                                n_sigma=3.0)
    reinit = pulses.square_pulse(seq["reinit_omega0"], seq["reinit_start"],
                                 seq["reinit_stop"])
    return trajectories.TrajectoryConfig(
        n_trajectories=int(cfg["monte_carlo"]["n_trajectories"]),
        seed=int(cfg["monte_carlo"]["seed"]),
        pulse_sequence=((gen, trajectories.GENERATE),
                        (reinit, trajectories.REINITIALIZE)),
        period_ns=seq["period_ns"],
        repetitions=int(cfg["monte_carlo"]["repetitions"]),
    )


def _run_g2(cfg, out, seed):
    params = _params_from(cfg)
    cfg["monte_carlo"]["seed"] = seed
    config = _sequence_from(cfg)
    stream = trajectories.run_trajectories(params, config)
    hist = trajectories.g2_histogram(stream, bin_width_ns=cfg["histogram"]["bin_ns"])
    io.write_csv(out / "g2_histogram.csv", ["tau_ns", "coincidences"],
                 [hist.bin_centers, hist.counts])
    if cfg["save_clicks"]:
        stream.save(out / "clicks.csv")
    metrics = {
        "g2_zero": hist.g2_zero,
        "g2_zero_stderr": trajectories.g2_zero_stderr(hist),
        "emissions": int(len(stream.emissions())),
    }
    files = {"g2_histogram": out / "g2_histogram.csv"}
    if cfg["save_clicks"]:
        files["clicks"] = out / "clicks.csv"
    return files, metrics


def _run_gamma_t_sweep(cfg, out, seed):
    params = _params_from(cfg)
    cfg["monte_carlo"]["seed"] = seed
    config = _sequence_from(cfg)
    values = [float(v) for v in cfg["gamma_t_values"]]
    points = trajectories.gamma_t_sweep(params, values, config,
                                        bin_width_ns=cfg["histogram"]["bin_ns"])
    g2s = [p.g2_zero for p in points]
    errs = [trajectories.g2_zero_stderr(p.histogram) for p in points]
    io.write_csv(out / "gamma_t_sweep.csv",
                 ["gamma_t_ghz", "g2_zero", "g2_zero_stderr"],
                 [values, g2s, errs])
    metrics = {"g2_values": g2s, "monotone": bool(np.all(np.diff(g2s) >= -2 * np.hypot(errs[:-1], errs[1:])))}
    return {"gamma_t_sweep": out / "gamma_t_sweep.csv"}, metrics


def _synthetic_spectrum(cfg, rng):
    device = cfg["device"]
    scan = cfg["scan"]
    omega_c = scan["omega_c"]
    omega_a = scan["omega_a"]
    kappa_tot = device["kappa_w"] + device["kappa_s"]
    coarse = np.linspace(omega_c - scan["span"] / 2, omega_c + scan["span"] / 2,
                         int(scan["n_coarse"]))
    feature_width = device["gamma"] * 40.0
    fine = np.linspace(omega_a - feature_width, omega_a + feature_width,
                       int(scan["n_fine"]))
    omega = np.unique(np.concatenate([coarse, fine]))
    refl = cavity.reflection_model(omega, device["g"], kappa_tot,
                                   device["kappa_w"], device["gamma"],
                                   omega_c, omega_a)
    if scan["noise_fraction"] > 0:
        refl = refl * (1.0 + scan["noise_fraction"] * rng.standard_normal(omega.size))
    refl = np.clip(refl, 0.0, 1.0)
    return cavity.ReflectionSpectrum(omega, refl)


def _run_spectrum_fit(cfg, out, seed):
    if cfg["scan"]["file"]:
        _, omega, refl = io.read_two_column(cfg["scan"]["file"])
        spectrum = cavity.ReflectionSpectrum(omega, np.clip(refl, 0.0, 1.0))
    else:
        rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
        spectrum = _synthetic_spectrum(cfg, rng)
    fit = cavity.fit_cqed_params(spectrum)
    io.write_two_column(out / "spectrum.txt", "omega_ghz reflection",
                        spectrum.omega, spectrum.reflection)
    io.write_csv(out / "fit_params.csv",
                 ["name", "value", "sigma"],
                 [list(cavity._PARAM_NAMES) + ["cooperativity"],
                  [fit.g, fit.kappa_tot, fit.kappa_w, fit.gamma, fit.omega_c,
                   fit.omega_a, fit.cooperativity],
                  [fit.sigma.get(n, 0.0) for n in cavity._PARAM_NAMES]
                  + [fit.cooperativity_sigma]])
    metrics = {"cooperativity": fit.cooperativity,
               "cooperativity_sigma": fit.cooperativity_sigma,
               "g": fit.g, "kappa_tot": fit.kappa_tot,
               "coupling": fit.coupling, "residual_rms": fit.residual_rms}
    return {"spectrum": out / "spectrum.txt",
            "fit_params": out / "fit_params.csv"}, metrics


def _run_efficiency_map(cfg, out, seed):
    device = cfg["device"]
    grid = cfg["grid"]
    kappa_w = np.linspace(grid["kappa_w_min"], grid["kappa_w_max"], int(grid["n"]))
    kappa_s = np.linspace(grid["kappa_s_min"], grid["kappa_s_max"], int(grid["n"]))
    rows_w, rows_s, rows_eta = [], [], []
    for ks in kappa_s:
        for kw in kappa_w:
            _, _, eta = cavity.source_efficiency(device["g"], kw, ks, device["gamma"])
            rows_w.append(kw)
            rows_s.append(ks)
            rows_eta.append(eta)
    io.write_csv(out / "efficiency_map.csv", ["kappa_w_ghz", "kappa_s_ghz", "eta_s"],
                 [rows_w, rows_s, rows_eta])
    _, _, eta_device = cavity.source_efficiency(device["g"], device["kappa_w"],
                                                device["kappa_s"], device["gamma"])
    return {"efficiency_map": out / "efficiency_map.csv"}, {"eta_s_device": eta_device}


def _run_kappa_opt(cfg, out, seed):
    device = cfg["device"]
    kappa_opt = cavity.optimal_waveguide_rate(device["kappa_s"], device["g"],
                                              device["gamma"])
    kappa_w = np.linspace(cfg["scan"]["kappa_w_min"], cfg["scan"]["kappa_w_max"],
                          int(cfg["scan"]["n"]))
    eta = [cavity.source_efficiency(device["g"], kw, device["kappa_s"],
                                    device["gamma"])[2] for kw in kappa_w]
    io.write_csv(out / "kappa_scan.csv", ["kappa_w_ghz", "eta_s"], [kappa_w, eta])
    metrics = {"kappa_opt_ghz": kappa_opt, "eta_at_opt": cavity.source_efficiency(
        device["g"], kappa_opt, device["kappa_s"], device["gamma"])[2]}
    return {"kappa_scan": out / "kappa_scan.csv"}, metrics


def _run_quasipotential(cfg, out, seed):
    qp = cfg["quasipotential"]
    profile = cavity.device_like_profile(
        left_height_thz=qp["left_height_thz"], left_cells=int(qp["left_cells"]),
        right_height_thz=qp["right_height_thz"], right_cells=int(qp["right_cells"]),
        well_depth_thz=qp["well_depth_thz"], well_width_nm=qp["well_width_nm"])
    scores = cavity.quasipotential_mode_solver(profile, q_scat=qp["q_scat"])
    fitness = cavity.design_fitness(scores, wavelength_nm=qp["wavelength_nm"])
    cavity.save_profile(profile, out / "profile.json")

    heights = np.linspace(qp["scan_min_thz"], qp["scan_max_thz"], int(qp["scan_n"]))
    eff_heights, volumes, q_rights = [], [], []
    for h in heights:
        sym = cavity.symmetric_profile(height_thz=float(h),
                                       well_depth_thz=qp["well_depth_thz"],
                                       well_width_nm=qp["well_width_nm"])
        s = cavity.quasipotential_mode_solver(sym, q_scat=qp["q_scat"])
        cells = sym.segments[-1][1] / cavity.LATTICE_RIGHT_NM
        eff_heights.append(cavity.effective_barrier_height(s.q_right, int(round(cells))))
        volumes.append(s.mode_volume)
        q_rights.append(s.q_right)
    io.write_csv(out / "barrier_scan.csv",
                 ["height_thz", "effective_height", "q_right", "mode_volume"],
                 [heights, eff_heights, q_rights, volumes])
    metrics = {
        "q_left": scores.q_left, "q_right": scores.q_right,
        "q_wvg": scores.q_wvg, "mode_volume": scores.mode_volume,
        "mode_frequency_thz": scores.mode_frequency_thz, "fitness": fitness,
    }
    return {"profile": out / "profile.json",
            "barrier_scan": out / "barrier_scan.csv"}, metrics


def _run_stream_stats(cfg, out, seed):
    stats = photostats.count_streams(eta=cfg["eta"], attempts=int(cfg["attempts"]),
                                     seed=seed)
    ns = np.arange(1, stats.n_max + 1)
    counts = stats.run_counts[:stats.n_max]
    keep = counts > 0
    fit = photostats.fit_exponential_decay(ns[keep], counts[keep], model="geometric")
    io.write_csv(out / "run_histogram.csv", ["n", "count"], [ns, counts])
    metrics = {"eta_fit": fit.value, "eta_fit_sigma": fit.sigma,
               "eta_ratio": stats.successes / stats.attempts,
               "max_run": int(stats.n_max)}
    return {"run_histogram": out / "run_histogram.csv"}, metrics


def _run_wcs_gain(cfg, out, seed):
    gain = photostats.wcs_gain(cfg["duty"], cfg["g2_zero"])
    io.write_csv(out / "wcs_gain.csv", ["duty", "g2_zero", "gain"],
                 [[cfg["duty"]], [cfg["g2_zero"]], [gain]])
    return {"wcs_gain": out / "wcs_gain.csv"}, {"gain": gain}


def _run_nuclear_correlations(cfg, out, seed):
    config = photostats.NuclearChainConfig(p_flip=cfg["p_flip"],
                                           n_photons=int(cfg["n_photons"]),
                                           seed=seed)
    stream = photostats.simulate_nuclear_chain(
        config, electron_init_fidelity=cfg["electron_init_fidelity"],
        filter_leakage=cfg["filter_leakage"])
    corr = photostats.nuclear_correlations(stream)
    io.write_csv(out / "nuclear_correlations.csv",
                 ["lag_photons", "g_same", "g_cross"],
                 [corr.lags, corr.g_same, corr.g_cross])
    metrics = {
        "bunching_decay_photons": corr.bunching_decay.value,
        "antibunching_decay_photons": corr.antibunching_decay.value,
        "flip_probability_chain": corr.flip_probability_chain,
        "flip_probability_inverse": corr.flip_probability_inverse,
        "same_to_cross_ratio": corr.consecutive_same_to_cross,
    }
    return {"nuclear_correlations": out / "nuclear_correlations.csv"}, metrics


def _run_hyperfine_scan(cfg, out, seed):
    scan = np.linspace(-cfg["scan_half_mhz"], cfg["scan_half_mhz"], int(cfg["n"]))
    detuning, rate = photostats.hyperfine_scan(
        cfg["splitting_mhz"], cfg["filter_fwhm_mhz"], scan,
        populations=(cfg["population_down"], 1.0 - cfg["population_down"]),
        photon_fwhm_mhz=cfg["photon_fwhm_mhz"])
    io.write_csv(out / "hyperfine_scan.csv", ["detuning_mhz", "rate"],
                 [detuning, rate])
    peaks, _ = find_peaks(rate)
    separation = float(detuning[peaks[-1]] - detuning[peaks[0]]) if peaks.size >= 2 else 0.0
    return {"hyperfine_scan": out / "hyperfine_scan.csv"}, {
        "n_peaks": int(peaks.size), "separation_mhz": separation}


def _run_t1_fit(cfg, out, seed):
    rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
    t1 = cfg["t1_us"]
    times = np.linspace(0.0, cfg["span_us"], int(cfg["n"]))
    clean = np.exp(-times / t1)
    noisy = np.clip(clean * (1.0 + cfg["noise_fraction"] * rng.standard_normal(times.size)),
                    1e-6, None)
    fit = photostats.fit_exponential_decay(times, noisy, model="exp",
                                           sigmas=cfg["noise_fraction"] * clean)
    io.write_csv(out / "t1_decay.csv", ["t_us", "signal"], [times, noisy])
    return {"t1_decay": out / "t1_decay.csv"}, {
        "t1_fit_us": fit.value, "t1_fit_sigma_us": fit.sigma, "t1_true_us": t1}


def _run_thermal(cfg, out, seed):
    request = photostats.ThermalEstimate(
        temperature_k=cfg["temperature_k"], delta_gs_ghz=cfg["delta_gs_ghz"],
        t2_star_ns=cfg["t2_star_ns"], t1_ns=cfg["t1_ns"],
        photon_fwhm_ns=cfg["photon_fwhm_ns"])
    result = photostats.thermal_estimates(request)
    io.write_csv(out / "thermal_estimates.csv",
                 ["name", "value"],
                 [["upper_branch_population", "linewidth_increase",
                   "population_decay_loss"],
                  [result.upper_branch_population, result.linewidth_increase,
                   result.population_decay_loss]])
    metrics = {"upper_branch_population": result.upper_branch_population,
               "linewidth_increase": result.linewidth_increase,
               "population_decay_loss": result.population_decay_loss}
    return {"thermal_estimates": out / "thermal_estimates.csv"}, metrics


@dataclass(frozen=True)
class Experiment:
    defaults: dict
    runner: Callable
    stochastic: bool = False


EXPERIMENTS: dict[str, Experiment] = {
    "photon-shape": Experiment(
        defaults={"device": _device_config(),
                  "pulse": {**defaults.PULSE, "file": ""}},
        runner=_run_photon_shape),
    "pulse-invert": Experiment(
        defaults={"device": _device_config(),
                  "target": {"family": "gaussian", "mu_ns": 80.0, "sigma_ns": 25.0,
                             "tau_ns": 80.0, "spacing_ns": 30.0,
                             "peak_sigma_ns": 5.0}},
        runner=_run_pulse_invert),
    "g2": Experiment(
        defaults={"device": _device_config(),
                  "sequence": dict(defaults.G2_SEQUENCE),
                  "monte_carlo": {"n_trajectories": 2000, "repetitions": 12,
                                  "seed": 0},
                  "histogram": {"bin_ns": 2.0},
                  "save_clicks": False},
        runner=_run_g2, stochastic=True),
    "gamma-t-sweep": Experiment(
        defaults={"device": _device_config(),
                  "sequence": dict(defaults.G2_SEQUENCE),
                  "monte_carlo": {"n_trajectories": 1500, "repetitions": 12,
                                  "seed": 0},
                  "histogram": {"bin_ns": 2.0},
                  "gamma_t_values": [0.0, 5e-5, 5e-4, 5e-3]},
        runner=_run_gamma_t_sweep, stochastic=True),
    "spectrum-fit": Experiment(
        defaults={"device": _device_config(),
                  "scan": {"omega_c": 0.0, "omega_a": 19.88, "span": 2000.0,
                           "n_coarse": 400, "n_fine": 400,
                           "noise_fraction": 0.01, "file": ""}},
        runner=_run_spectrum_fit, stochastic=True),
    "efficiency-map": Experiment(
        defaults={"device": _device_config(),
                  "grid": {"kappa_w_min": 1.0, "kappa_w_max": 1000.0,
                           "kappa_s_min": 1.0, "kappa_s_max": 300.0, "n": 60}},
        runner=_run_efficiency_map),
    "kappa-opt": Experiment(
        defaults={"device": _device_config(),
                  "scan": {"kappa_w_min": 1.0, "kappa_w_max": 2000.0, "n": 1000}},
        runner=_run_kappa_opt),
    "quasipotential": Experiment(
        defaults={"quasipotential": {
            "left_height_thz": 40.0, "left_cells": 7,
            "right_height_thz": 12.0, "right_cells": 4,
            "well_depth_thz": -25.0, "well_width_nm": 2200.0,
            "q_scat": 5000.0, "wavelength_nm": 737.0,
            "scan_min_thz": 8.0, "scan_max_thz": 40.0, "scan_n": 20}},
        runner=_run_quasipotential),
    "stream-stats": Experiment(
        defaults={"eta": 0.149, "attempts": 10_000_000},
        runner=_run_stream_stats, stochastic=True),
    "wcs-gain": Experiment(
        defaults={"duty": 0.57, "g2_zero": 0.0168},
        runner=_run_wcs_gain),
    "nuclear-correlations": Experiment(
        defaults={"p_flip": 0.009, "n_photons": 1_000_000,
                  "electron_init_fidelity": 1.0, "filter_leakage": 0.026},
        runner=_run_nuclear_correlations, stochastic=True),
    "hyperfine-scan": Experiment(
        defaults={"splitting_mhz": 52.0, "filter_fwhm_mhz": 5.0,
                  "photon_fwhm_mhz": 10.0, "scan_half_mhz": 100.0, "n": 2001,
                  "population_down": 0.5},
        runner=_run_hyperfine_scan),
    "t1-fit": Experiment(
        defaults={"t1_us": 100.0, "span_us": 400.0, "n": 60,
                  "noise_fraction": 0.05},
        runner=_run_t1_fit, stochastic=True),
    "thermal-1k": Experiment(
        defaults={"temperature_k": 1.0, "delta_gs_ghz": 46.0,
                  "t2_star_ns": 400.0, "t1_ns": 1200.0, "photon_fwhm_ns": 20.0},
        runner=_run_thermal),
}


def run_experiment(config: ExperimentConfig) -> RunManifest:
    """Run one catalog experiment, write its outputs and manifest, return the
    manifest."""
    if config.name not in EXPERIMENTS:
        known = ", ".join(sorted(EXPERIMENTS))
        raise ConfigError(f"unknown experiment '{config.name}' (known: {known})")
    experiment = EXPERIMENTS[config.name]
    if experiment.stochastic and config.seed is None:
        raise ConfigError(f"experiment '{config.name}' is stochastic and requires a seed")
    resolved = _apply_overrides(experiment.defaults, config.overrides)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    files, metrics = experiment.runner(resolved, out, config.seed)
    duration = time.perf_counter() - started
    outputs = [{"name": name, "path": str(Path(path).name),
                "sha256": io.sha256_of(path)} for name, path in sorted(files.items())]
    manifest = RunManifest(experiment=config.name, config=resolved,
                           seed=config.seed, tool_version=TOOL_VERSION,
                           duration_s=duration, outputs=outputs, metrics=metrics)
    manifest.save(out / f"{config.name}.manifest.json")
    return manifest


_HEADLINE_KEYS = (
    "eta_s_device", "cooperativity", "g2_zero", "eta_fit", "gain", "fwhm_ns",
    "rms_error", "kappa_opt_ghz", "separation_mhz", "upper_branch_population",
    "bunching_decay_photons", "t1_fit_us", "mode_volume", "total_probability",
)


def emit_report(manifest_paths: Sequence, check_files: bool = True) -> str:
    """Human-readable summary table of headline numbers across manifests.

    Verifies that every referenced output still matches its recorded digest.
    """
    if not manifest_paths:
        raise ReportError("no manifests given")
    rows = []
    for path in manifest_paths:
        path = Path(path)
        manifest = RunManifest.load(path)
        if check_files:
            for output in manifest.outputs:
                target = path.parent / output["path"]
                if not target.exists():
                    raise ReportError(f"missing output file {target}")
                digest = io.sha256_of(target)
                if digest != output["sha256"]:
                    raise ReportError(f"digest mismatch for {target}")
        headline = {k: v for k, v in manifest.metrics.items() if k in _HEADLINE_KEYS}
        rows.append((manifest.experiment, manifest.seed, headline))
    width = max(len(r[0]) for r in rows) + 2
    lines = [f"{'experiment':<{width}}seed      headline metrics",
             "-" * (width + 50)]
    for name, seed, headline in rows:
        pretty = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                           for k, v in sorted(headline.items())) or "-"
        lines.append(f"{name:<{width}}{str(seed):<10}{pretty}")
    return "\n".join(lines) + "\n"
