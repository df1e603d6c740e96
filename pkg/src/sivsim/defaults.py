"""Reference device parameters used as experiment defaults."""

from __future__ import annotations

from .dynamics import CqedParams

# Measured rates of the reference device, ordinary GHz.
DEVICE = {
    "g": 6.81,
    "kappa_w": 240.0,
    "kappa_s": 89.0,
    "gamma": 0.1,
    "gamma_t": 5e-5,
    "delta": 0.0,
    "delta_c": 19.88,
}

# Gaussian control-pulse defaults.  The peak amplitude is the measured drive;
# sigma is a fitted value chosen so the simulated photon FWHM lands near the
# measured ~20 ns (it is not an independently measured quantity).
PULSE = {
    "omega0": 0.194,
    "sigma": 20.0,
    "mu": 70.0,
}

# Correlation-run pulse schedule: a shorter generation pulse followed by a
# square re-initialization pulse, replayed every period.
G2_SEQUENCE = {
    "gen_omega0": 0.194,
    "gen_mu": 40.0,
    "gen_sigma": 12.0,
    "reinit_omega0": 0.2,
    "reinit_start": 95.0,
    "reinit_stop": 135.0,
    "period_ns": 150.0,
}


def device_params(**overrides) -> CqedParams:
    values = dict(DEVICE)
    values.update(overrides)
    return CqedParams(**values)
