"""sivsim: simulation and design toolkit for a SiV-cavity single-photon source."""

from .dynamics import (
    BasisLabel,
    CqedParams,
    DensityTrajectory,
    IntegrationError,
    LindbladSystem,
    TimeGrid,
    build_collapse_operators,
    build_photon_hamiltonian,
    build_system,
    evolve,
    expectation,
    lindblad_derivative,
    photon_flux,
    pure_density,
)
from .pulses import (
    AdiabaticReport,
    InversionResult,
    PhotonWaveform,
    PulseEnvelope,
    adiabatic_emission_rate,
    composite_pulse,
    gaussian_pulse,
    invert_target_shape,
    make_pulse,
    simulate_photon,
    square_pulse,
    tabulated_pulse,
    verify_adiabaticity,
)
from .trajectories import (
    ClickStream,
    CorrelationHistogram,
    TrajectoryConfig,
    g2_histogram,
    g2_zero,
    gamma_t_sweep,
    run_trajectories,
)
from .cavity import (
    CqedFitResult,
    DesignScores,
    QuasipotentialProfile,
    ReflectionSpectrum,
    classify_coupling,
    cooperativity,
    design_fitness,
    effective_barrier_height,
    fit_cqed_params,
    optimal_waveguide_rate,
    quasipotential_mode_solver,
    reflection_spectrum,
    source_efficiency,
)
from .photostats import (
    LossBudget,
    NuclearChainConfig,
    StreamStats,
    ThermalEstimate,
    count_streams,
    duty_cycle,
    fit_exponential_decay,
    hyperfine_scan,
    loss_budget_product,
    nuclear_correlations,
    simulate_nuclear_chain,
    thermal_estimates,
    wcs_gain,
)

__version__ = "0.1.0"
