"""Joint atom-cavity dynamics: basis, Hamiltonians, collapse channels, master equation.

Unit conventions used throughout the package:

* All user-facing rates and detunings are ordinary frequencies in GHz and all
  times are in ns.  The single factor of 2*pi that converts to angular units
  is applied exactly once, when the matrices are assembled here.
* A classical drive amplitude ``omega`` is the measured Rabi frequency: a
  constant resonant drive of amplitude ``omega`` cycles population between
  the coupled pair at ``omega`` full cycles per ns.  The coupling matrix
  element is therefore ``pi * omega`` (half the angular rate).
* The cavity coupling ``g`` is the single-photon Rabi rate and enters with
  matrix element ``2*pi*g``, so the cooperativity ``4 g^2 / (kappa gamma)``
  and the broadened linewidth ``(C+1) gamma`` keep their usual form.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Iterator

import numpy as np

TWO_PI = 2.0 * np.pi

EMISSION = "emission"
LOSS = "loss"


class BasisLabel(IntEnum):
    """Joint atom-photon basis states, in fixed matrix order.

    The first four labels span the photon-generation model; ``UP_PRIME_0``
    exists only in the five-level variant used for correlation simulations.
    """

    UP_0 = 0          # spin up, empty cavity (generation starts here)
    DOWN_PRIME_0 = 1  # optically excited state
    DOWN_1 = 2        # spin down, one cavity photon
    DOWN_0 = 3        # spin down, empty cavity
    UP_PRIME_0 = 4    # second excited state, target of the re-init drive


class IntegrationError(RuntimeError):
    """The master-equation integrator failed at the reported time."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t = {t:.6g} ns)")
        self.t = t


@dataclass(frozen=True)
class CqedParams:
    """Physical rates and detunings of the atom-cavity system, in GHz.

    g        : atom-cavity single-photon Rabi rate
    kappa_w  : cavity decay into the collection waveguide
    kappa_s  : unwanted cavity loss (scattering + wrong port)
    gamma    : optical spontaneous-emission rate (FWHM)
    gamma_t  : spin-qubit decay rate
    delta    : control-pulse detuning from the driven optical transition
    delta_c  : atom-cavity detuning
    """

    g: float
    kappa_w: float
    kappa_s: float
    gamma: float
    gamma_t: float = 0.0
    delta: float = 0.0
    delta_c: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa_w", "kappa_s", "gamma", "gamma_t"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        for name in ("delta", "delta_c"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def kappa_tot(self) -> float:
        return self.kappa_w + self.kappa_s

    @property
    def cooperativity(self) -> float:
        denom = self.kappa_tot * self.gamma
        if denom == 0.0:
            raise ValueError("cooperativity undefined when kappa_tot * gamma == 0")
        return 4.0 * self.g**2 / denom

    @property
    def purcell_linewidth(self) -> float:
        """Cavity-broadened optical linewidth (C+1)*gamma in GHz."""
        if self.kappa_tot == 0.0:
            return self.gamma
        return self.gamma + 4.0 * self.g**2 / self.kappa_tot


@dataclass(frozen=True)
class TimeGrid:
    """Integration window and output sampling for ``evolve``."""

    t_start: float
    t_end: float
    samples: int = 501
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.samples < 2:
            raise ValueError("need at least 2 output samples")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.samples)


@dataclass(frozen=True)
class CollapseOperator:
    """Single-transition collapse channel sqrt(2*pi*rate) |target><source|."""

    matrix: np.ndarray
    rate: float            # ordinary GHz
    source: int
    target: int
    channel: str           # EMISSION or LOSS


@dataclass(frozen=True)
class DriveTerm:
    """Classical drive term env(t)*coupling + h.c. added to the Hamiltonian."""

    envelope: Callable[[float], complex]
    coupling: np.ndarray   # pi * |target><source|, angular units


@dataclass(frozen=True)
class LindbladSystem:
    """Hamiltonian generator plus collapse operators for one model instance."""

    dim: int
    h_static: np.ndarray
    drives: tuple[DriveTerm, ...]
    collapses: tuple[CollapseOperator, ...]

    def hamiltonian(self, t: float) -> np.ndarray:
        h = self.h_static.copy()
        for term in self.drives:
            z = complex(term.envelope(t))
            if z != 0.0:
                h += z * term.coupling + np.conj(z) * term.coupling.conj().T
        return h


@dataclass(frozen=True)
class DensityTrajectory:
    """Sampled density-matrix trajectory returned by ``evolve``."""

    times: np.ndarray
    states: np.ndarray     # shape (n, dim, dim)

    def __iter__(self) -> Iterator[tuple[float, np.ndarray]]:
        return zip(self.times, self.states)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def populations(self, index: int) -> np.ndarray:
        return self.states[:, index, index].real


def basis_ket(dim: int, label: int) -> np.ndarray:
    ket = np.zeros(dim, dtype=complex)
    ket[int(label)] = 1.0
    return ket


def pure_density(dim: int, label: int) -> np.ndarray:
    ket = basis_ket(dim, label)
    return np.outer(ket, ket.conj())


def validate_density_matrix(rho: np.ndarray, dim: int | None = None,
                            trace_tol: float = 1e-9, herm_tol: float = 1e-10,
                            eig_tol: float = 1e-9) -> None:
    """Raise ValueError unless rho is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {rho.shape[0]}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise ValueError(f"trace deviates from 1 by {abs(np.trace(rho).real - 1.0):.2e}")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -eig_tol:
        raise ValueError("density matrix has a significant negative eigenvalue")


def _single_transition(dim: int, target: int, source: int) -> np.ndarray:
    op = np.zeros((dim, dim), dtype=complex)
    op[target, source] = 1.0
    return op


def build_photon_hamiltonian(params: CqedParams, pulse: Callable[[float], complex],
                             t: float = 0.0, with_reinit: bool = False,
                             reinit_pulse: Callable[[float], complex] | None = None,
                             ) -> np.ndarray:
    """Joint atom-cavity Hamiltonian at time t, in angular units (rad/ns).

    Diagonal terms are 2*pi*delta on |down',0> and 2*pi*(delta - delta_c) on
    |down,1>.  The control drive couples |up,0> <-> |down',0> with element
    pi*omega(t), the cavity couples |down',0> <-> |down,1> with element
    2*pi*g, and the five-level variant adds the re-init drive
    |down,0> <-> |up',0> with element pi*omega'(t).
    """
    if with_reinit and reinit_pulse is None:
        raise ValueError("with_reinit requires a reinit_pulse")
    if not with_reinit and reinit_pulse is not None:
        raise ValueError("reinit_pulse given but with_reinit is False")
    dim = 5 if with_reinit else 4
    h = np.zeros((dim, dim), dtype=complex)
    h[1, 1] = TWO_PI * params.delta
    h[2, 2] = TWO_PI * (params.delta - params.delta_c)
    omega = complex(pulse(t))
    if not np.isfinite(omega):
        raise ValueError(f"non-finite pulse sample at t = {t}")
    h[1, 0] = np.pi * omega
    h[0, 1] = np.conj(h[1, 0])
    h[2, 1] = TWO_PI * params.g
    h[1, 2] = np.conj(h[2, 1])
    if with_reinit:
        omega_r = complex(reinit_pulse(t))
        if not np.isfinite(omega_r):
            raise ValueError(f"non-finite reinit pulse sample at t = {t}")
        h[4, 3] = np.pi * omega_r
        h[3, 4] = np.conj(h[4, 3])
    return h


def build_collapse_operators(params: CqedParams, with_reinit: bool = False,
                             ) -> list[CollapseOperator]:
    """Collapse channels of the model.

    Four-level set: cavity emission |down,1> -> |down,0| at kappa_tot
    (the photon-detection channel), free-space decay |down',0> -> |down,0>
    at gamma, and qubit decay |up,0> -> |down,0> at gamma_t.  The five-level
    variant adds the re-init decay |up',0> -> |up,0> at gamma and the qubit
    repopulation channel |down,0> -> |up,0> at gamma_t, which models the
    heating-driven mixing of the spin qubit and is what allows a second
    photon within one control pulse.
    """
    dim = 5 if with_reinit else 4
    channels = [
        (params.kappa_tot, 3, 2, EMISSION),
        (params.gamma, 3, 1, LOSS),
        (params.gamma_t, 3, 0, LOSS),
    ]
    if with_reinit:
        channels.append((params.gamma, 0, 4, LOSS))
        channels.append((params.gamma_t, 0, 3, LOSS))
    ops = []
    for rate, target, source, channel in channels:
        if rate < 0:
            raise ValueError("collapse rate must be >= 0")
        matrix = np.sqrt(TWO_PI * rate) * _single_transition(dim, target, source)
        ops.append(CollapseOperator(matrix=matrix, rate=rate, source=source,
                                    target=target, channel=channel))
    return ops


def build_system(params: CqedParams, pulse: Callable[[float], complex],
                 with_reinit: bool = False,
                 reinit_pulse: Callable[[float], complex] | None = None,
                 ) -> LindbladSystem:
    """Assemble the LindbladSystem for the photon-generation model."""
    if with_reinit and reinit_pulse is None:
        raise ValueError("with_reinit requires a reinit_pulse")
    dim = 5 if with_reinit else 4
    h_static = np.zeros((dim, dim), dtype=complex)
    h_static[1, 1] = TWO_PI * params.delta
    h_static[2, 2] = TWO_PI * (params.delta - params.delta_c)
    h_static[2, 1] = TWO_PI * params.g
    h_static[1, 2] = TWO_PI * params.g
    drives = [DriveTerm(envelope=pulse, coupling=np.pi * _single_transition(dim, 1, 0))]
    if with_reinit:
        drives.append(DriveTerm(envelope=reinit_pulse,
                                coupling=np.pi * _single_transition(dim, 4, 3)))
    collapses = tuple(build_collapse_operators(params, with_reinit))
    return LindbladSystem(dim=dim, h_static=h_static, drives=tuple(drives),
                          collapses=collapses)


def lindblad_derivative(rho: np.ndarray, system: LindbladSystem, t: float = 0.0,
                        ) -> np.ndarray:
    """Right-hand side -i[H, rho] + sum_i D[L_i](rho) of the master equation."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (system.dim, system.dim):
        raise ValueError(f"state shape {rho.shape} does not match dim {system.dim}")
    h = system.hamiltonian(t)
    out = -1j * (h @ rho - rho @ h)
    for op in system.collapses:
        l = op.matrix
        ldl = l.conj().T @ l
        out += l @ rho @ l.conj().T - 0.5 * (ldl @ rho + rho @ ldl)
    return out


def _commutator_superop(x: np.ndarray) -> np.ndarray:
    # row-major vec: vec(A rho B) = (A kron B^T) vec(rho)
    d = x.shape[0]
    eye = np.eye(d)
    return -1j * (np.kron(x, eye) - np.kron(eye, x.T))


def _dissipator_superop(l: np.ndarray) -> np.ndarray:
    d = l.shape[0]
    eye = np.eye(d)
    ldl = l.conj().T @ l
    return (np.kron(l, l.conj())
            - 0.5 * np.kron(ldl, eye)
            - 0.5 * np.kron(eye, ldl.T))


def static_superoperator(system: LindbladSystem) -> np.ndarray:
    """Vectorized generator of the drive-free part of the master equation."""
    s = _commutator_superop(system.h_static)
    for op in system.collapses:
        s = s + _dissipator_superop(op.matrix)
    return s


def drive_superoperators(term: DriveTerm) -> tuple[np.ndarray, np.ndarray]:
    """Superoperators multiplying Re(env) and Im(env) for one drive term."""
    x_re = term.coupling + term.coupling.conj().T
    x_im = 1j * (term.coupling - term.coupling.conj().T)
    return _commutator_superop(x_re), _commutator_superop(x_im)


# Dormand-Prince 5(4) embedded pair (FSAL)
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_DP_ERR = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                    -17253 / 339200, 22 / 525, -1 / 40])

_MAX_STEPS = 50_000_000


def _integrate_dp45(rhs, y0, t0, t1, t_eval, rtol, atol):
    """Adaptive Dormand-Prince 5(4) on a complex state vector.

    Outputs at t_eval are cubic-Hermite interpolated inside accepted steps,
    which is far more accurate than needed at the stability-limited step
    sizes this system forces.
    """
    n = y0.size
    k = np.empty((7, n), dtype=complex)
    y = y0.astype(complex)
    t = t0
    k[0] = rhs(t, y)

    # standard first-step heuristic
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(k[0] / scale) ** 2))
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(h, t1 - t0)

    out = np.empty((len(t_eval), n), dtype=complex)
    out_idx = 0
    while out_idx < len(t_eval) and t_eval[out_idx] <= t0:
        out[out_idx] = y
        out_idx += 1

    steps = 0
    while t < t1:
        if steps > _MAX_STEPS:
            raise IntegrationError("step limit exceeded", t=t)
        h = min(h, t1 - t)
        if h < 1e-14 * max(abs(t1 - t0), 1.0):
            raise IntegrationError("step size underflow", t=t)
        for stage in range(1, 6):
            y_s = y + h * (_DP_A[stage - 1] @ k[:stage])
            k[stage] = rhs(t + _DP_C[stage] * h, y_s)
        y_new = y + h * (_DP_A[5] @ k[:6])
        k[6] = rhs(t + h, y_new)
        err_vec = h * (_DP_ERR @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))
        steps += 1
        if err <= 1.0:
            t_new = t + h
            while out_idx < len(t_eval) and t_eval[out_idx] <= t_new + 1e-15:
                # cubic Hermite using the FSAL derivatives at both ends
                s = (t_eval[out_idx] - t) / h
                h00 = (1 + 2 * s) * (1 - s) ** 2
                h10 = s * (1 - s) ** 2
                h01 = s * s * (3 - 2 * s)
                h11 = s * s * (s - 1)
                out[out_idx] = (h00 * y + h01 * y_new
                                + h * (h10 * k[0] + h11 * k[6]))
                out_idx += 1
            y = y_new
            t = t_new
            k[0] = k[6]
            h *= min(5.0, max(0.2, 0.9 * err ** -0.2 if err > 0 else 5.0))
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
    while out_idx < len(t_eval):
        out[out_idx] = y
        out_idx += 1
    return out


def evolve(system: LindbladSystem, rho0: np.ndarray, grid: TimeGrid,
           ) -> DensityTrajectory:
    """Integrate the master equation with an adaptive embedded RK 4(5) pair.

    The density matrix is vectorized and propagated at the grid tolerances;
    outputs are re-symmetrized to suppress round-off drift.  Deterministic
    for fixed inputs.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    validate_density_matrix(rho0, system.dim)
    s_const = static_superoperator(system)
    parts = [(term.envelope, *drive_superoperators(term)) for term in system.drives]

    interp = np.interp
    all_real = all(getattr(env, "is_real", False) and hasattr(env, "real_interpolant")
                   for env, _, _ in parts)
    if all_real:
        # common case: real drives; interpolate raw arrays, skip complex dispatch
        tables = [(*env.real_interpolant(), k_re) for env, k_re, _ in parts]

        def rhs(t, y):
            out = s_const @ y
            for env_t, env_v, k_re in tables:
                a = interp(t, env_t, env_v, left=0.0, right=0.0)
                if a != 0.0:
                    out += a * (k_re @ y)
            return out
    else:
        def rhs(t, y):
            out = s_const @ y
            for env, k_re, k_im in parts:
                z = complex(env(t))
                if z.real != 0.0:
                    out = out + z.real * (k_re @ y)
                if z.imag != 0.0:
                    out = out + z.imag * (k_im @ y)
            return out

    times = grid.times
    try:
        flat = _integrate_dp45(rhs, rho0.ravel(), grid.t_start, grid.t_end,
                               times, grid.rtol, grid.atol)
    except IntegrationError:
        raise
    states = flat.reshape(-1, system.dim, system.dim)
    states = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    return DensityTrajectory(times=times.copy(), states=states)


def expectation(rho: np.ndarray, observable: np.ndarray) -> float:
    """trace(rho * O) for a Hermitian observable; the residual imaginary
    part must be below 1e-10 and is discarded."""
    rho = np.asarray(rho, dtype=complex)
    observable = np.asarray(observable, dtype=complex)
    if rho.shape != observable.shape:
        raise ValueError("dimension mismatch between state and observable")
    if np.max(np.abs(observable - observable.conj().T)) > 1e-10:
        raise ValueError("observable is not Hermitian")
    value = np.trace(rho @ observable)
    if abs(value.imag) > 1e-10:
        raise ValueError(f"expectation has non-negligible imaginary part {value.imag:.2e}")
    return float(value.real)


def photon_flux(rho: np.ndarray, params: CqedParams) -> float:
    """Instantaneous cavity emission rate kappa_tot (angular) times the
    one-photon population, in 1/ns."""
    rho = np.asarray(rho)
    if rho.shape[0] < 3:
        raise ValueError("state does not include the one-photon basis state")
    return float(TWO_PI * params.kappa_tot * rho[2, 2].real)
