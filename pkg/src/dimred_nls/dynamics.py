"""Split-step integrators for the 2D cubic NLS and the confined 3D Hartree proxy.

The 2D equation is ``i d_t phi = -Delta phi + g0 |phi|^2 phi`` on the torus.
The 3D proxy is the one-body mean-field equation in the rescaled slab frame

    i d_t phi = (-Delta_x - d_z^2 / L^2 - 1 / L^2) phi + (V~ * |phi|^2) phi

with a periodic convolution in x and a linear convolution in z.  The ``lab``
gauge keeps the transverse ground energy ``1 / L^2`` in the kinetic symbol;
it differs from the default ``renormalized`` gauge by a global phase.

Both integrators use Strang splitting.  The kinetic flow is an exact spectral
phase and the nonlinear flow an exact pointwise phase, so every substep is
unitary on the grid.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .potentials import PotentialSpec, ScaledPotentialParams
from .spectral_core import (
    ComplexField2D,
    ComplexField3D,
    SlabGrid,
    TorusGrid,
    _backward_x,
    _backward_z,
    _forward_x,
    _forward_z,
    dealias_mask,
)

__all__ = [
    "NumericalFailure",
    "GridResolutionError",
    "Evolution2DConfig",
    "Evolution3DConfig",
    "ConservedQuantities",
    "Trajectory",
    "EnergyMinimum",
    "step_2d",
    "evolve_2d",
    "energy_2d",
    "hartree_potential",
    "step_3d",
    "evolve_3d",
    "conserved_3d",
    "energy_functional",
    "minimize_energy",
    "BLOWUP_FACTOR",
    "MAX_DT",
]

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e6
MAX_DT = 0.1


class NumericalFailure(RuntimeError):
    """A non-finite value appeared during time stepping."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class GridResolutionError(ValueError):
    """The grid cannot resolve the scaled interaction kernel."""


def _step_count(dt: float, t_final: float) -> int:
    n = int(round(t_final / dt))
    if abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"t_final={t_final} is not a multiple of dt={dt}")
    return n


def _check_times(dt, t_final):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if dt > MAX_DT:
        raise ValueError(f"dt must be <= {MAX_DT} for accuracy")
    if dt > t_final:
        raise ValueError("dt must not exceed t_final")
    _step_count(dt, t_final)


@dataclass(frozen=True)
class Evolution2DConfig:
    g0: float
    dt: float
    t_final: float
    grid: TorusGrid
    record_every: int = 1
    dealias: bool = False

    def __post_init__(self):
        _check_times(self.dt, self.t_final)
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not np.isfinite(self.g0):
            raise ValueError("g0 must be finite")

    @property
    def steps(self) -> int:
        return _step_count(self.dt, self.t_final)


@dataclass(frozen=True)
class Evolution3DConfig:
    params: ScaledPotentialParams
    spec: PotentialSpec
    dt: float
    t_final: float
    grid: SlabGrid
    gauge: str = "renormalized"
    record_every: int = 1
    dealias: bool = True

    def __post_init__(self):
        _check_times(self.dt, self.t_final)
        if self.gauge not in ("renormalized", "lab"):
            raise ValueError(f"gauge must be 'renormalized' or 'lab', got {self.gauge!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def steps(self) -> int:
        return _step_count(self.dt, self.t_final)

    def kinetic_symbol(self) -> np.ndarray:
        return _kinetic_symbol_3d(self.grid, self.params.L, 0.0 if self.gauge == "renormalized" else 1.0)


@dataclass(frozen=True)
class ConservedQuantities:
    mass: float
    energy: float


@dataclass
class Trajectory:
    """Recorded times, conserved quantities and field snapshots of one run."""

    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    snapshots: list = field(repr=False)
    steps: int = 0
    blew_up: bool = False

    @property
    def final(self):
        return self.snapshots[-1]

    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])))

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def series(self) -> dict:
        return {"t": self.times, "mass": self.mass, "energy": self.energy}


# ---------------------------------------------------------------------------
# 2D
# ---------------------------------------------------------------------------


def energy_2d(phi: ComplexField2D, g0: float) -> ConservedQuantities:
    """Mass and ``||grad phi||^2 + (g0/2) ||phi||_4^4`` (grid quadrature)."""
    c = phi.coefficients
    mass = float(np.sum(np.abs(c) ** 2))
    kin = float(np.sum(phi.grid.k_squared() * np.abs(c) ** 2))
    quartic = phi.grid.cell_area * float(np.sum(np.abs(phi.values) ** 4))
    return ConservedQuantities(mass, kin + 0.5 * g0 * quartic)


def _gradient_norm(coef, k2) -> float:
    return float(np.sqrt(np.sum(k2 * np.abs(coef) ** 2)))


def _step_2d_coef(c, grid, g0, dt, half_phase, mask):
    c = c * half_phase
    v = _backward_x(c, grid)
    v = v * np.exp(-1j * g0 * dt * np.abs(v) ** 2)
    c = _forward_x(v, grid)
    if mask is not None:
        c = c * mask
    return c * half_phase


def step_2d(phi: ComplexField2D, cfg: Evolution2DConfig, dt: float | None = None) -> ComplexField2D:
    """One Strang step; ``dt`` may be negative for backward evolution."""
    dt = cfg.dt if dt is None else dt
    grid = phi.grid
    half = np.exp(-0.5j * dt * grid.k_squared())
    mask = dealias_mask(grid) if cfg.dealias else None
    c = _step_2d_coef(phi.coefficients, grid, cfg.g0, dt, half, mask)
    if not np.all(np.isfinite(c)):
        raise NumericalFailure("non-finite value in 2D step", step=0)
    return phi.with_coefficients(c)


def evolve_2d(phi0: ComplexField2D, cfg: Evolution2DConfig) -> Trajectory:
    """Integrate to ``cfg.t_final``, recording every ``cfg.record_every`` steps.

    Raises
    ------
    NumericalFailure
        If a non-finite value appears; the message names the step.
    """
    if phi0.grid != cfg.grid:
        raise ValueError("initial field and config use different grids")
    if phi0.norm() == 0:
        raise ValueError("initial field must be nonzero")
    grid = cfg.grid
    k2 = grid.k_squared()
    half = np.exp(-0.5j * cfg.dt * k2)
    mask = dealias_mask(grid) if cfg.dealias else None
    c = np.array(phi0.coefficients)
    if mask is not None:
        c = c * mask
    first = phi0.with_coefficients(c)
    q = energy_2d(first, cfg.g0)
    times, mass, energy, snaps = [0.0], [q.mass], [q.energy], [first]
    grad_ref = max(_gradient_norm(c, k2), np.sqrt(q.mass))
    blew_up = False
    n = cfg.steps
    step = 0
    for step in range(1, n + 1):
        c = _step_2d_coef(c, grid, cfg.g0, cfg.dt, half, mask)
        if not np.all(np.isfinite(c)):
            raise NumericalFailure(f"non-finite value at step {step}", step=step)
        if _gradient_norm(c, k2) > BLOWUP_FACTOR * grad_ref:
            blew_up = True
            log.warning("blow-up sentinel tripped at step %d", step)
        if step % cfg.record_every == 0 or step == n or blew_up:
            f = phi0.with_coefficients(c)
            q = energy_2d(f, cfg.g0)
            times.append(step * cfg.dt)
            mass.append(q.mass)
            energy.append(q.energy)
            snaps.append(f)
        if blew_up:
            break
    return Trajectory(np.array(times), np.array(mass), np.array(energy), snaps, step, blew_up)


# ---------------------------------------------------------------------------
# 3D Hartree proxy
# ---------------------------------------------------------------------------


def _kinetic_symbol_3d(grid: SlabGrid, L: float, lab: float) -> np.ndarray:
    m = grid.mode_indices()
    return grid.torus.k_squared()[..., None] + (m[None, None, :] ** 2 - 1.0 + lab) / L**2


class _HartreeKernel:
    """x-Fourier transform of ``V~`` sampled at the z-differences of the grid."""

    def __init__(self, spec: PotentialSpec, params: ScaledPotentialParams, grid: SlabGrid):
        self.grid = grid
        self.zero = spec.is_zero
        nz = grid.nz
        self.size = sfft.next_fast_len(2 * nz - 1)
        if self.zero:
            return
        a, c = params.a, params.c
        width = 2 * spec.radius_z / c
        if width < 4 * grid.dz:
            need = int(np.ceil(4 * np.pi / width))
            raise GridResolutionError(
                f"kernel z-width {width:.4g} spans fewer than 4 cells of dz={grid.dz:.4g}; "
                f"increase nz to at least {need}"
            )
        k1, k2 = grid.torus.wavenumbers()
        d = np.arange(-(nz - 1), nz)
        # periodic torus transform at integer k equals the plane transform
        fk = c * spec.x_fourier(k1[..., None] / a, k2[..., None] / a, c * d[None, None, :] * grid.dz)
        kz = np.zeros(grid.torus.shape + (self.size,), dtype=complex)
        kz[..., :nz] = fk[..., nz - 1 :]
        kz[..., self.size - (nz - 1) :] = fk[..., : nz - 1]
        self.kernel_hat = sfft.fft(kz, axis=-1) * grid.dz

    def apply(self, rho, mask=None) -> np.ndarray:
        grid = self.grid
        if self.zero:
            return np.zeros(grid.shape)
        rh = _forward_x(rho, grid.torus)
        if mask is not None:
            rh = rh * mask
        conv = sfft.ifft(self.kernel_hat * sfft.fft(rh, n=self.size, axis=-1), axis=-1)
        return _backward_x(conv[..., : grid.nz], grid.torus).real


@functools.lru_cache(maxsize=32)
def _kernel(spec, params, grid) -> _HartreeKernel:
    return _HartreeKernel(spec, params, grid)


def hartree_potential(
    phi: ComplexField3D, spec: PotentialSpec, params: ScaledPotentialParams, dealias: bool = True
) -> np.ndarray:
    """``W = V~ * |phi|^2`` sampled on the slab grid.

    The x-convolution is periodic and spectral.  The z-convolution is the
    linear sum ``sum_j dz K(z_i - z_j) rho(z_j)`` over the interior sine-grid
    nodes, computed with an FFT zero-padded to at least ``2 nz - 1``.

    Raises
    ------
    GridResolutionError
        If the kernel's z-support is narrower than four z-cells.
    """
    mask = dealias_mask(phi.grid.torus) if dealias else None
    rho = np.abs(phi.values) ** 2
    return _kernel(spec, params, phi.grid).apply(rho, mask[..., None] if dealias else None)


def conserved_3d(phi: ComplexField3D, cfg: Evolution3DConfig) -> ConservedQuantities:
    c = phi.coefficients
    mass = float(np.sum(np.abs(c) ** 2))
    kin = float(np.sum(cfg.kinetic_symbol() * np.abs(c) ** 2))
    W = hartree_potential(phi, cfg.spec, cfg.params, cfg.dealias)
    inter = 0.5 * phi.grid.cell_volume * float(np.sum(W * np.abs(phi.values) ** 2))
    return ConservedQuantities(mass, kin + inter)


def energy_functional(phi: ComplexField3D, spec, params, dealias: bool = True) -> float:
    """``<S~^2 phi, phi> + (1/2) int int V~ |phi|^2 |phi|^2``."""
    sym = _kinetic_symbol_3d(phi.grid, params.L, 0.0) + 1.0
    kin = float(np.sum(sym * np.abs(phi.coefficients) ** 2))
    W = hartree_potential(phi, spec, params, dealias)
    return kin + 0.5 * phi.grid.cell_volume * float(np.sum(W * np.abs(phi.values) ** 2))


class _Stepper3D:
    def __init__(self, cfg: Evolution3DConfig, dt: float):
        self.cfg = cfg
        self.grid = cfg.grid
        self.dt = dt
        self.half = np.exp(-0.5j * dt * cfg.kinetic_symbol())
        self.kernel = _kernel(cfg.spec, cfg.params, cfg.grid)
        self.mask = dealias_mask(cfg.grid.torus)[..., None] if cfg.dealias else None

    def __call__(self, c):
        g = self.grid
        c = c * self.half
        v = _backward_x(_backward_z(c, g), g.torus)
        W = self.kernel.apply(np.abs(v) ** 2, self.mask)
        v = v * np.exp(-1j * self.dt * W)
        c = _forward_z(_forward_x(v, g.torus), g)
        return c * self.half


def step_3d(phi: ComplexField3D, cfg: Evolution3DConfig, dt: float | None = None) -> ComplexField3D:
    """One Strang step of the Hartree proxy; ``dt`` may be negative."""
    c = _Stepper3D(cfg, cfg.dt if dt is None else dt)(phi.coefficients)
    if not np.all(np.isfinite(c)):
        raise NumericalFailure("non-finite value in 3D step", step=0)
    return phi.with_coefficients(c)


def evolve_3d(phi0: ComplexField3D, cfg: Evolution3DConfig) -> Trajectory:
    """Integrate the Hartree proxy; same recording and failure rules as ``evolve_2d``."""
    if phi0.grid != cfg.grid:
        raise ValueError("initial field and config use different grids")
    if phi0.norm() == 0:
        raise ValueError("initial field must be nonzero")
    stepper = _Stepper3D(cfg, cfg.dt)
    k2 = cfg.grid.torus.k_squared()[..., None]
    c = np.array(phi0.coefficients)
    q = conserved_3d(phi0, cfg)
    times, mass, energy, snaps = [0.0], [q.mass], [q.energy], [phi0]
    grad_ref = max(_gradient_norm(c, k2), np.sqrt(q.mass))
    blew_up = False
    n = cfg.steps
    step = 0
    for step in range(1, n + 1):
        c = stepper(c)
        if not np.all(np.isfinite(c)):
            raise NumericalFailure(f"non-finite value at step {step}", step=step)
        if _gradient_norm(c, k2) > BLOWUP_FACTOR * grad_ref:
            blew_up = True
            log.warning("blow-up sentinel tripped at step %d", step)
        if step % cfg.record_every == 0 or step == n or blew_up:
            f = phi0.with_coefficients(c)
            q = conserved_3d(f, cfg)
            times.append(step * cfg.dt)
            mass.append(q.mass)
            energy.append(q.energy)
            snaps.append(f)
        if blew_up:
            break
    return Trajectory(np.array(times), np.array(mass), np.array(energy), snaps, step, blew_up)


# ---------------------------------------------------------------------------
# ground state
# ---------------------------------------------------------------------------


@dataclass
class EnergyMinimum:
    energy: float
    minimizer: ComplexField3D
    converged: bool
    iterations: int
    descent_ok: bool
    history: list = field(default_factory=list, repr=False)

    def __iter__(self):
        yield self.energy
        yield self.minimizer


def minimize_energy(
    cfg: Evolution3DConfig,
    iterations: int = 3000,
    tol: float = 1e-12,
    taus=(0.1, 0.02, 0.004),
    initial: ComplexField3D | None = None,
) -> EnergyMinimum:
    """Normalized imaginary-time gradient flow for the renormalized energy.

    Each stage runs split imaginary-time steps of size ``tau`` followed by an
    L2 renormalization until the energy changes by less than ``tol``; later
    stages use smaller ``tau`` to shrink the splitting bias.  Every reported
    energy is the exact discrete functional of a normalized state, hence an
    upper bound on the discrete minimum.
    """
    grid = cfg.grid
    if initial is None:
        x_part = np.full(grid.torus.shape, 1.0 / (2 * np.pi), dtype=complex)
        initial = ComplexField3D.product(grid, ComplexField2D(grid.torus, values=x_part), [1.0])
    phi = initial.normalized()
    sym = _kinetic_symbol_3d(grid, cfg.params.L, 0.0) + 1.0
    kernel = _kernel(cfg.spec, cfg.params, grid)
    mask = dealias_mask(grid.torus)[..., None] if cfg.dealias else None
    c = np.array(phi.coefficients)
    e = energy_functional(phi, cfg.spec, cfg.params, cfg.dealias)
    history = [e]
    descent_ok = True
    converged = False
    it = 0
    for tau in taus:
        half = np.exp(-0.5 * tau * sym)
        stage_converged = False
        for _ in range(iterations):
            it += 1
            c = c * half
            v = _backward_x(_backward_z(c, grid), grid.torus)
            W = kernel.apply(np.abs(v) ** 2, mask)
            v = v * np.exp(-tau * W)
            c = _forward_z(_forward_x(v, grid.torus), grid) * half
            c = c / np.sqrt(np.sum(np.abs(c) ** 2))
            if not np.all(np.isfinite(c)):
                raise NumericalFailure(f"non-finite value at iteration {it}", step=it)
            e_new = energy_functional(phi.with_coefficients(c), cfg.spec, cfg.params, cfg.dealias)
            history.append(e_new)
            if e_new > e + 1e-9 * max(1.0, abs(e)):
                descent_ok = False
            done = abs(e_new - e) < tol
            e = e_new
            if done:
                stage_converged = True
                break
        converged = stage_converged
    if not descent_ok:
        log.warning("imaginary-time flow increased the energy")
    if not converged:
        log.warning("energy minimization did not converge to tol=%g", tol)
    return EnergyMinimum(e, phi.with_coefficients(c), converged, it, descent_ok, history)
