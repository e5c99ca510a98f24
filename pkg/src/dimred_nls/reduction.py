"""Confinement-limit study: 3D Hartree proxy versus the 2D cubic NLS.

Along a ladder of regimes with fixed ``c = L (N/L)^beta`` and shrinking ``L``
the 3D proxy is started from ``phi0(x) e_1(z)``.  Its z-traced one-particle
density is compared in trace norm with the projector onto the 2D solution
whose coupling is ``g0``.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Evolution2DConfig, Evolution3DConfig, Trajectory, evolve_2d, evolve_3d
from .io import write_series_csv
from .potentials import (
    InadmissiblePotentialError,
    PotentialSpec,
    ScaledPotentialParams,
    admissibility_check,
    coupling_constant_g0,
)
from .spectral_core import ComplexField2D, ComplexField3D, SlabGrid, TorusGrid

__all__ = [
    "ScalingRegime",
    "scaling_ladder",
    "ReducedDensity",
    "reduced_density_x",
    "projector_x",
    "trace_distance",
    "full_trace_distance",
    "RungResult",
    "StudyReport",
    "run_convergence_study",
    "PREAMBLE",
]

log = logging.getLogger(__name__)

PREAMBLE = (
    "Hartree mean-field proxy: verifies the confinement limit L -> 0 and the coupling "
    "constant g0 of the 2D equation; the many-body N -> infinity mean-field step is "
    "not reproduced at this scale."
)


@dataclass(frozen=True)
class ScalingRegime:
    """A point on the ladder ``L (N/L)^beta = c``; ``N`` is derived."""

    beta: float
    c: float
    L: float

    def __post_init__(self):
        if not 0 < self.beta < 3 / 7:
            raise ValueError("beta must lie in (0, 3/7)")
        if not 0 < self.c <= 1:
            raise ValueError(f"c must lie in (0, 1], got {self.c}")
        if not 0 < self.L <= 1:
            raise ValueError(f"L must lie in (0, 1], got {self.L}")
        back = self.L * (self.N / self.L) ** self.beta
        if abs(back - self.c) > 1e-12 * self.c:
            raise ArithmeticError(f"ladder inversion lost accuracy: {back!r} vs {self.c!r}")

    @property
    def N(self) -> float:
        return self.L * (self.c / self.L) ** (1.0 / self.beta)

    @property
    def params(self) -> ScaledPotentialParams:
        return ScaledPotentialParams(self.N, self.L, self.beta)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "c": self.c, "L": self.L, "N": self.N}


def scaling_ladder(beta: float, c: float, L_values) -> list[ScalingRegime]:
    """Regimes at fixed ``(beta, c)`` for strictly decreasing ``L_values``."""
    if c > 1:
        raise ValueError(f"c = {c} exceeds 1")
    L_values = [float(v) for v in L_values]
    if not L_values:
        raise ValueError("the ladder needs at least one L")
    if any(b >= a for a, b in zip(L_values, L_values[1:])):
        raise ValueError("L_values must be strictly decreasing")
    return [ScalingRegime(beta, c, L) for L in L_values]


# ---------------------------------------------------------------------------
# reduced densities
# ---------------------------------------------------------------------------


def _retained_mask(grid: TorusGrid, retained) -> np.ndarray:
    r1, r2 = retained
    if r1 > grid.nx1 or r2 > grid.nx2 or r1 < 1 or r2 < 1:
        raise ValueError(f"retained modes {retained} exceed the grid {grid.shape}")
    k1, k2 = grid.wavenumbers()
    # the same index set as an r1 x r2 FFT grid
    return (k1 >= -(r1 // 2)) & (k1 < r1 - r1 // 2) & (k2 >= -(r2 // 2)) & (k2 < r2 - r2 // 2)


@dataclass(frozen=True)
class ReducedDensity:
    """Hermitian PSD matrix over the retained x-modes ``basis`` (rows of ``(k1, k2)``)."""

    basis: np.ndarray
    matrix: np.ndarray
    captured_mass: float = 1.0

    def __post_init__(self):
        m = self.matrix
        if m.shape != (len(self.basis), len(self.basis)):
            raise ValueError("matrix and basis sizes differ")
        scale = max(1.0, float(np.abs(m).max(initial=0.0)))
        if np.abs(m - m.conj().T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("reduced density is not Hermitian")
        ev = self.eigenvalues()
        if ev.size and ev.min() < -1e-10:
            raise ValueError(f"reduced density has eigenvalue {ev.min():.3g} < 0")
        tr = self.trace
        if tr > 1 + 1e-10:
            raise ValueError(f"trace {tr:.12g} exceeds 1")
        if abs(tr - self.captured_mass) > 1e-10:
            raise ValueError("trace differs from the captured mass")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def _basis_rows(grid: TorusGrid, mask) -> np.ndarray:
    k1, k2 = grid.wavenumbers()
    return np.stack([k1[mask], k2[mask]], axis=1).astype(int)


def _check_normalized(f):
    nrm = f.norm()
    if abs(nrm - 1) > 1e-8:
        raise ValueError(f"field must be normalized, norm = {nrm:.12g}")


def reduced_density_x(phi: ComplexField3D, retained_modes=(16, 16), z_modes: int = 8) -> ReducedDensity:
    """``gamma_x[k, k'] = sum_m phi(k, m) conj(phi(k', m))`` over retained modes."""
    _check_normalized(phi)
    if z_modes > phi.grid.nz or z_modes < 1:
        raise ValueError(f"z_modes={z_modes} exceeds the grid (nz={phi.grid.nz})")
    mask = _retained_mask(phi.grid.torus, retained_modes)
    A = phi.coefficients[mask][:, :z_modes]
    G = A @ A.conj().T
    G = 0.5 * (G + G.conj().T)
    return ReducedDensity(_basis_rows(phi.grid.torus, mask), G, float(np.sum(np.abs(A) ** 2)))


def projector_x(phi: ComplexField2D, retained_modes=(16, 16)) -> ReducedDensity:
    """``|phi><phi|`` restricted to the retained modes."""
    _check_normalized(phi)
    mask = _retained_mask(phi.grid, retained_modes)
    b = phi.coefficients[mask]
    return ReducedDensity(_basis_rows(phi.grid, mask), np.outer(b, b.conj()), float(np.sum(np.abs(b) ** 2)))


def trace_distance(a: ReducedDensity, b: ReducedDensity) -> float:
    """``Tr |a - b|``: sum of the absolute eigenvalues of the Hermitian difference."""
    if a.basis.shape != b.basis.shape or np.any(a.basis != b.basis):
        raise ValueError("reduced densities use different bases")
    return float(np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))


def full_trace_distance(phi3: ComplexField3D, phi2: ComplexField2D) -> float:
    """Trace distance between the pure states ``phi3`` and ``phi2 (x) e_1``.

    Diagnostic on the full slab; for unit vectors it equals
    ``2 sqrt(1 - |<phi3, phi2 e_1>|^2)``.
    """
    _check_normalized(phi3)
    _check_normalized(phi2)
    overlap = np.vdot(phi2.coefficients, phi3.coefficients[..., 0])
    return float(2 * np.sqrt(max(0.0, 1 - abs(overlap) ** 2)))


# ---------------------------------------------------------------------------
# the study
# ---------------------------------------------------------------------------


@dataclass
class RungResult:
    index: int
    regime: ScalingRegime
    times: np.ndarray
    distance: np.ndarray
    mass3d: np.ndarray
    energy3d: np.ndarray
    mass2d: np.ndarray
    energy2d: np.ndarray
    mass_drift: float
    blew_up: bool
    elapsed: float = field(default=0.0, compare=False)

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distance))

    @property
    def final_distance(self) -> float:
        return float(self.distance[-1])

    def to_dict(self) -> dict:
        return {
            "rung": self.index,
            "regime": self.regime.to_dict(),
            "max_distance": self.max_distance,
            "final_distance": self.final_distance,
            "mass_drift": self.mass_drift,
            "energy_drift": float(np.max(np.abs(self.energy3d - self.energy3d[0]))),
            "blew_up": self.blew_up,
            "times": self.times.tolist(),
            "distance": self.distance.tolist(),
        }


@dataclass
class StudyReport:
    rungs: list[RungResult]
    g0: float
    g0_error: float
    cgn: float
    settings: dict
    admissibility: dict
    comparison: dict | None = None
    invalid_reason: str | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.invalid_reason is None

    @property
    def max_distances(self) -> list[float]:
        return [r.max_distance for r in self.rungs]

    @property
    def strictly_decreasing(self) -> bool:
        d = self.max_distances
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def reduction_ratio(self) -> float:
        d = self.max_distances
        return d[-1] / d[0] if d[0] > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "preamble": PREAMBLE,
            "valid": self.valid,
            "invalid_reason": self.invalid_reason,
            "g0": self.g0,
            "g0_error": self.g0_error,
            "cgn": self.cgn,
            "settings": self.settings,
            "admissibility": self.admissibility,
            "verdict": {
                "max_distances": self.max_distances,
                "strictly_decreasing": self.strictly_decreasing,
                "final_over_first": self.reduction_ratio,
            },
            "comparison": self.comparison,
            "rungs": [r.to_dict() for r in self.rungs],
            "metadata": self.metadata,
        }

    def to_json(self, include_metadata: bool = True) -> str:
        d = self.to_dict()
        if not include_metadata:
            d.pop("metadata")
        return json.dumps(d, sort_keys=True, indent=2)

    def write_csv(self, path):
        cols = {k: [] for k in ("rung", "t", "distance", "mass3d", "energy3d", "mass2d", "energy2d")}
        for r in self.rungs:
            n = len(r.times)
            cols["rung"].extend([r.index] * n)
            cols["t"].extend(r.times)
            cols["distance"].extend(r.distance)
            cols["mass3d"].extend(r.mass3d)
            cols["energy3d"].extend(r.energy3d)
            cols["mass2d"].extend(r.mass2d)
            cols["energy2d"].extend(r.energy2d)
        return write_series_csv(path, cols, preamble=[PREAMBLE])


def _distances(tr3: Trajectory, tr2: Trajectory, retained, z_modes) -> np.ndarray:
    out = []
    for f3, f2 in zip(tr3.snapshots, tr2.snapshots):
        out.append(
            trace_distance(
                reduced_density_x(f3.normalized(), retained, z_modes),
                projector_x(f2.normalized(), retained),
            )
        )
    return np.array(out)


def run_convergence_study(
    ladder: list[ScalingRegime],
    phi0_2d: ComplexField2D,
    spec: PotentialSpec,
    t_final: float = 1.0,
    dt: float = 0.005,
    nz: int = 8,
    retained_modes=(16, 16),
    z_modes: int = 8,
    checkpoints: int = 20,
    cgn: float | None = None,
    alpha: float = 0.99,
    compare_factor: float | None = 2.0,
    workers: int = 1,
    mass_tol: float = 1e-10,
) -> StudyReport:
    """Evolve every rung of ``ladder`` and the 2D limit, recording ``d(t)``.

    ``phi0_2d`` is normalized and lifted to ``phi0_2d(x) e_1(z)``.  ``cgn``
    defaults to a fresh 32-mode estimate and is used to verify the smallness
    of ``spec`` before anything runs.  With ``compare_factor`` set, the 2D
    side is rerun with ``compare_factor * g0`` and its final-rung distance is
    reported alongside.
    """
    started = time.time()
    if cgn is None:
        from .gn_constant import estimate_cgn

        cgn = estimate_cgn(32).cgn
    adm = admissibility_check(spec, cgn, alpha)
    if not adm.admissible:
        raise InadmissiblePotentialError(f"potential fails {adm.failed()}")
    steps = int(round(t_final / dt))
    if steps % checkpoints:
        raise ValueError(f"{steps} steps cannot be split into {checkpoints} checkpoints")
    record_every = steps // checkpoints

    g0_est = coupling_constant_g0(spec)
    g0 = g0_est.value
    torus = phi0_2d.grid
    slab = SlabGrid(torus, nz)
    phi0 = phi0_2d.normalized()
    lifted = ComplexField3D.product(slab, phi0, [1.0])

    tr2 = evolve_2d(phi0, Evolution2DConfig(g0, dt, t_final, torus, record_every))

    def run(item):
        i, regime = item
        t0 = time.time()
        cfg = Evolution3DConfig(regime.params, spec, dt, t_final, slab, record_every=record_every)
        tr3 = evolve_3d(lifted, cfg)
        d = _distances(tr3, tr2, retained_modes, z_modes) if not tr3.blew_up else np.array([np.nan])
        res = RungResult(
            i, regime, tr3.times, d, tr3.mass, tr3.energy,
            tr2.mass[: len(tr3.times)], tr2.energy[: len(tr3.times)],
            tr3.mass_drift(), tr3.blew_up, time.time() - t0,
        )
        return res, tr3

    items = list(enumerate(ladder))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcome = list(pool.map(run, items))
    else:
        outcome = [run(it) for it in items]
    rungs = [r for r, _ in outcome]

    invalid = None
    for r in rungs:
        if r.blew_up:
            invalid = f"rung {r.index}: blow-up sentinel tripped"
            break
        if r.mass_drift > mass_tol or tr2.mass_drift() > mass_tol:
            invalid = f"rung {r.index}: mass drift {max(r.mass_drift, tr2.mass_drift()):.3g} exceeds {mass_tol:g}"
            break

    comparison = None
    if compare_factor is not None and invalid is None:
        alt = evolve_2d(phi0, Evolution2DConfig(compare_factor * g0, dt, t_final, torus, record_every))
        d_alt = _distances(outcome[-1][1], alt, retained_modes, z_modes)
        comparison = {
            "factor": compare_factor,
            "final_rung_max_distance": float(np.max(d_alt)),
            "final_rung_final_distance": float(d_alt[-1]),
            "baseline_final_distance": rungs[-1].final_distance,
            "larger_than_baseline": bool(d_alt[-1] > rungs[-1].final_distance),
        }

    settings = {
        "t_final": t_final,
        "dt": dt,
        "grid": [torus.nx1, torus.nx2, nz],
        "retained_modes": list(retained_modes),
        "z_modes": z_modes,
        "checkpoints": checkpoints,
        "alpha": alpha,
        "potential": spec.to_dict(),
    }
    metadata = {
        "elapsed_seconds": time.time() - started,
        "rung_seconds": [r.elapsed for r in rungs],
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if invalid:
        log.error("study invalid: %s", invalid)
    return StudyReport(rungs, g0, g0_est.error, cgn, settings, adm.to_dict(), comparison, invalid, metadata)
