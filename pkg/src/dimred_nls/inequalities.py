"""Randomized numerical checks of the quantitative lemmas.

Every check evaluates both sides of an inequality (or a rate statement) by
quadrature or exact Fourier sums and returns a :class:`CheckInstance`.
Inequalities with explicit constants are judged by ``margin >= -tolerance``.
Statements with unspecified constants are judged by boundedness of a ratio
along a sweep, or by a fitted rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import hartree_potential
from .potentials import (
    InadmissiblePotentialError,
    PotentialSpec,
    ScaledPotentialParams,
    bump,
    composite_gl,
    mixed_norm_inf1,
    reference_bump,
)
from .reduction import ScalingRegime
from .spectral_core import (
    ComplexField3D,
    SlabGrid,
    TorusGrid,
    _forward_x,
    renormalized_kinetic,
)

__all__ = [
    "CheckInstance",
    "HypothesisViolation",
    "random_smooth_slab_field",
    "hoffman_ostenhof_check",
    "interaction_estimate_check",
    "fourier_lower_bound_check",
    "operator_bound_ratio",
    "scalar_interpolation_check",
    "scalar_interpolation_suite",
    "identity_defect",
    "approx_identity_rate",
    "scaling_regime_identity",
    "run_suite",
    "SUITES",
    "format_table",
]

TOL = 1e-8


class HypothesisViolation(ValueError):
    """The instance does not satisfy the lemma's hypotheses; it is rejected, not failed."""


@dataclass
class CheckInstance:
    name: str
    seed: int | None
    resolution: dict
    margin: float
    passed: bool
    tolerance: float
    kind: str = "absolute"
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.margin):
            raise ValueError(f"{self.name}: margin is not finite")
        self.margin = float(self.margin)
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "resolution": self.resolution,
            "margin": self.margin,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "kind": self.kind,
            "details": self.details,
        }


def _absolute(name, seed, resolution, rhs, lhs, tol=TOL, **details):
    margin = float(rhs - lhs)
    details.update(lhs=float(lhs), rhs=float(rhs))
    return CheckInstance(name, seed, resolution, margin, margin >= -tol, tol, "absolute", details)


# ---------------------------------------------------------------------------
# random smooth fields
# ---------------------------------------------------------------------------


def random_smooth_slab_field(grid: SlabGrid, rng: np.random.Generator, k0: float = 3.0, m0: float = 2.0, z_modes=None):
    """Band-limited Gaussian field with spectrum ``exp(-|k|^2/k0^2 - (m-1)^2/m0^2)``."""
    k2 = grid.torus.k_squared()[..., None]
    m = grid.mode_indices()[None, None, :]
    shape = grid.shape
    coef = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    coef = coef * np.exp(-k2 / k0**2 - (m - 1.0) ** 2 / m0**2)
    if z_modes is not None:
        coef[..., z_modes:] = 0.0
    return ComplexField3D.from_coefficients(grid, coef).normalized()


# ---------------------------------------------------------------------------
# Hoffman-Ostenhof
# ---------------------------------------------------------------------------


def _ho_resolution(D):
    if D <= 2:
        return 32, 5
    if D <= 4:
        return 16, 3
    return 10, 2


def _refine_periodic(arr, m):
    """Trigonometric interpolation of a real periodic array to ``m`` points per axis."""
    n = arr.shape[0]
    F = np.fft.fftn(arr)
    G = np.zeros((m,) * arr.ndim, dtype=complex)
    h = n // 2
    idx_src = np.r_[0:h, n - h + 1 : n]
    idx_dst = np.r_[0:h, m - h + 1 : m]
    G[np.ix_(*([idx_dst] * arr.ndim))] = F[np.ix_(*([idx_src] * arr.ndim))]
    return np.fft.ifftn(G).real * (m / n) ** arr.ndim


def hoffman_ostenhof_check(
    n_particles: int = 2, dim: int = 1, seed: int = 0, n: int | None = None, band: int | None = None,
    k0: float = 2.0, psi=None,
) -> CheckInstance:
    """``||grad sqrt(rho)||_2 <= ||grad_{x1} psi||_2`` for a random smooth ``psi`` on ``T^{dim N}``.

    ``psi`` may be given as a sample array of shape ``(n,) * (dim N)``; it is
    normalized here.  Otherwise its Fourier coefficients are drawn for
    ``|k_i| <= band`` only, so the state does not depend on ``n``.
    """
    if n_particles not in (1, 2, 3) or dim not in (1, 2):
        raise ValueError("n_particles must be 1..3 and dim 1 or 2")
    D = dim * n_particles
    if psi is None:
        n0, b0 = _ho_resolution(D)
        n = n0 if n is None else n
        band = b0 if band is None else band
        if n < 4 * band + 2:
            raise ValueError("grid too coarse for the band limit")
        rng = np.random.default_rng(seed)
        small = 2 * band + 1
        ks = np.arange(-band, band + 1)
        K2 = sum(np.meshgrid(*([ks**2] * D), indexing="ij"))
        c = (rng.normal(size=(small,) * D) + 1j * rng.normal(size=(small,) * D)) * np.exp(-K2 / k0**2)
        full = np.zeros((n,) * D, dtype=complex)
        idx = ks % n
        full[np.ix_(*([idx] * D))] = c
        psi = np.fft.ifftn(full)
    else:
        psi = np.asarray(psi, dtype=complex)
        n = psi.shape[0]
        if psi.shape != (n,) * D:
            raise ValueError("psi has the wrong shape")
    h = 2 * np.pi / n
    psi = psi / np.sqrt(h**D * np.sum(np.abs(psi) ** 2))
    k = np.fft.fftfreq(n, 1.0 / n)
    F = np.fft.fftn(psi)
    rhs2 = 0.0
    for ax in range(dim):
        shape = [1] * D
        shape[ax] = n
        rhs2 += h**D / n**D * np.sum((k.reshape(shape) ** 2) * np.abs(F) ** 2)
    rho = h ** (D - dim) * np.sum(np.abs(psi) ** 2, axis=tuple(range(dim, D)))
    m = 8 * n if dim == 1 else 4 * n
    fine = _refine_periodic(rho, m)
    kf = np.fft.fftfreq(m, 1.0 / m)
    Fr = np.fft.fftn(fine)
    grad2 = np.zeros_like(fine)
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = m
        grad2 += np.fft.ifftn(1j * kf.reshape(shape) * Fr).real ** 2
    if fine.min() <= 0:
        raise HypothesisViolation("density vanishes; sqrt(rho) is not smooth")
    lhs2 = (2 * np.pi / m) ** dim * np.sum(grad2 / (4 * fine))
    return _absolute(
        "hoffman-ostenhof", seed, {"n": n, "dims": D, "refined": m},
        np.sqrt(rhs2), np.sqrt(max(lhs2, 0.0)), n_particles=n_particles, dim=dim,
    )


# ---------------------------------------------------------------------------
# interaction estimate (product case)
# ---------------------------------------------------------------------------


def _abs_spec(spec: PotentialSpec) -> PotentialSpec:
    if spec.is_zero:
        return spec
    if spec.amplitude > 0:
        raise InadmissiblePotentialError("amplitude must be nonpositive")
    return spec


def _pair_interaction_abs(phi: ComplexField3D, spec: PotentialSpec, params) -> float:
    """``int int |V~|(r1 - r2) |phi(r1)|^2 |phi(r2)|^2`` for ``V <= 0``."""
    if spec.is_zero:
        return 0.0
    W = hartree_potential(phi, spec, params, dealias=False)
    return float(-phi.grid.cell_volume * np.sum(W * np.abs(phi.values) ** 2))


def interaction_estimate_check(
    spec: PotentialSpec, params: ScaledPotentialParams, state: str = "random", seed: int = 0,
    cgn: float | None = None, grid: SlabGrid | None = None,
) -> CheckInstance:
    """Pair interaction of ``phi (x) phi`` against ``cgn^4 ||V|| <S~^2 phi, phi>``.

    Evaluated in the rescaled frame, where ``L |V_{N,L}|`` becomes ``|V~|``
    and ``S_1^2`` becomes ``S~^2``.  ``state`` is ``ground`` (constant times
    ``e_1``), ``product`` (random ``u(x) e_1(z)``) or ``random``.
    """
    spec = _abs_spec(spec)
    if params.c > 1 + 1e-12:
        raise ValueError("the estimate needs L (N/L)^beta <= 1")
    if cgn is None:
        from .gn_constant import measured_cgn

        cgn = measured_cgn()
    grid = grid or SlabGrid(TorusGrid(16, 16), 8)
    rng = np.random.default_rng(seed)
    if state == "ground":
        coef = np.zeros(grid.shape, dtype=complex)
        coef[0, 0, 0] = 1.0
        phi = ComplexField3D.from_coefficients(grid, coef)
    elif state == "product":
        phi = random_smooth_slab_field(grid, rng, z_modes=1)
    elif state == "random":
        phi = random_smooth_slab_field(grid, rng)
    else:
        raise ValueError(f"unknown state {state!r}")
    lhs = _pair_interaction_abs(phi, spec, params)
    kinetic = renormalized_kinetic(params.L).quadratic_form(phi)
    norm = mixed_norm_inf1(spec)
    return _absolute(
        "interaction-estimate", seed, {"grid": list(grid.shape)},
        cgn**4 * norm * kinetic, lhs, state=state, c=params.c, L=params.L, kinetic=kinetic, cgn=cgn,
    )


# ---------------------------------------------------------------------------
# Fourier lower bound for positive-definite V
# ---------------------------------------------------------------------------


def _lattice(nmax):
    n = np.arange(-nmax, nmax + 1)
    N1, N2 = np.meshgrid(n, n, indexing="ij")
    return N1.ravel(), N2.ravel()


def fourier_lower_bound_check(
    n_points: int = 5, seed: int = 0, eta: str = "gaussian", amplitude: float = 1.0,
    sigma: float = 0.6, sigma_z: float = 0.4, eta_weight: float | None = None,
) -> CheckInstance:
    """Pair sum of a positive-definite ``V`` against the one-body lower bound.

    ``V`` has the symbol ``A exp(-sigma^2 |n|^2/2 - sigma_z^2 tau^2/2)`` in the
    convention ``V(r) = sum_n int dtau V^(n, tau) exp(i (n.x + tau z))``.  The
    density ``eta`` is a periodized Gaussian in x times a Gaussian in z, so
    ``eta * V`` and ``int int V eta eta`` are exact lattice sums with the
    tau-integrals done in closed form.

    Raises
    ------
    HypothesisViolation
        If the symbol is negative somewhere (``amplitude < 0``).
    """
    if amplitude < 0 or sigma <= 0 or sigma_z <= 0:
        raise HypothesisViolation("the symbol of V must be nonnegative")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-np.pi, np.pi, size=(n_points, 2))
    z = rng.uniform(-np.pi / 2, np.pi / 2, size=n_points)
    s = rng.uniform(0.3, 1.0)
    sz = rng.uniform(0.2, 0.6)
    x0 = rng.uniform(-np.pi, np.pi, size=2)
    z0 = rng.uniform(-0.5, 0.5)
    w = rng.uniform(0.0, 1.5) if eta_weight is None else eta_weight
    B = 0.0 if eta == "zero" else (2 * np.pi) ** 3 * n_points * w
    if eta not in ("gaussian", "zero"):
        raise ValueError(f"unknown eta {eta!r}")
    nmax = int(np.ceil(np.sqrt(2 * 45 / sigma**2))) + 1
    n1, n2 = _lattice(nmax)
    nn = n1**2 + n2**2
    vx = amplitude * np.exp(-0.5 * sigma**2 * nn)

    def V(dx, dz):
        px = np.cos(np.multiply.outer(dx[..., 0], n1) + np.multiply.outer(dx[..., 1], n2)) @ vx
        return px * np.sqrt(2 * np.pi) / sigma_z * np.exp(-(dz**2) / (2 * sigma_z**2))

    dx = x[:, None, :] - x[None, :, :]
    dz = z[:, None] - z[None, :]
    iu = np.triu_indices(n_points, 1)
    lhs = float(np.sum(V(dx, dz)[iu])) if n_points > 1 else 0.0
    V0 = float(V(np.zeros((1, 2)), np.zeros(1))[0])

    t = (2 * np.pi) ** -3
    ex = vx * np.exp(-0.5 * s**2 * nn)
    phase = np.multiply.outer(x[:, 0] - x0[0], n1) + np.multiply.outer(x[:, 1] - x0[1], n2)
    var = sigma_z**2 + sz**2
    conv = B * (np.cos(phase) @ ex) * np.sqrt(2 * np.pi / var) * np.exp(-((z - z0) ** 2) / (2 * var))
    double = B**2 * np.sum(vx * np.exp(-(s**2) * nn)) * np.sqrt(2 * np.pi / (sigma_z**2 + 2 * sz**2))
    rhs = t * np.sum(conv) - 0.5 * t**2 * double - 0.5 * n_points * V0
    return CheckInstance(
        "fourier-lower-bound", seed, {"lattice": 2 * nmax + 1}, lhs - rhs, lhs - rhs >= -TOL, TOL,
        "absolute", {"lhs": lhs, "rhs": float(rhs), "n_points": n_points, "eta": eta, "V0": V0},
    )


# ---------------------------------------------------------------------------
# operator bounds with unspecified constants
# ---------------------------------------------------------------------------


def _mixed_norm_p(spec: PotentialSpec, p: float) -> float:
    """``sup_z (int |V(x, z)|^p dx)^(1/p)`` with the sup over a dense z scan."""
    if spec.is_zero:
        return 0.0
    R = spec.radius_x
    x, w = composite_gl(-R, R, 8, 12)
    X1, X2 = np.meshgrid(x + spec.shift[0], x + spec.shift[1], indexing="ij")
    W = np.outer(w, w)
    zs = np.linspace(-spec.radius_z, spec.radius_z, 129)[1:-1]
    vals = [np.sum(W * np.abs(spec(X1, X2, zz)) ** p) ** (1 / p) for zz in zs]
    return float(max(vals))


def operator_bound_ratio(
    which: str = "A2-bilinear", spec: PotentialSpec | None = None, c: float = 0.9,
    L_values=(0.5, 0.25, 0.125), beta: float = 0.25, delta: float = 0.25, seed: int = 0,
    band: float = 3.0, grid: SlabGrid | None = None, field: ComplexField3D | None = None,
) -> CheckInstance:
    """Ratio of ``<L |V_{N,L}| psi, psi>`` to the operator bound along a ladder.

    ``psi = phi (x) phi`` with a fixed smooth ``phi`` in the rescaled frame.
    ``A2-bilinear`` divides by ``||V||_{inf,1} <(1-Delta_x)^{1/2+delta} phi, phi>^2``;
    ``A2-one-body`` divides by ``||V||_{inf,1+delta} <(1-Delta_x) phi, phi>``
    (the ``(N/L)^delta`` allowance of that bound is reported, not divided out).
    Passes when ``max/min`` of the ratios stays below ``band``.
    """
    if which not in ("A2-bilinear", "A2-one-body"):
        raise ValueError(f"unknown bound {which!r}")
    spec = _abs_spec(reference_bump() if spec is None else spec)
    grid = grid or SlabGrid(TorusGrid(32, 32), 8)
    phi = field if field is not None else random_smooth_slab_field(grid, np.random.default_rng(seed))
    k2 = phi.grid.torus.k_squared()[..., None]
    weight = np.abs(phi.coefficients) ** 2
    if which == "A2-bilinear":
        denom_op = float(np.sum((1 + k2) ** (0.5 + delta) * weight)) ** 2
        vnorm = mixed_norm_inf1(spec)
    else:
        denom_op = float(np.sum((1 + k2) * weight)) * float(np.sum(weight))
        vnorm = _mixed_norm_p(spec, 1 + delta)
    ratios, allowance = [], []
    for L in L_values:
        params = ScalingRegime(beta, c, L).params
        num = _pair_interaction_abs(phi, spec, params)
        ratios.append(num / (vnorm * denom_op) if vnorm > 0 else 0.0)
        allowance.append((params.N / L) ** delta)
    r = np.array(ratios)
    if np.all(r == 0):
        spread = 1.0
    else:
        spread = float(r.max() / r.min()) if r.min() > 0 else np.inf
    margin = band - spread if np.isfinite(spread) else -1e300
    return CheckInstance(
        which, seed, {"grid": list(phi.grid.shape)}, margin, spread <= band, band, "ratio",
        {"ratios": r.tolist(), "L": list(L_values), "c": c, "delta": delta, "spread": spread if np.isfinite(spread) else None,
         "allowance": allowance},
    )


# ---------------------------------------------------------------------------
# scalar interpolation inequality
# ---------------------------------------------------------------------------


def _interp_sides(alpha, eta, lam):
    lhs = lam**alpha
    rhs = alpha / eta * lam + (1 - alpha) * eta ** (alpha / (1 - alpha))
    return lhs, rhs


def scalar_interpolation_check(
    alpha: float, eta: float, samples: int = 1000, lam_range=(1e-8, 1e8), seed: int | None = None
) -> CheckInstance:
    """``lam^alpha <= alpha/eta lam + (1-alpha) eta^(alpha/(1-alpha))`` on a log grid of ``lam``.

    The margin is the smallest ``(rhs - lhs) / max(1, rhs)``; the grid always
    contains the touching point ``lam = eta^(1/(1-alpha))``.
    """
    if not (0 < alpha < 1 and 0 < eta < 1):
        raise ValueError("alpha and eta must lie in (0, 1)")
    lam = np.geomspace(*lam_range, samples)
    lam = np.append(lam, eta ** (1 / (1 - alpha)))
    lhs, rhs = _interp_sides(alpha, eta, lam)
    rel = (rhs - lhs) / np.maximum(1.0, rhs)
    return CheckInstance(
        "scalar-interpolation", seed, {"samples": int(lam.size)}, float(rel.min()),
        bool(rel.min() >= -TOL), TOL, "absolute",
        {"alpha": alpha, "eta": eta, "pass_fraction": float(np.mean(rel >= -TOL))},
    )


def scalar_interpolation_suite(samples: int = 10000, seed: int = 0) -> CheckInstance:
    """Random ``(alpha, eta, lam)`` triples with ``lam`` log-uniform on ``[1e-6, 1e6]``."""
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(1e-3, 1 - 1e-3, samples)
    eta = rng.uniform(1e-3, 1 - 1e-3, samples)
    lam = 10.0 ** rng.uniform(-6, 6, samples)
    lhs, rhs = _interp_sides(alpha, eta, lam)
    rel = (rhs - lhs) / np.maximum(1.0, rhs)
    frac = float(np.mean(rel >= -TOL))
    return CheckInstance(
        "scalar-interpolation", seed, {"samples": samples}, float(rel.min()), frac == 1.0, TOL,
        "absolute", {"pass_fraction": frac, "failures": int(np.sum(rel < -TOL))},
    )


# ---------------------------------------------------------------------------
# approximation of the identity
# ---------------------------------------------------------------------------


def _default_j(x1, x2, z):
    return 1.0 + 0.5 * np.cos(x1) * np.cos(z) + 0.3 * np.sin(x2)


def _rho_fourier(rho_spec: PotentialSpec, q1, q2, s):
    """Plane x-transform of ``rho = |V|`` for a nonpositive spec."""
    return -rho_spec.x_fourier(q1, q2, s).real if rho_spec.amplitude < 0 else rho_spec.x_fourier(q1, q2, s).real


def identity_defect(phi: ComplexField3D, rho_spec: PotentialSpec, j=_default_j, eps: float = 1.0, lam: float = 1.0) -> float:
    """``Tr J (rho_{eps,lam}(r1 - r2) - delta(x1 - x2) g(z1 - z2)) |phi><phi|^{(x)2}``.

    With ``J`` multiplication by ``j(r1)`` this is
    ``int a(r1) [(rho_{eps,lam} * |phi|^2)(r1) - int g(z1 - z2) |phi(x1, z2)|^2 dz2] dr1``
    with ``a = j |phi|^2``.  x-convolutions are exact Fourier products; the
    z-integrals use the interior sine-grid nodes.
    """
    grid = phi.grid
    X1, X2, Z = grid.mesh()
    dens = np.abs(phi.values) ** 2
    a = j(X1, X2, Z) * dens
    ah = _forward_x(a, grid.torus)
    bh = _forward_x(dens, grid.torus)
    k1, k2 = grid.torus.wavenumbers()
    z = grid.z()
    s = z[:, None] - z[None, :]
    K = _rho_fourier(rho_spec, eps * k1[..., None, None], eps * k2[..., None, None], s[None, None] / lam) / lam
    g = _rho_fourier(rho_spec, np.zeros_like(s), np.zeros_like(s), s)
    dz = grid.dz
    t1 = np.einsum("abi,abij,abj->", ah.conj(), K, bh) * dz**2
    t0 = np.einsum("abi,ij,abj->", ah.conj(), g, bh) * dz**2
    return float((t1 - t0).real)


def _l1_lambda_modulus(rho_spec: PotentialSpec, lam: float) -> float:
    """``|| rho_{1,lam} - rho_{1,1} ||_{L^1}`` by Gauss-Legendre quadrature."""
    Rx, Rz = rho_spec.radius_x, rho_spec.radius_z
    zmax = Rz * max(lam, 1.0)
    if rho_spec.kind == "separable":
        z, wz = composite_gl(-zmax, zmax, 64, 12)
        vz = np.abs(bump(z / (lam * Rz)) / lam - bump(z / Rz))
        return float(abs(rho_spec.x_integral(0.0)) * (vz @ wz))
    x, wx = composite_gl(-Rx, Rx, 8, 12)
    z, wz = composite_gl(-zmax, zmax, 64, 12)
    X1, X2, Zg = np.meshgrid(x, x, z, indexing="ij")
    diff = np.abs(rho_spec(X1, X2, Zg / lam) / lam - rho_spec(X1, X2, Zg))
    return float(np.einsum("i,j,k,ijk->", wx, wx, wz, diff))


def approx_identity_rate(
    rho_spec: PotentialSpec | None = None, gamma_rank1: ComplexField3D | None = None, J_kernel=_default_j,
    eps_ladder=(1 / 4, 1 / 8, 1 / 16, 1 / 32), lambda_ladder=(1.5, 1.25, 1.125, 1.0625),
    kappa: float = 0.5, seed: int = 0, band: float = 3.0,
) -> CheckInstance:
    """Rate in ``eps`` and ``lam``-continuity of the approximation-of-identity defect.

    Passes when the log-log slope of ``|T(eps, 1)|`` is at least
    ``kappa - 0.1``, the modulus ``||rho_{1,lam} - rho_{1,1}||_1`` decreases to
    zero along ``lambda_ladder`` and ``|T(eps0, lam) - T(eps0, 1)|`` divided by
    that modulus stays within ``band`` (max/min).
    """
    if not 0 <= kappa < 1:
        raise ValueError("kappa must lie in [0, 1)")
    rho_spec = rho_spec or PotentialSpec("separable", -1.0, 0.8, np.pi / 6)
    if rho_spec.radius_z * max(lambda_ladder) >= np.pi / 2:
        raise ValueError("rho_{1,lam} leaves the slab on this lambda ladder")
    if gamma_rank1 is None:
        gamma_rank1 = random_smooth_slab_field(SlabGrid(TorusGrid(16, 16), 16), np.random.default_rng(seed))
    phi = gamma_rank1.normalized()
    T = np.array([identity_defect(phi, rho_spec, J_kernel, e, 1.0) for e in eps_ladder])
    slope = float(np.polyfit(np.log(eps_ladder), np.log(np.abs(T)), 1)[0])
    eps0 = eps_ladder[0]
    T_lam = np.array([identity_defect(phi, rho_spec, J_kernel, eps0, lam) for lam in lambda_ladder])
    disc = np.abs(T_lam - T[0])
    mod = np.array([_l1_lambda_modulus(rho_spec, lam) for lam in lambda_ladder])
    ratio = disc / mod
    mod_ok = bool(np.all(np.diff(mod) < 0) and mod[-1] < 0.25 * mod[0])
    ratio_spread = float(ratio.max() / ratio.min()) if ratio.min() > 0 else np.inf
    rate_ok = slope >= kappa - 0.1
    passed = rate_ok and mod_ok and ratio_spread <= band
    return CheckInstance(
        "approx-identity", seed, {"grid": list(phi.grid.shape)}, slope - (kappa - 0.1), passed, 0.1, "rate",
        {"T": T.tolist(), "eps": list(eps_ladder), "slope": slope, "kappa": kappa,
         "lambda": list(lambda_ladder), "discrepancy": disc.tolist(), "l1_modulus": mod.tolist(),
         "ratio_spread": ratio_spread if np.isfinite(ratio_spread) else None, "modulus_vanishes": mod_ok},
    )


# ---------------------------------------------------------------------------
# scaling identity of the regime analysis
# ---------------------------------------------------------------------------


def _bump_derivative(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = bump(ti) * (-2 * ti / (1 - ti * ti) ** 2)
    return out


@dataclass(frozen=True)
class _Profile:
    """L2-normalized 1D bump of radius ``R``."""

    radius: float

    @property
    def norm(self):
        x, w = composite_gl(-self.radius, self.radius, 32, 16)
        return float(np.sqrt(np.sum(w * bump(x / self.radius) ** 2)))

    def __call__(self, t):
        return bump(np.asarray(t) / self.radius) / self.norm

    def derivative(self, t):
        return _bump_derivative(np.asarray(t) / self.radius) / (self.radius * self.norm)


def _pair_integral(kernel, prof, scale, panels, order):
    """``int int kernel(x - y) |f_s(x)|^2 |f_s(y)|^2`` with ``f_s(x) = s^{1/2} f(s x)``."""
    R = prof.radius / scale
    x, w = composite_gl(-R, R, panels, order)
    dens = scale * prof(scale * x) ** 2
    K = kernel(x[:, None] - x[None, :])
    return float((w * dens) @ K @ (w * dens))


def scaling_regime_identity(
    spec: PotentialSpec | None = None, beta: float = 0.25, c: float = 0.9, L: float = 0.5,
    f_profile: float = 1.0, g_profile: float = 0.7, c_sweep=(0.5, 1.0, 2.0, 4.0),
) -> CheckInstance:
    """Change of variables for ``f_eps(x) g_lam(z)`` with ``1/eps = (N/L)^beta``, ``1/lam = c``.

    ``f = f1 (x) f1`` and ``g`` are normalized bumps of radii ``f_profile`` and
    ``g_profile``.  The scaled interaction energy is integrated in the scaled
    variables and compared with ``L (N/L)^{3 beta} int V |f g f g|^2`` from an
    independent rule; the kinetic closed form is compared with term-by-term
    quadrature.  The ratio |interaction| / kinetic is swept over ``c_sweep``
    at fixed ``L``.
    """
    spec = reference_bump() if spec is None else spec
    if spec.kind not in ("separable", "zero"):
        raise ValueError("the factorized quadrature needs a separable potential")
    f1, g = _Profile(f_profile), _Profile(g_profile)
    sweep = sorted(set(c_sweep) | {c})
    if f_profile + 0.5 * spec.radius_x >= np.pi:
        raise ValueError("profile support violation: f and V overlap their periodic images")
    if g_profile >= min(sweep) * np.pi / 2:
        raise ValueError("profile support violation: g_lam leaves (-pi/2, pi/2)")

    def energies(cc, panels_s=24, order_s=12, panels_u=16, order_u=16):
        params = ScaledPotentialParams(L * (cc / L) ** (1 / beta), L, beta, strict=False)
        a = params.a
        if spec.is_zero:
            scaled = unscaled = 0.0
        else:
            A, R, Rz = spec.amplitude, spec.radius_x, spec.radius_z
            Xs = _pair_integral(lambda d: bump(a * d / R), f1, a, panels_s, order_s)
            Zs = _pair_integral(lambda d: bump(cc * d / Rz), g, cc, panels_s, order_s)
            scaled = L * a**3 * A * Xs**2 * Zs
            Xu = _pair_integral(lambda d: bump(d / R), f1, 1.0, panels_u, order_u)
            Zu = _pair_integral(lambda d: bump(d / Rz), g, 1.0, panels_u, order_u)
            unscaled = L * a**3 * A * Xu**2 * Zu
        # kinetic: closed form and term-by-term in the scaled variables
        x, w = composite_gl(-f1.radius, f1.radius, 32, 16)
        z, wz = composite_gl(-g.radius, g.radius, 32, 16)
        df2 = float(np.sum(w * f1.derivative(x) ** 2))
        dg2 = float(np.sum(wz * g.derivative(z) ** 2))
        closed = (2 * df2 * a**2 + 1.0) + (dg2 * cc**2 - 1.0) / L**2
        xs, ws = composite_gl(-f1.radius / a, f1.radius / a, 24, 12)
        zs, wzs = composite_gl(-g.radius / cc, g.radius / cc, 24, 12)
        fe = np.sqrt(a) * f1(a * xs)
        dfe = a**1.5 * f1.derivative(a * xs)
        ge = np.sqrt(cc) * g(cc * zs)
        dge = cc**1.5 * g.derivative(cc * zs)
        nf, ng = float(ws @ fe**2), float(wzs @ ge**2)
        grad = 2 * float(ws @ dfe**2) * nf
        term = (grad + nf**2) * ng + (nf**2 * float(wzs @ dge**2) - nf**2 * ng) / L**2
        return scaled, unscaled, closed, term, a

    scaled, unscaled, closed, term, a = energies(c)
    rel_int = abs(scaled - unscaled) / abs(unscaled) if unscaled != 0 else abs(scaled)
    rel_kin = abs(closed - term) / abs(closed)
    ratios = []
    for cc in c_sweep:
        s_, _, k_, _, _ = energies(cc)
        ratios.append(abs(s_) / k_)
    r = np.array(ratios)
    cs = np.array(c_sweep, dtype=float)
    small = cs <= 1
    increasing = bool(np.all(np.diff(r) > 0)) if not spec.is_zero else True
    bounded = bool(np.all(r[small] <= r[cs == 1].max())) if np.any(cs == 1) else bool(np.all(np.isfinite(r[small])))
    big = cs >= 1
    slopes = np.diff(r[big]) / np.diff(cs[big])
    no_plateau = bool(np.all(np.diff(slopes) >= 0)) if slopes.size > 1 and not spec.is_zero else True
    err = max(rel_int, rel_kin)
    passed = err <= TOL and increasing and bounded and no_plateau
    return CheckInstance(
        "scaling-identity", None, {"rule": "composite Gauss-Legendre"}, TOL - err, passed, TOL, "absolute",
        {"interaction_scaled": scaled, "interaction_unscaled": unscaled, "rel_error_interaction": rel_int,
         "kinetic_closed": closed, "kinetic_quadrature": term, "rel_error_kinetic": rel_kin,
         "kinetic_bound_2a2": 2 * a**2, "c_sweep": list(c_sweep), "ratios": r.tolist(),
         "increasing": increasing, "bounded_c_le_1": bounded, "no_plateau_c_ge_1": no_plateau},
    )


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def _suite_ho(seed=0, samples=None, cgn=None):
    n = samples or 100
    return [hoffman_ostenhof_check(2, 1, seed + i) for i in range(n)]


def _suite_fourier(seed=0, samples=None, cgn=None):
    n = samples or 100
    return [fourier_lower_bound_check(5, seed + i) for i in range(n)]


def _suite_scalar(seed=0, samples=None, cgn=None):
    return [scalar_interpolation_suite(samples or 10000, seed)]


def _suite_interaction(seed=0, samples=None, cgn=None):
    n = samples or 50
    spec = reference_bump()
    out = []
    for c in (0.5, 0.9, 0.99):
        params = ScalingRegime(0.25, c, 0.25).params
        for i in range(n):
            out.append(interaction_estimate_check(spec, params, "random", seed + i, cgn=cgn))
    return out


def _suite_operator(seed=0, samples=None, cgn=None):
    return [operator_bound_ratio("A2-bilinear", seed=seed), operator_bound_ratio("A2-one-body", seed=seed)]


def _suite_identity(seed=0, samples=None, cgn=None):
    return [approx_identity_rate(seed=seed)]


def _suite_scaling(seed=0, samples=None, cgn=None):
    return [scaling_regime_identity()]


SUITES = {
    "hoffman-ostenhof": _suite_ho,
    "fourier-lower-bound": _suite_fourier,
    "scalar-interpolation": _suite_scalar,
    "interaction-estimate": _suite_interaction,
    "operator-bound": _suite_operator,
    "approx-identity": _suite_identity,
    "scaling-identity": _suite_scaling,
}


def run_suite(name: str, seed: int = 0, samples: int | None = None, cgn: float | None = None) -> list[CheckInstance]:
    """Run a named suite (``all`` runs every suite in a fixed order)."""
    if name == "all":
        out = []
        for key in SUITES:
            out.extend(SUITES[key](seed, samples if key == "scalar-interpolation" else None, cgn))
        return out
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name](seed, samples, cgn)


def format_table(checks: list[CheckInstance]) -> str:
    """Per-check-name summary: count, pass fraction and worst margin."""
    rows = {}
    for ch in checks:
        r = rows.setdefault(ch.name, [0, 0, np.inf])
        r[0] += 1
        r[1] += ch.passed
        r[2] = min(r[2], ch.margin)
    width = max([len(k) for k in rows] + [5])
    lines = [f"{'check':<{width}}  {'n':>5}  {'pass':>7}  {'worst margin':>14}"]
    for k, (n, p, m) in rows.items():
        lines.append(f"{k:<{width}}  {n:>5d}  {100.0 * p / n:>6.1f}%  {m:>14.6g}")
    return "\n".join(lines)
