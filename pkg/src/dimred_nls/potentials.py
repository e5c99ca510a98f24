"""Interaction potentials, their scaled families, mixed norms and the 2D coupling.

Potentials are closed-form smooth bumps built from

    b(t) = exp(1 - 1 / (1 - t^2))   for |t| < 1,   0 otherwise,

so ``b(0) = 1`` and every derivative vanishes at the support edge.  Two kinds
are provided:

``separable``  V(x, z) = A b(x1/Rx) b(x2/Rx) b(z/Rz)
``radial``     V(x, z) = A b(sqrt(|x|^2/Rx^2 + z^2/Rz^2))

with amplitude ``A <= 0``.  The scaled families on the slab are

    lab frame        V_{N,L}(r) = a^3 V(a r),                 a = (N/L)^beta
    rescaled frame   V~_{N,L}(x, z) = L a^3 V(a x, c z),        c = L a

and both are extended periodically in x.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, special

__all__ = [
    "bump",
    "PotentialSpec",
    "ScaledPotentialParams",
    "G0Estimate",
    "AdmissibilityReport",
    "eval_scaled_potential",
    "mixed_norm_inf1",
    "coupling_constant_g0",
    "admissibility_check",
    "spectral_smoothness",
    "reference_bump",
    "scaled_to_threshold",
    "InadmissiblePotentialError",
]

KINDS = ("zero", "separable", "radial")
SLAB_HALF_WIDTH = np.pi / 2


class InadmissiblePotentialError(ValueError):
    """The potential violates a structural hypothesis (sign or support)."""


def bump(t):
    """Smooth compactly supported profile with ``bump(0) = 1``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def composite_gl(a: float, b: float, panels: int, order: int):
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``."""
    t, w = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=None)
def _bump_integral() -> float:
    x, w = composite_gl(-1.0, 1.0, 16, 24)
    return float(np.sum(w * bump(x)))


def _bump_cosine_transform(q):
    """``int_{-1}^{1} b(t) cos(q t) dt`` for an array of ``q``."""
    x, w = composite_gl(-1.0, 1.0, 32, 16)
    q = np.asarray(q, dtype=float)
    return (np.cos(np.multiply.outer(q, x)) * bump(x)) @ w


def _wrap(x):
    return (np.asarray(x, dtype=float) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class PotentialSpec:
    """A smooth compactly supported pair interaction on the unit slab.

    ``shift`` translates the potential in x.  It exists for invariance
    checks; shifted potentials are no longer even.
    """

    kind: str = "separable"
    amplitude: float = -1.0
    radius_x: float = np.pi / 2
    radius_z: float = np.pi / 4
    shift: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if self.radius_x <= 0 or self.radius_z <= 0:
            raise ValueError("support radii must be positive")
        object.__setattr__(self, "shift", tuple(float(s) for s in self.shift))
        if len(self.shift) != 2:
            raise ValueError("shift is a 2-vector")

    @classmethod
    def zero(cls):
        return cls(kind="zero", amplitude=0.0)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    def with_amplitude(self, amplitude: float) -> "PotentialSpec":
        return PotentialSpec(self.kind, float(amplitude), self.radius_x, self.radius_z, self.shift)

    def support_box(self):
        """Half-widths of a box containing the x-support and the z-support."""
        return self.radius_x, self.radius_z

    def __call__(self, x1, x2, z):
        """Pointwise value; x is taken modulo the torus."""
        x1, x2, z = np.broadcast_arrays(
            np.asarray(x1, dtype=float), np.asarray(x2, dtype=float), np.asarray(z, dtype=float)
        )
        if self.is_zero:
            return np.zeros(x1.shape)
        y1 = _wrap(x1 - self.shift[0]) / self.radius_x
        y2 = _wrap(x2 - self.shift[1]) / self.radius_x
        zz = z / self.radius_z
        if self.kind == "separable":
            return self.amplitude * bump(y1) * bump(y2) * bump(zz)
        return self.amplitude * bump(np.sqrt(y1**2 + y2**2 + zz**2))

    def x_integral(self, z):
        """Closed form of ``int V(x, z) dx`` (used by oracles and diagnostics)."""
        z = np.asarray(z, dtype=float)
        if self.is_zero:
            return np.zeros_like(z)
        if self.kind == "separable":
            return self.amplitude * (self.radius_x * _bump_integral()) ** 2 * bump(z / self.radius_z)
        zeta = np.abs(z) / self.radius_z
        u, w = composite_gl(0.0, 1.0, 16, 16)
        vals = np.zeros_like(zeta)
        for i, s in np.ndenumerate(zeta):
            if s < 1:
                uu = s + (1 - s) * u
                vals[i] = (1 - s) * np.sum(w * bump(uu) * uu)
        return self.amplitude * 2 * np.pi * self.radius_x**2 * vals

    def x_fourier(self, q1, q2, z):
        """``int V(y, z) exp(-i q.y) dy`` over the plane, for real wave vectors ``q``."""
        q1, q2, z = np.asarray(q1, dtype=float), np.asarray(q2, dtype=float), np.asarray(z, dtype=float)
        R = self.radius_x
        if self.kind == "separable" and not self.is_zero:
            # factorized, so the transforms are not evaluated on the broadcast shape
            phase = np.exp(-1j * (q1 * self.shift[0] + q2 * self.shift[1]))
            bx = R * _bump_cosine_transform(q1 * R) * R * _bump_cosine_transform(q2 * R)
            out = self.amplitude * (bx * phase) * bump(z / self.radius_z)
            return np.broadcast_to(out, np.broadcast_shapes(q1.shape, q2.shape, z.shape)).astype(complex)
        q1, q2, z = np.broadcast_arrays(q1, q2, z)
        if self.is_zero:
            return np.zeros(q1.shape, dtype=complex)
        phase = np.exp(-1j * (q1 * self.shift[0] + q2 * self.shift[1]))
        # radial in x at fixed z: Hankel transform of order zero
        qn = np.sqrt(q1**2 + q2**2)
        zeta2 = (z / self.radius_z) ** 2
        t, w = composite_gl(0.0, 1.0, 16, 16)
        out = np.zeros(q1.shape)
        inside = zeta2 < 1
        smax = np.sqrt(np.where(inside, 1 - zeta2, 0.0))
        s = smax[..., None] * t  # in units of R
        prof = bump(np.sqrt(s**2 + zeta2[..., None]))
        integrand = prof * special.j0(qn[..., None] * R * s) * s
        out = 2 * np.pi * R**2 * smax * (integrand @ w)
        return self.amplitude * np.where(inside, out, 0.0) * phase

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shift"] = list(self.shift)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        unknown = set(d) - {"kind", "amplitude", "radius_x", "radius_z", "shift"}
        if unknown:
            raise ValueError(f"unknown potential keys: {sorted(unknown)}")
        d = dict(d)
        if "shift" in d:
            d["shift"] = tuple(d["shift"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "PotentialSpec":
        return cls.from_dict(json.loads(text))


def reference_bump(amplitude: float = -1.0) -> PotentialSpec:
    """Separable bump with x-radius pi/2 and z-radius pi/4."""
    return PotentialSpec("separable", amplitude, np.pi / 2, np.pi / 4)


@dataclass(frozen=True)
class ScaledPotentialParams:
    """Parameters ``(N, L, beta)`` of the scaled interaction.

    ``strict`` enforces ``c = L (N/L)^beta <= 1``; the regime scan that probes
    ``c > 1`` turns it off.
    """

    N: float
    L: float
    beta: float
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError("N must be positive")
        if not 0 < self.L <= 1:
            raise ValueError("L must lie in (0, 1]")
        if not 0 < self.beta < 3 / 7:
            raise ValueError("beta must lie in (0, 3/7)")
        if self.strict and self.c > 1 + 1e-12:
            raise ValueError(f"L (N/L)^beta = {self.c:.6g} exceeds 1")

    @property
    def a(self) -> float:
        """Inverse interaction range ``(N/L)^beta``."""
        return (self.N / self.L) ** self.beta

    @property
    def c(self) -> float:
        return self.L * self.a

    @property
    def scattering_scale(self) -> float:
        """``a = L/N`` of the original Hamiltonian (recorded only)."""
        return self.L / self.N


def _check_frame(frame):
    if frame not in ("lab", "rescaled"):
        raise ValueError(f"frame must be 'lab' or 'rescaled', got {frame!r}")


def scaled_potential_function(spec: PotentialSpec, params: ScaledPotentialParams, frame: str):
    """Vectorized ``(x1, x2, z) -> value`` of the scaled family (no domain check)."""
    _check_frame(frame)
    a, c, L = params.a, params.c, params.L
    images = _image_range(spec, a)

    def f(x1, x2, z):
        x1, x2, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, z)))
        x1 = _wrap(x1)
        x2 = _wrap(x2)
        out = np.zeros(x1.shape)
        for n1 in images:
            for n2 in images:
                y1 = a * (x1 + 2 * np.pi * n1)
                y2 = a * (x2 + 2 * np.pi * n2)
                if frame == "lab":
                    out += a**3 * _unwrapped(spec, y1, y2, a * z)
                else:
                    out += L * a**3 * _unwrapped(spec, y1, y2, c * z)
        return out

    return f


def _unwrapped(spec: PotentialSpec, y1, y2, z):
    # V on the plane (no periodization), shift applied in scaled units of the plane
    if spec.is_zero:
        return np.zeros(np.shape(y1))
    u1 = (y1 - spec.shift[0]) / spec.radius_x
    u2 = (y2 - spec.shift[1]) / spec.radius_x
    zz = z / spec.radius_z
    if spec.kind == "separable":
        return spec.amplitude * bump(u1) * bump(u2) * bump(zz)
    return spec.amplitude * bump(np.sqrt(u1**2 + u2**2 + zz**2))


def _image_range(spec: PotentialSpec, a: float):
    reach = (np.hypot(*spec.shift) + np.sqrt(2) * spec.radius_x) / a
    n = int(np.ceil(max(reach - np.pi, 0.0) / (2 * np.pi)))
    return range(-n, n + 1)


def eval_scaled_potential(spec: PotentialSpec, params: ScaledPotentialParams, frame: str, r):
    """Value of ``V_{N,L}`` (lab) or ``V~_{N,L}`` (rescaled) at the point(s) ``r``.

    ``r`` has trailing dimension 3.  Points outside the slab in z raise.
    """
    _check_frame(frame)
    r = np.asarray(r, dtype=float)
    half = SLAB_HALF_WIDTH * (params.L if frame == "lab" else 1.0)
    if np.any(np.abs(r[..., 2]) >= half):
        raise ValueError(f"point outside the slab |z| < {half:.6g}")
    f = scaled_potential_function(spec, params, frame)
    out = f(r[..., 0], r[..., 1], r[..., 2])
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# mixed norm
# ---------------------------------------------------------------------------


def _x_integral_abs(func, x_half: float, z, panels=8, order=12):
    x, w = composite_gl(-x_half, x_half, panels, order)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    z = np.atleast_1d(z)
    vals = np.abs(func(X1[..., None], X2[..., None], z[None, None, :]))
    return np.tensordot(W, vals, axes=([0, 1], [0, 1]))


def _sup_over_z(g, z_half: float, samples=257):
    zs = np.linspace(-z_half, z_half, samples)
    vals = g(zs)
    i = int(np.argmax(vals))
    lo, hi = zs[max(i - 1, 0)], zs[min(i + 1, samples - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda t: -g(np.array([t]))[0], bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12},
        )
        return max(float(vals[i]), float(-res.fun))
    return float(vals[i])


def mixed_norm_inf1(
    spec: PotentialSpec,
    params: ScaledPotentialParams | None = None,
    frame: str | None = None,
    x_scale: float = 1.0,
) -> float:
    """``sup_z int |V(x, z)| dx`` by quadrature.

    With ``params`` and ``frame`` the norm of the scaled family is computed
    directly from its pointwise values.  ``x_scale = lam`` evaluates the
    norm of ``V(x / lam, z)``.
    """
    if spec.is_zero:
        return 0.0
    Rx, Rz = spec.radius_x, spec.radius_z
    reach = float(np.abs(spec.shift).max()) + Rx
    if params is None:
        x_half = reach * x_scale
        z_half = Rz

        def func(x1, x2, z):
            return _unwrapped(spec, x1 / x_scale, x2 / x_scale, z)

    else:
        _check_frame(frame)
        a, c = params.a, params.c
        scaled = scaled_potential_function(spec, params, frame)
        x_half = min(reach * x_scale / a, np.pi)
        z_half = Rz / a if frame == "lab" else Rz / c

        def func(x1, x2, z):
            return scaled(x1 / x_scale, x2 / x_scale, z)

    def g(z, panels=8):
        return _x_integral_abs(func, x_half, z, panels=panels)

    coarse = _sup_over_z(lambda z: g(z, 4), z_half)
    fine = _sup_over_z(g, z_half)
    if abs(fine - coarse) > 1e-6 * max(fine, 1e-300):
        fine = _sup_over_z(lambda z: g(z, 16), z_half)
    return fine


# ---------------------------------------------------------------------------
# coupling constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class G0Estimate:
    value: float
    error: float
    quad_level: int
    history: tuple[float, ...] = ()

    def __float__(self):
        return self.value


def _check_structure(spec: PotentialSpec):
    if spec.is_zero:
        return
    if spec.amplitude > 0:
        raise InadmissiblePotentialError("amplitude must be nonpositive")
    if spec.radius_z >= SLAB_HALF_WIDTH or np.abs(spec.shift).max() + spec.radius_x >= np.pi:
        raise InadmissiblePotentialError("support is not strictly inside the domain")


def _g0_at_level(spec: PotentialSpec, level: int, order: int = 10) -> float:
    panels = 2**level
    Rx, Rz = spec.radius_x, spec.radius_z
    # x-integral of V on a tensor rule aligned with the x-support
    x1, w1 = composite_gl(spec.shift[0] - Rx, spec.shift[0] + Rx, panels, order)
    x2, w2 = composite_gl(spec.shift[1] - Rx, spec.shift[1] + Rx, panels, order)
    s, ws = composite_gl(-Rz, Rz, panels, order)
    V = spec(x1[:, None, None], x2[None, :, None], s[None, None, :])
    v = np.einsum("i,j,ijk->k", w1, w2, V)
    # overlap of the transverse profiles at separation s, exact for this degree
    t, wt = gauss_legendre(24)
    lo = np.maximum(-SLAB_HALF_WIDTH, s - SLAB_HALF_WIDTH)
    hi = np.minimum(SLAB_HALF_WIDTH, s + SLAB_HALF_WIDTH)
    z1 = 0.5 * (hi + lo)[:, None] + 0.5 * (hi - lo)[:, None] * t[None, :]
    overlap = 0.5 * (hi - lo) * ((np.cos(z1) ** 2 * np.cos(z1 - s[:, None]) ** 2) @ wt)
    return float(4 / np.pi**2 * np.sum(ws * v * overlap))


def coupling_constant_g0(spec: PotentialSpec, quad_level: int = 4) -> G0Estimate:
    """``g0 = (4/pi^2) int int (int V(x, z1 - z2) dx) cos^2 z1 cos^2 z2 dz1 dz2``.

    The z-double integral is written in the separation ``s = z1 - z2``;
    composite Gauss-Legendre panels are aligned with the support edges in x
    and s.  ``error`` is the difference to the next coarser level.
    """
    if quad_level < 1:
        raise ValueError("quad_level must be >= 1")
    _check_structure(spec)
    if spec.is_zero:
        return G0Estimate(0.0, 0.0, quad_level, (0.0,) * (quad_level + 1))
    history = tuple(_g0_at_level(spec, lvl) for lvl in range(quad_level + 1))
    return G0Estimate(history[-1], abs(history[-1] - history[-2]), quad_level, history)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    entries: dict[str, tuple[bool, float]]
    mixed_norm: float
    threshold: float

    @property
    def admissible(self) -> bool:
        return all(ok for ok, _ in self.entries.values())

    def failed(self) -> list[str]:
        return [k for k, (ok, _) in self.entries.items() if not ok]

    def to_dict(self) -> dict:
        return {
            "admissible": bool(self.admissible),
            "mixed_norm": float(self.mixed_norm),
            "threshold": float(self.threshold),
            "entries": {k: {"passed": bool(ok), "margin": float(m)} for k, (ok, m) in self.entries.items()},
        }


def smallness_threshold(cgn: float, alpha: float) -> float:
    return 2 * alpha / cgn**4


def admissibility_check(spec: PotentialSpec, cgn: float, alpha: float) -> AdmissibilityReport:
    """Evaluate each hypothesis on ``V``; failures become report entries."""
    if not cgn > 0:
        raise ValueError("cgn must be positive")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    x = np.linspace(-np.pi, np.pi, 41)[:-1] + 0.013
    z = np.linspace(-SLAB_HALF_WIDTH, SLAB_HALF_WIDTH, 33)[1:-1] + 0.007
    X1, X2, Z = np.meshgrid(x, x, z, indexing="ij")
    V = spec(X1, X2, Z)
    Vm = spec(-X1, -X2, -Z)
    scale = max(np.abs(V).max(), 1e-300)
    entries = {}
    asym = float(np.abs(V - Vm).max())
    entries["even"] = (asym <= 1e-12 * scale, -asym)
    vmax = float(V.max()) if V.size else 0.0
    entries["nonpositive"] = (vmax <= 0.0, -vmax)

    Rx, Rz = spec.radius_x, spec.radius_z
    room = min(np.pi - (np.abs(spec.shift).max() + Rx), SLAB_HALF_WIDTH - Rz)
    if spec.kind != "zero":
        outside = (np.maximum(np.abs(_wrap(X1 - spec.shift[0])), np.abs(_wrap(X2 - spec.shift[1]))) >= Rx) | (
            np.abs(Z) >= Rz
        )
        leak = float(np.abs(V[outside]).max()) if outside.any() else 0.0
    else:
        leak, room = 0.0, SLAB_HALF_WIDTH
    entries["compact_support"] = (room > 0 and leak == 0.0, float(room))

    entries["smooth"] = _smoothness_entry(spec)

    norm = mixed_norm_inf1(spec)
    threshold = smallness_threshold(cgn, alpha)
    margin = threshold - norm
    entries["smallness"] = (margin >= -1e-12 * threshold, float(margin))
    return AdmissibilityReport(entries, norm, threshold)


def spectral_smoothness(values) -> tuple[bool, float]:
    """Super-algebraic decay test for the 2D spectrum of a square sample array.

    The shell-wise envelope of ``|fft2(values)|`` is fitted by a power law on
    a low and a high wavenumber window.  Algebraic decay keeps the log-log
    slope constant while smooth data steepen.  Passes when the high-window
    slope is at least one unit steeper (the margin is the excess), or when
    the envelope reaches the roundoff floor.
    """
    values = np.asarray(values)
    n = values.shape[0]
    c = np.abs(np.fft.fft2(values))
    if c.max() == 0:
        return (True, 1.0)
    c = c / c.max()
    k = np.abs(np.fft.fftfreq(n, 1.0 / n))
    kk = np.maximum.outer(k, k)
    ks = np.arange(4, n // 2 - 4, 2)
    env = np.array([c[(kk >= a) & (kk < a + 2)].max() for a in ks])
    env = np.maximum.accumulate(env[::-1])[::-1]
    if env.min() < 1e-12:
        return (True, 1.0)
    lk, le = np.log(ks + 1.0), np.log(env)
    lo = (ks >= n // 16) & (ks <= n // 8)
    hi = (ks >= n // 4) & (ks <= n // 2 - 8)
    s_lo = np.polyfit(lk[lo], le[lo], 1)[0]
    s_hi = np.polyfit(lk[hi], le[hi], 1)[0]
    margin = float(s_lo - s_hi - 1.0)
    return (margin >= 0, margin)


def _smoothness_entry(spec: PotentialSpec):
    """``spectral_smoothness`` of ``V(., 0)`` on a 128^2 box of twice the x-radius."""
    if spec.is_zero:
        return (True, 1.0)
    n = 128
    R = spec.radius_x
    t = -2 + 4 * np.arange(n) / n
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    return spectral_smoothness(spec(spec.shift[0] + R * T1, spec.shift[1] + R * T2, 0.0))


def scaled_to_threshold(spec: PotentialSpec, cgn: float, fraction: float, alpha: float = 1.0):
    """Rescale the amplitude so that ``||V|| = fraction * 2 alpha / cgn^4``."""
    unit = mixed_norm_inf1(spec.with_amplitude(-1.0))
    return spec.with_amplitude(-fraction * smallness_threshold(cgn, alpha) / unit)
