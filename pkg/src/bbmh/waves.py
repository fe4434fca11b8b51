"""Reference solutions: BBM solitons, BBMH solitary waves, traveling-wave orbits."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (DivergenceError, IterationError, ParameterError, SingularityError,
                     UsageError)
from .sbp import FourierOperator, GridSpec

__all__ = [
    "SolitonParams",
    "TravelingWaveProfile",
    "PeakonProfile",
    "bbm_soliton",
    "petviashvili_solve",
    "petviashvili_operator_symbol",
    "traveling_ode_rhs",
    "integrate_phase_plane",
    "build_peakon",
    "export_profile_csv",
]


@dataclass(frozen=True)
class SolitonParams:
    """Speed ``c > 1`` of the BBM solitary wave on a periodic domain."""

    c: float
    domain: GridSpec

    def __post_init__(self):
        if not self.c > 1.0:
            raise ParameterError(f"the BBM soliton needs c > 1, got c = {self.c}")

    @property
    def K(self) -> float:
        return 0.5 * math.sqrt((self.c - 1.0) / self.c)

    @property
    def amplitude(self) -> float:
        return 3.0 * (self.c - 1.0)


def bbm_soliton(p: SolitonParams, x, t: float = 0.0) -> np.ndarray:
    """``1 + 3 (c - 1) sech^2(K (x - c t))`` with ``x - c t`` wrapped into the domain.

    The wave is centred at the middle of the domain at ``t = 0``.
    """
    g = p.domain
    x = np.asarray(x, dtype=float)
    centre = 0.5 * (g.x_min + g.x_max)
    tail = p.amplitude / math.cosh(p.K * 0.5 * g.length) ** 2
    if tail > 1e-12:
        warnings.warn(f"soliton tail {tail:.2e} at the boundary exceeds 1e-12; "
                      "periodic wrapping is not smooth", RuntimeWarning, stacklevel=2)
    xi = np.mod(x - p.c * t - g.x_min, g.length) + g.x_min - centre
    return 1.0 + p.amplitude / np.cosh(p.K * xi) ** 2


@dataclass
class TravelingWaveProfile:
    """Profile ``(u, v, w)`` of a wave moving with speed ``c``."""

    xi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    c: float
    eps: float
    iterations: int = 0
    increment_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    singular: bool = False

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    def as_state_array(self) -> np.ndarray:
        return np.stack((self.u, self.v, self.w))


def petviashvili_operator_symbol(c: float, eps: float, k):
    """Real-FFT symbols of ``L`` and ``L^{-1}`` for the shifted BBMH system.

    ``L = (c - 1) - (I + beta d^2)^{-1} (c - eps^2) d^2`` with
    ``beta = (c - eps^2) c eps^2``.  ``L^{-1}`` is written without the
    ``1 - beta k^2`` denominator so that it stays bounded across that pole.
    """
    e2 = eps * eps
    beta = (c - e2) * c * e2
    k2 = np.asarray(k, dtype=float) ** 2
    den = 1.0 - beta * k2
    num = (c - 1.0) * den + (c - e2) * k2
    with np.errstate(divide="ignore"):
        l_sym = num / den
    return l_sym, den / num


def petviashvili_solve(c: float, eps: float, fop: FourierOperator, initial_guess=None,
                       gamma_exp: float = 2.0, tol: float = 1e-12, max_iter: int = 1000,
                       shift: float = 1.0) -> TravelingWaveProfile:
    """Solitary wave of BBMH with speed ``c`` by Petviashvili's iteration.

    The iteration acts on the shifted unknown ``u~ = u - 1`` (vanishing
    background).  ``initial_guess`` is in the original variable ``u``; the
    default is the BBM soliton.  The returned ``u`` is ``u~ + shift``.
    """
    if not c > 1.0:
        raise ParameterError(f"solitary waves of the shifted system need c > 1, got {c}")
    if not eps > 0.0 or eps * eps >= c:
        raise ParameterError(f"need 0 < eps^2 < c, got eps = {eps}, c = {c}")
    x = fop.grid.nodes()
    if initial_guess is None:
        initial_guess = bbm_soliton(SolitonParams(c, fop.grid), x)
    ut = np.asarray(initial_guess, dtype=float) - shift
    if ut.shape != (fop.n,):
        raise UsageError(f"initial guess must have length {fop.n}")
    h = fop.grid.h
    l_sym, l_inv = petviashvili_operator_symbol(c, eps, fop.rwavenumbers)
    if not np.all(np.isfinite(l_sym)):
        raise DivergenceError("operator L has a pole on a resolved mode")

    def residual(v):
        return math.sqrt(h * np.sum((fop.apply_symbol(v, l_sym) - 0.5 * v * v) ** 2))

    increments, residuals = [], []
    for it in range(1, max_iter + 1):
        nu = 0.5 * ut * ut
        lu = fop.apply_symbol(ut, l_sym)
        denom = h * np.dot(nu, ut)
        m = h * np.dot(lu, ut) / denom if denom != 0.0 else 0.0
        if not m > 0.0:
            raise DivergenceError(f"stabilizing factor m = {m:.3e} is not positive", step=it)
        new = fop.apply_symbol(m**gamma_exp * nu, l_inv)
        inc = float(np.max(np.abs(new - ut)))
        ut = new
        increments.append(inc)
        residuals.append(residual(ut))
        if not np.isfinite(inc):
            raise DivergenceError("Petviashvili iteration produced non-finite values", step=it)
        if inc <= tol:
            break
    else:
        raise IterationError(f"no convergence in {max_iter} iterations "
                             f"(last increment {increments[-1]:.3e})", history=residuals)
    e2 = eps * eps
    vt = (c - 1.0 - 0.5 * ut) * ut
    wt = fop.derivative(ut) - c * e2 * fop.derivative(vt)
    return TravelingWaveProfile(x, ut + shift, vt, wt, c, eps, it, increments, residuals)


def petviashvili_equation_residual(profile: TravelingWaveProfile, fop: FourierOperator,
                                   shift: float = 1.0) -> float:
    """``||L u~ - u~^2/2||_M`` of a computed profile."""
    ut = profile.u - shift
    l_sym, _ = petviashvili_operator_symbol(profile.c, profile.eps, fop.rwavenumbers)
    r = fop.apply_symbol(ut, l_sym) - 0.5 * ut * ut
    return math.sqrt(fop.grid.h * np.sum(r * r))


# --- traveling-wave ODE ---------------------------------------------------

SINGULAR_TOL = 1e-14


def _denominators(u, c, eps):
    e2 = eps * eps
    return 1.0 + c * e2 * (u - c), e2 - c


def traveling_ode_rhs(u_t: float, w_t: float, c: float, eps: float) -> tuple[float, float]:
    """Right-hand side of the reduced traveling-wave system for ``(u~, w~)``."""
    d_u, d_w = _denominators(u_t, c, eps)
    if abs(d_u) < SINGULAR_TOL:
        raise SingularityError(f"1 + c eps^2 (u - c) vanishes at u = {u_t!r}")
    if abs(d_w) < SINGULAR_TOL:
        raise SingularityError("eps^2 = c makes the w equation singular")
    return w_t / d_u, u_t * (0.5 * u_t - c) / d_w


def integrate_phase_plane(start, c: float, eps: float, step: float,
                          n_steps: int) -> TravelingWaveProfile:
    """Fixed-step RK4 orbit of the traveling-wave ODE starting at ``(u~, w~)``.

    Integration stops early, with ``singular=True``, when a stage hits the
    singular line ``1 + c eps^2 (u~ - c) = 0`` or a step would cross it.
    ``v~ = c u~ - u~^2/2`` is filled in from the first traveling-wave relation.
    """
    u0, w0 = map(float, start)
    if abs(_denominators(u0, c, eps)[0]) < SINGULAR_TOL:
        raise SingularityError("the start point lies on the singular line")

    def f(y):
        return np.array(traveling_ode_rhs(y[0], y[1], c, eps))

    ys = [np.array([u0, w0])]
    singular = False
    side = math.copysign(1.0, _denominators(u0, c, eps)[0])
    for _ in range(int(n_steps)):
        y = ys[-1]
        try:
            k1 = f(y)
            k2 = f(y + 0.5 * step * k1)
            k3 = f(y + 0.5 * step * k2)
            k4 = f(y + step * k3)
        except SingularityError:
            singular = True
            break
        y_new = y + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y_new)) or _denominators(y_new[0], c, eps)[0] * side <= 0.0:
            singular = True
            break
        ys.append(y_new)
    arr = np.array(ys)
    u, w = arr[:, 0], arr[:, 1]
    xi = step * np.arange(u.size)
    return TravelingWaveProfile(xi, u, c * u - 0.5 * u * u, w, c, eps, singular=singular)


@dataclass
class PeakonProfile:
    """Symmetric peaked solitary wave assembled from two phase-plane branches."""

    xi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    c: float
    eps: float
    crest_index: int
    symmetry_defect: float
    singular_gap: float
    terminated_on_singular_line: bool


def build_peakon(c: float = 0.5, eps2: float = 4.0 / 3.0, step: float = 1e-3,
                 max_steps: int = 200_000, offset: float = 1e-8) -> PeakonProfile:
    """Peaked solitary wave homoclinic to the saddle ``(2c, 0)`` for ``c < eps^2``.

    The right branch leaves the saddle along its unstable manifold and runs
    forward until it reaches the singular line.  The left branch leaves along
    the stable manifold and is integrated backward.  The ODE is reversible
    under ``(xi, w) -> (-xi, -w)``, so the two branches must mirror each other;
    ``symmetry_defect`` measures the largest violation.
    """
    eps = math.sqrt(eps2)
    if not c < eps2:
        raise ParameterError(f"peaked waves need c < eps^2, got c = {c}, eps^2 = {eps2}")
    u_s = 2.0 * c
    d_u, d_w = _denominators(u_s, c, eps)
    # linearization at the saddle: u' = w / d_u, w' = (u_s - c)/d_w * (u - u_s)
    lam2 = (u_s - c) / (d_w * d_u)
    if not lam2 > 0.0:
        raise ParameterError("the equilibrium (2c, 0) is not a saddle for these parameters")
    lam = math.sqrt(lam2)
    direction = -1.0 if u_s > -1.0 / (c * eps2) + c else 1.0  # head toward the singular line
    du = direction * offset
    # forward branch: xi increases from the saddle toward the crest
    fwd = integrate_phase_plane((u_s + du, lam * d_u * du), c, eps, step, max_steps)
    # backward branch: mirror image, xi decreases from the saddle toward the crest
    bwd = integrate_phase_plane((u_s + du, -lam * d_u * du), c, eps, -step, max_steps)
    m = min(fwd.u.size, bwd.u.size)
    defect = float(max(np.max(np.abs(bwd.u[:m] - fwd.u[:m])),
                       np.max(np.abs(bwd.w[:m] + fwd.w[:m]))))
    n_f = fwd.u.size
    tail_u, tail_w = bwd.u[::-1][1:], bwd.w[::-1][1:]
    u = np.concatenate((fwd.u, tail_u))
    w = np.concatenate((fwd.w, tail_w))
    xi = step * (np.arange(u.size) - (n_f - 1))
    u_sing = c - 1.0 / (c * eps2)
    gap = float(abs(fwd.u[-1] - u_sing))
    return PeakonProfile(xi, u, c * u - 0.5 * u * u, w, c, eps, n_f - 1, defect, gap,
                         fwd.singular and bwd.singular)


def export_profile_csv(profile, path) -> None:
    """Write columns ``xi, u, v, w`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["xi", "u", "v", "w"])
        for row in zip(profile.xi, profile.u, profile.v, profile.w):
            writer.writerow([f"{float(val):.17g}" for val in row])
