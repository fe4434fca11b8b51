"""Direct solvers for the periodic banded systems of the implicit stages.

Every matrix here is a circulant built from the SBP stencils, so all of them
commute.  The implicit BBMH stage equations

    u = r_u - a (1 - d1 eps) D+ v
    v = r_v - a ((1 - d2 eps)/eps^2 D- u - w/eps^2)
    w = r_w - a ((1 - d3) eps^2 D1 w + v)

are reduced to one scalar system for ``u`` by eliminating ``w`` and ``v``.
Written with ``B = I + a (1 - d3) eps^2 D1`` and ``C = eps^2 B + a^2 I``:

    (C - a^2 c1 c2 D+ B D-) u = C r_u - a c1 D+ (eps^2 B r_v + a r_w)
    C v = eps^2 B r_v - a c2 B D- u + a r_w
    B w = r_w - a v

with ``c1 = 1 - d1 eps`` and ``c2 = 1 - d2 eps``.  No factor ``1/eps`` is ever
formed.  The scalar systems are solved by a banded LU of the non-periodic
part plus a Sherman-Morrison-Woodbury correction for the wrap-around corners.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .errors import SolverError, UsageError
from .sbp import OperatorSet, Stencil

__all__ = [
    "CyclicBandedSolver",
    "StageSystem",
    "StageSolver",
    "solve_stage",
    "solve_bbm_elliptic",
    "solve_circulant_fft",
    "assemble_stage_matrix",
]


class CyclicBandedSolver:
    """Factorization of a periodic banded matrix given as a :class:`Stencil`.

    The Toeplitz band ``T`` is factored with LAPACK ``gbtrf``; the corner
    entries ``E`` that wrap around are handled with the Woodbury identity,
    ``(T + E)^{-1} = T^{-1} - Z S^{-1} P T^{-1}``, where ``E = U P`` keeps only
    the ``kl + ku`` corner columns.  Small grids fall back to dense LU.
    """

    def __init__(self, stencil: Stencil):
        self.stencil = stencil
        n = stencil.n
        kl, ku = stencil.lower, stencil.upper
        self.kl, self.ku = kl, ku
        # a circulant is singular iff its symbol vanishes somewhere
        sym = np.abs(stencil.symbol())
        if sym.min() <= 1e-13 * sym.max():
            raise SolverError(
                f"singular periodic system (smallest symbol {sym.min():.2e}, "
                f"largest {sym.max():.2e})")
        if n <= 2 * (kl + ku) + 1:
            self._dense = lu_factor(stencil.dense())
            self._check_dense()
            return
        self._dense = None
        ab = np.zeros((2 * kl + ku + 1, n))
        for k, ck in enumerate(stencil.coeffs):
            s = stencil.offset + k  # column j = i + s
            row = kl + ku - s
            if s >= 0:
                ab[row, s:] = ck
            else:
                ab[row, :n + s] = ck
        lu, piv, info = lapack.dgbtrf(ab, kl, ku)
        if info != 0:
            raise SolverError(f"banded LU failed with info={info} (zero pivot)")
        self._lu, self._piv = lu, piv
        cols = np.concatenate((np.arange(ku), np.arange(n - kl, n))).astype(int)
        # wrap-around entries, column by column
        u = np.zeros((n, cols.size))
        for i in range(kl):
            for k, ck in enumerate(stencil.coeffs):
                s = stencil.offset + k
                if i + s < 0:
                    u[i, np.searchsorted(cols, i + s + n)] = ck
        for i in range(n - ku, n):
            for k, ck in enumerate(stencil.coeffs):
                s = stencil.offset + k
                if i + s >= n:
                    u[i, np.searchsorted(cols, i + s - n)] = ck
        self._cols = cols
        self._z = self._band_solve(u)
        cap = np.eye(cols.size) + self._z[cols, :]
        self._cap = lu_factor(cap)
        if not np.all(np.isfinite(self._cap[0])) or np.min(np.abs(np.diag(self._cap[0]))) == 0:
            raise SolverError("singular capacitance matrix in cyclic banded solve")

    def _check_dense(self):
        if np.min(np.abs(np.diag(self._dense[0]))) == 0:
            raise SolverError("singular periodic system")

    def _band_solve(self, b):
        x, info = lapack.dgbtrs(self._lu, self.kl, self.ku, b, self._piv)
        if info != 0:
            raise SolverError(f"banded triangular solve failed with info={info}")
        return x

    def solve(self, rhs) -> np.ndarray:
        b = np.asarray(rhs, dtype=float)
        if b.shape[0] != self.stencil.n:
            raise UsageError(f"right-hand side has length {b.shape[0]}, expected {self.stencil.n}")
        if self._dense is not None:
            return lu_solve(self._dense, b)
        y = self._band_solve(b)
        t = lu_solve(self._cap, y[self._cols])
        return y - self._z @ t


def solve_circulant_fft(stencil: Stencil, rhs) -> np.ndarray:
    """Transform-space solve of a circulant system (cross-check path)."""
    sym = stencil.symbol()
    if np.min(np.abs(sym)) == 0:
        raise SolverError("circulant symbol vanishes")
    return np.real(np.fft.ifft(np.fft.fft(rhs) / sym))


_elliptic_cache: "weakref.WeakKeyDictionary[OperatorSet, CyclicBandedSolver]" = (
    weakref.WeakKeyDictionary())


def elliptic_solver(op: OperatorSet) -> CyclicBandedSolver:
    """Cached factorization of ``I - D+ D-`` for an operator set."""
    solver = _elliptic_cache.get(op)
    if solver is None:
        solver = CyclicBandedSolver(Stencil.identity(op.n) - op.second_derivative())
        _elliptic_cache[op] = solver
    return solver


def solve_bbm_elliptic(op: OperatorSet, rhs) -> np.ndarray:
    """Solve ``(I - D+ D-) y = rhs``."""
    return elliptic_solver(op).solve(rhs)


@dataclass(frozen=True, eq=False)
class StageSystem:
    """Reduced implicit-stage system for fixed ``dt * a_ii``, ``eps`` and splitting."""

    op: OperatorSet
    dt_aii: float
    eps: float
    deltas: tuple
    u_solver: CyclicBandedSolver = field(repr=False)
    v_solver: CyclicBandedSolver | None = field(repr=False)
    w_solver: CyclicBandedSolver | None = field(repr=False)
    b_op: Stencil = field(repr=False)
    c_op: Stencil = field(repr=False)

    @classmethod
    def build(cls, op: OperatorSet, dt_aii: float, sp) -> "StageSystem":
        a, eps = float(dt_aii), float(sp.eps)
        d1, d2, d3 = float(sp.delta1), float(sp.delta2), float(sp.delta3)
        c1, c2 = 1.0 - d1 * eps, 1.0 - d2 * eps
        eye = Stencil.identity(op.n)
        b_op = eye + (a * (1.0 - d3) * eps**2) * op.d_central
        c_op = eps**2 * b_op + a**2 * eye
        reduced = c_op - (a**2 * c1 * c2) * (op.d_plus @ b_op @ op.d_minus)
        try:
            u_solver = CyclicBandedSolver(reduced)
            trivial_b = b_op.width == 1
            v_solver = None if trivial_b else CyclicBandedSolver(c_op)
            w_solver = None if trivial_b else CyclicBandedSolver(b_op)
        except SolverError as exc:
            raise SolverError(
                f"singular stage system (dt*a_ii={a:g}, eps={eps:g}, "
                f"deltas={(d1, d2, d3)}): {exc}") from exc
        return cls(op, a, eps, (d1, d2, d3), u_solver, v_solver, w_solver, b_op, c_op)

    def solve(self, r_u, r_v, r_w):
        op, a, eps = self.op, self.dt_aii, self.eps
        d1, d2, _ = self.deltas
        c1, c2 = 1.0 - d1 * eps, 1.0 - d2 * eps
        b_rv = self.b_op(r_v)
        rhs_u = self.c_op(r_u) - (a * c1) * op.d_plus(eps**2 * b_rv + a * r_w)
        u = self.u_solver.solve(rhs_u)
        rhs_v = eps**2 * b_rv - (a * c2) * self.b_op(op.d_minus(u)) + a * r_w
        if self.v_solver is None:
            v = rhs_v / self.c_op.coeffs[0]
            w = (r_w - a * v) / self.b_op.coeffs[0]
        else:
            v = self.v_solver.solve(rhs_v)
            w = self.w_solver.solve(r_w - a * v)
        return u, v, w


def solve_stage(sys: StageSystem | None, residual_u, residual_v, residual_w,
                dt_aii: float, eps: float, deltas) -> tuple:
    """Solve one implicit stage; ``dt_aii == 0`` passes the residuals through.

    ``sys`` must match ``dt_aii`` and ``eps``; :class:`StageSolver` builds and
    caches it.
    """
    if dt_aii == 0.0:
        return (np.array(residual_u, dtype=float), np.array(residual_v, dtype=float),
                np.array(residual_w, dtype=float))
    if dt_aii < 0.0:
        raise UsageError(f"dt*a_ii must be non-negative, got {dt_aii}")
    if eps <= 0.0:
        raise UsageError(f"eps must be positive, got {eps}")
    if sys is None:
        raise UsageError("an implicit stage needs a StageSystem")
    if sys.dt_aii != dt_aii or sys.eps != eps:
        raise UsageError("stage system was built for different dt*a_ii or eps")
    return sys.solve(np.asarray(residual_u, dtype=float), np.asarray(residual_v, dtype=float),
                     np.asarray(residual_w, dtype=float))


class StageSolver:
    """Stage-system cache for one operator set.

    Factorizations are keyed on ``(dt*a_ii, eps, deltas)``; tableaux with a
    constant diagonal therefore factor once per time-step size.
    """

    def __init__(self, op: OperatorSet, maxsize: int = 16):
        self.op = op
        self.maxsize = maxsize
        self._cache: dict = {}

    def system(self, dt_aii: float, sp) -> StageSystem:
        key = (float(dt_aii), float(sp.eps), float(sp.delta1), float(sp.delta2),
               float(sp.delta3))
        sys = self._cache.get(key)
        if sys is None:
            if len(self._cache) >= self.maxsize:
                self._cache.pop(next(iter(self._cache)))
            sys = StageSystem.build(self.op, dt_aii, sp)
            self._cache[key] = sys
        return sys

    def clear(self):
        self._cache.clear()

    def solve(self, r_u, r_v, r_w, dt_aii: float, sp):
        if dt_aii == 0.0:
            return solve_stage(None, r_u, r_v, r_w, 0.0, sp.eps, sp)
        return solve_stage(self.system(dt_aii, sp), r_u, r_v, r_w, dt_aii, sp.eps, sp)


def assemble_stage_matrix(op: OperatorSet, dt_aii: float, sp) -> np.ndarray:
    """Dense ``3n x 3n`` matrix of the implicit stage equations (for tests)."""
    n = op.n
    a, eps = dt_aii, sp.eps
    eye = np.eye(n)
    dp, dm, d1 = op.d_plus.dense(), op.d_minus.dense(), op.d_central.dense()
    c1, c2 = 1.0 - sp.delta1 * eps, 1.0 - sp.delta2 * eps
    z = np.zeros((n, n))
    return np.block([
        [eye, a * c1 * dp, z],
        [a * c2 / eps**2 * dm, eye, -a / eps**2 * eye],
        [z, a * eye, eye + a * (1.0 - sp.delta3) * eps**2 * d1],
    ])
