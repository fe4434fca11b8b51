"""Semidiscretizations of BBM and of its hyperbolic approximation BBMH.

BBMH state ``q = (u, v, w)`` with relaxation parameter ``eps`` is split as
``q' = f(q) + g(q)`` where, for splitting weights ``(d1, d2, d3)``,

    f = ( -(u D1 u + D1 u^2)/3 - d1 eps D+ v,
          -(d2/eps) D- u,
          -d3 eps^2 D1 w )
    g = ( -(1 - d1 eps) D+ v,
          -((1 - d2 eps)/eps^2) D- u + w/eps^2,
          -(1 - d3) eps^2 D1 w - v ).

``f`` is treated explicitly and ``g`` implicitly.  With periodic upwind SBP
operators both parts conserve ``1^T M u`` and the quadratic energy
``(u^T M u + eps^2 v^T M v + w^T M w)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UsageError
from .linsolve import StageSolver, solve_bbm_elliptic
from .sbp import OperatorSet

__all__ = [
    "SplittingParams",
    "State",
    "InvariantValue",
    "validate_splitting",
    "bbmh_rhs_explicit",
    "bbmh_rhs_implicit",
    "bbm_rhs",
    "invariants",
    "max_wave_speeds",
    "well_prepared_init",
    "BBMHModel",
    "BBMModel",
]

ADMISSIBILITY_CONDITIONS = (
    "delta_i must lie in [0, 1]",
    "delta1 * eps <= 1",
    "delta2 * eps <= 1",
    "if delta1 = 0 or delta2 = 0, then both of them are zero",
    "if delta1 * eps = 1 or delta2 * eps = 1, then both of them are unity",
)


@dataclass(frozen=True)
class SplittingParams:
    """Member ``(delta1, delta2, delta3)`` of the splitting family and ``eps``.

    The default is the splitting used for all experiments: only the
    ``eps^2 D1 w`` transport and the nonlinearity are explicit.
    """

    delta1: float = 0.0
    delta2: float = 0.0
    delta3: float = 1.0
    eps: float = 1.0

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ParameterError(f"eps must be positive, got {self.eps}")

    @property
    def deltas(self):
        return (self.delta1, self.delta2, self.delta3)

    def violations(self):
        return validate_splitting(self)

    @property
    def admissible(self) -> bool:
        return not self.violations()


def _is_one(x: float) -> bool:
    return abs(x - 1.0) <= 4 * np.finfo(float).eps


def validate_splitting(sp: SplittingParams) -> list[str]:
    """Admissibility conditions violated by ``sp``; empty iff admissible."""
    d1, d2, d3, eps = sp.delta1, sp.delta2, sp.delta3, sp.eps
    out = []
    if not all(0.0 <= d <= 1.0 for d in (d1, d2, d3)):
        out.append(ADMISSIBILITY_CONDITIONS[0])
    if d1 * eps > 1.0 and not _is_one(d1 * eps):
        out.append(ADMISSIBILITY_CONDITIONS[1])
    if d2 * eps > 1.0 and not _is_one(d2 * eps):
        out.append(ADMISSIBILITY_CONDITIONS[2])
    if (d1 == 0.0 or d2 == 0.0) and not (d1 == 0.0 and d2 == 0.0):
        out.append(ADMISSIBILITY_CONDITIONS[3])
    one1, one2 = _is_one(d1 * eps), _is_one(d2 * eps)
    if (one1 or one2) and not (one1 and one2):
        out.append(ADMISSIBILITY_CONDITIONS[4])
    return out


@dataclass(frozen=True)
class State:
    """BBMH grid state ``(u, v, w)``."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float) for a in (self.u, self.v, self.w)]
        if any(a.ndim != 1 for a in arrs) or len({a.size for a in arrs}) != 1:
            raise UsageError("u, v, w must be 1d grid vectors of equal length")
        for name, a in zip("uvw", arrs):
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.u.size

    def as_array(self) -> np.ndarray:
        return np.stack((self.u, self.v, self.w))

    @classmethod
    def from_array(cls, q) -> "State":
        q = np.asarray(q, dtype=float)
        return cls(q[0], q[1], q[2])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_array())))


@dataclass(frozen=True)
class InvariantValue:
    linear_u: float
    energy: float


def _split_nonlinearity(u, op: OperatorSet, conservative=True):
    d1 = op.d_central
    if conservative:
        return (u * d1(u) + d1(u * u)) / 3.0
    # naive advective form; breaks the energy balance (testing only)
    return u * d1(u)


def _explicit_array(q, sp, op, conservative=True):
    u, v, w = q
    eps = sp.eps
    out = np.empty_like(q)
    out[0] = -_split_nonlinearity(u, op, conservative)
    if sp.delta1:
        out[0] -= (sp.delta1 * eps) * op.d_plus(v)
    out[1] = -(sp.delta2 / eps) * op.d_minus(u) if sp.delta2 else 0.0
    out[2] = -(sp.delta3 * eps**2) * op.d_central(w) if sp.delta3 else 0.0
    return out


def _implicit_array(q, sp, op):
    u, v, w = q
    eps = sp.eps
    out = np.empty_like(q)
    out[0] = -(1.0 - sp.delta1 * eps) * op.d_plus(v)
    out[1] = (w - (1.0 - sp.delta2 * eps) * op.d_minus(u)) / eps**2
    out[2] = -v
    if sp.delta3 != 1.0:
        out[2] -= ((1.0 - sp.delta3) * eps**2) * op.d_central(w)
    return out


def bbmh_rhs_explicit(state: State, sp: SplittingParams, op: OperatorSet,
                      conservative: bool = True) -> State:
    """Explicit (non-stiff) part ``f`` of the split BBMH semidiscretization."""
    return State.from_array(_explicit_array(state.as_array(), sp, op, conservative))


def bbmh_rhs_implicit(state: State, sp: SplittingParams, op: OperatorSet) -> State:
    """Implicit (stiff, linear) part ``g``."""
    return State.from_array(_implicit_array(state.as_array(), sp, op))


def bbm_rhs(eta, op: OperatorSet, solver=None) -> np.ndarray:
    """``-(I - D+ D-)^{-1} (eta D1 eta + D1 eta^2) / 3``."""
    eta = np.asarray(eta, dtype=float)
    nonlin = _split_nonlinearity(eta, op)
    if solver is None:
        return -solve_bbm_elliptic(op, nonlin)
    return -solver.solve(nonlin)


def bbm_energy_inner(a, b, op: OperatorSet) -> float:
    """``a^T M (I - D+ D-) b``."""
    return op.inner(a, b - op.d_plus(op.d_minus(b)))


def invariants(state, sp: SplittingParams | None, op: OperatorSet) -> InvariantValue:
    """Discrete mass ``1^T M u`` and quadratic energy of a BBMH or BBM state.

    A plain vector is treated as a BBM state ``eta``; ``sp`` is then unused.
    """
    if isinstance(state, State):
        if sp is None:
            raise UsageError("BBMH invariants need the splitting parameters (eps)")
        energy = 0.5 * (op.inner(state.u, state.u) + sp.eps**2 * op.inner(state.v, state.v)
                        + op.inner(state.w, state.w))
        return InvariantValue(op.integral(state.u), energy)
    eta = np.asarray(state, dtype=float)
    return InvariantValue(op.integral(eta), 0.5 * bbm_energy_inner(eta, eta, op))


def max_wave_speeds(state: State, sp: SplittingParams) -> tuple[float, float]:
    """Largest characteristic speeds of the explicit and implicit flux Jacobians."""
    u = np.asarray(state.u if isinstance(state, State) else state, dtype=float)
    d1, d2, d3, eps = sp.delta1, sp.delta2, sp.delta3, sp.eps
    au = np.abs(u)
    explicit = max(float(np.max(0.5 * au + np.sqrt(0.25 * u * u + d1 * d2))), d3 * eps**2)
    implicit = max(math.sqrt((1.0 - d1 * eps) * (1.0 - d2 * eps)) / eps, (1.0 - d3) * eps**2)
    return explicit, implicit


def well_prepared_init(eta0, op: OperatorSet, v_mode: str = "consistent", eps: float = 1.0,
                       wave_speed_c: float = 1.0, w_op: str = "central",
                       w_sign: float = 1.0) -> State:
    """BBMH data ``u = eta0``, ``w = +-D eta0`` with ``v = c D1^2 eta0`` or ``0``.

    ``w_op`` selects the derivative used for ``w`` (``"central"`` for ``D1``,
    ``"minus"`` for ``D-``, the operator the discrete limit of ``w`` uses).
    """
    eta0 = np.asarray(eta0, dtype=float)
    w = w_sign * derivative_for(op, w_op)(eta0)
    if v_mode == "consistent":
        v = wave_speed_c * op.d_central(op.d_central(eta0))
    elif v_mode == "zero":
        v = np.zeros_like(eta0)
    else:
        raise UsageError(f"v_mode must be 'consistent' or 'zero', got {v_mode!r}")
    return State(eta0.copy(), v, w)


def derivative_for(op: OperatorSet, name: str):
    try:
        return {"central": op.d_central, "minus": op.d_minus, "plus": op.d_plus}[name]
    except KeyError:
        raise UsageError(f"unknown derivative operator {name!r}") from None


class BBMHModel:
    """BBMH semidiscretization packaged for the IMEX stepper (arrays of shape (3, n))."""

    def __init__(self, op: OperatorSet, sp: SplittingParams, solver: StageSolver | None = None,
                 conservative: bool = True):
        self.op = op
        self.sp = sp
        self.solver = solver if solver is not None else StageSolver(op)
        self.conservative = conservative

    def explicit(self, q):
        return _explicit_array(q, self.sp, self.op, self.conservative)

    def implicit(self, q):
        return _implicit_array(q, self.sp, self.op)

    def solve_implicit(self, rhs, dt_aii):
        return np.stack(self.solver.solve(rhs[0], rhs[1], rhs[2], dt_aii, self.sp))

    def energy_inner(self, a, b) -> float:
        op, e2 = self.op, self.sp.eps**2
        return op.inner(a[0], b[0]) + e2 * op.inner(a[1], b[1]) + op.inner(a[2], b[2])

    def invariants(self, q) -> InvariantValue:
        return invariants(State.from_array(q), self.sp, self.op)


class BBMModel:
    """BBM semidiscretization; purely explicit (no stiff part)."""

    has_implicit = False

    def __init__(self, op: OperatorSet):
        self.op = op

    def explicit(self, eta):
        return bbm_rhs(eta, self.op)

    def implicit(self, eta):
        return np.zeros_like(eta)

    def solve_implicit(self, rhs, dt_aii):
        return rhs

    def energy_inner(self, a, b) -> float:
        return bbm_energy_inner(a, b, self.op)

    def invariants(self, eta) -> InvariantValue:
        return invariants(eta, None, self.op)
