"""Diagonally implicit additive (IMEX) Runge-Kutta methods with relaxation.

One step of a pair ``(A~, b~)`` (explicit) and ``(A, b)`` (implicit) for
``q' = f(q) + g(q)`` reads

    Q_i     = q^n + dt sum_{j<i} a~_ij f(Q_j) + dt sum_{j<=i} a_ij g(Q_j)
    q^{n+1} = q^n + dt sum_j (b~_j f(Q_j) + b_j g(Q_j)).

The implicit tendencies are recovered from the stage solve itself,
``g(Q_i) = (Q_i - R_i)/(dt a_ii)``, which avoids multiplying stiff operators
with ``1/eps^2`` a second time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DivergenceError, SolverError, UsageError
from .models import State

__all__ = [
    "ImexTableau",
    "TableauClassification",
    "OrderReport",
    "RelaxationStep",
    "RunRecord",
    "classify",
    "check_order_conditions",
    "read_tableau",
    "write_tableau",
    "load_tableau",
    "available_tableaux",
    "stability_function",
    "imex_step",
    "relax",
    "relaxation_gamma",
    "evolve",
]

INVERTIBILITY_TOL = 1e-12
GSA_TOL = 1e-12
GAMMA_BOUNDS = (0.1, 1.9)


@dataclass(frozen=True, eq=False)
class ImexTableau:
    """Paired explicit / diagonally implicit Butcher arrays."""

    name: str
    a_expl: np.ndarray
    b_expl: np.ndarray
    a_impl: np.ndarray
    b_impl: np.ndarray
    declared_order: int
    kind_hint: str | None = None

    def __post_init__(self):
        arrs = {}
        for key in ("a_expl", "b_expl", "a_impl", "b_impl"):
            a = np.array(getattr(self, key), dtype=float)
            a.setflags(write=False)
            arrs[key] = a
        s = arrs["b_expl"].size
        if (arrs["a_expl"].shape != (s, s) or arrs["a_impl"].shape != (s, s)
                or arrs["b_impl"].shape != (s,) or arrs["b_expl"].ndim != 1):
            raise ConfigurationError(f"tableau {self.name}: inconsistent array shapes")
        if np.any(np.triu(arrs["a_expl"]) != 0.0):
            raise ConfigurationError(f"tableau {self.name}: explicit array is not strictly lower triangular")
        if np.any(np.triu(arrs["a_impl"], 1) != 0.0):
            raise ConfigurationError(f"tableau {self.name}: implicit array is not lower triangular")
        if not all(np.all(np.isfinite(a)) for a in arrs.values()):
            raise ConfigurationError(f"tableau {self.name}: non-finite coefficient")
        for key, a in arrs.items():
            object.__setattr__(self, key, a)

    @property
    def s(self) -> int:
        return self.b_expl.size

    @property
    def c_expl(self) -> np.ndarray:
        return self.a_expl.sum(axis=1)

    @property
    def c_impl(self) -> np.ndarray:
        return self.a_impl.sum(axis=1)


@dataclass(frozen=True)
class TableauClassification:
    kind: str | None
    gsa: bool
    ars: bool
    fsal_explicit: bool
    stiffly_accurate: bool


def _invertible(a: np.ndarray) -> bool:
    if a.size == 0:
        return False
    # triangular: the determinant is the diagonal product
    d = np.abs(np.diag(a))
    return bool(np.min(d) > INVERTIBILITY_TOL * max(1.0, np.max(np.abs(a))))


def classify(tab: ImexTableau) -> TableauClassification:
    """Type I/II, GSA and ARS predicates derived from the arrays alone."""
    ai, ae = tab.a_impl, tab.a_expl
    if _invertible(ai):
        kind = "type_I"
    elif (np.all(ai[0] == 0.0) and np.all(ae[0] == 0.0) and tab.s > 1
          and _invertible(ai[1:, 1:])):
        kind = "type_II"
    else:
        kind = None
    sa = bool(np.allclose(ai[-1], tab.b_impl, rtol=0.0, atol=1e-15))
    fsal = bool(np.allclose(ae[-1], tab.b_expl, rtol=0.0, atol=1e-15))
    ars = bool(kind == "type_II" and np.all(ai[1:, 0] == 0.0) and tab.b_impl[0] == 0.0)
    return TableauClassification(kind, sa and fsal, ars, fsal, sa)


@dataclass(frozen=True)
class OrderReport:
    """Residuals of the additive order conditions, keyed by a readable label."""

    residuals: dict
    up_to: int

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals.values()), default=0.0)

    def satisfied(self, tol: float = 1e-12) -> bool:
        return self.max_residual <= tol


def check_order_conditions(tab: ImexTableau, up_to: int) -> OrderReport:
    """Additive RK order conditions, including all explicit/implicit couplings."""
    if up_to not in (1, 2, 3):
        raise UsageError(f"order conditions are available up to order 3, got {up_to}")
    parts = {"E": (tab.a_expl, tab.b_expl), "I": (tab.a_impl, tab.b_impl)}
    res = {}
    for p, (_, b) in parts.items():
        res[f"b{p}.1 = 1"] = float(b.sum() - 1.0)
    if up_to >= 2:
        for p, (_, b) in parts.items():
            for q, (aq, _) in parts.items():
                res[f"b{p}.c{q} = 1/2"] = float(b @ aq.sum(axis=1) - 0.5)
    if up_to >= 3:
        for p, (_, b) in parts.items():
            for q, (aq, _) in parts.items():
                cq = aq.sum(axis=1)
                for r, (ar, _) in parts.items():
                    cr = ar.sum(axis=1)
                    if q <= r:
                        res[f"b{p}.(c{q} c{r}) = 1/3"] = float(b @ (cq * cr) - 1.0 / 3.0)
                    res[f"b{p}.A{q} c{r} = 1/6"] = float(b @ (aq @ cr) - 1.0 / 6.0)
    return OrderReport(res, up_to)


# --- tableau files --------------------------------------------------------

def _parse_number(tok: str) -> float:
    try:
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"bad tableau entry {tok!r}") from exc


def _format_number(x: float) -> str:
    frac = Fraction(x).limit_denominator(10**6)
    if float(frac) == x:
        return str(frac)
    return repr(float(x))


def read_tableau(path, validate: bool = True) -> ImexTableau:
    """Read a tableau file; with ``validate`` the classification and order are checked."""
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line.split())
    if not lines:
        raise ConfigurationError(f"{path}: empty tableau file")
    header = lines[0]
    if len(header) != 4:
        raise ConfigurationError(f"{path}: header must be 'name s declared_order kind_hint'")
    name, s_tok, order_tok, kind_hint = header
    try:
        s, order = int(s_tok), int(order_tok)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: stage count and order must be integers") from exc
    rows = lines[1:]
    if len(rows) != 2 * s + 2 or any(len(r) != s for r in rows):
        raise ConfigurationError(f"{path}: expected {2 * s + 2} rows of {s} entries")
    vals = np.array([[_parse_number(t) for t in r] for r in rows])
    tab = ImexTableau(name, vals[:s], vals[s], vals[s + 1:2 * s + 1], vals[2 * s + 1],
                      order, kind_hint)
    if validate:
        validate_tableau(tab)
    return tab


def validate_tableau(tab: ImexTableau, tol: float = 1e-12) -> TableauClassification:
    cls = classify(tab)
    if tab.kind_hint is not None and cls.kind != tab.kind_hint:
        raise ConfigurationError(
            f"tableau {tab.name}: declared {tab.kind_hint} but arrays classify as {cls.kind}")
    report = check_order_conditions(tab, min(tab.declared_order, 3))
    if not report.satisfied(tol):
        worst = max(report.residuals.items(), key=lambda kv: abs(kv[1]))
        raise ConfigurationError(
            f"tableau {tab.name}: order {tab.declared_order} condition {worst[0]} "
            f"has residual {worst[1]:.3e}")
    return cls


def write_tableau(tab: ImexTableau, path) -> None:
    out = [f"{tab.name} {tab.s} {tab.declared_order} {tab.kind_hint or classify(tab).kind}"]
    for block in (tab.a_expl, [tab.b_expl], tab.a_impl, [tab.b_impl]):
        for row in block:
            out.append(" ".join(_format_number(x) for x in row))
    Path(path).write_text("\n".join(out) + "\n")


def available_tableaux() -> list[str]:
    root = resources.files("bbmh") / "tableaux"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".txt"))


def load_tableau(name: str) -> ImexTableau:
    """Load one of the shipped tableaux by name (e.g. ``"ARS443"``)."""
    res = resources.files("bbmh") / "tableaux" / f"{name}.txt"
    if not res.is_file():
        raise ConfigurationError(
            f"unknown tableau {name!r}; available: {', '.join(available_tableaux())}")
    with resources.as_file(res) as path:
        return read_tableau(path)


def stability_function(tab: ImexTableau, z_expl: complex, z_impl: complex) -> complex:
    """``R`` with ``q^{n+1} = R q^n`` for ``q' = lambda_f q + lambda_g q``, ``z = dt lambda``."""
    s = tab.s
    m = np.eye(s) - z_expl * tab.a_expl - z_impl * tab.a_impl
    stages = np.linalg.solve(m, np.ones(s, dtype=complex))
    return complex(1.0 + (z_expl * tab.b_expl + z_impl * tab.b_impl) @ stages)


# --- time stepping --------------------------------------------------------

def _as_array(q):
    if isinstance(q, State):
        return q.as_array(), True
    return np.asarray(q, dtype=float), False


def imex_step(state, dt: float, tab: ImexTableau, model, return_stages: bool = False):
    """Advance ``state`` by one IMEX step of size ``dt``.

    ``model`` provides ``explicit(q)``, ``implicit(q)`` and
    ``solve_implicit(rhs, dt_aii)`` (the solution ``Q`` of ``Q - dt_aii g(Q) = rhs``).
    """
    if not dt > 0.0:
        raise UsageError(f"dt must be positive, got {dt}")
    q, was_state = _as_array(state)
    s = tab.s
    ae, ai, be, bi = tab.a_expl, tab.a_impl, tab.b_expl, tab.b_impl
    # last stage needs f or g only if some later weight uses it
    need_f = [bool(be[i] != 0.0 or np.any(ae[i + 1:, i] != 0.0)) for i in range(s)]
    need_g = [bool(bi[i] != 0.0 or np.any(ai[i + 1:, i] != 0.0)) for i in range(s)]
    fs, gs, stages = [None] * s, [None] * s, []
    for i in range(s):
        rhs = q.copy()
        for j in range(i):
            if ae[i, j] != 0.0:
                rhs += (dt * ae[i, j]) * fs[j]
            if ai[i, j] != 0.0:
                rhs += (dt * ai[i, j]) * gs[j]
        dt_aii = dt * ai[i, i]
        if dt_aii != 0.0:
            try:
                qi = model.solve_implicit(rhs, dt_aii)
            except SolverError as exc:
                raise SolverError(f"stage {i + 1} of {tab.name}: {exc}") from exc
            if need_g[i]:
                gs[i] = (qi - rhs) / dt_aii
        else:
            qi = rhs
            if need_g[i]:
                gs[i] = model.implicit(qi)
        if need_f[i]:
            fs[i] = model.explicit(qi)
        stages.append(qi)
    q_new = q.copy()
    for j in range(s):
        if be[j] != 0.0:
            q_new += (dt * be[j]) * fs[j]
        if bi[j] != 0.0:
            q_new += (dt * bi[j]) * gs[j]
    if classify_cached(tab).gsa:
        scale = max(np.max(np.abs(stages[-1])), np.max(np.abs(q)), 1.0)
        gap = np.max(np.abs(q_new - stages[-1]))
        if gap > GSA_TOL * scale:
            raise SolverError(
                f"{tab.name}: GSA update differs from the last stage by {gap:.3e} "
                f"(scale {scale:.3e})")
    out = State.from_array(q_new) if was_state else q_new
    return (out, stages) if return_stages else out


_classification_cache: dict = {}


def classify_cached(tab: ImexTableau) -> TableauClassification:
    key = id(tab)
    hit = _classification_cache.get(key)
    if hit is None or hit[0] is not tab:
        hit = (tab, classify(tab))
        _classification_cache[key] = hit
    return hit[1]


@dataclass(frozen=True)
class RelaxationStep:
    gamma: float
    accepted_dt: float


def relaxation_gamma(q_old, dq, inner) -> float:
    """Nonzero root of ``I(q_old + gamma dq) = I(q_old)`` for ``I(q) = inner(q, q)/2``."""
    dd = inner(dq, dq)
    if dd < 1e-300:
        return 1.0
    return -2.0 * inner(q_old, dq) / dd


def _weighted_inner(op, sp):
    if sp is None:
        from .models import bbm_energy_inner
        return lambda a, b: bbm_energy_inner(a, b, op)

    def inner(a, b):
        return op.inner(a[0], b[0]) + sp.eps**2 * op.inner(a[1], b[1]) + op.inner(a[2], b[2])
    return inner


def relax(state_old, state_new, op, sp=None, dt: float = 1.0, inner=None):
    """Relax a step so the quadratic invariant is conserved exactly.

    ``sp=None`` selects the BBM energy ``eta^T M (I - D+ D-) eta / 2``.  Returns
    the :class:`RelaxationStep` and the relaxed state.
    """
    q_old, was_state = _as_array(state_old)
    q_new, _ = _as_array(state_new)
    if inner is None:
        inner = _weighted_inner(op, sp)
    dq = q_new - q_old
    gamma = relaxation_gamma(q_old, dq, inner)
    if not (GAMMA_BOUNDS[0] <= gamma <= GAMMA_BOUNDS[1]):
        raise DivergenceError(f"relaxation factor {gamma:.6g} outside {GAMMA_BOUNDS}")
    q_rel = q_old + gamma * dq
    return RelaxationStep(gamma, gamma * dt), (State.from_array(q_rel) if was_state else q_rel)


@dataclass
class RunRecord:
    """Snapshots, invariant series and relaxation factors of one run."""

    times: list = field(default_factory=list)
    nominal_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    linear_u: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    steps: int = 0
    final_state: np.ndarray | None = None
    last_stages: list | None = None
    last_dt: float | None = None
    last_start: np.ndarray | None = None

    @property
    def final_time(self) -> float:
        return self.times[-1]

    def relative_energy_drift(self) -> np.ndarray:
        e = np.asarray(self.energy)
        return np.abs(e - e[0]) / abs(e[0])


def evolve(initial, t_end: float, dt: float, tab: ImexTableau, model,
           relaxation: bool = False, stride: int = 1,
           keep_stages: bool = False, callback=None) -> RunRecord:
    """Integrate from ``t = 0`` to ``t_end`` with fixed nominal step ``dt``.

    The last step is shortened to land on ``t_end``.  With relaxation the time
    advances by ``gamma * dt``.  Every ``stride``-th state is kept as a snapshot
    (``stride=0`` keeps only the first and last).  ``callback(t, q)`` is
    called on the initial state and after every step.
    """
    if t_end < 0.0 or not dt > 0.0:
        raise UsageError("need t_end >= 0 and dt > 0")
    q, _ = _as_array(initial)
    q = q.copy()
    rec = RunRecord()
    inv = model.invariants(q)

    def record(t, t_nom, q, inv, force=False):
        rec.times.append(t)
        rec.nominal_times.append(t_nom)
        rec.linear_u.append(inv.linear_u)
        rec.energy.append(inv.energy)
        if force or (stride and rec.steps % stride == 0):
            rec.snapshots.append(q.copy())
            rec.snapshot_times.append(t)

    record(0.0, 0.0, q, inv, force=True)
    if callback is not None:
        callback(0.0, q)
    t = t_nom = 0.0
    tiny = 1e-12 * max(1.0, t_end)
    while t_end - t > tiny:
        h = min(dt, t_end - t)
        q_start = q
        if keep_stages:
            q_new, stages = imex_step(q, h, tab, model, return_stages=True)
        else:
            q_new = imex_step(q, h, tab, model)
        rec.steps += 1
        if not np.all(np.isfinite(q_new)):
            raise DivergenceError(f"non-finite state after step {rec.steps} (t = {t:.6g})",
                                  step=rec.steps)
        if relaxation:
            try:
                step, q_new = relax(q, q_new, None, dt=h, inner=model.energy_inner)
            except DivergenceError as exc:
                raise DivergenceError(f"step {rec.steps}: {exc}", step=rec.steps) from exc
            rec.gammas.append(step.gamma)
            t += step.accepted_dt
        else:
            t += h
        t_nom += h
        q = q_new
        if keep_stages:
            rec.last_stages, rec.last_dt, rec.last_start = stages, h, q_start
        inv = model.invariants(q)
        record(t, t_nom, q, inv)
        if callback is not None:
            callback(t, q)
    if rec.snapshot_times[-1] != t:
        rec.snapshots.append(q.copy())
        rec.snapshot_times.append(t)
    rec.final_state = q
    return rec
