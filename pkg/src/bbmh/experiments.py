"""Drivers for the asymptotic-preserving tables and the error-growth studies.

All errors are measured in the discrete ``M``-weighted L2 norm
``sqrt(sum_j M_jj e_j^2)``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DivergenceError, SolverError, UsageError
from .imex import ImexTableau, classify, evolve, load_tableau
from .models import BBMHModel, BBMModel, SplittingParams, derivative_for, well_prepared_init
from .sbp import FourierOperator, GridSpec, OperatorSet, build_upwind_operators
from .waves import SolitonParams, bbm_soliton, petviashvili_solve

__all__ = [
    "ApTableRow",
    "GrowthSeries",
    "DEFAULT_EPS_SQ",
    "run_ap_table",
    "ap_limit_reference",
    "run_error_growth",
    "fit_loglog_slope",
    "emit",
    "read_json",
    "AP_COLUMNS",
]

DEFAULT_EPS_SQ = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10)
DEFAULT_DOMAIN = (-90.0, 90.0)
AP_COLUMNS = ("eps_sq", "err_u", "eoc_u", "err_v", "eoc_v", "err_w", "eoc_w")


@dataclass
class ApTableRow:
    eps_sq: float
    err_u: float
    err_v: float
    err_w: float
    eoc_u: float | None = None
    eoc_v: float | None = None
    eoc_w: float | None = None
    failed: bool = False
    message: str = ""

    def as_record(self) -> dict:
        return {k: getattr(self, k) for k in AP_COLUMNS}


@dataclass
class GrowthSeries:
    times: np.ndarray
    errors: np.ndarray
    fitted_slope: float
    label: str = ""
    energy_drift: float = float("nan")
    gammas: np.ndarray = field(default_factory=lambda: np.empty(0))

    def as_record(self) -> dict:
        return {"label": self.label, "fitted_slope": self.fitted_slope,
                "energy_drift": self.energy_drift,
                "times": [float(t) for t in self.times],
                "errors": [float(e) for e in self.errors]}


def eoc(prev_err: float, err: float, prev_eps_sq: float, eps_sq: float) -> float:
    """Rate of convergence with respect to ``eps^2``."""
    return math.log(prev_err / err) / math.log(prev_eps_sq / eps_sq)


def _setup(n: int, order: int, domain) -> tuple[GridSpec, OperatorSet]:
    grid = GridSpec(domain[0], domain[1], n)
    return grid, build_upwind_operators(grid, order)


def ap_limit_reference(eta0, op: OperatorSet, tab: ImexTableau, dt: float, t_end: float,
                       w_op: str = "minus"):
    """Discrete BBM limit of the BBMH scheme and the matching ``(u, v, w)`` targets.

    The BBM semidiscretization is advanced with the explicit submethod of
    ``tab``.  The ``v`` target is ``-D_t D eta`` where ``D_t`` combines the
    final-step stages with the inverse of the implicit array (or of its
    trailing block for type II methods), as in the limit analysis.
    """
    cls = classify(tab)
    if cls.kind == "type_I":
        alpha, cols = np.linalg.inv(tab.a_impl), list(range(tab.s))
    elif cls.kind == "type_II":
        alpha, cols = np.linalg.inv(tab.a_impl[1:, 1:]), list(range(1, tab.s))
    else:
        raise ConfigurationError(f"tableau {tab.name} is neither type I nor type II")
    rec = evolve(eta0, t_end, dt, tab, BBMModel(op), stride=0, keep_stages=True)
    eta = rec.final_state
    d = derivative_for(op, w_op)
    if rec.last_stages is None:
        v_ref = np.zeros_like(eta)
    else:
        h, d_start = rec.last_dt, d(rec.last_start)
        v_ref = -sum(alpha[-1, k] * (d(rec.last_stages[j]) - d_start)
                     for k, j in enumerate(cols)) / h
    return eta, v_ref, d(eta)


def _ap_cell(args):
    (tab, eps_sq, v_init, w_op, n, order, domain, dt, t_end, c, refs) = args
    grid, op = _setup(n, order, domain)
    eta0 = bbm_soliton(SolitonParams(c, grid), grid.nodes())
    sp = SplittingParams(eps=math.sqrt(eps_sq))
    q0 = well_prepared_init(eta0, op, v_init, sp.eps, c, w_op=w_op)
    try:
        rec = evolve(q0, t_end, dt, tab, BBMHModel(op, sp), stride=0)
    except (DivergenceError, SolverError) as exc:
        nan = float("nan")
        return ApTableRow(eps_sq, nan, nan, nan, failed=True, message=str(exc))
    q = rec.final_state
    errs = [op.norm(q[i] - refs[i]) for i in range(3)]
    return ApTableRow(eps_sq, *errs)


def run_ap_table(tableau_name: str = "ARS443", v_init_mode: str = "consistent",
                 n: int = 512, dt: float = 0.01, t_end: float = 19.5,
                 eps_sq_list=DEFAULT_EPS_SQ, w_op: str = "minus", order: int = 4,
                 domain=DEFAULT_DOMAIN, c: float = 1.2, workers: int = 1) -> list[ApTableRow]:
    """Errors of BBMH against its discrete BBM limit over a ladder of ``eps^2``.

    ``w_op`` selects the derivative used for the well-prepared ``w`` and for
    the ``w``/``v`` targets.  Rows that blow up are marked ``failed``.
    """
    eps_sq_list = [float(e) for e in eps_sq_list]
    if any(e <= 0.0 for e in eps_sq_list):
        raise UsageError("eps^2 values must be positive")
    if any(b >= a for a, b in zip(eps_sq_list, eps_sq_list[1:])):
        raise UsageError("eps^2 values must be strictly decreasing")
    tab = load_tableau(tableau_name) if isinstance(tableau_name, str) else tableau_name
    grid, op = _setup(n, order, domain)
    eta0 = bbm_soliton(SolitonParams(c, grid), grid.nodes())
    refs = ap_limit_reference(eta0, op, tab, dt, t_end, w_op)
    jobs = [(tab, e, v_init_mode, w_op, n, order, domain, dt, t_end, c, refs)
            for e in eps_sq_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_ap_cell, jobs))
    else:
        rows = [_ap_cell(j) for j in jobs]
    rows.sort(key=lambda r: -r.eps_sq)
    for prev, row in zip(rows, rows[1:]):
        if prev.failed or row.failed:
            continue
        for comp in "uvw":
            a, b = getattr(prev, f"err_{comp}"), getattr(row, f"err_{comp}")
            if a > 0.0 and b > 0.0:
                setattr(row, f"eoc_{comp}", eoc(a, b, prev.eps_sq, row.eps_sq))
    return rows


def fit_loglog_slope(times, errors, window: float = 0.5) -> float:
    """Least-squares slope of ``log(error)`` against ``log(t)`` over the last ``window``."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(errors, dtype=float)
    if not 0.0 < window <= 1.0:
        raise UsageError("window must lie in (0, 1]")
    keep = (t > 0.0) & (e > 0.0)
    t, e = t[keep], e[keep]
    start = int(math.floor((1.0 - window) * t.size))
    t, e = t[start:], e[start:]
    if t.size < 2:
        raise UsageError("need at least two positive samples to fit a slope")
    return float(np.polyfit(np.log(t), np.log(e), 1)[0])


def run_error_growth(mode: str = "petviashvili", eps: float = 1e-3,
                     tableau_name: str = "ARS443", relaxation: bool = True, n: int = 256,
                     dt: float = 0.5, t_end: float = 1071.0, model: str = "bbmh",
                     order: int = 4, domain=DEFAULT_DOMAIN, c: float = 1.2,
                     window: float = 0.5, stride: int = 1) -> GrowthSeries:
    """Error against a translated reference wave over a long run.

    ``mode="petviashvili"`` starts from the Petviashvili BBMH solitary wave and
    measures the error of the whole state ``q``; ``mode="analytic"`` starts
    from well-prepared data built on the BBM soliton and measures the error of
    ``u`` (or of ``eta`` for ``model="bbm"``).
    """
    if mode not in ("petviashvili", "analytic"):
        raise ConfigurationError(f"unknown reference mode {mode!r}")
    if model not in ("bbmh", "bbm"):
        raise ConfigurationError(f"unknown model {model!r}")
    if mode == "petviashvili" and model != "bbmh":
        raise ConfigurationError("the Petviashvili reference exists only for BBMH")
    tab = load_tableau(tableau_name) if isinstance(tableau_name, str) else tableau_name
    grid, op = _setup(n, order, domain)
    x = grid.nodes()
    soliton = SolitonParams(c, grid)
    if mode == "petviashvili":
        fop = FourierOperator(grid)
        prof = petviashvili_solve(c, eps, fop)
        q0 = prof.as_state_array()

        def reference(t):
            return np.stack([fop.shift(comp, c * t) for comp in q0])

        def error(q, t):
            r = reference(t)
            return math.sqrt(sum(op.inner(q[i] - r[i], q[i] - r[i]) for i in range(3)))
    else:
        eta0 = bbm_soliton(soliton, x)
        q0 = eta0 if model == "bbm" else well_prepared_init(
            eta0, op, "consistent", eps, c, w_op="minus").as_array()

        def error(q, t):
            ref = bbm_soliton(soliton, x, t)
            return op.norm((q if model == "bbm" else q[0]) - ref)

    rhs = BBMModel(op) if model == "bbm" else BBMHModel(op, SplittingParams(eps=eps))
    times, errs = [], []

    def record(t, q):
        times.append(t)
        errs.append(error(q, t))

    rec = evolve(q0, t_end, dt, tab, rhs, relaxation=relaxation, stride=0,
                 callback=lambda t, q: record(t, q))
    times_a, errs_a = np.asarray(times[::stride]), np.asarray(errs[::stride])
    label = f"{mode}/{model}/eps={eps:g}/{tab.name}/relaxation={'on' if relaxation else 'off'}"
    return GrowthSeries(times_a, errs_a, fit_loglog_slope(times_a, errs_a, window), label,
                        float(np.max(rec.relative_energy_drift())), np.asarray(rec.gammas))


# --- output ---------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.17g}"


def emit(results, path, fmt: str = "csv") -> Path:
    """Write AP rows or growth series as CSV (fixed header) or JSON."""
    path = Path(path)
    results = list(results)
    if fmt not in ("csv", "json"):
        raise UsageError(f"unknown output format {fmt!r}")
    if fmt == "json":
        payload = [asdict(r) if isinstance(r, ApTableRow) else r.as_record() for r in results]
        path.write_text(json.dumps(payload, indent=1, default=_json_default) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if all(isinstance(r, ApTableRow) for r in results):
            writer.writerow(AP_COLUMNS)
            for r in results:
                writer.writerow([_fmt(getattr(r, k)) for k in AP_COLUMNS])
        elif all(isinstance(r, GrowthSeries) for r in results):
            writer.writerow(["label", "t", "error"])
            for r in results:
                for t, e in zip(r.times, r.errors):
                    writer.writerow([r.label, _fmt(t), _fmt(e)])
        else:
            raise UsageError("emit expects only ApTableRow or only GrowthSeries items")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_json(path):
    """Load an emitted JSON file; AP tables come back as :class:`ApTableRow`."""
    data = json.loads(Path(path).read_text())
    if data and "eps_sq" in data[0]:
        return [ApTableRow(**d) for d in data]
    return data
