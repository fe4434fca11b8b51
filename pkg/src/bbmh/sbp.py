"""Periodic upwind summation-by-parts operators and Fourier collocation.

All operators act on uniform periodic grids.  Finite-difference operators are
stored as circulant stencils and applied by circular convolution; a dense
matrix is only ever assembled on request (for validation).

With the mass matrix ``M = h I`` the upwind pair satisfies

    M D+ + D-^T M = 0,    (1/2) M (D+ - D-) <= 0,

and the central operator ``D1 = (D+ + D-)/2`` is skew-adjoint in ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, SingularOperatorError, UsageError

__all__ = [
    "GridSpec",
    "Stencil",
    "OperatorSet",
    "FourierOperator",
    "build_upwind_operators",
    "apply",
    "fourier_inverse_helmholtz",
    "UPWIND_PLUS_STENCILS",
]


# Interior coefficients of D+ (times h) for the periodic upwind operators:
# order -> (offset of the first coefficient, coefficients).  D- is the
# negated reflection of D+, which is exactly the periodic SBP identity.
UPWIND_PLUS_STENCILS = {
    2: (0, (Fraction(-3, 2), Fraction(2), Fraction(-1, 2))),
    3: (-1, (Fraction(-1, 3), Fraction(-1, 2), Fraction(1), Fraction(-1, 6))),
    4: (-1, (Fraction(-1, 4), Fraction(-5, 6), Fraction(3, 2), Fraction(-1, 2),
             Fraction(1, 12))),
}


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[x_min, x_max)`` with ``n`` nodes."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ConfigurationError(f"grid needs an integer n >= 4, got {self.n!r}")
        if not self.x_max > self.x_min:
            raise ConfigurationError(
                f"empty interval [{self.x_min}, {self.x_max})")
        object.__setattr__(self, "n", int(self.n))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n

    def nodes(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n)


@dataclass(frozen=True, eq=False)
class Stencil:
    """Circulant operator ``(A x)_j = sum_k coeffs[k] * x[j + offset + k]``.

    Indices wrap around modulo ``n``.  Stencils compose, add and scale like
    the matrices they represent; products of circulants commute.
    """

    n: int
    offset: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ConfigurationError("stencil needs a non-empty 1d coefficient array")
        # trim exact zeros at both ends so bandwidths stay tight
        nz = np.flatnonzero(coeffs)
        offset = self.offset
        if nz.size:
            offset += int(nz[0])
            coeffs = coeffs[nz[0]:nz[-1] + 1]
        else:
            coeffs = np.zeros(1)
            offset = 0
        if coeffs.size > self.n:
            raise ConfigurationError(
                f"stencil of width {coeffs.size} does not fit a grid of {self.n} nodes")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def identity(cls, n):
        return cls(n, 0, np.ones(1))

    @property
    def lower(self) -> int:
        """Number of sub-diagonals touched (before wrap-around)."""
        return max(0, -self.offset)

    @property
    def upper(self) -> int:
        return max(0, self.offset + self.coeffs.size - 1)

    @property
    def width(self) -> int:
        return self.coeffs.size

    def __call__(self, x):
        return apply(self, x)

    def _check_compatible(self, other):
        if not isinstance(other, Stencil):
            return NotImplemented
        if other.n != self.n:
            raise UsageError(f"stencils live on grids of {self.n} and {other.n} nodes")
        return True

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        lo = min(self.offset, other.offset)
        hi = max(self.offset + self.width, other.offset + other.width)
        c = np.zeros(hi - lo)
        c[self.offset - lo:self.offset - lo + self.width] += self.coeffs
        c[other.offset - lo:other.offset - lo + other.width] += other.coeffs
        return Stencil(self.n, lo, c)

    def __neg__(self):
        return Stencil(self.n, self.offset, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return Stencil(self.n, self.offset, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return Stencil(self.n, self.offset + other.offset,
                       np.convolve(self.coeffs, other.coeffs))

    def transpose(self):
        return Stencil(self.n, -(self.offset + self.width - 1), self.coeffs[::-1])

    @property
    def T(self):
        return self.transpose()

    def symbol(self) -> np.ndarray:
        """Eigenvalues of the circulant, ordered like ``np.fft.fft`` modes."""
        theta = 2 * np.pi * np.arange(self.n) / self.n
        shifts = self.offset + np.arange(self.width)
        return np.exp(1j * np.outer(theta, shifts)) @ self.coeffs

    def dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        rows = np.arange(self.n)
        for k, ck in enumerate(self.coeffs):
            a[rows, (rows + self.offset + k) % self.n] += ck
        return a


def apply(op: Stencil, vec) -> np.ndarray:
    """Apply a circulant stencil to a grid vector by circular convolution."""
    x = np.asarray(vec, dtype=float)
    if x.ndim != 1 or x.shape[0] != op.n:
        raise UsageError(f"expected a vector of length {op.n}, got shape {x.shape}")
    lo, hi = op.lower, op.upper
    xp = np.concatenate((x[op.n - lo:], x, x[:hi])) if (lo or hi) else x
    out = np.zeros(op.n)
    start = lo + op.offset
    for k, ck in enumerate(op.coeffs):
        if ck != 0.0:
            out += ck * xp[start + k:start + k + op.n]
    return out


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Upwind SBP pair ``D+``, ``D-`` with central ``D1`` and diagonal mass."""

    grid: GridSpec
    order: int
    d_plus: Stencil
    d_minus: Stencil
    d_central: Stencil
    mass_diag: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    def mass(self, x):
        return self.mass_diag * x

    def inner(self, a, b) -> float:
        """M-weighted inner product ``a^T M b``."""
        return float(np.dot(a, self.mass_diag * b))

    def norm(self, a) -> float:
        return float(np.sqrt(self.inner(a, a)))

    def integral(self, a) -> float:
        return float(np.sum(self.mass_diag * a))

    def second_derivative(self) -> Stencil:
        """``D+ D-``, the negative semidefinite second-derivative operator."""
        return self.d_plus @ self.d_minus

    def dense(self, name: str) -> np.ndarray:
        if name == "mass":
            return np.diag(self.mass_diag)
        return getattr(self, name).dense()


def _check_upwind_stencil(order: int, offset: int, coeffs) -> None:
    """Reject transcription errors: accuracy and dissipation of ``h D+``."""
    shifts = np.array([Fraction(offset + k) for k in range(len(coeffs))], dtype=object)
    for m in range(order + 1):
        moment = sum(c * s**m for c, s in zip(coeffs, shifts))
        if moment != (1 if m == 1 else 0):
            raise ConfigurationError(
                f"order {order} stencil violates moment condition {m}: {moment}")
    theta = np.linspace(0.0, 2 * np.pi, 721)
    real = np.cos(np.outer(theta, shifts.astype(float))) @ np.array(coeffs, dtype=float)
    if real.max() > 1e-14:
        raise ConfigurationError(f"order {order} stencil is not dissipative")


def build_upwind_operators(grid: GridSpec, order: int = 4) -> OperatorSet:
    """Periodic upwind SBP operators of interior order 2, 3 or 4."""
    if order not in UPWIND_PLUS_STENCILS:
        raise ConfigurationError(
            f"unsupported upwind order {order!r}; choose from {sorted(UPWIND_PLUS_STENCILS)}")
    if grid.n < 2 * order + 2:
        raise ConfigurationError(
            f"order {order} operators need n >= {2 * order + 2}, got {grid.n}")
    offset, coeffs = UPWIND_PLUS_STENCILS[order]
    _check_upwind_stencil(order, offset, coeffs)
    h = grid.h
    d_plus = Stencil(grid.n, offset, np.array([float(c) for c in coeffs]) / h)
    d_minus = -d_plus.transpose()
    d_central = 0.5 * (d_plus + d_minus)
    mass = np.full(grid.n, h)
    mass.setflags(write=False)
    return OperatorSet(grid, order, d_plus, d_minus, d_central, mass)


@dataclass(frozen=True, eq=False)
class FourierOperator:
    """Fourier collocation on a periodic grid whose size is a power of two."""

    grid: GridSpec

    def __post_init__(self):
        n = self.grid.n
        if n & (n - 1):
            raise ConfigurationError(f"Fourier grids need a power-of-two size, got {n}")

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def wavenumbers(self) -> np.ndarray:
        """Signed wavenumbers ``2 pi m / L`` for ``m = -n/2 .. n/2 - 1`` in FFT order."""
        n = self.grid.n
        return 2 * np.pi / self.grid.length * np.fft.fftfreq(n, d=1.0 / n)

    @property
    def rwavenumbers(self) -> np.ndarray:
        n = self.grid.n
        return 2 * np.pi / self.grid.length * np.arange(n // 2 + 1)

    def _check(self, vec):
        x = np.asarray(vec, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.n:
            raise UsageError(f"expected a vector of length {self.n}, got shape {x.shape}")
        return x

    def apply_symbol(self, vec, symbol) -> np.ndarray:
        """Multiply the real-FFT coefficients of ``vec`` by ``symbol``."""
        x = self._check(vec)
        return np.fft.irfft(symbol * np.fft.rfft(x), n=self.n)

    def derivative(self, vec, order: int = 1) -> np.ndarray:
        k = self.rwavenumbers
        sym = (1j * k) ** order
        if order % 2:
            # the Nyquist mode has no odd derivative on the grid
            sym = sym.copy()
            sym[-1] = 0.0
        return self.apply_symbol(vec, sym)

    def shift(self, vec, distance: float) -> np.ndarray:
        """Translate a periodic grid function by ``distance`` (spectrally)."""
        k = self.rwavenumbers
        sym = np.exp(-1j * k * distance)
        sym[-1] = np.cos(k[-1] * distance)
        return self.apply_symbol(vec, sym)


def fourier_inverse_helmholtz(fop: FourierOperator, beta: float, rhs) -> np.ndarray:
    """Periodic solution ``y`` of ``(I + beta d^2/dx^2) y = rhs``."""
    if beta == 0.0:
        return fop._check(rhs).copy()
    k = fop.rwavenumbers
    sym = 1.0 - beta * k**2
    bad = np.flatnonzero(np.abs(sym) < 1e-14)
    if bad.size:
        m = int(bad[0])
        raise SingularOperatorError(
            f"I + beta d2 is singular at mode {m} (k = {k[m]:.6g}, beta = {beta:.6g})",
            mode=m)
    return fop.apply_symbol(rhs, 1.0 / sym)
