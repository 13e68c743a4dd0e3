"""Forward problem on the unit disk with a radial two-zone conductivity.

The conductivity is ``alpha0`` on the annulus ``a <= r < 1`` and the affine
profile ``alpha1 + alpha2 (a - r)`` inside ``r < a``.  Because it is radial,
the Dirichlet-to-Neumann map is diagonal on ``exp(i n theta)`` and acts as
multiplication by ``|n| C_n``.  This module evaluates ``C_n`` in closed form
through the series factor ``B_n(b)`` of the interior power-series solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, NumericError

DEFAULT_TOL = 1e-14
# below exp(-700) the interface term a^(2n) is treated as exactly zero
LOG_UNDERFLOW = -700.0
# cap on the size of the (n, m) work matrix used for the B_n series
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class DiskConductivity:
    """Radial conductivity: ``alpha1 + alpha2 (a - r)`` for ``r < a``, ``alpha0`` beyond."""

    alpha0: float
    alpha1: float
    alpha2: float
    a: float

    def __post_init__(self):
        for name in ("alpha0", "alpha1", "alpha2", "a"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if not 0.0 < self.a < 1.0:
            raise DomainError(f"a must lie in (0, 1), got {self.a!r}")
        if self.alpha0 <= 0.0:
            raise DomainError(f"alpha0 must be positive, got {self.alpha0!r}")
        if self.alpha1 <= 0.0:
            raise DomainError(f"alpha1 must be positive, got {self.alpha1!r}")
        if self.alpha2 < 0.0:
            raise DomainError(f"alpha2 must be non-negative, got {self.alpha2!r}")

    def __call__(self, r):
        """Evaluate the conductivity at radius ``r``."""
        r = np.asarray(r, dtype=float)
        inner = self.alpha1 + self.alpha2 * (self.a - r)
        out = np.where(r < self.a, inner, self.alpha0)
        return float(out) if out.ndim == 0 else out

    @property
    def params(self):
        return (self.alpha0, self.alpha1, self.alpha2)

    def scaled(self, s):
        return DiskConductivity(s * self.alpha0, s * self.alpha1, s * self.alpha2, self.a)

    def is_homogeneous(self):
        return self.alpha2 == 0.0 and self.alpha1 == self.alpha0


@dataclass(frozen=True)
class AdmissibleDiskClass:
    """The class of disk conductivities with ``eps0 <= alpha0, alpha1 <= M`` and ``0 <= alpha2 <= N``."""

    a: float
    eps0: float
    M: float
    N: float

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise DomainError(f"a must lie in (0, 1), got {self.a!r}")
        if not 0.0 < self.eps0 <= self.M:
            raise DomainError(f"need 0 < eps0 <= M, got eps0={self.eps0!r}, M={self.M!r}")
        if self.N < 0.0:
            raise DomainError(f"N must be non-negative, got {self.N!r}")

    @property
    def b0(self):
        """Largest mixing parameter reachable inside the class."""
        return self.a * self.N / (self.eps0 + self.a * self.N)

    @property
    def d0(self):
        """Upper bound on ``B_n(b)`` over the class."""
        b0 = self.b0
        return 1.0 + b0 / (1.0 - b0) ** 1.5

    @property
    def derivative_constant(self):
        """Constant ``A`` with ``B'_n(b) <= A / (2n + 1)`` for every ``b <= b0``.

        Sum of the leading term of the derivative numerator and the three
        tail bounds on its series parts.
        """
        b0 = self.b0
        q3 = (1.0 - b0) ** 3
        q4 = (1.0 - b0) ** 4
        return (
            1.0
            + b0 * (b0 + 1.0) / (2.0 * q3)
            + (b0 + 1.0) / (2.0 * q3)
            + (b0 / 4.0) * ((2.0 * b0 + 1.0) / q3 + 3.0 * b0 * (b0 + 1.0) / q4)
        )

    @property
    def multiplier_bounds(self):
        """A loose sandwich ``(lo, hi)`` containing every ``C_n`` of the class."""
        eps0, M, d0 = self.eps0, self.M, self.d0
        return eps0**2 / (2.0 * M + (M / eps0) * d0 * M), 4.0 * M * d0 * M / eps0

    @property
    def alpha0_slice_constant(self):
        """Lower bound of ``gap / |alpha0 - beta0|``; the alpha0 estimate of the stability proof."""
        eps0, M = self.eps0, self.M
        return eps0 / (2.0 * M) * (2.0 + (M / eps0) * self.d0) ** -2

    def contains(self, gamma):
        return (
            gamma.a == self.a
            and self.eps0 <= gamma.alpha0 <= self.M
            and self.eps0 <= gamma.alpha1 <= self.M
            and 0.0 <= gamma.alpha2 <= self.N
        )

    def is_degenerate(self):
        return self.eps0 == self.M and self.N == 0.0

    def bounds(self):
        """Per-parameter sampling box ``[(lo, hi)]`` for (alpha0, alpha1, alpha2)."""
        return [(self.eps0, self.M), (self.eps0, self.M), (0.0, self.N)]

    def make(self, params):
        return DiskConductivity(params[0], params[1], params[2], self.a)


@dataclass(frozen=True)
class DiskDtnSpectrum:
    """Multipliers ``C_1..C_N``; the DtN map sends ``exp(i n theta)`` to ``|n| C_|n| exp(i n theta)``."""

    multipliers: np.ndarray
    source: DiskConductivity | None = None

    def __post_init__(self):
        c = np.array(self.multipliers, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise DomainError("a spectrum needs at least one multiplier")
        if not np.all(np.isfinite(c)):
            raise DomainError("spectrum contains non-finite multipliers")
        c.setflags(write=False)
        object.__setattr__(self, "multipliers", c)

    @property
    def n_modes(self):
        return int(self.multipliers.size)

    @property
    def modes(self):
        return np.arange(1, self.n_modes + 1)

    def __getitem__(self, n):
        """Return ``C_n`` for a non-zero integer mode (``C_-n = C_n``)."""
        n = abs(int(n))
        if not 1 <= n <= self.n_modes:
            raise IndexError(f"mode {n} outside 1..{self.n_modes}")
        return float(self.multipliers[n - 1])

    def apply(self, data):
        """Apply the DtN map to Fourier boundary data."""
        out = {}
        for n, c in data.coefficients.items():
            out[n] = 0.0 if n == 0 else abs(n) * self[n] * c
        return FourierBoundaryData(out)


@dataclass(frozen=True)
class FourierBoundaryData:
    """A boundary function ``f(theta) = sum_n f_n exp(i n theta)`` with finitely many modes."""

    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        coeffs = {int(n): complex(c) for n, c in dict(self.coefficients).items()}
        object.__setattr__(self, "coefficients", coeffs)

    def hs_norm(self, s):
        """Sobolev trace norm with weights ``(1 + n^2)^s``."""
        total = sum((1.0 + n * n) ** s * abs(c) ** 2 for n, c in self.coefficients.items())
        return math.sqrt(total)

    def __call__(self, theta):
        return sum(c * np.exp(1j * n * theta) for n, c in self.coefficients.items())


def mixing_parameter(gamma):
    """Return ``b = a alpha2 / (alpha1 + a alpha2)``, which lies in ``[0, 1)``."""
    return gamma.a * gamma.alpha2 / (gamma.alpha1 + gamma.a * gamma.alpha2)


def _check_mode(n):
    if int(n) != n or n == 0:
        raise DomainError(f"mode index must be a non-zero integer, got {n!r}")
    return abs(int(n))


def h_coefficient(m, n):
    """Product ``prod_{j=2}^{m} ((2j-1)n + j(j-1)) / (2jn + j^2)``; lies in ``(0, 1]``."""
    if m < 2:
        raise DomainError(f"m must be >= 2, got {m!r}")
    n = _check_mode(n)
    value = 1.0
    for j in range(2, int(m) + 1):
        value *= ((2 * j - 1) * n + j * (j - 1)) / (2 * j * n + j * j)
    return value


def h_coefficient_exact(m, n):
    """Exact rational value of :func:`h_coefficient`."""
    value = Fraction(1)
    for j in range(2, int(m) + 1):
        value *= Fraction((2 * j - 1) * n + j * (j - 1), 2 * j * n + j * j)
    return value


def _check_b(b):
    b = float(b)
    if not 0.0 <= b < 1.0:
        raise DomainError(f"b must lie in [0, 1), got {b!r}")
    return b


def _terms_needed(b, tol, power):
    # smallest M with M^power b^(M-1) < tol (1-b)^power; h_{m,n} <= 1 bounds the tail
    if b == 0.0:
        return 1
    target = math.log(tol) + power * math.log1p(-b)
    lb = math.log(b)
    m = 2
    while power * math.log(m) + (m - 1) * lb >= target:
        m = max(m + 1, int(m * 1.05))
    # step back down to the first index satisfying the bound
    while m > 2 and power * math.log(m - 1) + (m - 2) * lb < target:
        m -= 1
    return m


def series_sums(n, b, tol=DEFAULT_TOL, power=1):
    """Return ``(T0, T1, T2)`` for each mode in ``n``.

    ``T_k = sum_{m>=1} m^k b^(m-1) h_{m,n}`` with ``h_{1,n} = 1``.  ``power``
    selects the truncation rule: 1 is enough for ``B_n``, 2 for ``B'_n``.
    """
    n = np.atleast_1d(np.abs(np.asarray(n, dtype=float)))
    m_max = _terms_needed(b, tol, power)
    if m_max == 1:
        ones = np.ones_like(n)
        return ones, ones.copy(), ones.copy()
    j = np.arange(2, m_max + 1, dtype=float)
    # b^(m-1) for m = 2..m_max, in log space to avoid spurious underflow warnings
    bpow = np.exp((j - 1.0) * math.log(b))
    t0 = np.empty_like(n)
    t1 = np.empty_like(n)
    t2 = np.empty_like(n)
    rows = max(1, _CHUNK_ELEMENTS // j.size)
    for start in range(0, n.size, rows):
        nn = n[start:start + rows, None]
        factors = ((2.0 * j - 1.0) * nn + j * (j - 1.0)) / (2.0 * j * nn + j * j)
        h = np.cumprod(factors, axis=1)
        w = h * bpow
        t0[start:start + rows] = 1.0 + w.sum(axis=1)
        t1[start:start + rows] = 1.0 + (w * j).sum(axis=1)
        t2[start:start + rows] = 1.0 + (w * (j * j)).sum(axis=1)
    return t0, t1, t2


def b_series_excess(n, b, tol=DEFAULT_TOL):
    """Return ``B_n(b) - 1`` without cancellation; vectorised over ``n``."""
    b = _check_b(b)
    if tol <= 0:
        raise DomainError("tol must be positive")
    nn = np.abs(np.asarray(n, dtype=float))
    t0, t1, _ = series_sums(nn, b, tol)
    k = 2.0 * nn + 1.0
    out = b * t1 / (k * (1.0 + nn / k * b * t0))
    return float(out[0]) if np.ndim(n) == 0 else out


def b_series(n, b, tol=DEFAULT_TOL):
    """Series factor ``B_n(b)`` of the interior solution; satisfies ``1 <= B_n <= d0``."""
    if np.ndim(n) == 0:
        _check_mode(n)
    return 1.0 + b_series_excess(n, b, tol)


def b_series_derivative(n, b, tol=DEFAULT_TOL):
    """Derivative ``dB_n/db`` from the term-wise differentiated quotient."""
    b = _check_b(b)
    if tol <= 0:
        raise DomainError("tol must be positive")
    if np.ndim(n) == 0:
        _check_mode(n)
    nn = np.abs(np.asarray(n, dtype=float))
    t0, t1, t2 = series_sums(nn, b, tol, power=2)
    k = 2.0 * nn + 1.0
    q = 1.0 + nn / k * b * t0
    out = (t2 * q - b * t1 * (nn / k) * t1) / (k * q * q)
    return float(out[0]) if np.ndim(n) == 0 else out


def _interface_power(a, n):
    """``a^(2n)`` computed in log space; exact zero once it drops below exp(-700)."""
    log_t = 2.0 * np.asarray(n, dtype=float) * math.log(a)
    return np.where(log_t < LOG_UNDERFLOW, 0.0, np.exp(np.maximum(log_t, LOG_UNDERFLOW)))


def _multipliers(nn, gamma, tol):
    b = mixing_parameter(gamma)
    excess = b_series_excess(nn, b, tol)
    kappa = gamma.alpha1 / gamma.alpha0
    g = kappa * (1.0 + excess)
    g_minus_1 = (gamma.alpha1 - gamma.alpha0) / gamma.alpha0 + kappa * excess
    t = _interface_power(gamma.a, nn)
    den = 1.0 + t + (1.0 - t) * g
    if np.any(np.abs(den) < 1e-300):
        raise NumericError("vanishing denominator in the DtN multiplier")
    # C_n - alpha0 = 2 alpha0 t (g - 1) / den; keeping the residual form preserves its digits
    return gamma.alpha0 + gamma.alpha0 * 2.0 * t * g_minus_1 / den


def dtn_multiplier(n, gamma, tol=DEFAULT_TOL):
    """Multiplier ``C_n``; the DtN map acts on ``exp(i n theta)`` as ``|n| C_n``."""
    n = _check_mode(n)
    return float(_multipliers(np.array([n], dtype=float), gamma, tol)[0])


def disk_spectrum(gamma, n_modes, tol=DEFAULT_TOL):
    """Closed-form spectrum ``C_1..C_{n_modes}`` of a disk conductivity."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise DomainError(f"n_modes must be a positive integer, got {n_modes!r}")
    nn = np.arange(1, int(n_modes) + 1, dtype=float)
    return DiskDtnSpectrum(_multipliers(nn, gamma, tol), source=gamma)


def interior_coefficients(n, gamma, k_max):
    """Coefficients ``a_k``, ``k = |n|..k_max``, of the interior power series with ``a_|n| = 1``."""
    n = _check_mode(n)
    if k_max < n:
        raise DomainError(f"k_max={k_max} must be >= |n|={n}")
    ratio = gamma.alpha2 / (gamma.alpha1 + gamma.a * gamma.alpha2)
    coeffs = np.empty(int(k_max) - n + 1)
    coeffs[0] = 1.0
    for m in range(1, coeffs.size):
        coeffs[m] = ratio * ((2 * m - 1) * n + m * (m - 1)) / (2 * m * n + m * m) * coeffs[m - 1]
    return coeffs


def _interior_sum(n, gamma, r, tol=1e-17, max_terms=100_000):
    # sum_m a_{n+m} r^m with a_n = 1; the terms shrink at least like (alpha2 r/(alpha1 + a alpha2))^m
    ratio = gamma.alpha2 / (gamma.alpha1 + gamma.a * gamma.alpha2)
    total = 1.0
    term = 1.0
    for m in range(1, max_terms):
        term *= ratio * r * ((2 * m - 1) * n + m * (m - 1)) / (2 * m * n + m * m)
        total += term
        if term <= tol * total:
            break
    return total


def _interior_sum_derivative(n, gamma, r, tol=1e-17, max_terms=100_000):
    # r d/dr of r^n sum_m a_{n+m} r^m, divided by r^n: sum_m (n+m) a_{n+m} r^m
    ratio = gamma.alpha2 / (gamma.alpha1 + gamma.a * gamma.alpha2)
    total = float(n)
    term = 1.0
    for m in range(1, max_terms):
        term *= ratio * r * ((2 * m - 1) * n + m * (m - 1)) / (2 * m * n + m * m)
        total += (n + m) * term
        if (n + m) * term <= tol * total:
            break
    return total


def mode_profile(n, gamma, r):
    """Radial factor ``u_n(r)`` of the solution, normalised to ``u_n(1) = 1``.

    Returns ``(u_n(r), u_n'(r))``.  Uses ``b r^n + c r^-n`` on the annulus and
    the interior power series below ``a``.
    """
    n = abs(int(n))
    r = float(r)
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"r must lie in [0, 1], got {r!r}")
    if n == 0:
        return 1.0, 0.0
    a = gamma.a
    s_a = _interior_sum(n, gamma, a)
    ds_a = _interior_sum_derivative(n, gamma, a)
    # G = (alpha1/alpha0) a u'(a-)/(n u(a-)) equals (alpha1/alpha0) B_n(b)
    G = gamma.alpha1 / gamma.alpha0 * ds_a / (n * s_a)
    t = float(_interface_power(a, n))
    rho = t * (1.0 - G) / (1.0 + G)  # c_n / b_n
    bn = 1.0 / (1.0 + rho)
    cn = rho * bn
    if r >= a:
        return bn * r**n + cn * r ** (-n), n * (bn * r ** (n - 1) - cn * r ** (-n - 1))
    # match the interior series to the annulus value at r = a
    u_a = bn * a**n + cn * a ** (-n)
    if r == 0.0:
        return 0.0, (u_a / (a * s_a) if n == 1 else 0.0)
    scale = (r / a) ** n / s_a
    u = u_a * scale * _interior_sum(n, gamma, r)
    du = u_a * scale * _interior_sum_derivative(n, gamma, r) / r
    return u, du


def solve_disk(gamma, f, r, theta):
    """Evaluate the potential ``u(r, theta)`` for boundary data ``f``.

    ``f`` is :class:`FourierBoundaryData` (or a mapping ``{n: f_n}``).
    Returns a float when the result is real to rounding, else a complex.
    """
    r = float(r)
    if not 0.0 <= r < 1.0:
        raise DomainError(f"r must lie in [0, 1), got {r!r}")
    if not isinstance(f, FourierBoundaryData):
        f = FourierBoundaryData(f)
    value = 0j
    for n, c in f.coefficients.items():
        if c == 0:
            continue
        u, _ = mode_profile(n, gamma, r)
        value += c * u * np.exp(1j * n * theta)
    if abs(value.imag) <= 1e-14 * max(1.0, abs(value.real)):
        return float(value.real)
    return complex(value)
