"""Forward problem on the half-infinite cylinder ``B(0,1) x (0, inf)``.

The conductivity is ``1 + alpha2`` for ``0 <= z < h`` and ``1 + alpha1`` for
``z >= h``; the potential vanishes on the lateral wall.  For radial boundary
data the solution separates on the Fourier-Bessel modes ``J0(lambda_n r)``,
``lambda_n`` being the positive zeros of J0.

Sign convention: with ``u = 0`` on the lateral wall the outward normal at
``z = 0`` points along ``-z``, so the DtN map acts on a mode as
``f_n -> -lambda_n A_n f_n`` with the positive multiplier

    A_n = (1 + alpha2) (2 + alpha1 + alpha2 - (alpha2 - alpha1) e_n)
                       / (2 + alpha1 + alpha2 + (alpha2 - alpha1) e_n),
    e_n = exp(-2 lambda_n h).

Only ``A_n`` is stored; :meth:`CylinderDtnSpectrum.apply` applies the sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .special import BesselZeroTable, compute_zeros

LOG_UNDERFLOW = -700.0


@dataclass(frozen=True)
class CylinderConductivity:
    """Two-layer conductivity: ``1 + alpha2`` above depth ``h``, ``1 + alpha1`` below."""

    alpha1: float
    alpha2: float
    h: float

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "h"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.alpha1 < 0.0:
            raise DomainError(f"alpha1 must be non-negative, got {self.alpha1!r}")
        if self.alpha2 < 0.0:
            raise DomainError(f"alpha2 must be non-negative, got {self.alpha2!r}")
        if self.h <= 0.0:
            raise DomainError(f"h must be positive, got {self.h!r}")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = np.where(z < self.h, 1.0 + self.alpha2, 1.0 + self.alpha1)
        return float(out) if out.ndim == 0 else out

    @property
    def params(self):
        return (self.alpha1, self.alpha2)

    def is_homogeneous(self):
        return self.alpha1 == self.alpha2


@dataclass(frozen=True)
class CylinderClass:
    """Conductivities with both increments in ``[0, M]`` and a fixed interface depth ``h``."""

    h: float
    M: float

    def __post_init__(self):
        if self.h <= 0.0:
            raise DomainError(f"h must be positive, got {self.h!r}")
        if self.M <= 0.0:
            raise DomainError(f"M must be positive, got {self.M!r}")

    def bounds(self):
        return [(0.0, self.M), (0.0, self.M)]

    def make(self, params):
        return CylinderConductivity(params[0], params[1], self.h)

    def contains(self, gamma):
        return (
            gamma.h == self.h
            and 0.0 <= gamma.alpha1 <= self.M
            and 0.0 <= gamma.alpha2 <= self.M
        )

    def is_degenerate(self):
        return False

    @property
    def multiplier_bounds(self):
        M = self.M
        return 1.0, 1.0 + 2.0 * M + M * M

    @property
    def alpha2_slice_constant(self):
        """Lower bound of ``gap / |alpha2 - beta2|`` from the stability proof."""
        return 1.0 / (2.0 + 3.0 * self.M) ** 2

    def alpha1_slice_constant(self, lambda1=None):
        """Lower bound of ``gap / |alpha1 - beta1|`` for pairs sharing alpha2."""
        if lambda1 is None:
            lambda1 = compute_zeros(1)[1]
        e = math.exp(-2.0 * lambda1 * self.h)
        M = self.M
        return e / (2.0 * (2.0 + 3.0 * M) ** 2 * (M + 1.0) ** 2 * (1.0 + e) ** 2)


@dataclass(frozen=True)
class CylinderDtnSpectrum:
    """Multipliers ``A_1..A_N``; the DtN map sends ``J0(lambda_n r)`` to ``-lambda_n A_n J0(lambda_n r)``."""

    multipliers: np.ndarray
    zeros: BesselZeroTable | None = None
    source: CylinderConductivity | None = None

    def __post_init__(self):
        a = np.array(self.multipliers, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise DomainError("a spectrum needs at least one multiplier")
        if not np.all(np.isfinite(a)):
            raise DomainError("spectrum contains non-finite multipliers")
        if self.zeros is not None and self.zeros.count < a.size:
            raise DomainError("zero table shorter than the spectrum")
        a.setflags(write=False)
        object.__setattr__(self, "multipliers", a)

    @property
    def n_modes(self):
        return int(self.multipliers.size)

    @property
    def lambdas(self):
        zeros = self.zeros if self.zeros is not None else compute_zeros(self.n_modes)
        return np.asarray(zeros.zeros[: self.n_modes])

    def __getitem__(self, n):
        if not 1 <= n <= self.n_modes:
            raise IndexError(f"mode {n} outside 1..{self.n_modes}")
        return float(self.multipliers[n - 1])

    def apply(self, data):
        """Apply the DtN map to radial boundary data."""
        k = min(data.coefficients.size, self.n_modes)
        lam = self.lambdas[:k]
        out = -lam * self.multipliers[:k] * data.coefficients[:k]
        return RadialBoundaryData(out, data.zero_table)


@dataclass(frozen=True)
class RadialBoundaryData:
    """Fourier-Bessel coefficients ``f_n`` of a radial function on the unit disk.

    ``f(r) = sum_n f_n J0(lambda_n r)``.
    """

    coefficients: np.ndarray
    zero_table: BesselZeroTable = field(default=None)

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 1:
            raise DomainError("coefficients must be one-dimensional")
        table = self.zero_table
        if table is None:
            table = compute_zeros(max(1, c.size))
        if table.count < c.size:
            raise DomainError("zero table shorter than the coefficient vector")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "zero_table", table)

    def _weights(self):
        k = self.coefficients.size
        return self.zero_table.zeros[:k], self.zero_table.j1_at_zeros[:k]

    def __call__(self, r):
        from .special import bessel_j0

        lam, _ = self._weights()
        r = np.atleast_1d(np.asarray(r, dtype=float))
        basis = bessel_j0(np.outer(r, lam))
        return basis @ self.coefficients


def hs_norm(data, s):
    """Radial trace norm ``(sum (1 + lambda_n^2)^s |f_n|^2 J1(lambda_n)^2)^(1/2)``, ``s = +-1/2``."""
    if s not in (0.5, -0.5):
        raise DomainError(f"s must be +1/2 or -1/2, got {s!r}")
    lam, j1 = data._weights()
    return float(np.sqrt(np.sum((1.0 + lam**2) ** s * data.coefficients**2 * j1**2)))


def pairing(f, g):
    """Duality pairing ``sum f_n g_n J1(lambda_n)^2`` between the two trace spaces."""
    k = min(f.coefficients.size, g.coefficients.size)
    j1 = f.zero_table.j1_at_zeros[:k]
    return float(np.sum(f.coefficients[:k] * g.coefficients[:k] * j1**2))


def _decay(lam, h):
    log_e = -2.0 * np.asarray(lam, dtype=float) * h
    return np.where(log_e < LOG_UNDERFLOW, 0.0, np.exp(np.maximum(log_e, LOG_UNDERFLOW)))


def _multipliers(lam, gamma):
    s = 1.0 + gamma.alpha2
    k = 2.0 + gamma.alpha1 + gamma.alpha2
    d = gamma.alpha2 - gamma.alpha1
    e = _decay(lam, gamma.h)
    # A_n - (1 + alpha2) = -2 s d e / (k + d e)
    return s - 2.0 * s * d * e / (k + d * e)


def _table_for(n, zeros):
    if zeros is None:
        return compute_zeros(n)
    if zeros.count < n:
        raise DomainError(f"mode {n} exceeds the zero table ({zeros.count} zeros)")
    return zeros


def dtn_multiplier_cyl(n, gamma, zeros=None):
    """Multiplier ``A_n`` of mode ``J0(lambda_n r)``."""
    if int(n) != n or n < 1:
        raise DomainError(f"mode index must be a positive integer, got {n!r}")
    zeros = _table_for(int(n), zeros)
    return float(_multipliers(np.array([zeros[int(n)]]), gamma)[0])


def cylinder_spectrum(gamma, n_modes, zeros=None):
    """Closed-form spectrum ``A_1..A_{n_modes}``."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise DomainError(f"n_modes must be a positive integer, got {n_modes!r}")
    zeros = _table_for(int(n_modes), zeros)
    lam = zeros.zeros[: int(n_modes)]
    return CylinderDtnSpectrum(_multipliers(lam, gamma), zeros=zeros, source=gamma)


def solve_cylinder_mode(n, gamma, z, zeros=None, derivative=False):
    """Axial factor ``u_n(z)`` normalised to ``u_n(0) = 1``.

    ``b e^{-lambda z} + c e^{lambda z}`` above the interface and
    ``a e^{-lambda z}`` below it.  With ``derivative=True`` returns
    ``(u, u')``; at ``z = h`` the deep-layer (right) limit is used.
    """
    z = float(z)
    if z < 0.0:
        raise DomainError(f"z must be non-negative, got {z!r}")
    zeros = _table_for(int(n), zeros)
    lam = zeros[int(n)]
    h = gamma.h
    rho = (gamma.alpha2 - gamma.alpha1) / (2.0 + gamma.alpha1 + gamma.alpha2)
    e = float(_decay(lam, h))
    b = 1.0 / (1.0 + rho * e)
    if z < h:
        down = math.exp(-lam * z)
        # c e^{lambda z} = rho b e^{-lambda (2h - z)}
        up = rho * b * math.exp(-lam * (2.0 * h - z))
        u = b * down + up
        du = lam * (up - b * down)
    else:
        amp = b * (1.0 + rho)
        u = amp * math.exp(-lam * z)
        du = -lam * u
    return (u, du) if derivative else u

