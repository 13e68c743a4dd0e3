"""Recover ``(alpha0, a, alpha1, alpha2)`` from a finite disk DtN spectrum.

The stages follow the limit formulas of the multiplier in order:

* ``alpha0`` is the limit of ``C_n``;
* ``a^-2`` is the limiting ratio of consecutive residuals ``C_n - alpha0``;
* ``L = (alpha1/alpha0 - 1) / (alpha1/alpha0 + 1)`` is the limit of the
  residual scaled by ``2 alpha0 a^(2n)``;
* ``E = b / (1 - b)`` is the limit of ``(2n + 1)(B_n - 1)``.

With finitely many modes the residuals sink under roundoff after a few dozen
terms, so each limit is extrapolated from the *usable* modes only: those whose
residual exceeds ten times the propagated error from earlier stages.  The
algebraic limits (``L`` and ``E``) are extrapolated by weighted polynomial
fits in ``x = 1/(2n+1)``.

The staged values are accurate to a few digits.  :func:`reconstruct` then
polishes ``(a, alpha1, alpha2)`` by solving the closed-form multiplier
equations on the usable modes, seeded with the staged values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .disk import DiskConductivity, DiskDtnSpectrum, b_series_excess
from .errors import (
    DomainError,
    IllPosedInputError,
    InconsistentSpectrumError,
    InsufficientModesError,
    NumericError,
    ReconstructionError,
    UnidentifiableError,
)

EPS = np.finfo(float).eps
# roundoff of a closed-form multiplier, in units of |C_n|
ROUNDOFF = 4.0 * EPS
USABLE_FACTOR = 10.0
L_MARGIN = 1e-10
E_MARGIN = 1e-10
MAX_FIT_DEGREE = 4
# noise floor added to the weights of the algebraic fits; below it the 1/n
# truncation error dominates, so well-resolved modes are weighted evenly
FIT_WEIGHT_FLOOR = 1e-6
# placeholder interface radius reported when the interface is invisible
UNIDENTIFIED_RADIUS = 0.5


@dataclass(frozen=True)
class LimitEstimate:
    """Extrapolated limit with an error bound and the largest mode consumed."""

    value: float
    error_bound: float
    n_used: int

    def __post_init__(self):
        bound = float(self.error_bound)
        if not math.isfinite(bound) or bound < 0.0:
            raise DomainError(f"error_bound must be finite and >= 0, got {bound!r}")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "error_bound", bound)
        object.__setattr__(self, "n_used", int(self.n_used))


@dataclass(frozen=True)
class DiskReconstruction:
    """Reconstructed conductivity plus per-parameter diagnostics.

    When ``homogeneous`` is set the interface radius cannot be seen in the
    data; ``gamma.a`` then holds a placeholder and ``diagnostics["a"]`` is
    ``None``.
    """

    gamma: DiskConductivity
    homogeneous: bool
    diagnostics: dict = field(default_factory=dict)
    staged: dict = field(default_factory=dict)

    @property
    def a_identifiable(self):
        return not self.homogeneous


def _multipliers_of(spectrum):
    if isinstance(spectrum, DiskDtnSpectrum):
        return np.asarray(spectrum.multipliers, dtype=float)
    return np.asarray(DiskDtnSpectrum(spectrum).multipliers, dtype=float)


def _sigma(c, noise_floor):
    return (noise_floor + ROUNDOFF) * np.abs(c)


def _usable(c, alpha0, alpha0_error, noise_floor):
    """Mode indices, residuals and residual noise of the modes above the floor."""
    n = np.arange(1, c.size + 1, dtype=float)
    d = c - alpha0
    sig = _sigma(c, noise_floor) + alpha0_error
    keep = np.abs(d) > USABLE_FACTOR * sig
    return n[keep], d[keep], sig[keep]


def _poly_fit(x, y, sigma, degree):
    """Weighted polynomial fit; returns (coefficients, standard errors)."""
    v = np.vander(x, degree + 1, increasing=True)
    w = 1.0 / sigma
    vw = v * w[:, None]
    coef, *_ = np.linalg.lstsq(vw, y * w, rcond=None)
    try:
        cov = np.linalg.pinv(vw.T @ vw)
        sd = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        sd = np.full(degree + 1, np.inf)
    return coef, sd


def _intercept(x, y, sigma):
    """Extrapolate ``y`` to ``x = 0``; bound from the change between two degrees."""
    k = x.size
    if k == 1:
        return float(y[0]), float(abs(y[0]) + sigma[0])
    degree = min(MAX_FIT_DEGREE, k - 2) if k > 2 else 1
    sigma = sigma + FIT_WEIGHT_FLOOR * np.maximum(np.abs(y), 1.0)
    coef, sd = _poly_fit(x, y, sigma, degree)
    if degree >= 1:
        lower, _ = _poly_fit(x, y, sigma, degree - 1)
        drift = abs(coef[0] - lower[0])
    else:
        drift = 0.0
    stat = 3.0 * sd[0] if math.isfinite(sd[0]) else abs(coef[0])
    return float(coef[0]), float(drift + stat)


def _interior_ratio(n, d, alpha0, a):
    """``g_n = (alpha1/alpha0) B_n`` from the inverted multiplier formula, with ``t = a^(2n)``."""
    t = np.exp(2.0 * n * math.log(a))
    num = 2.0 * alpha0 * t + d * (1.0 + t)
    den = 2.0 * alpha0 * t - d * (1.0 - t)
    if np.any(den <= 0.0):
        raise InconsistentSpectrumError(
            "residual too large for the supplied interface radius", stage="alpha1"
        )
    return num / den, t


def detect_homogeneous(spectrum, tol=1e-12):
    """True when every multiplier agrees with ``C_1`` to relative tolerance ``tol``."""
    c = _multipliers_of(spectrum)
    if c.size < 4:
        raise InsufficientModesError(f"need at least 4 modes, got {c.size}", stage="homogeneity")
    return bool(np.max(np.abs(c - c[0])) <= tol * abs(c[0]))


def recover_alpha0(spectrum, noise_floor=0.0):
    """Limit of ``C_n``.

    If the tail has already settled to within the noise, the settled values
    are averaged (median).  Otherwise Aitken's delta-squared process is applied
    to the last terms, which is exact for a geometric residual.
    """
    c = _multipliers_of(spectrum)
    N = c.size
    if N < 8:
        raise InsufficientModesError(f"need at least 8 modes, got {N}", stage="alpha0")
    if np.all(c == c[0]):
        return LimitEstimate(c[0], 0.0, N)
    thr = USABLE_FACTOR * (noise_floor + ROUNDOFF) * np.max(np.abs(c))
    d = np.diff(c)
    flat = np.abs(d) <= thr
    run = 0
    for ok in flat[::-1]:
        if not ok:
            break
        run += 1
    if run >= 3:
        tail = c[N - run - 1:]
        value = float(np.median(tail))
        return LimitEstimate(value, thr + float(np.max(np.abs(tail - value))), N)
    last = d[-7:]
    mag = np.abs(last)
    if np.any(np.sign(last) != np.sign(last[0])) or np.any(mag[1:] >= mag[:-1]):
        raise IllPosedInputError(
            "multiplier differences do not decay monotonically over the tail", stage="alpha0"
        )
    x = c[-8:]
    dx = np.diff(x)
    d2 = np.diff(dx)
    aitken = x[2:] - dx[1:] ** 2 / d2
    value = float(aitken[-1])
    return LimitEstimate(value, float(abs(aitken[-1] - aitken[-2]) + thr), N)


def recover_interface(spectrum, alpha0, alpha0_error=0.0, noise_floor=0.0):
    """Interface radius from the decay rate of the residuals ``C_n - alpha0``.

    ``log |C_n - alpha0|`` is regressed on ``n`` with ``1, x, x^2`` correction
    columns (``x = 1/(2n+1)``) over the usable modes after the last sign change
    of the residual.  The slope is ``2 log a``.  When that regression leaves a
    misfit well above the noise, the radius is sharpened by requiring the
    interior ratios ``g_n`` implied by ``a`` to be smooth in ``x``.
    """
    c = _multipliers_of(spectrum)
    n, d, sig = _usable(c, alpha0, alpha0_error, noise_floor)
    if n.size < 2:
        raise UnidentifiableError(
            "residuals C_n - alpha0 are all below the noise floor", stage="interface"
        )
    sign = np.sign(d)
    flips = np.nonzero(sign[1:] != sign[:-1])[0]
    if flips.size:
        start = flips[-1] + 1
        n, d, sig = n[start:], d[start:], sig[start:]
    if n.size < 2:
        raise UnidentifiableError(
            "too few residuals of one sign to estimate the decay rate", stage="interface"
        )
    y = np.log(np.abs(d))
    s = sig / np.abs(d)
    x = 1.0 / (2.0 * n + 1.0)

    def slope(columns):
        v = np.column_stack(columns)
        w = 1.0 / s
        vw = v * w[:, None]
        coef, *_ = np.linalg.lstsq(vw, y * w, rcond=None)
        cov = np.linalg.pinv(vw.T @ vw)
        r = (vw @ coef - y * w)
        return coef[0], math.sqrt(max(cov[0, 0], 0.0)), float(r @ r)

    ones = np.ones_like(n)
    if n.size >= 6:
        k, sd, chi2 = slope([n, ones, x, x * x])
        k_low, _, _ = slope([n, ones, x])
        a = math.exp(0.5 * k)
        if chi2 > 10.0 * (n.size - 4) and 0.0 < a < 1.0:
            # the residual is not geometric up to smooth 1/n corrections: the
            # ratio g_n carries the interior profile, so project it out instead
            sharp = _sharpen_radius(n, d, sig, alpha0, a, 5)
            coarse = _sharpen_radius(n, d, sig, alpha0, a, 4)
            if sharp is not None and coarse is not None:
                return LimitEstimate(sharp, abs(sharp - coarse) + 1e-12, int(n.max()))
    elif n.size >= 3:
        k, sd, _ = slope([n, ones])
        k_low = k
    else:
        k = (y[1] - y[0]) / (n[1] - n[0])
        sd = (s[0] + s[1]) / (n[1] - n[0])
        k_low = k
    a = math.exp(0.5 * k)
    if not 0.0 < a < 1.0:
        raise InconsistentSpectrumError(
            f"residual decay rate gives a = {a:.6g}, outside (0, 1)", stage="interface"
        )
    bound = 0.5 * a * (abs(k - k_low) + 3.0 * sd)
    return LimitEstimate(a, bound, int(n.max()))


def recover_alpha1(spectrum, alpha0, a, alpha0_error=0.0, noise_floor=0.0):
    """``alpha1 = alpha0 (1 + L) / (1 - L)`` with ``L`` the limit of ``(g_n - 1)/(g_n + 1)``.

    ``g_n`` is the interior ratio recovered from each residual with the exact
    ``a^(2n)`` factor, so only its algebraic ``1/n`` drift needs extrapolating.
    """
    if not 0.0 < a < 1.0:
        raise DomainError(f"a must lie in (0, 1), got {a!r}")
    if alpha0 <= 0.0:
        raise DomainError(f"alpha0 must be positive, got {alpha0!r}")
    c = _multipliers_of(spectrum)
    n, d, sig = _usable(c, alpha0, alpha0_error, noise_floor)
    if n.size == 0:
        # nothing above the floor: the data are consistent with alpha1 = alpha0
        return LimitEstimate(alpha0, alpha0_error, 0)
    g, t = _interior_ratio(n, d, alpha0, a)
    ell = (g - 1.0) / (g + 1.0)
    sig_ell = sig / (2.0 * alpha0 * t)
    x = 1.0 / (2.0 * n + 1.0)
    L, bound = _intercept(x, ell, sig_ell)
    if not -1.0 < L < 1.0 - L_MARGIN:
        raise InconsistentSpectrumError(
            f"extrapolated limit L = {L:.6g} lies outside (-1, 1)", stage="alpha1"
        )
    alpha1 = alpha0 * (1.0 + L) / (1.0 - L)
    err = 2.0 * alpha0 / (1.0 - L) ** 2 * bound + alpha0_error * (1.0 + L) / (1.0 - L)
    return LimitEstimate(alpha1, min(err, 1e300), int(n.max()))


def recover_alpha2(spectrum, alpha0, alpha1, a, alpha0_error=0.0, noise_floor=0.0):
    """``alpha2 = alpha1 E / a`` with ``E`` the limit of ``(2n+1)(B_n - 1)``."""
    if not 0.0 < a < 1.0:
        raise DomainError(f"a must lie in (0, 1), got {a!r}")
    if alpha0 <= 0.0 or alpha1 <= 0.0:
        raise DomainError("alpha0 and alpha1 must be positive")
    c = _multipliers_of(spectrum)
    n, d, sig = _usable(c, alpha0, alpha0_error, noise_floor)
    if n.size == 0:
        raise UnidentifiableError("no residual above the noise floor", stage="alpha2")
    g, t = _interior_ratio(n, d, alpha0, a)
    k = 2.0 * n + 1.0
    y = k * (g * alpha0 / alpha1 - 1.0)
    sig_g = sig * (1.0 + g) ** 2 / (4.0 * alpha0 * t)
    sig_y = k * alpha0 / alpha1 * sig_g
    E, bound = _intercept(1.0 / k, y, sig_y)
    if E < -(E_MARGIN + bound):
        raise InconsistentSpectrumError(
            f"extrapolated E = {E:.6g} is negative; admissible spectra give E >= 0",
            stage="alpha2",
        )
    E = max(E, 0.0)
    return LimitEstimate(alpha1 * E / a, min(alpha1 * bound / a, 1e300), int(n.max()))


def _residual_model(p, alpha0, n):
    kappa, b, a = p
    g = kappa * (1.0 + b_series_excess(n, b))
    t = np.exp(2.0 * n * math.log(a))
    return 2.0 * alpha0 * t * (g - 1.0) / (1.0 + t + (1.0 - t) * g)


_LOWER = np.array([1e-12, 0.0, 1e-6])
# b is capped at 0.999: beyond that the B_n series needs an impractical number of terms
_UPPER = np.array([np.inf, 0.999, 1.0 - 1e-9])


def _fit(fun, start):
    start = np.clip(np.asarray(start, dtype=float), _LOWER + 1e-15, _UPPER - 1e-15)
    return least_squares(
        fun, start, bounds=(_LOWER, _UPPER), x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15
    )


def _projection_misfit(n, d, sig, alpha0, a, degree=5):
    """Misfit of a polynomial-in-``x`` model for ``g_n`` at a trial radius ``a``.

    For the right ``a`` the interior ratios ``g_n`` recovered from the data are
    a smooth function of ``x = 1/(2n+1)``; for a wrong one they are not.
    Returns ``(chi2, coefficients)``.
    """
    t = np.exp(2.0 * n * math.log(a))
    den = 2.0 * alpha0 * t - d * (1.0 - t)
    if np.any(den <= 0.0):
        return math.inf, None
    g = (2.0 * alpha0 * t + d * (1.0 + t)) / den
    sig_g = sig * (1.0 + g) ** 2 / (4.0 * alpha0 * t)
    x = 1.0 / (2.0 * n + 1.0)
    degree = min(degree, n.size - 2)
    v = np.vander(x, degree + 1, increasing=True)
    w = 1.0 / sig_g
    coef, *_ = np.linalg.lstsq(v * w[:, None], g * w, rcond=None)
    r = (v @ coef - g) * w
    return float(r @ r), coef


def _sharpen_radius(n, d, sig, alpha0, a0, degree=5):
    """Minimise the projection misfit over ``log a`` in a window around ``a0``."""
    grid = math.log(a0) + np.linspace(-3e-2, 3e-2, 601)
    grid = grid[grid < 0.0]
    if grid.size < 3 or n.size < degree + 3:
        return None

    def misfit(v):
        return _projection_misfit(n, d, sig, alpha0, math.exp(v), degree)[0]

    values = np.array([misfit(v) for v in grid])
    if not np.any(np.isfinite(values)):
        return None
    j = int(np.clip(np.argmin(values), 1, grid.size - 2))
    res = minimize_scalar(
        misfit, bounds=(grid[j - 1], grid[j + 1]), method="bounded", options={"xatol": 1e-13}
    )
    return math.exp(res.x)


def _projected_seed(n, d, sig, alpha0, a0):
    """Seed ``(kappa, b, a)`` from the projection-sharpened radius."""
    a = _sharpen_radius(n, d, sig, alpha0, a0)
    if a is None:
        return None
    _, coef = _projection_misfit(n, d, sig, alpha0, a)
    if coef is None or coef[0] <= 0.0:
        return None
    kappa = coef[0]
    ratio = max(coef[1] / coef[0], 0.0)  # b / (1 - b)
    return kappa, ratio / (1.0 + ratio), a


def _polish(c, alpha0, alpha0_error, noise_floor, a, alpha1, alpha2):
    """Solve the closed-form residual equations for ``(alpha1/alpha0, b, a)``.

    Seeds are the staged values and a projection-sharpened radius; when the
    misfit stays far above the noise a coarse multi-start is tried as well.
    """
    n, d, sig = _usable(c, alpha0, alpha0_error, noise_floor)
    if n.size < 4:
        return None

    def fun(p):
        return (_residual_model(p, alpha0, n) - d) / sig

    kappa = alpha1 / alpha0
    b = a * alpha2 / (alpha1 + a * alpha2)
    best = _fit(fun, [kappa, b, a])
    if best.cost > n.size and n.size >= 4:
        seed = _projected_seed(n, d, sig, alpha0, a)
        if seed is not None:
            trial = _fit(fun, seed)
            if trial.cost < best.cost:
                best = trial
    if best.cost > 100.0 * n.size:
        for a_s in np.linspace(0.05, 0.95, 19):
            for b_s in (0.1, 0.5, 0.9):
                for k_s in (0.5, 1.0, 2.0):
                    trial = _fit(fun, [k_s, b_s, a_s])
                    if trial.cost < best.cost:
                        best = trial
    kappa, b, a = best.x
    alpha1 = alpha0 * kappa
    alpha2 = alpha1 * b / (a * (1.0 - b))
    # linearised covariance of (kappa, b, a), inflated by the misfit
    dof = max(1, n.size - 3)
    scale = max(1.0, math.sqrt(2.0 * best.cost / dof))
    jac = best.jac
    cov = np.linalg.pinv(jac.T @ jac) * scale * scale
    grad_a1 = np.array([alpha0, 0.0, 0.0])
    grad_a2 = np.array(
        [alpha0 * b / (a * (1.0 - b)), alpha1 / (a * (1.0 - b) ** 2), -alpha2 / a]
    )
    sd = lambda g: math.sqrt(max(float(g @ cov @ g), 0.0))  # noqa: E731
    rel0 = alpha0_error / alpha0
    return {
        "a": LimitEstimate(a, 3.0 * math.sqrt(max(cov[2, 2], 0.0)), int(n.max())),
        "alpha1": LimitEstimate(alpha1, 3.0 * sd(grad_a1) + rel0 * alpha1, int(n.max())),
        "alpha2": LimitEstimate(alpha2, 3.0 * sd(grad_a2) + rel0 * alpha2, int(n.max())),
        "cost": float(best.cost),
        "limit": 100.0 * n.size,
    }


def _staged(c, noise_floor, lenient):
    """Run the four stages; with ``lenient`` an inconsistent alpha1/alpha2 stage is deferred.

    A deferred stage contributes a neutral fallback (``alpha1 = alpha0`` or
    ``alpha2 = 0``) and its error is returned so the caller can re-raise it if
    the joint refinement cannot explain the data either.
    """
    est0 = recover_alpha0(c, noise_floor)
    alpha0, err0 = est0.value, est0.error_bound
    est_a = recover_interface(c, alpha0, err0, noise_floor)
    deferred = None
    try:
        est1 = recover_alpha1(c, alpha0, est_a.value, err0, noise_floor)
    except InconsistentSpectrumError as exc:
        if not lenient:
            raise
        deferred = exc
        est1 = LimitEstimate(alpha0, alpha0, 0)
    try:
        est2 = recover_alpha2(c, alpha0, est1.value, est_a.value, err0, noise_floor)
    except (InconsistentSpectrumError, UnidentifiableError) as exc:
        if not lenient:
            raise
        deferred = deferred or exc
        est2 = LimitEstimate(0.0, est1.value, 0)
    return {"alpha0": est0, "a": est_a, "alpha1": est1, "alpha2": est2}, deferred


def reconstruct(spectrum, noise_floor=0.0, tol=1e-12, polish=True):
    """Reconstruct the disk conductivity behind ``spectrum``.

    ``noise_floor`` is the relative noise level of the multipliers.  Errors
    from any stage propagate as :class:`ReconstructionError` subclasses whose
    ``stage`` attribute names the failing step.
    """
    c = _multipliers_of(spectrum)
    if c.size < 16:
        raise InsufficientModesError(f"need at least 16 modes, got {c.size}", stage="input")
    if noise_floor < 0.0 or not math.isfinite(noise_floor):
        raise DomainError(f"noise_floor must be finite and >= 0, got {noise_floor!r}")
    if detect_homogeneous(c, max(tol, USABLE_FACTOR * noise_floor)):
        est0 = recover_alpha0(c, noise_floor)
        gamma = DiskConductivity(est0.value, est0.value, 0.0, UNIDENTIFIED_RADIUS)
        diag = {"alpha0": est0, "a": None, "alpha1": est0, "alpha2": LimitEstimate(0.0, 0.0, 0)}
        return DiskReconstruction(gamma, True, diag, dict(diag))
    staged, deferred = _staged(c, noise_floor, lenient=polish)
    diagnostics = dict(staged)
    if polish:
        try:
            refined = _polish(
                c,
                staged["alpha0"].value,
                staged["alpha0"].error_bound,
                noise_floor,
                staged["a"].value,
                staged["alpha1"].value,
                staged["alpha2"].value,
            )
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise NumericError(f"joint refinement failed: {exc}") from exc
        if refined is None or (deferred is not None and refined["cost"] > refined["limit"]):
            if deferred is not None:
                raise deferred
        if refined is not None:
            diagnostics.update({k: refined[k] for k in ("a", "alpha1", "alpha2")})
    try:
        gamma = DiskConductivity(
            diagnostics["alpha0"].value,
            diagnostics["alpha1"].value,
            diagnostics["alpha2"].value,
            diagnostics["a"].value,
        )
    except DomainError as exc:
        raise ReconstructionError(str(exc), stage="assemble") from exc
    return DiskReconstruction(gamma, False, diagnostics, staged)
