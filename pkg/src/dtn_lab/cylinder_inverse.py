"""Recover ``(alpha2, h, alpha1)`` from a cylinder DtN spectrum.

Write ``s = 1 + alpha2``, ``rho = (alpha2 - alpha1) / (2 + alpha1 + alpha2)``
and ``e_n = exp(-2 lambda_n h)``.  Inverting the multiplier formula gives the
exact relation

    w_n = (s - A_n) / (s + A_n) = rho e_n,

so once ``alpha2`` is known, ``log |w_n|`` is linear in ``lambda_n`` with slope
``-2h`` and intercept ``log |rho|``.  Two paths use it:

* the limit path takes ``alpha2`` from the tail of ``A_n``, fits the line over
  the leading modes whose residual is above the noise, and converts the
  intercept to ``A = -2 rho = lim (A_n - s) e^(2 lambda_n h) / s`` and then
  ``alpha1``.  A purely geometric residual ``A_n - s = c e_n`` is also
  accepted (it fits ``log |A_n - s|`` exactly) and the better line wins;
* the two-mode path solves the relation at ``n = 1, 2`` in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .cylinder import CylinderConductivity, CylinderDtnSpectrum, cylinder_spectrum
from .disk_inverse import LimitEstimate
from .errors import (
    DomainError,
    InconsistentSpectrumError,
    InsufficientModesError,
    ReconstructionError,
    UnidentifiableError,
)
from .special import compute_zeros

EPS = np.finfo(float).eps
ROUNDOFF = 4.0 * EPS
USABLE_FACTOR = 10.0
# |A_1 - (1 + alpha2)| below this fraction of 1 + alpha2: the interface is invisible
DEEP_INTERFACE = 1e-13
VERIFY_TOL = 1e-12
# relative misfit allowed when a limit-based result is pushed back through the forward map
LIMIT_VERIFY_TOL = 1e-8
# placeholder depth reported when h cannot be identified
UNIDENTIFIED_DEPTH = 1.0

LIMIT_BASED = "limit-based"
TWO_MODE = "two-mode"


@dataclass(frozen=True)
class CylinderReconstruction:
    """Reconstructed cylinder conductivity.

    When ``homogeneous`` is set ``gamma.h`` is a placeholder and
    ``diagnostics["h"]`` is ``None``.
    """

    gamma: CylinderConductivity
    homogeneous: bool
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def h_identifiable(self):
        return not self.homogeneous


def _spectrum_and_zeros(spectrum, zeros):
    if isinstance(spectrum, CylinderDtnSpectrum):
        a = np.asarray(spectrum.multipliers, dtype=float)
        zeros = zeros if zeros is not None else spectrum.zeros
    else:
        a = np.asarray(CylinderDtnSpectrum(spectrum).multipliers, dtype=float)
    if zeros is None:
        zeros = compute_zeros(a.size)
    if zeros.count < a.size:
        raise DomainError("zero table shorter than the spectrum")
    return a, np.asarray(zeros.zeros[: a.size])


def _homogeneous(a, s):
    return bool(np.max(np.abs(a - a[0])) <= DEEP_INTERFACE * s)


def _alpha2_estimate(a, lam, noise_floor):
    """Tail value of ``A_n - 1`` with a bound from a first-ratio depth estimate.

    When that bound sits above roundoff (shallow interface, short spectrum)
    the tail value is refined with the exact two-layer model, see
    :func:`_refine_limit`.
    """
    N = a.size
    s_last = a[-1]
    floor = (noise_floor + ROUNDOFF) * s_last
    alpha2 = s_last - 1.0
    r1 = abs(a[0] - s_last)
    r2 = abs(a[1] - s_last)
    if r1 > USABLE_FACTOR * floor and r2 > USABLE_FACTOR * floor and r1 > r2:
        # the prior lower bound on h is half the depth implied by the first ratio
        h_min = 0.5 * math.log(r1 / r2) / (2.0 * (lam[1] - lam[0]))
        tail = 2.0 * s_last * abs(a[0] - s_last) / s_last * math.exp(-2.0 * lam[-1] * h_min)
    else:
        tail = 0.0
    if tail > USABLE_FACTOR * floor:
        refined = _refine_limit(a, lam, floor, tail)
        if refined is not None:
            return LimitEstimate(refined[0] - 1.0, refined[1] + floor, N)
    return LimitEstimate(alpha2, tail + floor, N)


def _limit_misfit(a, lam, s, floor, cap=None):
    """Chi-square of the line through ``log |w_n|`` at a trial limit ``s``.

    Uses the leading run of modes above the floor, at most ``cap`` of them.
    """
    r = a - s
    keep = np.abs(r) > USABLE_FACTOR * floor
    stop = int(np.argmin(keep)) if not np.all(keep) else keep.size
    if cap is not None:
        stop = min(stop, cap)
    if stop < 3 or np.any(np.sign(r[:stop]) != np.sign(r[0])):
        return math.inf, stop
    w = np.abs(r[:stop] / (s + a[:stop]))
    return _line(lam[:stop], np.log(w), floor / np.abs(r[:stop]))[2], stop


def _search_limit(a, lam, floor, bound, cap=None):
    side = math.copysign(1.0, a[0] - a[-1])
    lo = math.log(max(floor, 1e-300))
    hi = math.log(bound)

    def misfit(log_off):
        return _limit_misfit(a, lam, a[-1] - side * math.exp(log_off), floor, cap)[0]

    grid = np.linspace(lo, hi, 121)
    values = np.array([misfit(v) for v in grid])
    if not np.any(np.isfinite(values)):
        return None
    j = int(np.argmin(values))
    lo_j, hi_j = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = minimize_scalar(misfit, bounds=(lo_j, hi_j), method="bounded", options={"xatol": 1e-10})
    best = res.x if res.fun <= values[j] else grid[j]
    return a[-1] - side * math.exp(best)


def _profile_width(a, lam, s, floor, bound, cap, target):
    """Largest distance from ``s`` at which the misfit stays below ``target``."""
    widths = []
    for sign in (1.0, -1.0):
        def over(delta):
            return _limit_misfit(a, lam, s + sign * delta, floor, cap)[0] >= target

        lo, hi = 0.0, floor
        while not over(hi) and hi < bound:
            lo, hi = hi, 2.0 * hi
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if over(mid) else (mid, hi)
        widths.append(hi)
    return max(widths)


def _refine_limit(a, lam, floor, bound):
    """Limit ``s = lim A_n`` that makes ``log |w_n|`` exactly linear in ``lambda_n``.

    ``A_n`` approaches ``s`` monotonically, so ``s`` lies beyond ``A_N`` at a
    distance below ``bound``; the offset is searched on a log scale.  The
    error is a three-sigma profile interval of the misfit.  Returns
    ``(s, error)`` or ``None``.
    """
    if bound <= floor:
        return None
    s = _search_limit(a, lam, floor, bound)
    if s is None:
        return None
    chi2, stop = _limit_misfit(a, lam, s, floor)
    if not math.isfinite(chi2):
        return None
    dof = max(1, stop - 3)
    target = chi2 + 9.0 * max(1.0, chi2 / dof)
    return s, _profile_width(a, lam, s, floor, bound, stop, target)


def _line(x, y, sy):
    """Weighted straight-line fit; returns (coefficients, covariance, chi2)."""
    v = np.column_stack([x, np.ones_like(x)])
    wt = 1.0 / sy
    vw = v * wt[:, None]
    coef, *_ = np.linalg.lstsq(vw, y * wt, rcond=None)
    res = vw @ coef - y * wt
    return coef, np.linalg.pinv(vw.T @ vw), float(res @ res)


def recover_cyl_limits(spectrum, zeros=None, noise_floor=0.0):
    """Limit-based reconstruction from a spectrum of at least 8 modes."""
    a, lam = _spectrum_and_zeros(spectrum, zeros)
    if a.size < 8:
        raise InsufficientModesError(f"need at least 8 modes, got {a.size}", stage="alpha2")
    est2 = _alpha2_estimate(a, lam, noise_floor)
    alpha2 = est2.value
    s = 1.0 + alpha2
    if alpha2 < -est2.error_bound:
        raise InconsistentSpectrumError(
            f"tail of A_n gives alpha2 = {alpha2:.6g} < 0", stage="alpha2"
        )
    alpha2 = max(alpha2, 0.0)
    if _homogeneous(a, s):
        gamma = CylinderConductivity(alpha2, alpha2, UNIDENTIFIED_DEPTH)
        diag = {"alpha2": est2, "h": None, "alpha1": est2}
        return CylinderReconstruction(gamma, True, LIMIT_BASED, diag)
    if abs(a[0] - s) < DEEP_INTERFACE * s:
        raise UnidentifiableError(
            "A_1 equals 1 + alpha2 to roundoff: the interface is too deep to see", stage="h"
        )
    sig = (noise_floor + ROUNDOFF) * a
    h, rho, cov, n_used, model = _fit_layers(a, lam, s, sig + est2.error_bound)
    A = -2.0 * rho
    if A >= 2.0:
        raise InconsistentSpectrumError(f"limit A = {A:.6g} >= 2", stage="alpha1")
    alpha1 = (alpha2 - rho * (2.0 + alpha2)) / (1.0 + rho)
    if alpha1 < 0.0:
        raise InconsistentSpectrumError(
            f"recovered alpha1 = {alpha1:.6g} is negative", stage="alpha1"
        )
    sd_h = 0.5 * math.sqrt(max(cov[0, 0], 0.0))
    sd_rho = abs(rho) * math.sqrt(max(cov[1, 1], 0.0))
    err_h = 3.0 * sd_h
    err_rho = 3.0 * sd_rho
    err_alpha1 = 3.0 * 2.0 * (1.0 + alpha2) / (1.0 + rho) ** 2 * sd_rho
    # carry the alpha2 uncertainty through by refitting at the ends of its interval
    for shifted in (s - est2.error_bound, s + est2.error_bound):
        try:
            h_s, rho_s, *_ = _fit_layers(a, lam, shifted, sig + est2.error_bound)
        except ReconstructionError:
            continue
        a2_s = shifted - 1.0
        err_h = max(err_h, 3.0 * sd_h + abs(h_s - h))
        err_rho = max(err_rho, 3.0 * sd_rho + abs(rho_s - rho))
        alpha1_s = (a2_s - rho_s * (2.0 + a2_s)) / (1.0 + rho_s)
        err_alpha1 = max(err_alpha1, 3.0 * 2.0 * (1.0 + alpha2) / (1.0 + rho) ** 2 * sd_rho
                         + abs(alpha1_s - alpha1))
    diag = {
        "alpha2": est2,
        "h": LimitEstimate(h, err_h, n_used),
        "A": LimitEstimate(A, 2.0 * err_rho, n_used),
        "alpha1": LimitEstimate(alpha1, err_alpha1 + est2.error_bound, n_used),
    }
    gamma = CylinderConductivity(alpha1, alpha2, h)
    fitted = model(lam)
    misfit = float(np.max(np.abs(fitted - a) / np.abs(a)))
    if misfit > LIMIT_VERIFY_TOL + USABLE_FACTOR * noise_floor:
        raise InconsistentSpectrumError(
            f"two-layer model reproduces the spectrum only to {misfit:.3e}", stage="verify"
        )
    return CylinderReconstruction(gamma, False, LIMIT_BASED, diag)


def _fit_layers(a, lam, s, sig):
    """Depth and contrast ``rho`` from the straight line through the leading residuals.

    Returns ``(h, rho, covariance, modes used, model)`` where ``model`` maps
    ``lambda_n`` to the fitted multipliers.
    """
    r = a - s
    keep = np.abs(r) > USABLE_FACTOR * sig
    # only the leading run of modes: the residual must not re-emerge from the noise
    if not keep[0]:
        raise UnidentifiableError("first residual is below the noise floor", stage="h")
    stop = int(np.argmin(keep)) if not np.all(keep) else keep.size
    if stop < 2:
        raise UnidentifiableError(
            "residuals fall below the noise floor before a usable tail forms", stage="h"
        )
    r, lam_u, sig_u, a_u = r[:stop], lam[:stop], sig[:stop], a[:stop]
    if np.any(np.sign(r) != np.sign(r[0])):
        raise InconsistentSpectrumError("residuals A_n - (1 + alpha2) change sign", stage="h")
    # two linear models in lambda_n: log|w_n| (exact for two-layer spectra) and
    # log|A_n - s| (exact for a purely geometric residual)
    w = -r / (s + a_u)
    fits = [
        _line(lam_u, np.log(np.abs(w)), sig_u / np.abs(r)),
        _line(lam_u, np.log(np.abs(r)), sig_u / np.abs(r)),
    ]
    # the two-layer model is preferred unless the data reject it outright
    dof = max(1, r.size - 2)
    use_w = fits[0][2] <= dof or fits[0][2] <= 4.0 * fits[1][2]
    coef, cov, _ = fits[0] if use_w else fits[1]
    h = -0.5 * coef[0]
    if h <= 0.0:
        raise InconsistentSpectrumError(
            f"residuals do not decay (fitted depth {h:.6g})", stage="h"
        )
    amp = math.copysign(math.exp(coef[1]), r[0])
    # rho = -lim w_n e^(2 lambda_n h); the geometric model gives A_n - s ~ -2 s rho e_n
    if use_w:
        rho = -amp

        def model(lam_all):
            w_all = -amp * np.exp(-2.0 * lam_all * h)
            return s * (1.0 - w_all) / (1.0 + w_all)
    else:
        rho = -0.5 * amp / s

        def model(lam_all):
            return s + amp * np.exp(-2.0 * lam_all * h)
    return h, rho, cov, int(r.size), model


def recover_cyl_two_mode(A1, A2, zeros, alpha2):
    """Closed-form ``(alpha1, h)`` from the first two multipliers and a known ``alpha2``.

    With ``w_n = (s - A_n)/(s + A_n) = rho e^(-2 lambda_n h)``:
    ``h = log(w_1 / w_2) / (2 (lambda_2 - lambda_1))``, ``rho = w_1 e^(2 lambda_1 h)``
    and ``alpha1 = (alpha2 - rho (2 + alpha2)) / (1 + rho)``.  The result is
    pushed back through the forward map and must reproduce ``(A1, A2)``.
    """
    if zeros is None:
        zeros = compute_zeros(2)
    if zeros.count < 2:
        raise DomainError("two-mode reconstruction needs the first two zeros")
    if alpha2 < 0.0:
        raise DomainError(f"alpha2 must be non-negative, got {alpha2!r}")
    s = 1.0 + alpha2
    if abs(A1 - s) <= DEEP_INTERFACE * s:
        raise DomainError(
            "A1 equals 1 + alpha2: homogeneous (or interface too deep), h is not identifiable"
        )
    lam1, lam2 = zeros[1], zeros[2]
    w1 = (s - A1) / (s + A1)
    w2 = (s - A2) / (s + A2)
    if w2 == 0.0 or w1 / w2 <= 1.0:
        raise InconsistentSpectrumError(
            f"(A1, A2) = ({A1!r}, {A2!r}) do not decay toward 1 + alpha2", stage="two-mode"
        )
    h = math.log(w1 / w2) / (2.0 * (lam2 - lam1))
    rho = w1 * math.exp(2.0 * lam1 * h)
    alpha1 = (alpha2 - rho * (2.0 + alpha2)) / (1.0 + rho)
    if alpha1 < 0.0:
        raise InconsistentSpectrumError(
            f"recovered alpha1 = {alpha1:.6g} is negative", stage="two-mode"
        )
    gamma = CylinderConductivity(alpha1, alpha2, h)
    check = cylinder_spectrum(gamma, 2, zeros).multipliers
    residual = max(abs(check[0] - A1) / abs(A1), abs(check[1] - A2) / abs(A2))
    if residual > VERIFY_TOL:
        raise InconsistentSpectrumError(
            f"two-mode solution reproduces (A1, A2) only to {residual:.3e}", stage="two-mode"
        )
    return gamma


def reconstruct_cylinder(spectrum, zeros=None, noise_floor=0.0, method=LIMIT_BASED):
    """Reconstruct by the chosen method; the two-mode path takes alpha2 from the tail."""
    if method == LIMIT_BASED:
        return recover_cyl_limits(spectrum, zeros, noise_floor)
    if method != TWO_MODE:
        raise DomainError(f"unknown method {method!r}")
    a, lam = _spectrum_and_zeros(spectrum, zeros)
    if a.size < 8:
        raise InsufficientModesError(f"need at least 8 modes, got {a.size}", stage="alpha2")
    est2 = _alpha2_estimate(a, lam, noise_floor)
    alpha2 = max(est2.value, 0.0)
    if _homogeneous(a, 1.0 + alpha2):
        gamma = CylinderConductivity(alpha2, alpha2, UNIDENTIFIED_DEPTH)
        return CylinderReconstruction(gamma, True, TWO_MODE, {"alpha2": est2, "h": None})
    table = zeros if zeros is not None else compute_zeros(2)
    gamma = recover_cyl_two_mode(a[0], a[1], table, alpha2)
    diag = {
        "alpha2": est2,
        "h": LimitEstimate(gamma.h, 0.0, 2),
        "alpha1": LimitEstimate(gamma.alpha1, 0.0, 2),
    }
    return CylinderReconstruction(gamma, False, TWO_MODE, diag)
