"""Brute-force mode solvers used to check the closed-form spectra.

Nothing here touches the series factor ``B_n`` or the closed-form
multipliers: the disk modes are integrated as ODEs and the cylinder modes are
solved by finite differences, each with the transmission conditions imposed
directly at the interface.

Disk modes
    With ``s = ln r`` and the logarithmic derivative ``v = r u'/u`` the
    radial equation becomes the Riccati equation
    ``dv/ds = n^2 - v^2 - (r gamma'/gamma) v``.  The regular solution starts
    from ``v = n`` (``u ~ r^n``) at ``r0 = 1e-6`` and flux continuity turns
    into the jump ``v(a+) = (alpha1/alpha0) v(a-)``.  ``ln u`` is carried
    alongside so interface values of ``u`` and ``gamma u'`` are available
    without ``r^n`` ever underflowing.  The multiplier is
    ``gamma(1) u'(1) / (n u(1)) = alpha0 v(1) / n``.

Cylinder modes
    ``((1+alpha) u')' = lambda^2 (1+alpha) u`` on ``[0, z_max]`` with
    ``u(0) = 1``, ``u(z_max) = 0``, discretised conservatively with the
    interface on a grid node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, DomainError, OracleError

R0 = 1e-6
MAX_REFINEMENTS = 8


@dataclass(frozen=True)
class DiskModeSolution:
    """Converged disk shooting result for one mode."""

    n: int
    multiplier: float
    u_interface: float
    flux_inner: float
    flux_outer: float
    flux_boundary: float
    grid_points: int


def _drift(s, gamma, inside):
    # r gamma'(r) / gamma(r); the layer is fixed per segment so the interface never leaks
    if not inside:
        return np.zeros_like(s)
    r = np.exp(s)
    return -gamma.alpha2 * r / (gamma.alpha1 + gamma.alpha2 * (gamma.a - r))


def _rk4(v, log_u, s_start, s_end, steps, n2, gamma, inside):
    h = (s_end - s_start) / steps
    nodes = s_start + h * np.arange(steps + 1)
    d_node = _drift(nodes, gamma, inside)
    d_mid = _drift(nodes[:-1] + 0.5 * h, gamma, inside)
    for i in range(steps):
        d0, dm, d1 = d_node[i], d_mid[i], d_node[i + 1]
        k1 = n2 - v * v - d0 * v
        v2 = v + 0.5 * h * k1
        k2 = n2 - v2 * v2 - dm * v2
        v3 = v + 0.5 * h * k2
        k3 = n2 - v3 * v3 - dm * v3
        v4 = v + h * k3
        k4 = n2 - v4 * v4 - d1 * v4
        log_u = log_u + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return v, log_u


def _shoot_disk(n, gamma, grid_points):
    """One fixed-grid shot for every mode in ``n``; the interface sits on a node."""
    n = np.asarray(n, dtype=float)
    s0 = math.log(R0)
    sa = math.log(gamma.a)
    inner_steps = max(1, round(grid_points * (sa - s0) / (-s0)))
    outer_steps = max(1, grid_points - inner_steps)
    # after the flux jump v starts at (alpha1/alpha0) n, so the outer stiffness scales with that ratio
    kappa = max(1.0, gamma.alpha1 / gamma.alpha0)
    outer_steps = max(outer_steps, int(math.ceil(-sa * 2.0 * kappa * float(n.max()) / 1.5)))
    v_inner, log_u_a = _rk4(n.copy(), n * s0, s0, sa, inner_steps, n * n, gamma, True)
    v_outer = gamma.alpha1 / gamma.alpha0 * v_inner
    v_end, log_u_end = _rk4(v_outer, log_u_a, sa, 0.0, outer_steps, n * n, gamma, False)
    return v_inner, v_outer, log_u_a, v_end, log_u_end


def _stable_grid(n_max, gamma, grid_points):
    # RK4 on the Riccati equation needs h * 2n below ~2.7
    span = -math.log(R0)
    return max(grid_points, int(math.ceil(span * 2.0 * n_max / 1.5)))


def oracle_disk_solutions(modes, gamma, grid_points=2000, rtol=1e-8):
    """Shoot every mode in ``modes`` and refine until two grids agree to ``rtol``."""
    if grid_points < 1000:
        raise DomainError(f"grid_points must be >= 1000, got {grid_points}")
    modes = np.abs(np.atleast_1d(np.asarray(modes, dtype=int)))
    if np.any(modes == 0):
        raise DomainError("mode index must be non-zero")
    points = _stable_grid(int(modes.max()), gamma, grid_points)
    previous = None
    for _ in range(MAX_REFINEMENTS):
        v_in, v_out, log_u_a, v_end, log_u_end = _shoot_disk(modes, gamma, points)
        mult = gamma.alpha0 * v_end / modes
        if previous is not None:
            err = np.abs(mult - previous) / np.abs(mult)
            if np.all(err <= rtol):
                break
        previous = mult
        points *= 2
    else:
        raise OracleError(
            f"disk oracle did not reach rtol={rtol:g} after {MAX_REFINEMENTS} refinements"
        )
    # normalise u(1) = 1 to report interface quantities
    u_a = np.exp(log_u_a - log_u_end)
    out = []
    for i, n in enumerate(modes):
        flux_in = gamma.alpha1 * u_a[i] * v_in[i] / gamma.a
        flux_out = gamma.alpha0 * u_a[i] * v_out[i] / gamma.a
        out.append(
            DiskModeSolution(
                n=int(n),
                multiplier=float(mult[i]),
                u_interface=float(u_a[i]),
                flux_inner=float(flux_in),
                flux_outer=float(flux_out),
                flux_boundary=float(gamma.alpha0 * v_end[i]),
                grid_points=points,
            )
        )
    return out


def oracle_disk_multiplier(n, gamma, grid_points=2000, rtol=1e-8):
    """Oracle value of ``C_n``: shoot the radial ODE, return ``gamma(1) u'(1) / (n u(1))``."""
    return oracle_disk_solutions([n], gamma, grid_points, rtol)[0].multiplier


def oracle_disk_spectrum(modes, gamma, grid_points=2000, rtol=1e-8):
    """Vector of oracle multipliers for ``modes``."""
    return np.array([s.multiplier for s in oracle_disk_solutions(modes, gamma, grid_points, rtol)])


def disk_fixed_grid_multiplier(n, gamma, grid_points):
    """Unrefined single-grid shot; exposes the raw discretisation error."""
    *_, v_end, _ = _shoot_disk(np.array([abs(n)]), gamma, grid_points)
    return float(gamma.alpha0 * v_end[0] / abs(n))


# --- cylinder ---------------------------------------------------------------


@dataclass(frozen=True)
class CylinderModeSolution:
    """Finite-difference solution of one axial mode."""

    z: np.ndarray
    u: np.ndarray
    multiplier: float
    flux_shallow: float
    flux_deep: float


def _cylinder_fd(lam, gamma, z_max, cells):
    """Second-order conservative scheme; returns (z, u, multiplier, interface fluxes)."""
    h = gamma.h
    k_top = 1.0 + gamma.alpha2
    k_deep = 1.0 + gamma.alpha1
    # put the interface on a node: split cells proportionally between the two layers
    top_cells = max(2, round(cells * h / z_max))
    dz = h / top_cells
    deep_cells = max(2, int(math.ceil((z_max - h) / dz)))
    n_cells = top_cells + deep_cells
    z = np.arange(n_cells + 1) * dz
    face_k = np.where(np.arange(n_cells) < top_cells, k_top, k_deep)  # face i+1/2
    node_k = np.empty(n_cells + 1)
    node_k[:] = np.where(np.arange(n_cells + 1) < top_cells, k_top, k_deep)
    node_k[top_cells] = 0.5 * (k_top + k_deep)  # control volume straddles the interface
    lam2dz2 = lam * lam * dz * dz
    # unknowns u_1 .. u_{n_cells-1}; u_0 = 1, u_N = 0
    m = n_cells - 1
    idx = np.arange(1, n_cells)
    k_left = face_k[idx - 1]
    k_right = face_k[idx]
    diag = k_left + k_right + lam2dz2 * node_k[idx]
    ab = np.zeros((3, m))
    ab[0, 1:] = -k_right[:-1]
    ab[1, :] = diag
    ab[2, :-1] = -k_left[1:]
    rhs = np.zeros(m)
    rhs[0] = k_left[0] * 1.0
    inner = solve_banded((1, 1), ab, rhs)
    u = np.concatenate([[1.0], inner, [0.0]])
    # half control volume at z = 0: k (u1 - u0)/dz - k u'(0) = dz/2 lam^2 k u0
    du0 = (u[1] - u[0]) / dz - 0.5 * dz * lam * lam * u[0]
    mult = k_top * (-du0) / lam
    j = top_cells
    # one-sided second-order derivatives on either side of the interface node
    du_minus = (3.0 * u[j] - 4.0 * u[j - 1] + u[j - 2]) / (2.0 * dz)
    du_plus = (-3.0 * u[j] + 4.0 * u[j + 1] - u[j + 2]) / (2.0 * dz)
    return z, u, mult, k_top * du_minus, k_deep * du_plus


def cylinder_fixed_grid_multiplier(n, gamma, zeros, z_max=None, grid_points=4000):
    """Unrefined single-grid finite-difference multiplier (raw second-order scheme)."""
    lam = zeros[n]
    if z_max is None:
        z_max = gamma.h + 40.0 / lam
    return _cylinder_fd(lam, gamma, z_max, grid_points)[2]


def oracle_cylinder_solution(n, gamma, zeros, z_max=None, grid_points=4000, rtol=1e-8):
    """Solve axial mode ``n`` by finite differences with grid refinement.

    Successive grids are combined by Richardson extrapolation (the raw scheme
    is second order); refinement stops once two extrapolated values agree to
    ``rtol``.
    """
    if grid_points < 1000:
        raise DomainError(f"grid_points must be >= 1000, got {grid_points}")
    lam = zeros[n]
    if z_max is None:
        z_max = gamma.h + 40.0 / lam
    if z_max < gamma.h + 20.0 / lam:
        suggestion = gamma.h + 40.0 / lam
        raise ConfigurationError(
            f"z_max={z_max:g} leaves a truncation error exp(-2 lam (z_max - h)) too large; "
            f"use z_max >= {suggestion:g}",
            suggestion=suggestion,
        )
    cells = grid_points
    coarse = _cylinder_fd(lam, gamma, z_max, cells)
    previous = None
    for _ in range(MAX_REFINEMENTS):
        cells *= 2
        fine = _cylinder_fd(lam, gamma, z_max, cells)
        extrapolated = (4.0 * fine[2] - coarse[2]) / 3.0
        if previous is not None and abs(extrapolated - previous) <= rtol * abs(extrapolated):
            z, u, _, fm, fp = fine
            return CylinderModeSolution(z, u, float(extrapolated), float(fm), float(fp))
        previous = extrapolated
        coarse = fine
    raise OracleError(
        f"cylinder oracle for mode {n} did not reach rtol={rtol:g} after refinement"
    )


def oracle_cylinder_multiplier(n, gamma, zeros, z_max=None, grid_points=4000, rtol=1e-8):
    """Oracle value of ``A_n = (1 + alpha2)(-u_n'(0)) / lambda_n``."""
    return oracle_cylinder_solution(n, gamma, zeros, z_max, grid_points, rtol).multiplier
