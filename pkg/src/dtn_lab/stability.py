"""Operator-norm gaps between DtN maps and empirical Lipschitz constants.

Both DtN maps are diagonal, so the norm of their difference between the trace
spaces is a supremum over modes:

* disk, ``H^(1/2) -> H^(-1/2)``: ``sup_n n / sqrt(1 + n^2) |C_n - C'_n|``;
* cylinder, radial traces: ``sup_n lambda_n / sqrt(1 + lambda_n^2) |A_n - A'_n|``.

The weights tend to one and the multipliers to ``alpha0`` (disk) or
``1 + alpha2`` (cylinder), so the ``n -> infinity`` limit of the per-mode
value is ``|alpha0 - beta0|`` or ``|alpha2 - beta2|``.  It is folded in as a
candidate for the supremum, reported with ``argmax_mode = 0``.

Sweeps draw pairs uniformly from the class box with a Philox generator seeded
by a single integer, so a seed fixes every pair independent of threading.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cylinder import CylinderClass, CylinderConductivity, cylinder_spectrum
from .disk import AdmissibleDiskClass, DiskConductivity, disk_spectrum, mixing_parameter
from .errors import ConfigurationError, DomainError
from .special import compute_zeros

DUPLICATE_DISTANCE = 1e-12
TAIL_FRACTION = 0.01
# residuals below this fraction of the multiplier are invisible in double precision
_NEGLIGIBLE = 1e-18
THREADS_ENV = "DTN_LAB_THREADS"


class TrivialClassWarning(UserWarning):
    """The conductivity class is a single point, so no distinct pairs exist."""


@dataclass(frozen=True)
class GapResult:
    """Norm of the difference of two DtN maps and its ratio to the parameter distance.

    ``argmax_mode`` is the mode attaining the supremum, or 0 when the
    ``n -> infinity`` limit does.  ``ratio`` is NaN for duplicate pairs.
    """

    gap_norm: float
    param_distance: float
    ratio: float
    argmax_mode: int
    tail_bound: float

    @property
    def duplicate(self):
        return self.param_distance < DUPLICATE_DISTANCE


@dataclass(frozen=True)
class PairRecord:
    pair_id: int
    params_a: tuple
    params_b: tuple
    result: GapResult


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of a sweep; ``min_ratio`` is the empirical Lipschitz constant."""

    class_params: object
    samples: int
    seed: int | None
    min_ratio: float
    ratios: dict
    pairs: list = field(default_factory=list)

    @property
    def duplicates(self):
        return [p.pair_id for p in self.pairs if p.result.duplicate]


def _ratio(gap, distance):
    return math.nan if distance < DUPLICATE_DISTANCE else gap / distance


def _disk_residual_bound(gamma, n):
    # |C_n - alpha0| <= 2 a^(2n) max(alpha0, alpha1 B_n), with B_n <= 1 + b / (1 - b)^(3/2)
    b = mixing_parameter(gamma)
    b_max = 1.0 + b / (1.0 - b) ** 1.5
    log_t = 2.0 * n * math.log(gamma.a)
    if log_t < -745.0:
        return 0.0
    return 2.0 * math.exp(log_t) * max(gamma.alpha0, gamma.alpha1 * b_max)


def _disk_resolved_modes(gamma, n_max):
    """Smallest count beyond which ``C_n`` equals ``alpha0`` to double precision."""
    scale = max(gamma.alpha0, gamma.alpha1) * (1.0 + 1.0 / (1.0 - mixing_parameter(gamma)) ** 1.5)
    need = math.log(_NEGLIGIBLE * gamma.alpha0 / (2.0 * scale)) / (2.0 * math.log(gamma.a))
    return int(min(n_max, max(8, math.ceil(need) + 1)))


def _disk_multipliers(gamma, n_max):
    k = _disk_resolved_modes(gamma, n_max)
    out = np.full(n_max, gamma.alpha0)
    out[:k] = disk_spectrum(gamma, k).multipliers
    return out


def _sup(weights, diff, limit):
    values = weights * np.abs(diff)
    j = int(np.argmax(values))
    if limit > values[j]:
        return float(limit), 0
    return float(values[j]), j + 1


def disk_gap(ga, gb, n_max=512):
    """Operator norm of ``Lambda_a - Lambda_b`` for two disk conductivities."""
    if not isinstance(ga, DiskConductivity) or not isinstance(gb, DiskConductivity):
        raise DomainError("disk_gap needs two DiskConductivity values")
    if int(n_max) != n_max or n_max < 1:
        raise DomainError(f"n_max must be a positive integer, got {n_max!r}")
    n_max = int(n_max)
    n = np.arange(1, n_max + 1, dtype=float)
    diff = _disk_multipliers(ga, n_max) - _disk_multipliers(gb, n_max)
    gap, mode = _sup(n / np.sqrt(1.0 + n * n), diff, abs(ga.alpha0 - gb.alpha0))
    tail = _disk_residual_bound(ga, n_max + 1) + _disk_residual_bound(gb, n_max + 1)
    if gap > 0.0 and tail > TAIL_FRACTION * gap:
        raise ConfigurationError(
            f"n_max={n_max} leaves a tail bound {tail:.3e} above 1% of the gap {gap:.3e}",
            suggestion=2 * n_max,
        )
    distance = float(sum(abs(x - y) for x, y in zip(ga.params, gb.params)))
    return GapResult(gap, distance, _ratio(gap, distance), mode, tail)


def _cylinder_residual_bound(gamma, lam):
    # |A_n - s| = 2 s |rho| e_n / |1 + rho e_n| <= 2 s |rho| e_n / (1 - |rho|)
    s = 1.0 + gamma.alpha2
    rho = abs(gamma.alpha2 - gamma.alpha1) / (2.0 + gamma.alpha1 + gamma.alpha2)
    log_e = -2.0 * lam * gamma.h
    if log_e < -745.0:
        return 0.0
    return 2.0 * s * rho * math.exp(log_e) / (1.0 - rho)


def cylinder_gap(ga, gb, zeros):
    """Operator norm of ``Lambda_a - Lambda_b`` on radial traces of the cylinder."""
    if not isinstance(ga, CylinderConductivity) or not isinstance(gb, CylinderConductivity):
        raise DomainError("cylinder_gap needs two CylinderConductivity values")
    if zeros.count < 8:
        raise DomainError(f"need at least 8 zeros, got {zeros.count}")
    N = zeros.count
    lam = np.asarray(zeros.zeros)
    diff = cylinder_spectrum(ga, N, zeros).multipliers - cylinder_spectrum(gb, N, zeros).multipliers
    gap, mode = _sup(lam / np.sqrt(1.0 + lam * lam), diff, abs(ga.alpha2 - gb.alpha2))
    # the next zero lies beyond lambda_N + pi/2
    lam_next = lam[-1] + 0.5 * math.pi
    tail = _cylinder_residual_bound(ga, lam_next) + _cylinder_residual_bound(gb, lam_next)
    if gap > 0.0 and tail > TAIL_FRACTION * gap:
        raise ConfigurationError(
            f"{N} zeros leave a tail bound {tail:.3e} above 1% of the gap {gap:.3e}",
            suggestion=2 * N,
        )
    distance = float(sum(abs(x - y) for x, y in zip(ga.params, gb.params)))
    return GapResult(gap, distance, _ratio(gap, distance), mode, tail)


def zeros_for_depth(h, minimum=8):
    """A zero table long enough that ``exp(-2 lambda_N h)`` is negligible."""
    count = int(math.ceil(-math.log(_NEGLIGIBLE) / (2.0 * h * math.pi))) + 2
    return compute_zeros(max(minimum, count))


def _as_class(cls):
    if isinstance(cls, (AdmissibleDiskClass, CylinderClass)):
        return cls
    if isinstance(cls, tuple) and len(cls) == 2:
        return CylinderClass(float(cls[0]), float(cls[1]))
    raise DomainError(f"unsupported conductivity class {cls!r}")


def _thread_count(threads):
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is not None:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
        else:
            threads = min(8, os.cpu_count() or 1)
    if threads < 1:
        raise ConfigurationError(f"thread count must be >= 1, got {threads}")
    return threads


def _summary(records):
    ratios = np.array([r.result.ratio for r in records if not r.result.duplicate])
    if ratios.size == 0:
        return math.nan, {"count": 0, "duplicates": len(records)}
    stats = {
        "count": int(ratios.size),
        "duplicates": len(records) - int(ratios.size),
        "min": float(ratios.min()),
        "median": float(np.median(ratios)),
        "max": float(ratios.max()),
    }
    return stats["min"], stats


def sweep_pairs(cls, pairs, n_max=512, zeros=None, threads=None, seed=None):
    """Evaluate explicit parameter pairs ``[(params_a, params_b), ...]`` from ``cls``."""
    cls = _as_class(cls)
    if isinstance(cls, CylinderClass):
        zeros = zeros if zeros is not None else zeros_for_depth(cls.h)

        def gap(pa, pb):
            return cylinder_gap(cls.make(pa), cls.make(pb), zeros)
    else:

        def gap(pa, pb):
            return disk_gap(cls.make(pa), cls.make(pb), n_max)

    pairs = [(tuple(map(float, pa)), tuple(map(float, pb))) for pa, pb in pairs]
    workers = _thread_count(threads)
    if workers == 1 or len(pairs) < 2:
        results = [gap(pa, pb) for pa, pb in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda p: gap(*p), pairs))
    records = [PairRecord(i, pa, pb, r) for i, ((pa, pb), r) in enumerate(zip(pairs, results))]
    min_ratio, stats = _summary(records)
    return StabilityReport(cls, len(records), seed, min_ratio, stats, records)


def sample_pairs(cls, samples, seed, vary=None):
    """Draw ``samples`` parameter pairs uniformly from the class box.

    With ``vary = i`` the second member copies the first except for
    parameter ``i``, which is redrawn (single-parameter slices).
    """
    cls = _as_class(cls)
    bounds = np.array(cls.bounds(), dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    k = lo.size
    rng = np.random.Generator(np.random.Philox(int(seed)))
    u = rng.random((int(samples), 2, k))
    pts = lo + (hi - lo) * u
    if vary is not None:
        if not 0 <= vary < k:
            raise DomainError(f"vary must index one of {k} parameters, got {vary!r}")
        mask = np.ones(k, dtype=bool)
        mask[vary] = False
        pts[:, 1, mask] = pts[:, 0, mask]
    return [(tuple(p[0]), tuple(p[1])) for p in pts]


def lipschitz_sweep(cls, samples, seed, vary=None, n_max=512, zeros=None, threads=None):
    """Sample ``samples`` pairs from ``cls`` and report the ratio statistics.

    ``cls`` is an :class:`AdmissibleDiskClass`, a :class:`CylinderClass` or an
    ``(h, M)`` tuple.  A single-point class triggers
    :class:`TrivialClassWarning` and yields an empty report.
    """
    cls = _as_class(cls)
    if int(samples) != samples or samples < 2:
        raise DomainError(f"samples must be an integer >= 2, got {samples!r}")
    if cls.is_degenerate():
        warnings.warn("conductivity class is a single point; nothing to sweep", TrivialClassWarning)
        return StabilityReport(cls, 0, seed, math.nan, {"count": 0, "duplicates": 0}, [])
    pairs = sample_pairs(cls, samples, seed, vary)
    return sweep_pairs(cls, pairs, n_max, zeros, threads, seed)


def _pair_in(cls, pair):
    return all(cls.contains(cls.make(p)) for p in pair)


def nested_sweeps(classes, samples, seed, n_max=512, threads=None):
    """Sweeps over a chain of nested classes sharing a common sample prefix.

    The pairs for ``classes[k]`` are those of ``classes[k-1]`` followed by
    ``samples`` fresh pairs drawn from ``classes[k]`` (seed ``seed + k``).
    Each class must contain every pair of its predecessor, so the minimum
    ratio can only fall along the chain.
    """
    classes = [_as_class(c) for c in classes]
    reports = []
    pairs = []
    for k, cls in enumerate(classes):
        if pairs and not all(_pair_in(cls, p) for p in pairs):
            raise DomainError(f"class {k} does not contain the pairs of class {k - 1}")
        pairs = pairs + sample_pairs(cls, samples, seed + k)
        reports.append(sweep_pairs(cls, pairs, n_max=n_max, threads=threads, seed=seed))
    return reports
